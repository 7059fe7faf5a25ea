use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{count, Real};

/// Uniform collocation grid on the periodic box `[0, period)^dim`.
///
/// The grid carries its FFT plans, so cloning is cheap and every field keeps
/// a handle to the grid it was sampled on. Flat indices are row-major with
/// axis 0 varying slowest.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

struct GridInner<T: Real> {
    dim: usize,
    n: usize,
    period: T,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Angular wavenumber per index along one axis, Nyquist included.
    wavenumber: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, period: T) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {n}"
            )));
        }
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = T::TAU() / period;
        let wavenumber = (0..n)
            .map(|i| base * T::from_i64(signed_mode(i, n)).unwrap())
            .collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                period,
                forward,
                inverse,
                wavenumber,
            }),
        })
    }

    /// Unit-period grid.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, T::one())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn period(&self) -> T {
        self.inner.period
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.inner.period / count(self.inner.n)
    }

    /// Total number of grid points, `n^dim`.
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single grid point.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.inner.dim as i32)
    }

    /// Measure of the periodic box.
    #[inline]
    pub fn volume(&self) -> T {
        self.inner.period.powi(self.inner.dim as i32)
    }

    /// Per-axis lattice indices of a flat index; unused axes are zero.
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.inner.n;
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.inner.dim).rev() {
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let n = self.inner.n;
        (0..self.inner.dim).fold(0, |acc, a| acc * n + idx[a])
    }

    /// Physical coordinates of a grid point; unused axes are zero.
    pub fn point(&self, flat: usize) -> [T; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut x = [T::zero(); 3];
        for a in 0..self.inner.dim {
            x[a] = h * count(idx[a]);
        }
        x
    }

    /// Coordinates of the sample points along one axis.
    pub fn axis_points(&self) -> Vec<T> {
        let h = self.spacing();
        (0..self.inner.n).map(|i| h * count(i)).collect()
    }

    /// Signed Fourier mode index of position `i` along an axis.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        signed_mode(i, self.inner.n)
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.inner.n / 2
    }

    /// Angular wavenumber along an axis, Nyquist included (for even derivatives).
    #[inline]
    pub fn wavenumber(&self, i: usize) -> T {
        self.inner.wavenumber[i]
    }

    /// Angular wavenumber with the Nyquist entry zeroed (for odd derivatives).
    #[inline]
    pub fn odd_wavenumber(&self, i: usize) -> T {
        if self.is_nyquist(i) {
            T::zero()
        } else {
            self.inner.wavenumber[i]
        }
    }

    /// In-place N-dimensional FFT, unnormalized in both directions.
    pub(crate) fn fft(&self, data: &mut [Complex<T>], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.inner.n;
        let dim = self.inner.dim;
        let plan = if inverse {
            &self.inner.inverse
        } else {
            &self.inner.forward
        };
        if dim == 1 {
            plan.process(data);
            return;
        }
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch =
            vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                let block = o * n * stride;
                for i in 0..stride {
                    let base = block + i;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    /// True when both grids describe the same sampling.
    pub fn same_as(&self, other: &Grid<T>) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.period == other.inner.period)
    }

    /// A grid with the same dimension and period but `n` points per axis.
    pub fn with_points(&self, n: usize) -> Result<Self> {
        Self::new(self.inner.dim, n, self.inner.period)
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("period", &self.inner.period)
            .finish()
    }
}

#[inline]
fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
