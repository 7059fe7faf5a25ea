//! Fourier-mode differential calculus on the periodic grid.
//!
//! Odd derivatives drop the Nyquist mode; the Laplacian keeps it with the
//! full `|k|²`. Band-limited fields without Nyquist content are
//! differentiated exactly.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fields::field::{ScalarField, SymTensorField, VectorField};
use crate::fields::grid::Grid;
use crate::scalar::{count, Real};

pub(crate) type Spectrum<T> = Vec<Complex<T>>;

pub(crate) fn forward<T: Real>(grid: &Grid<T>, values: &[T]) -> Spectrum<T> {
    let mut data: Spectrum<T> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    grid.fft(&mut data, false);
    data
}

/// Inverse transform keeping the real part, normalised by `n^dim`.
pub(crate) fn inverse<T: Real>(grid: &Grid<T>, mut data: Spectrum<T>) -> Vec<T> {
    grid.fft(&mut data, true);
    let norm = T::one() / count(grid.len());
    data.into_iter().map(|c| c.re * norm).collect()
}

/// `i·k_axis · spec` with the Nyquist line zeroed.
pub(crate) fn apply_derivative<T: Real>(grid: &Grid<T>, spec: &[Complex<T>], axis: usize) -> Spectrum<T> {
    let mut out = Vec::with_capacity(spec.len());
    for (p, &c) in spec.iter().enumerate() {
        let k = grid.odd_wavenumber(grid.multi_index(p)[axis]);
        out.push(Complex::new(-k * c.im, k * c.re));
    }
    out
}

/// Squared wavenumber magnitude at a flat spectral index, Nyquist included.
#[inline]
pub(crate) fn k_squared<T: Real>(grid: &Grid<T>, p: usize) -> T {
    let idx = grid.multi_index(p);
    (0..grid.dim()).fold(T::zero(), |acc, a| {
        let k = grid.wavenumber(idx[a]);
        acc + k * k
    })
}

/// Odd-derivative wavevector at a flat spectral index.
#[inline]
pub(crate) fn odd_k<T: Real>(grid: &Grid<T>, p: usize) -> [T; 3] {
    let idx = grid.multi_index(p);
    let mut k = [T::zero(); 3];
    for a in 0..grid.dim() {
        k[a] = grid.odd_wavenumber(idx[a]);
    }
    k
}

pub fn partial<T: Real>(f: &ScalarField<T>, axis: usize) -> Result<ScalarField<T>> {
    f.validate()?;
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::arg(format!("axis {axis} out of range for dim {}", grid.dim())));
    }
    let spec = forward(grid, f.values());
    Ok(ScalarField::from_raw(grid, inverse(grid, apply_derivative(grid, &spec, axis))))
}

pub fn gradient<T: Real>(f: &ScalarField<T>) -> Result<VectorField<T>> {
    f.validate()?;
    Ok(gradient_unchecked(f))
}

pub(crate) fn gradient_unchecked<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let grid = f.grid();
    let spec = forward(grid, f.values());
    gradient_from_spectrum(grid, &spec)
}

pub(crate) fn gradient_from_spectrum<T: Real>(grid: &Grid<T>, spec: &[Complex<T>]) -> VectorField<T> {
    let comps = (0..grid.dim())
        .map(|a| inverse(grid, apply_derivative(grid, spec, a)))
        .collect();
    VectorField::from_raw(grid, comps)
}

pub fn divergence<T: Real>(v: &VectorField<T>) -> Result<ScalarField<T>> {
    v.validate()?;
    Ok(divergence_unchecked(v))
}

pub(crate) fn divergence_unchecked<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let grid = v.grid();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for a in 0..grid.dim() {
        let spec = forward(grid, v.component(a));
        for (o, d) in acc.iter_mut().zip(apply_derivative(grid, &spec, a)) {
            *o = *o + d;
        }
    }
    ScalarField::from_raw(grid, inverse(grid, acc))
}

pub fn laplacian<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    f.validate()?;
    Ok(laplacian_unchecked(f))
}

pub(crate) fn laplacian_unchecked<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let mut spec = forward(grid, f.values());
    for (p, c) in spec.iter_mut().enumerate() {
        *c = *c * (-k_squared(grid, p));
    }
    ScalarField::from_raw(grid, inverse(grid, spec))
}

/// Row-wise divergence, `(div T)_i = Σ_j ∂_j T_ij`.
pub fn tensor_divergence<T: Real>(t: &SymTensorField<T>) -> Result<VectorField<T>> {
    t.validate()?;
    Ok(tensor_divergence_unchecked(t))
}

pub(crate) fn tensor_divergence_unchecked<T: Real>(t: &SymTensorField<T>) -> VectorField<T> {
    let grid = t.grid();
    let d = grid.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let mut acc = vec![vec![zero; grid.len()]; d];
    for i in 0..d {
        for j in i..d {
            let spec = forward(grid, t.entry(i, j));
            let dj = apply_derivative(grid, &spec, j);
            for (o, v) in acc[i].iter_mut().zip(&dj) {
                *o = *o + *v;
            }
            if i != j {
                let di = apply_derivative(grid, &spec, i);
                for (o, v) in acc[j].iter_mut().zip(&di) {
                    *o = *o + *v;
                }
            }
        }
    }
    VectorField::from_raw(grid, acc.into_iter().map(|s| inverse(grid, s)).collect())
}

/// True when the mode at flat index `p` survives the 2/3 rule.
#[inline]
pub(crate) fn kept_by_two_thirds<T: Real>(grid: &Grid<T>, p: usize) -> bool {
    let n = grid.n() as i64;
    let idx = grid.multi_index(p);
    (0..grid.dim()).all(|a| 3 * grid.mode(idx[a]).abs() < n)
}

/// Zeroes every mode with `|m| ≥ n/3` along some axis.
pub fn dealias<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let mut spec = forward(grid, f.values());
    truncate_two_thirds(grid, &mut spec);
    ScalarField::from_raw(grid, inverse(grid, spec))
}

pub fn dealias_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let grid = v.grid();
    let comps = (0..grid.dim())
        .map(|a| {
            let mut spec = forward(grid, v.component(a));
            truncate_two_thirds(grid, &mut spec);
            inverse(grid, spec)
        })
        .collect();
    VectorField::from_raw(grid, comps)
}

pub(crate) fn truncate_two_thirds<T: Real>(grid: &Grid<T>, spec: &mut [Complex<T>]) {
    for (p, c) in spec.iter_mut().enumerate() {
        if !kept_by_two_thirds(grid, p) {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
}

/// Spectral resampling onto another grid of the same dimension and period:
/// modes common to both grids are kept, the rest truncated or zero-padded.
/// Nyquist modes of either grid are dropped.
pub fn resample<T: Real>(f: &ScalarField<T>, target: &Grid<T>) -> Result<ScalarField<T>> {
    let src = f.grid();
    if src.dim() != target.dim() || src.period() != target.period() {
        return Err(Error::GridMismatch);
    }
    if src.same_as(target) {
        return Ok(f.clone());
    }
    let spec = forward(src, f.values());
    let limit = (src.n().min(target.n()) / 2) as i64;
    let mut out = vec![Complex::new(T::zero(), T::zero()); target.len()];
    let scale = count::<T>(target.len()) / count::<T>(src.len());
    let dim = src.dim();
    for (p, &c) in spec.iter().enumerate() {
        let idx = src.multi_index(p);
        let mut tidx = [0usize; 3];
        let mut keep = true;
        for a in 0..dim {
            let m = src.mode(idx[a]);
            if m.abs() >= limit {
                keep = false;
                break;
            }
            tidx[a] = if m >= 0 {
                m as usize
            } else {
                (target.n() as i64 + m) as usize
            };
        }
        if keep {
            out[target.flat_index(tidx)] = c * scale;
        }
    }
    Ok(ScalarField::from_raw(target, inverse(target, out)))
}

pub fn resample_vector<T: Real>(v: &VectorField<T>, target: &Grid<T>) -> Result<VectorField<T>> {
    let comps = (0..v.dim())
        .map(|a| resample(&v.component_field(a), target).map(|f| f.into_values()))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField::from_raw(target, comps))
}

/// Evaluates the trigonometric interpolant of `f` at arbitrary points,
/// one axis at a time.
pub fn interpolate_at<T: Real>(f: &ScalarField<T>, points: &[[T; 3]]) -> Vec<T> {
    let grid = f.grid();
    let spec = forward(grid, f.values());
    let n = grid.n();
    let d = grid.dim();
    let norm = T::one() / count(grid.len());
    points
        .iter()
        .map(|x| {
            // phase factors per axis, Nyquist excluded
            let phases: Vec<Vec<Complex<T>>> = (0..d)
                .map(|a| {
                    (0..n)
                        .map(|i| {
                            if grid.is_nyquist(i) {
                                Complex::new(T::zero(), T::zero())
                            } else {
                                let arg = grid.wavenumber(i) * x[a];
                                Complex::new(arg.cos(), arg.sin())
                            }
                        })
                        .collect()
                })
                .collect();
            let mut acc = Complex::new(T::zero(), T::zero());
            for (p, &c) in spec.iter().enumerate() {
                let idx = grid.multi_index(p);
                let mut w = c;
                for a in 0..d {
                    w = w * phases[a][idx[a]];
                }
                acc = acc + w;
            }
            acc.re * norm
        })
        .collect()
}

/// Samples `x ↦ f(s·x)` on the grid of `f` from its trigonometric interpolant,
/// applying the mode-to-point map one axis at a time.
pub fn sample_scaled<T: Real>(f: &ScalarField<T>, s: T) -> ScalarField<T> {
    let grid = f.grid();
    let n = grid.n();
    let d = grid.dim();
    let mut data = forward(grid, f.values());
    let xs = grid.axis_points();
    let zero = Complex::new(T::zero(), T::zero());
    let matrix: Vec<Vec<Complex<T>>> = xs
        .iter()
        .map(|&x| {
            (0..n)
                .map(|m| {
                    if grid.is_nyquist(m) {
                        zero
                    } else {
                        let arg = grid.wavenumber(m) * s * x;
                        Complex::new(arg.cos(), arg.sin())
                    }
                })
                .collect()
        })
        .collect();
    let mut line = vec![zero; n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (m, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + m * stride];
                }
                for (j, row) in matrix.iter().enumerate() {
                    let mut acc = zero;
                    for (c, w) in line.iter().zip(row) {
                        acc = acc + *c * *w;
                    }
                    data[base + j * stride] = acc;
                }
            }
        }
    }
    let norm = T::one() / count(grid.len());
    ScalarField::from_raw(grid, data.into_iter().map(|c| c.re * norm).collect())
}
