//! Subsolution geometry: the maximal-eigenvalue criterion, margins, the
//! functional `I`, the initial subsolution, and oscillatory blocks with
//! their scaling transforms and a verifier.
//!
//! In dimension `d` a candidate `(v, U)` is admissible when
//! `(d/2) λ_max[(v+h)⊗(v+h)/r + H − U] < e` wherever `r > ε`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::{Omega, SubsolutionData};
use crate::fields::{
    divergence_unchecked, gradient_unchecked, sample_scaled, solve_symmetric_div, tensor_divergence_unchecked, Grid,
    ScalarField, SymTensorField, VectorField,
};
use crate::korteweg::VACUUM_FLOOR;
use crate::scalar::{count, lit, to_f64, Real};
use crate::series::{derivative_vectors, trapezoid};
use crate::whitney::{AxisBox, BoxSet, Decomposition};

/// Largest eigenvalue of the leading `dim × dim` block of a symmetric matrix.
///
/// Closed forms: the quadratic formula for `dim ≤ 2`, the trigonometric
/// solution of the characteristic cubic of the deviatoric part for `dim = 3`.
pub fn lambda_max<T: Real>(a: &[[T; 3]; 3], dim: usize) -> T {
    let half = lit::<T>(0.5);
    match dim {
        0 => T::zero(),
        1 => a[0][0],
        2 => {
            let mid = half * (a[0][0] + a[1][1]);
            let dev = half * (a[0][0] - a[1][1]);
            mid + (dev * dev + a[0][1] * a[0][1]).sqrt()
        }
        _ => {
            let three = lit::<T>(3.0);
            let q = (a[0][0] + a[1][1] + a[2][2]) / three;
            let b = [
                [a[0][0] - q, a[0][1], a[0][2]],
                [a[0][1], a[1][1] - q, a[1][2]],
                [a[0][2], a[1][2], a[2][2] - q],
            ];
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let frob = b[0][0] * b[0][0] + b[1][1] * b[1][1] + b[2][2] * b[2][2] + off + off;
            let p = (frob / lit(6.0)).sqrt();
            if p < lit(1e-14) {
                return q;
            }
            let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[1][2]) - b[0][1] * (b[0][1] * b[2][2] - b[1][2] * b[0][2])
                + b[0][2] * (b[0][1] * b[1][2] - b[1][1] * b[0][2]);
            let r = (det / (lit::<T>(2.0) * p * p * p)).max(-T::one()).min(T::one());
            q + lit::<T>(2.0) * p * (r.acos() / three).cos()
        }
    }
}

fn check_series(s: &SubsolutionData<impl Real>, len: usize, what: &str) -> Result<()> {
    if len != s.times.len() {
        return Err(Error::SeriesMismatch(format!(
            "{what} has {len} samples for {} times",
            s.times.len()
        )));
    }
    Ok(())
}

/// A pair `(v, U)` on the time grid of the subsolution data.
#[derive(Clone, Debug)]
pub struct CandidateSubsolution<T: Real> {
    pub times: Vec<T>,
    pub v: Vec<VectorField<T>>,
    pub u: Vec<SymTensorField<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateReport {
    /// `max |div v| / (1 + max|v|)`.
    pub divergence_residual: f64,
    /// `max |∂_t v + div U| / (1 + max|∂_t v|)`.
    pub constraint_residual: f64,
    /// `max |v(0) − H[J₀]|`.
    pub initial_residual: f64,
    /// `sup |v+h|²/r` over points with `r > ε`.
    pub kinetic_bound: f64,
}

impl<T: Real> CandidateSubsolution<T> {
    /// Constraint residuals against the subsolution data.
    pub fn report(&self, s: &SubsolutionData<T>) -> Result<CandidateReport> {
        check_series(s, self.v.len(), "candidate")?;
        let dt = s.dt();
        let dv = derivative_vectors(&self.v, dt)?;
        let mut div_res = T::zero();
        let mut con_res = T::zero();
        for n in 0..self.v.len() {
            let div = divergence_unchecked(&self.v[n]).max_abs();
            div_res = div_res.max(div / (T::one() + self.v[n].max_abs()));
            let gap = dv[n].add(&tensor_divergence_unchecked(&self.u[n])).max_abs();
            con_res = con_res.max(gap / (T::one() + dv[n].max_abs()));
        }
        let initial = self.v[0].sub(&s.solenoidal[0]).max_abs();
        let floor = lit::<T>(VACUUM_FLOOR);
        let mut kinetic = T::zero();
        for n in 0..self.v.len() {
            let g = self.v[n].add(&s.h[n]).norm_squared();
            for (p, &r) in s.r[n].values().iter().enumerate() {
                if r > floor {
                    kinetic = kinetic.max(g.values()[p] / r);
                }
            }
        }
        Ok(CandidateReport {
            divergence_residual: to_f64(div_res),
            constraint_residual: to_f64(con_res),
            initial_residual: to_f64(initial),
            kinetic_bound: to_f64(kinetic),
        })
    }
}

/// Relative size of the mean of `∂_t v` accepted before `U` is solved for.
pub const MEAN_DRIFT_TOLERANCE: f64 = 1e-6;

/// `v = e^t H[J̃]` and `U` with `div U = −∂_t v` from the symmetric elliptic
/// system.
pub fn initial_subsolution<T: Real>(s: &SubsolutionData<T>) -> Result<CandidateSubsolution<T>> {
    let v: Vec<VectorField<T>> = s
        .solenoidal
        .iter()
        .zip(&s.times)
        .map(|(f, &t)| f.scale(t.exp()))
        .collect();
    let dv = derivative_vectors(&v, s.dt())?;
    let tol = lit::<T>(MEAN_DRIFT_TOLERANCE);
    let u = dv
        .par_iter()
        .map(|f| {
            let mean = f.mean();
            let size = T::one() + f.max_abs();
            if mean.iter().any(|m| m.abs() > tol * size) {
                return Err(Error::arg(
                    "∂_t v has a nonzero mean: the momentum mean does not decay like e^{-t}",
                ));
            }
            let mut centred = f.clone();
            for (a, &m) in mean.iter().enumerate() {
                for x in centred.component_mut(a) {
                    *x = *x - m;
                }
            }
            solve_symmetric_div(&centred)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSubsolution {
        times: s.times.clone(),
        v,
        u,
    })
}

/// Pointwise margins `e − (d/2)λ_max[(v+h)⊗(v+h)/r + H − U]`.
#[derive(Clone, Debug)]
pub struct Margin<T: Real> {
    pub values: Vec<ScalarField<T>>,
    /// Points with `r > ε` where the criterion is evaluated.
    pub evaluated: Vec<Vec<bool>>,
    pub min: T,
    /// `(time index, grid index)` of the minimum.
    pub argmin: (usize, usize),
    pub evaluated_points: usize,
    /// Evaluated points where `e ≤ 0`, which fail automatically.
    pub nonpositive_e: usize,
}

impl<T: Real> Margin<T> {
    pub fn admissible(&self) -> bool {
        self.evaluated_points > 0 && self.min > T::zero()
    }
}

fn criterion_matrix<T: Real>(
    g: [T; 3],
    r: T,
    h: &[[T; 3]; 3],
    u: &[[T; 3]; 3],
    d: usize,
) -> [[T; 3]; 3] {
    let mut a = [[T::zero(); 3]; 3];
    for i in 0..d {
        for k in 0..d {
            a[i][k] = g[i] * g[k] / r + h[i][k] - u[i][k];
        }
    }
    a
}

fn margin_series<T: Real>(
    s: &SubsolutionData<T>,
    v: &[VectorField<T>],
    u: &[SymTensorField<T>],
    region: Option<&(dyn Fn(usize, usize) -> bool + Sync)>,
) -> Margin<T> {
    let d = s.dim();
    let half_d = count::<T>(d) / lit(2.0);
    let floor = lit::<T>(VACUUM_FLOOR);
    let slices: Vec<(ScalarField<T>, Vec<bool>)> = (0..s.times.len())
        .into_par_iter()
        .map(|n| {
            let grid = s.r[n].grid();
            let g = v[n].add(&s.h[n]);
            let mut out = vec![T::zero(); grid.len()];
            let mut mask = vec![false; grid.len()];
            for p in 0..grid.len() {
                let r = s.r[n].values()[p];
                if r <= floor || region.is_some_and(|f| !f(n, p)) {
                    continue;
                }
                mask[p] = true;
                let a = criterion_matrix(g.at(p), r, &s.big_h[n].at(p), &u[n].at(p), d);
                out[p] = s.e[n].values()[p] - half_d * lambda_max(&a, d);
            }
            (ScalarField::from_raw(grid, out), mask)
        })
        .collect();
    let mut min = T::infinity();
    let mut argmin = (0, 0);
    let mut evaluated_points = 0;
    let mut nonpositive_e = 0;
    for (n, (f, mask)) in slices.iter().enumerate() {
        for (p, &m) in mask.iter().enumerate() {
            if !m {
                continue;
            }
            evaluated_points += 1;
            if s.e[n].values()[p] <= T::zero() {
                nonpositive_e += 1;
            }
            if f.values()[p] < min {
                min = f.values()[p];
                argmin = (n, p);
            }
        }
    }
    let (values, evaluated) = slices.into_iter().unzip();
    Margin {
        values,
        evaluated,
        min,
        argmin,
        evaluated_points,
        nonpositive_e,
    }
}

pub fn subsolution_margin<T: Real>(c: &CandidateSubsolution<T>, s: &SubsolutionData<T>) -> Result<Margin<T>> {
    check_series(s, c.v.len(), "candidate")?;
    Ok(margin_series(s, &c.v, &c.u, None))
}

/// `∫∫_{R₊} (½|v+h|²/r − e) dx dt`, trapezoidal in time.
pub fn i_functional<T: Real>(c: &CandidateSubsolution<T>, s: &SubsolutionData<T>) -> Result<T> {
    check_series(s, c.v.len(), "candidate")?;
    let floor = lit::<T>(VACUUM_FLOOR);
    let half = lit::<T>(0.5);
    let slices: Vec<T> = (0..s.times.len())
        .map(|n| {
            let g = c.v[n].add(&s.h[n]).norm_squared();
            let mut acc = T::zero();
            for (p, &r) in s.r[n].values().iter().enumerate() {
                if r > floor {
                    acc = acc + half * g.values()[p] / r - s.e[n].values()[p];
                }
            }
            acc * s.r[n].grid().cell_volume()
        })
        .collect();
    Ok(trapezoid(&slices, s.dt()))
}

/// `M` for `ω = e^{−2t}M`: the larger of `max(d·sup|Π| + sup ½|v+h|²/r, 1)`
/// and twice the smallest value that makes every margin of `c` positive.
pub fn default_omega<T: Real>(c: &CandidateSubsolution<T>, s: &SubsolutionData<T>) -> Result<Omega<T>> {
    check_series(s, c.v.len(), "candidate")?;
    let d = s.dim();
    let half_d = count::<T>(d) / lit(2.0);
    let floor = lit::<T>(VACUUM_FLOOR);
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let per_slice: Vec<(T, T, T)> = (0..s.times.len())
        .into_par_iter()
        .map(|n| {
            let growth = (two * s.times[n]).exp();
            let g = c.v[n].add(&s.h[n]);
            let (mut pi_sup, mut kin_sup, mut need) = (T::zero(), T::zero(), T::neg_infinity());
            for p in 0..g.grid().len() {
                let r = s.r[n].values()[p];
                if r <= floor {
                    continue;
                }
                let pi = s.pi[n].values()[p];
                let gp = g.at(p);
                let g2 = (0..d).fold(T::zero(), |acc, i| acc + gp[i] * gp[i]);
                let a = criterion_matrix(gp, r, &s.big_h[n].at(p), &c.u[n].at(p), d);
                pi_sup = pi_sup.max(pi.abs());
                kin_sup = kin_sup.max(half * g2 / r);
                need = need.max(growth * half_d * (pi + lambda_max(&a, d)));
            }
            (pi_sup, kin_sup, need)
        })
        .collect();
    let pi_sup = per_slice.iter().fold(T::zero(), |m, x| m.max(x.0));
    let kin_sup = per_slice.iter().fold(T::zero(), |m, x| m.max(x.1));
    let need = per_slice.iter().fold(T::zero(), |m, x| m.max(x.2));
    let m = (two * half_d * pi_sup + kin_sup).max(two * need).max(T::one());
    Ok(Omega::Exponential { m })
}

/// Reformulated data together with the initial subsolution, `ω` set by
/// [`default_omega`].
pub fn calibrated_initial_subsolution<T: Real>(
    mut s: SubsolutionData<T>,
) -> Result<(SubsolutionData<T>, CandidateSubsolution<T>)> {
    let c = initial_subsolution(&s)?;
    let omega = default_omega(&c, &s)?;
    s.set_omega(&omega)?;
    Ok((s, c))
}

/// A compactly supported pair `(w, V)` on a time grid with
/// `∂_t w + div V ≈ 0` and `div w = 0`; the space-time support box has the
/// time axis first.
#[derive(Clone, Debug)]
pub struct OscillatoryBlock<T: Real> {
    pub times: Vec<T>,
    pub w: Vec<VectorField<T>>,
    pub big_v: Vec<SymTensorField<T>>,
    pub support: AxisBox<T>,
    /// `max|∂_t w + div V| / max|∂_t w|` at construction.
    pub certificate: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockResiduals {
    pub divergence: f64,
    pub constraint: f64,
    /// `max |w|, |V|` at grid points outside the support box, relative to
    /// `max |w|, |V|`.
    pub leakage: f64,
}

fn vec_max<T: Real>(fields: &[VectorField<T>]) -> T {
    fields.iter().fold(T::zero(), |m, f| m.max(f.max_abs()))
}

impl<T: Real> OscillatoryBlock<T> {
    pub fn zero(grid: &Grid<T>, times: Vec<T>, support: AxisBox<T>) -> Self {
        let n = times.len();
        Self {
            times,
            w: vec![VectorField::zeros(grid); n],
            big_v: vec![SymTensorField::zeros(grid, true); n],
            support,
            certificate: T::zero(),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.w[0].grid()
    }

    fn constraint_gap(&self) -> Result<(T, T)> {
        let h = self.times[1] - self.times[0];
        let dw = derivative_vectors(&self.w, h)?;
        let mut gap = T::zero();
        for (d, v) in dw.iter().zip(&self.big_v) {
            gap = gap.max(d.add(&tensor_divergence_unchecked(v)).max_abs());
        }
        Ok((gap, vec_max(&dw)))
    }

    pub fn residuals(&self) -> Result<BlockResiduals> {
        let (gap, scale) = self.constraint_gap()?;
        let w_max = vec_max(&self.w);
        let v_max = self.big_v.iter().fold(T::zero(), |m, f| m.max(f.max_abs()));
        let div = self
            .w
            .iter()
            .fold(T::zero(), |m, f| m.max(divergence_unchecked(f).max_abs()));
        let grid = self.grid();
        let mut outside = T::zero();
        for (n, &t) in self.times.iter().enumerate() {
            for p in 0..grid.len() {
                let x = grid.point(p);
                let mut pt = vec![t];
                pt.extend_from_slice(&x[..grid.dim()]);
                if in_closed(&self.support, &pt) {
                    continue;
                }
                let a = self.w[n].at(p);
                let b = self.big_v[n].at(p);
                for i in 0..3 {
                    outside = outside.max(a[i].abs());
                    for k in 0..3 {
                        outside = outside.max(b[i][k].abs());
                    }
                }
            }
        }
        let size = w_max.max(v_max);
        let rel = |num: T, den: T| if den > T::zero() { to_f64(num / den) } else { 0.0 };
        Ok(BlockResiduals {
            divergence: to_f64(div / (T::one() + w_max)),
            constraint: rel(gap, scale),
            leakage: rel(outside, size),
        })
    }
}

fn in_closed<T: Real>(b: &AxisBox<T>, x: &[T]) -> bool {
    x.iter().zip(b.lo.iter().zip(&b.hi)).all(|(&v, (&l, &h))| l <= v && v <= h)
}

/// `exp(1 − 1/(1 − u²))` for `u = 2s − 1 ∈ (−1, 1)`, zero outside.
fn bump<T: Real>(s: T) -> T {
    let u = lit::<T>(2.0) * s - T::one();
    if u.abs() >= T::one() {
        T::zero()
    } else {
        (T::one() - T::one() / (T::one() - u * u)).exp()
    }
}

/// Smooth step from 0 at `s ≤ 0` to 1 at `s ≥ 1`.
fn smooth_step<T: Real>(s: T) -> T {
    let f = |x: T| if x > T::zero() { (-T::one() / x).exp() } else { T::zero() };
    let a = f(s);
    let b = f(T::one() - s);
    if a + b == T::zero() {
        T::zero()
    } else {
        a / (a + b)
    }
}

/// One on the middle three quarters of `[lo, hi]`, tapering to zero at the ends.
fn plateau<T: Real>(x: T, lo: T, hi: T) -> T {
    let m = (hi - lo) / lit(8.0);
    if x <= lo || x >= hi {
        T::zero()
    } else if x < lo + m {
        smooth_step((x - lo) / m)
    } else if x > hi - m {
        smooth_step((hi - x) / m)
    } else {
        T::one()
    }
}

/// Half-widths per standard deviation of the spatial envelope; the envelope
/// is below `e^{-18}` on the box faces.
const ENVELOPE_WIDTHS: f64 = 6.0;

/// Minimum cells per spatial axis of a test-block support box.
pub const MIN_BLOCK_CELLS: usize = 8;

/// Synthetic block: `w = χ(t)·curl(φ(x)·amplitude·sin(2πk·x/L))` with `φ` a
/// Gaussian envelope centred in the spatial box and cut off at its faces, and
/// `χ` a bump on its time interval; `V = ψ(x)·S[∂_t w]` with `S` the
/// symmetric-divergence solve and `ψ` a plateau over the box. The windowing
/// makes `∂_t w + div V = 0` approximate; its size is the block's
/// certificate. Localisation improves as `|k|` grows against the box.
pub fn make_test_block<T: Real>(
    grid: &Grid<T>,
    times: &[T],
    support: &AxisBox<T>,
    k: [i64; 3],
    amplitude: T,
) -> Result<OscillatoryBlock<T>> {
    let d = grid.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::arg("oscillatory blocks need two or three space dimensions"));
    }
    if support.dim() != d + 1 {
        return Err(Error::arg("block support must be a space-time box"));
    }
    if times.len() < 5 {
        return Err(Error::SeriesMismatch("blocks need at least 5 time samples".into()));
    }
    let period = grid.period();
    for a in 0..d {
        let (lo, hi) = (support.lo[a + 1], support.hi[a + 1]);
        if lo < T::zero() || hi > period {
            return Err(Error::arg("block support leaves the domain"));
        }
        if (hi - lo) / grid.spacing() < count(MIN_BLOCK_CELLS) {
            return Err(Error::arg(format!(
                "block support spans fewer than {MIN_BLOCK_CELLS} cells on axis {a}"
            )));
        }
    }
    let tau = lit::<T>(std::f64::consts::TAU) / period;
    let envelope = |x: T, a: usize| {
        let (lo, hi) = (support.lo[a + 1], support.hi[a + 1]);
        let half = (hi - lo) / lit(2.0);
        let z = (x - lo - half) * lit(ENVELOPE_WIDTHS) / half;
        if z.abs() >= lit(ENVELOPE_WIDTHS) {
            T::zero()
        } else {
            (-lit::<T>(0.5) * z * z).exp()
        }
    };
    let psi = ScalarField::from_fn(grid, |x| {
        let phase = tau * (0..d).fold(T::zero(), |acc, a| acc + lit::<T>(k[a] as f64) * x[a]);
        (0..d).fold(amplitude * phase.sin(), |acc, a| acc * envelope(x[a], a))
    });
    let grad = gradient_unchecked(&psi);
    let w0 = if d == 2 {
        VectorField::from_raw(
            grid,
            vec![grad.component(1).to_vec(), grad.component(0).iter().map(|&v| -v).collect()],
        )
    } else {
        // ∇ψ × a with a a fixed unit vector
        let dir = if k[0] == 0 && k[1] == 0 { [T::one(), T::zero(), T::zero()] } else { [T::zero(), T::zero(), T::one()] };
        let comp = |j: usize, l: usize| -> Vec<T> {
            grad.component(j)
                .iter()
                .zip(grad.component(l))
                .map(|(&gj, &gl)| gj * dir[l] - gl * dir[j])
                .collect()
        };
        VectorField::from_raw(grid, vec![comp(1, 2), comp(2, 0), comp(0, 1)])
    };
    let (t0, t1) = (support.lo[0], support.hi[0]);
    let w: Vec<VectorField<T>> = times.iter().map(|&t| w0.scale(bump((t - t0) / (t1 - t0)))).collect();
    let h = times[1] - times[0];
    let dw = derivative_vectors(&w, h)?;
    let window = ScalarField::from_fn(grid, |x| {
        (0..d).fold(T::one(), |acc, a| acc * plateau(x[a], support.lo[a + 1], support.hi[a + 1]))
    });
    let big_v = dw
        .par_iter()
        .map(|f| {
            let mut centred = f.clone();
            for (a, m) in f.mean().into_iter().enumerate() {
                for x in centred.component_mut(a) {
                    *x = *x - m;
                }
            }
            Ok(solve_symmetric_div(&centred)?.scale_by(&window))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut block = OscillatoryBlock {
        times: times.to_vec(),
        w,
        big_v,
        support: support.clone(),
        certificate: T::zero(),
    };
    let (gap, scale) = block.constraint_gap()?;
    block.certificate = if scale > T::zero() { gap / scale } else { T::zero() };
    Ok(block)
}

fn scaled_field<T: Real>(f: &ScalarField<T>, inv_l: T) -> ScalarField<T> {
    let grid = f.grid().clone();
    let d = grid.dim();
    let period = grid.period();
    let mut out = sample_scaled(f, inv_l);
    for (p, v) in out.values_mut().iter_mut().enumerate() {
        let x = grid.point(p);
        if (0..d).any(|a| x[a] * inv_l >= period) {
            *v = T::zero();
        }
    }
    out
}

/// `w ↦ w(t/L, x/L)`, `V ↦ V(t/L, x/L)` about the origin of the periodic
/// cell, then `w ↦ √r·w(t/√r, x)`, `V ↦ V(t/√r, x)`. Times are relabelled;
/// the residuals are re-measured rather than assumed.
pub fn scale_block<T: Real>(b: &OscillatoryBlock<T>, l: T, r: T) -> Result<OscillatoryBlock<T>> {
    if !(l > T::zero()) || !(r > T::zero()) || !l.is_finite() || !r.is_finite() {
        return Err(Error::arg("scaling factors must be positive"));
    }
    let grid = b.grid().clone();
    let d = grid.dim();
    let root = r.sqrt();
    let mut support = b.support.clone();
    support.lo[0] = support.lo[0] * l * root;
    support.hi[0] = support.hi[0] * l * root;
    for a in 1..=d {
        support.lo[a] = support.lo[a] * l;
        support.hi[a] = support.hi[a] * l;
        if support.hi[a] > grid.period() {
            return Err(Error::arg("scaled support leaves the domain"));
        }
    }
    let inv_l = T::one() / l;
    let identity = l == T::one();
    let w: Vec<VectorField<T>> = b
        .w
        .par_iter()
        .map(|f| {
            let comps = (0..d)
                .map(|a| {
                    let c = if identity { f.component_field(a) } else { scaled_field(&f.component_field(a), inv_l) };
                    c.scale(root).into_values()
                })
                .collect();
            VectorField::from_raw(&grid, comps)
        })
        .collect();
    let big_v: Vec<SymTensorField<T>> = b
        .big_v
        .par_iter()
        .map(|f| {
            if identity {
                return f.clone();
            }
            let comps = f
                .components()
                .iter()
                .map(|c| scaled_field(&ScalarField::from_raw(&grid, c.clone()), inv_l).into_values())
                .collect();
            SymTensorField::from_raw(&grid, comps, f.is_traceless())
        })
        .collect();
    let mut out = OscillatoryBlock {
        times: b.times.iter().map(|&t| t * l * root).collect(),
        w,
        big_v,
        support,
        certificate: T::zero(),
    };
    let (gap, scale) = out.constraint_gap()?;
    out.certificate = if scale > T::zero() { gap / scale } else { T::zero() };
    Ok(out)
}

/// Space-time membership test used to restrict integrals and margins.
pub trait Region<T: Real>: Sync {
    fn contains_point(&self, x: &[T]) -> bool;
}

impl<T: Real> Region<T> for BoxSet<T> {
    fn contains_point(&self, x: &[T]) -> bool {
        self.contains(x)
    }
}

/// One emitted cube of a decomposition, with lattice membership.
pub struct CubeRegion<'a, T: Real> {
    pub decomposition: &'a Decomposition<T>,
    pub cube: usize,
}

impl<T: Real> Region<T> for CubeRegion<'_, T> {
    fn contains_point(&self, x: &[T]) -> bool {
        self.decomposition.locate_index(x) == Some(self.cube)
    }
}

fn space_time_point<T: Real>(grid: &Grid<T>, t: T, p: usize) -> Vec<T> {
    let x = grid.point(p);
    let mut pt = Vec::with_capacity(grid.dim() + 1);
    pt.push(t);
    pt.extend_from_slice(&x[..grid.dim()]);
    pt
}

/// `(∫∫|w|²/r, ∫∫(e − ½|v+h|²/r)²)` over grid points of `region` with
/// `r > ε`, trapezoidal in time.
pub fn energy_integrals<T: Real>(
    b: &OscillatoryBlock<T>,
    c: &CandidateSubsolution<T>,
    s: &SubsolutionData<T>,
    region: &dyn Region<T>,
) -> (T, T) {
    let floor = lit::<T>(VACUUM_FLOOR);
    let half = lit::<T>(0.5);
    let grid = s.r[0].grid();
    let cell = grid.cell_volume();
    let (gain, deficit): (Vec<T>, Vec<T>) = (0..s.times.len())
        .into_par_iter()
        .map(|n| {
            let w2 = b.w[n].norm_squared();
            let g2 = c.v[n].add(&s.h[n]).norm_squared();
            let (mut a, mut q) = (T::zero(), T::zero());
            for p in 0..grid.len() {
                let r = s.r[n].values()[p];
                if r <= floor || !region.contains_point(&space_time_point(grid, s.times[n], p)) {
                    continue;
                }
                a = a + w2.values()[p] / r;
                let e = s.e[n].values()[p] - half * g2.values()[p] / r;
                q = q + e * e;
            }
            (a * cell, q * cell)
        })
        .unzip();
    (trapezoid(&gain, s.dt()), trapezoid(&deficit, s.dt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockVerdict {
    pub support_contained: bool,
    pub residuals: BlockResiduals,
    pub certificate: f64,
    pub constraints_hold: bool,
    pub min_margin: f64,
    pub admissible: bool,
    /// Evaluated points with `e ≤ 0`, reported apart from the margin.
    pub nonpositive_e: usize,
    pub gain: f64,
    pub deficit: f64,
    /// `gain / deficit`; no constant is asserted.
    pub energy_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceReport {
    pub blocks: Vec<BlockVerdict>,
    pub all_pass: bool,
}

/// Largest leakage outside the declared support accepted by the verifier.
pub const LEAKAGE_TOLERANCE: f64 = 1e-6;
/// `div w` tolerance, relative to `1 + max|w|`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

/// Checks support containment, both linear constraints (against each
/// block's own certificate), admissibility of `(v + w, U + V)` on `U_open`,
/// and reports the energy-gain ratio.
pub fn verify_oscillatory_sequence<T: Real>(
    blocks: &[OscillatoryBlock<T>],
    c: &CandidateSubsolution<T>,
    s: &SubsolutionData<T>,
    u_open: &BoxSet<T>,
) -> Result<SequenceReport> {
    check_series(s, c.v.len(), "candidate")?;
    let grid = s.r[0].grid().clone();
    if u_open.dim() != grid.dim() + 1 {
        return Err(Error::arg("the open set must be space-time"));
    }
    let mut verdicts = Vec::with_capacity(blocks.len());
    for b in blocks {
        check_series(s, b.w.len(), "block")?;
        if !b.grid().same_as(&grid) {
            return Err(Error::GridMismatch);
        }
        let tol = lit::<T>(1e-12);
        if b.times.iter().zip(&s.times).any(|(&x, &y)| (x - y).abs() > tol * (T::one() + y.abs())) {
            return Err(Error::SeriesMismatch("block and subsolution times differ".into()));
        }
        let residuals = b.residuals()?;
        let contained = u_open.contains_open_box(&b.support.lo, &b.support.hi) && residuals.leakage <= LEAKAGE_TOLERANCE;
        let certificate = to_f64(b.certificate);
        let constraints_hold = residuals.divergence <= DIVERGENCE_TOLERANCE
            && residuals.constraint <= certificate * (1.0 + 1e-9) + 1e-14;
        let v: Vec<VectorField<T>> = c.v.iter().zip(&b.w).map(|(x, y)| x.add(y)).collect();
        let u: Vec<SymTensorField<T>> = c.u.iter().zip(&b.big_v).map(|(x, y)| x.add(y)).collect();
        let inside = |n: usize, p: usize| u_open.contains(&space_time_point(&grid, s.times[n], p));
        let margin = margin_series(s, &v, &u, Some(&inside));
        let (gain, deficit) = energy_integrals(b, c, s, u_open);
        let admissible = margin.evaluated_points == 0 || margin.min > T::zero();
        verdicts.push(BlockVerdict {
            support_contained: contained,
            residuals,
            certificate,
            constraints_hold,
            min_margin: if margin.evaluated_points == 0 { f64::INFINITY } else { to_f64(margin.min) },
            admissible,
            nonpositive_e: margin.nonpositive_e,
            gain: to_f64(gain),
            deficit: to_f64(deficit),
            energy_ratio: if deficit > T::zero() { to_f64(gain / deficit) } else { 0.0 },
        });
    }
    let all_pass = verdicts.iter().all(|v| v.support_contained && v.constraints_hold && v.admissible);
    Ok(SequenceReport {
        blocks: verdicts,
        all_pass,
    })
}
