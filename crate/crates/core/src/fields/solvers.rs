//! Elliptic solves on the torus: Helmholtz projection, the zero-mean
//! Poisson problem and the symmetric-gradient system whose traceless
//! stress has a prescribed divergence.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fields::field::{sym_index, ScalarField, SymTensorField, VectorField};
use crate::fields::grid::Grid;
use crate::fields::spectral::{forward, inverse, k_squared, odd_k};
use crate::scalar::{count, lit, to_f64, Real};

/// Solenoidal part and gradient potential of a vector field.
#[derive(Clone, Debug)]
pub struct Helmholtz<T: Real> {
    pub solenoidal: VectorField<T>,
    pub potential: ScalarField<T>,
}

/// Splits `j = solenoidal + ∇potential` with `div solenoidal = 0`.
///
/// The constant mode stays in the solenoidal part, so both fields have the
/// same mean, and the potential has zero mean.
pub fn helmholtz_project<T: Real>(j: &VectorField<T>) -> Result<Helmholtz<T>> {
    j.validate()?;
    let grid = j.grid();
    let d = grid.dim();
    let specs: Vec<_> = (0..d).map(|a| forward(grid, j.component(a))).collect();
    let zero = Complex::new(T::zero(), T::zero());
    let mut sol = vec![vec![zero; grid.len()]; d];
    let mut pot = vec![zero; grid.len()];
    for p in 0..grid.len() {
        let k = odd_k(grid, p);
        let k2 = (0..d).fold(T::zero(), |acc, a| acc + k[a] * k[a]);
        if k2 == T::zero() {
            for a in 0..d {
                sol[a][p] = specs[a][p];
            }
            continue;
        }
        let kdotj = (0..d).fold(zero, |acc, a| acc + specs[a][p] * k[a]);
        for a in 0..d {
            sol[a][p] = specs[a][p] - kdotj * (k[a] / k2);
        }
        // ∇M = i k M̂ must equal k (k·ĵ)/|k|², so M̂ = -i (k·ĵ)/|k|²
        let q = kdotj / k2;
        pot[p] = Complex::new(q.im, -q.re);
    }
    Ok(Helmholtz {
        solenoidal: VectorField::from_raw(grid, sol.into_iter().map(|s| inverse(grid, s)).collect()),
        potential: ScalarField::from_raw(grid, inverse(grid, pot)),
    })
}

fn mean_tolerance<T: Real>(values: &[T]) -> T {
    let scale = values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    lit::<T>(1e-12).max(T::epsilon() * lit(64.0)) * (T::one() + scale)
}

/// Zero-mean solution of `Δu = rhs`; `rhs` must have zero mean.
pub fn solve_poisson<T: Real>(rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    rhs.validate()?;
    let mean = rhs.mean();
    if mean.abs() > mean_tolerance(rhs.values()) {
        return Err(Error::NonZeroMean {
            what: "poisson right-hand side",
            mean: to_f64(mean),
        });
    }
    Ok(inverse_laplacian(rhs))
}

/// `Δ⁻¹` on the zero-mean subspace; the constant mode of the input is ignored.
pub fn inverse_laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let mut spec = forward(grid, f.values());
    for (p, c) in spec.iter_mut().enumerate() {
        let k2 = k_squared(grid, p);
        *c = if k2 == T::zero() {
            Complex::new(T::zero(), T::zero())
        } else {
            *c / (-k2)
        };
    }
    ScalarField::from_raw(grid, inverse(grid, spec))
}

/// Solves `div(∇w + ∇ᵀw − (2/d)(div w) I) = −f` and returns the traceless
/// symmetric tensor `∇w + ∇ᵀw − (2/d)(div w) I`, whose divergence is `−f`.
///
/// In one dimension the only traceless tensor is zero, so `f` itself must
/// vanish.
pub fn solve_symmetric_div<T: Real>(f: &VectorField<T>) -> Result<SymTensorField<T>> {
    f.validate()?;
    let grid = f.grid();
    let d = grid.dim();
    for (a, m) in f.mean().into_iter().enumerate() {
        if m.abs() > mean_tolerance(f.component(a)) {
            return Err(Error::NonZeroMean {
                what: "symmetric-divergence right-hand side",
                mean: to_f64(m),
            });
        }
    }
    if d == 1 {
        if f.max_abs() > mean_tolerance(f.component(0)) {
            return Err(Error::arg(
                "one-dimensional traceless tensors vanish; right-hand side must be zero",
            ));
        }
        return Ok(SymTensorField::zeros(grid, true));
    }
    let specs: Vec<_> = (0..d).map(|a| forward(grid, f.component(a))).collect();
    let w = symmetric_div_potential(grid, &specs);
    let two_over_d = lit::<T>(2.0) / count(d);
    let zero = Complex::new(T::zero(), T::zero());
    let mut comps = vec![vec![zero; grid.len()]; SymTensorField::<T>::storage_len(d)];
    for p in 0..grid.len() {
        let k = odd_k(grid, p);
        let iku = |a: usize, b: usize| {
            // i k_a ŵ_b
            let c = w[b][p];
            Complex::new(-k[a] * c.im, k[a] * c.re)
        };
        let div = (0..d).fold(zero, |acc, a| acc + iku(a, a));
        for i in 0..d {
            for j in i..d {
                let mut v = iku(i, j) + iku(j, i);
                if i == j {
                    v = v - div * two_over_d;
                }
                comps[sym_index(d, i, j)][p] = v;
            }
        }
    }
    let comps = comps.into_iter().map(|s| inverse(grid, s)).collect();
    let mut t = SymTensorField::from_raw(grid, comps, false);
    // the trace vanishes in exact arithmetic; remove the round-off residue
    t = t.deviatoric();
    Ok(t)
}

/// Fourier solution `ŵ` of `|k|² ŵ + (1 − 2/d) k (k·ŵ) = f̂`.
fn symmetric_div_potential<T: Real>(grid: &Grid<T>, specs: &[Vec<Complex<T>>]) -> Vec<Vec<Complex<T>>> {
    let d = grid.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let parallel_gain = lit::<T>(2.0) - lit::<T>(2.0) / count(d);
    let mut w = vec![vec![zero; grid.len()]; d];
    for p in 0..grid.len() {
        let k = odd_k(grid, p);
        let k2 = (0..d).fold(T::zero(), |acc, a| acc + k[a] * k[a]);
        if k2 == T::zero() {
            continue;
        }
        let kdotf = (0..d).fold(zero, |acc, a| acc + specs[a][p] * k[a]);
        for a in 0..d {
            let par = kdotf * (k[a] / k2);
            let perp = specs[a][p] - par;
            w[a][p] = perp / k2 + par / (k2 * parallel_gain);
        }
    }
    w
}
