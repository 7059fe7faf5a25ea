//! Initial-data recipes: named analytic profiles and seeded random
//! band-limited fields.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::scalar::{lit, to_f64, Real};

/// Zero-mean trigonometric polynomial with modes `|mₐ| ≤ modes` on the
/// active axes, coefficients damped like `1/(1 + |m|²)` and divided by
/// their absolute sum, so `|f| ≤ 1` and the field does not depend on the
/// grid it is sampled on.
pub fn random_band_limited<T: Real>(grid: &Grid<T>, modes: usize, rng: &mut ChaCha8Rng) -> ScalarField<T> {
    let d = grid.dim();
    let k = modes as i64;
    let mut terms: Vec<([f64; 3], f64, f64)> = Vec::new();
    let mut m = [0i64; 3];
    let span = (2 * k + 1).pow(d as u32);
    for code in 0..span {
        let mut c = code;
        for slot in m.iter_mut().take(d) {
            *slot = c % (2 * k + 1) - k;
            c /= 2 * k + 1;
        }
        // one representative of each ± pair, no constant mode
        let first = m.iter().take(d).copied().find(|&v| v != 0);
        if first.map_or(true, |v| v < 0) {
            continue;
        }
        let norm2 = m.iter().map(|&v| (v * v) as f64).sum::<f64>();
        let w = 1.0 / (1.0 + norm2);
        let wave = [m[0] as f64, m[1] as f64, m[2] as f64];
        terms.push((wave, w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0)));
    }
    let period = to_f64(grid.period());
    let field = ScalarField::from_fn(grid, |x| {
        let x = x.map(to_f64);
        let s = terms.iter().fold(0.0, |acc, (m, a, b)| {
            let phase = TAU / period * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]);
            acc + a * phase.cos() + b * phase.sin()
        });
        lit(s)
    });
    let bound: f64 = terms.iter().map(|(_, a, b)| a.abs() + b.abs()).sum();
    if bound > 0.0 {
        field.scale(lit(1.0 / bound))
    } else {
        field
    }
}

/// `mean·(1 + amplitude·f)` with `f` from [`random_band_limited`]; positive
/// for `amplitude < 1`.
pub fn random_density<T: Real>(grid: &Grid<T>, modes: usize, mean: T, amplitude: T, seed: u64) -> Result<ScalarField<T>> {
    if !(amplitude >= T::zero() && amplitude < T::one()) || !(mean > T::zero()) {
        return Err(Error::arg("random density needs mean > 0 and amplitude in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_band_limited(grid, modes, &mut rng).map(|f| mean * (T::one() + amplitude * f)))
}

/// Each component an independent [`random_band_limited`] field times `amplitude`.
pub fn random_momentum<T: Real>(grid: &Grid<T>, modes: usize, amplitude: T, seed: u64) -> VectorField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..grid.dim())
        .map(|_| random_band_limited(grid, modes, &mut rng).scale(amplitude))
        .collect();
    VectorField::from_scalars(comps).expect("components share one grid")
}

/// Named density recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityProfile {
    Constant { value: f64 },
    /// `mean + amplitude·cos(2π m·x/L)`.
    Cosine { mean: f64, amplitude: f64, mode: [i64; 3] },
    /// `mean + amplitude·Σ_m exp(−|x − c + mL|²/(2w²))` over periodic images `m`.
    Gaussian { mean: f64, amplitude: f64, width: f64, center: [f64; 3] },
    Random { mean: f64, amplitude: f64, modes: usize, seed: u64 },
}

/// Named momentum recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MomentumProfile {
    Zero,
    /// `J ≡ value` on the active axes.
    Constant { value: [f64; 3] },
    /// `J_a = amplitude·sin(2π m·x/L)` along axis `axis`.
    Wave { amplitude: f64, mode: [i64; 3], axis: usize },
    Random { amplitude: f64, modes: usize, seed: u64 },
}

fn phase<T: Real>(grid: &Grid<T>, mode: &[i64; 3], x: [T; 3]) -> f64 {
    let period = to_f64(grid.period());
    (0..grid.dim()).map(|a| TAU / period * mode[a] as f64 * to_f64(x[a])).sum()
}

impl DensityProfile {
    pub fn sample<T: Real>(&self, grid: &Grid<T>) -> Result<ScalarField<T>> {
        let field = match self {
            Self::Constant { value } => ScalarField::constant(grid, lit(*value)),
            Self::Cosine { mean, amplitude, mode } => {
                ScalarField::from_fn(grid, |x| lit(mean + amplitude * phase(grid, mode, x).cos()))
            }
            Self::Gaussian { mean, amplitude, width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::arg("gaussian width must be positive"));
                }
                let period = to_f64(grid.period());
                // sum over periodic images; the minimum-image distance leaves a
                // derivative kink at the antipode
                let images = (8.0 * width / period).ceil() as i64 + 1;
                let axis = |x: f64, c: f64| -> f64 {
                    (-images..=images)
                        .map(|m| {
                            let d = x - c + m as f64 * period;
                            (-0.5 * d * d / (width * width)).exp()
                        })
                        .sum()
                };
                ScalarField::from_fn(grid, |x| {
                    let g: f64 = (0..grid.dim()).map(|a| axis(to_f64(x[a]), center[a])).product();
                    lit(mean + amplitude * g)
                })
            }
            Self::Random { mean, amplitude, modes, seed } => {
                random_density(grid, *modes, lit(*mean), lit(*amplitude), *seed)?
            }
        };
        if field.min() <= T::zero() {
            return Err(Error::arg(format!("profile {self:?} is not positive on the grid")));
        }
        Ok(field)
    }
}

impl MomentumProfile {
    pub fn sample<T: Real>(&self, grid: &Grid<T>) -> Result<VectorField<T>> {
        Ok(match self {
            Self::Zero => VectorField::zeros(grid),
            Self::Constant { value } => {
                let v: Vec<T> = value.iter().take(grid.dim()).map(|&c| lit(c)).collect();
                VectorField::constant(grid, &v)
            }
            Self::Wave { amplitude, mode, axis } => {
                if *axis >= grid.dim() {
                    return Err(Error::arg(format!("axis {axis} outside a {}-d grid", grid.dim())));
                }
                VectorField::from_fn(grid, |x| {
                    let mut v = [T::zero(); 3];
                    v[*axis] = lit(amplitude * phase(grid, mode, x).sin());
                    v
                })
            }
            Self::Random { amplitude, modes, seed } => random_momentum(grid, *modes, lit(*amplitude), *seed),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::forward;

    fn modal_energy_above(f: &ScalarField<f64>, k: i64) -> f64 {
        let g = f.grid();
        forward(g, f.values())
            .iter()
            .enumerate()
            .filter(|(p, _)| g.multi_index(*p).iter().take(g.dim()).any(|&i| g.mode(i).abs() > k))
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    #[test]
    fn random_density_is_positive_band_limited_and_seeded() {
        let g = Grid::<f64>::unit(2, 32).unwrap();
        let a = random_density(&g, 4, 1.0, 0.5, 7).unwrap();
        let b = random_density(&g, 4, 1.0, 0.5, 7).unwrap();
        let c = random_density(&g, 4, 1.0, 0.5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.min() >= 0.5 && a.max() <= 1.5);
        let fine = random_density(&Grid::<f64>::unit(2, 64).unwrap(), 4, 1.0, 0.5, 7).unwrap();
        assert!(crate::fields::resample(&fine, &g).unwrap().sub(&a).max_abs() < 1e-13);
        assert!(modal_energy_above(&a, 4) < 1e-24);
        assert!(random_density(&g, 4, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn named_profiles() {
        let g = Grid::<f64>::unit(1, 16).unwrap();
        let cos = DensityProfile::Cosine { mean: 1.0, amplitude: 0.5, mode: [1, 0, 0] }.sample(&g).unwrap();
        assert!((cos.values()[0] - 1.5).abs() < 1e-15 && (cos.values()[8] - 0.5).abs() < 1e-15);
        let bad = DensityProfile::Cosine { mean: 0.5, amplitude: 0.5, mode: [1, 0, 0] };
        assert!(bad.sample(&g).is_err());
        let gauss = DensityProfile::Gaussian { mean: 1.0, amplitude: 1.0, width: 0.1, center: [0.0; 3] }
            .sample(&g)
            .unwrap();
        assert!((gauss.values()[1] - gauss.values()[15]).abs() < 1e-15);
        let j = MomentumProfile::Wave { amplitude: 2.0, mode: [1, 0, 0], axis: 0 }.sample(&g).unwrap();
        assert!((j.component(0)[4] - 2.0).abs() < 1e-15);
        assert!(MomentumProfile::Wave { amplitude: 1.0, mode: [1, 0, 0], axis: 1 }.sample(&g).is_err());
        let c = MomentumProfile::Constant { value: [0.5, 9.0, 9.0] }.sample(&g).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.component(0).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn profile_tags_round_trip() {
        let p = DensityProfile::Random { mean: 1.0, amplitude: 0.2, modes: 3, seed: 5 };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"random\""));
        assert_eq!(serde_json::from_str::<DensityProfile>(&s).unwrap(), p);
    }
}
