//! Relative energy for constant capillarity, the term-by-term rate
//! identity it obeys, and a weak-strong monitor comparing a coarse run
//! against a resolved one.
//!
//! With `u = L/r` and `U = J/ϱ`,
//!
//! ```text
//! E(ϱ, J | r, L) = ∫ ½ϱ|U − u|² + P(ϱ) − P′(r)(ϱ − r) − P(r) + ½K|∇ϱ − ∇r|²
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{electric_potential, FluidState, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{
    divergence_unchecked, gradient_unchecked, inverse_laplacian, laplacian_unchecked, resample, resample_vector,
    ScalarField, VectorField,
};
use crate::korteweg::VACUUM_FLOOR;
use crate::laws::{CapillarityLaw, PressureLaw};
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelativeEnergyParts<T: Real> {
    pub kinetic: T,
    pub internal: T,
    pub capillary: T,
}

impl<T: Real> RelativeEnergyParts<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.internal + self.capillary
    }
}

fn check_pair<T: Real>(rho: &ScalarField<T>, j: &VectorField<T>, r: &ScalarField<T>, l: &VectorField<T>) -> Result<()> {
    let g = rho.grid();
    if !(g.same_as(j.grid()) && g.same_as(r.grid()) && g.same_as(l.grid())) {
        return Err(Error::GridMismatch);
    }
    for f in [rho, r] {
        f.validate()?;
    }
    j.validate()?;
    l.validate()?;
    let eps = lit::<T>(VACUUM_FLOOR);
    let (rmin, ri) = r.min_with_index();
    if rmin <= eps {
        return Err(Error::Vacuum {
            min: to_f64(rmin),
            index: ri,
            floor: VACUUM_FLOOR,
        });
    }
    for (p, &d) in rho.values().iter().enumerate() {
        if d < T::zero() {
            return Err(Error::arg(format!("negative density {d} at index {p}")));
        }
        if d <= eps {
            let m = j.at(p).iter().fold(T::zero(), |a, &c| a.max(c.abs()));
            if m > T::zero() {
                return Err(Error::MomentumOnVacuum {
                    index: p,
                    density: to_f64(d),
                    momentum: to_f64(m),
                });
            }
        }
    }
    Ok(())
}

/// Velocity gap `U − u` per point, `−u` on vacuum (where `J = 0`).
fn velocity_gap<T: Real>(rho: &ScalarField<T>, j: &VectorField<T>, u: &VectorField<T>) -> VectorField<T> {
    let eps = lit::<T>(VACUUM_FLOOR);
    let comps = (0..j.dim())
        .map(|a| {
            rho.values()
                .iter()
                .zip(j.component(a))
                .zip(u.component(a))
                .map(|((&d, &ja), &ua)| if d > eps { ja / d - ua } else { -ua })
                .collect()
        })
        .collect();
    VectorField::from_raw(rho.grid(), comps)
}

/// The three blocks of the relative energy with capillarity constant `k`.
pub fn relative_energy_parts<T: Real>(
    rho: &ScalarField<T>,
    j: &VectorField<T>,
    r: &ScalarField<T>,
    l: &VectorField<T>,
    p: &PressureLaw<T>,
    k: T,
) -> Result<RelativeEnergyParts<T>> {
    check_pair(rho, j, r, l)?;
    let half = lit::<T>(0.5);
    let eps = lit::<T>(VACUUM_FLOOR);
    let mut kinetic = Vec::with_capacity(rho.values().len());
    let mut internal = Vec::with_capacity(rho.values().len());
    for (pt, (&d, &rr)) in rho.values().iter().zip(r.values()).enumerate() {
        let (jp, lp) = (j.at(pt), l.at(pt));
        let (mut jj, mut jl, mut ll) = (T::zero(), T::zero(), T::zero());
        for a in 0..3 {
            jj = jj + jp[a] * jp[a];
            jl = jl + jp[a] * lp[a];
            ll = ll + lp[a] * lp[a];
        }
        let tail = half * d * ll / (rr * rr);
        kinetic.push(if d > eps { half * jj / d - jl / rr + tail } else { tail });
        internal.push(p.internal_energy(d)? - p.internal_energy_prime(rr)? * (d - rr) - p.internal_energy(rr)?);
    }
    let cell = rho.grid().cell_volume();
    let sum = |v: Vec<T>| ScalarField::from_raw(rho.grid(), v).sum() * cell;
    let gap = gradient_unchecked(&rho.sub(r));
    Ok(RelativeEnergyParts {
        kinetic: sum(kinetic),
        internal: sum(internal),
        capillary: half * k * gap.norm_squared().integral(),
    })
}

/// Relative energy with `K = 1`.
pub fn relative_energy<T: Real>(
    rho: &ScalarField<T>,
    j: &VectorField<T>,
    r: &ScalarField<T>,
    l: &VectorField<T>,
    p: &PressureLaw<T>,
) -> Result<T> {
    Ok(relative_energy_parts(rho, j, r, l, p, T::one())?.total())
}

/// A smooth test pair with its time derivatives at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct TestPair<T: Real> {
    pub r: ScalarField<T>,
    pub l: VectorField<T>,
    pub r_t: ScalarField<T>,
    pub l_t: VectorField<T>,
}

/// Instantaneous integrands of the relative energy balance,
/// `d/dt E + dissipation + d/dt ½∫|∇V|² = damping_cross + capillary_coupling
/// + potential + convective + korteweg + pressure`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReiTerms<T: Real> {
    /// `α∫(J − ϱu)·(U − u)`, the left-hand dissipation.
    pub dissipation: T,
    /// `∫J·∇V = −d/dt ½∫|∇V|²`.
    pub field: T,
    /// `−α∫ϱu·(U − u)`.
    pub damping_cross: T,
    /// `K∫(ϱ∂tΔr + J·∇Δr − ∂t r Δr)`.
    pub capillary_coupling: T,
    /// `−∫ϱ∇V·u`.
    pub potential: T,
    /// `∫[∂t u + (U·∇)u]·(ϱu − J)`.
    pub convective: T,
    /// `−K∫[∇ϱ·∇(ϱ div u) − ½|∇ϱ|² div u + ∇ϱ⊗∇ϱ:∇u]`.
    pub korteweg: T,
    /// `∫[(r − ϱ)∂t P′(r) + (L − J)·∇P′(r) + (p(r) − p(ϱ)) div u]`.
    pub pressure: T,
}

impl<T: Real> ReiTerms<T> {
    /// Everything on the right, including the field term.
    pub fn rhs_total(&self) -> T {
        self.field + self.damping_cross + self.capillary_coupling + self.potential + self.convective + self.korteweg + self.pressure
    }
}

fn constant_k<T: Real>(law: &CapillarityLaw<T>) -> Result<T> {
    law.constant_k_value()
        .ok_or_else(|| Error::UnsupportedLaw("relative energy needs a constant capillarity coefficient".into()))
}

/// `∇u` as rows `[∂₀uᵢ, ∂₁uᵢ, ∂₂uᵢ]`, one vector field per component `i`.
fn velocity_gradient<T: Real>(u: &VectorField<T>) -> Vec<VectorField<T>> {
    (0..u.dim()).map(|i| gradient_unchecked(&u.component_field(i))).collect()
}

pub fn rei_rhs_terms<T: Real>(
    rho: &ScalarField<T>,
    j: &VectorField<T>,
    pair: &TestPair<T>,
    p: &PressureLaw<T>,
    capillarity: &CapillarityLaw<T>,
    alpha: T,
) -> Result<ReiTerms<T>> {
    let k = constant_k(capillarity)?;
    let TestPair { r, l, r_t, l_t } = pair;
    check_pair(rho, j, r, l)?;
    if !(r_t.grid().same_as(r.grid()) && l_t.grid().same_as(r.grid())) {
        return Err(Error::GridMismatch);
    }
    r_t.validate()?;
    l_t.validate()?;
    let d = rho.grid().dim();
    let inv_r = r.map(|v| T::one() / v);
    let u = l.scale_by(&inv_r);
    let u_t = l_t.sub(&u.scale_by(r_t)).scale_by(&inv_r);
    let gap = velocity_gap(rho, j, &u);
    let rho_u = u.scale_by(rho);
    let defect = rho_u.sub(j);
    let grad_u = velocity_gradient(&u);
    let div_u = divergence_unchecked(&u);
    let grad_rho = gradient_unchecked(rho);
    let v = electric_potential(rho);
    let grad_v = gradient_unchecked(&v);

    let dissipation = alpha * defect.scale(-T::one()).inner(&gap);
    let field = j.inner(&grad_v);
    let damping_cross = -alpha * rho_u.inner(&gap);

    let lap_r = laplacian_unchecked(r);
    let coupling = rho.inner(&laplacian_unchecked(r_t)) + j.inner(&gradient_unchecked(&lap_r)) - r_t.inner(&lap_r);
    let potential = -grad_v.scale_by(rho).inner(&u);

    // (U·∇)u, with ϱ(U·∇)u = (J·∇)u so vacuum points drop out of the product with ϱu − J
    let eps = lit::<T>(VACUUM_FLOOR);
    let n = rho.values().len();
    let mut advect: Vec<Vec<T>> = vec![vec![T::zero(); n]; d];
    for (i, gi) in grad_u.iter().enumerate() {
        for pt in 0..n {
            let dens = rho.values()[pt];
            if dens > eps {
                let jp = j.at(pt);
                let s = (0..d).fold(T::zero(), |a, b| a + jp[b] * gi.component(b)[pt]);
                advect[i][pt] = s / dens;
            }
        }
    }
    let advect = VectorField::from_raw(rho.grid(), advect);
    let convective = u_t.add(&advect).inner(&defect);

    let half = lit::<T>(0.5);
    let first = grad_rho.inner(&gradient_unchecked(&rho.mul(&div_u)));
    let second = half * grad_rho.norm_squared().inner(&div_u);
    let mut third = T::zero();
    for (i, gi) in grad_u.iter().enumerate() {
        for jx in 0..d {
            let w = ScalarField::from_raw(rho.grid(), grad_rho.component(i).to_vec())
                .mul(&ScalarField::from_raw(rho.grid(), grad_rho.component(jx).to_vec()));
            third = third + w.inner(&gi.component_field(jx));
        }
    }
    let korteweg = -k * (first - second + third);

    let dp_prime_dt = ScalarField::from_raw(
        r.grid(),
        r.values()
            .iter()
            .zip(r_t.values())
            .map(|(&rv, &rt)| p.p_prime(rv) / rv * rt)
            .collect(),
    );
    let p_prime_r = ScalarField::from_raw(
        r.grid(),
        r.values().iter().map(|&rv| p.internal_energy_prime(rv)).collect::<Result<Vec<T>>>()?,
    );
    let pressure_gap = p.pressure_field(r).sub(&p.pressure_field(rho));
    let pressure = r.sub(rho).inner(&dp_prime_dt)
        + l.sub(j).inner(&gradient_unchecked(&p_prime_r))
        + pressure_gap.inner(&div_u);

    Ok(ReiTerms {
        dissipation,
        field,
        damping_cross,
        capillary_coupling: k * coupling,
        potential,
        convective,
        korteweg,
        pressure,
    })
}

/// `½∫(ϱ̃ − ϱ)Δ⁻¹(ϱ̃ − ϱ)` on the mean-free part; never positive.
pub fn poisson_correction<T: Real>(rho: &ScalarField<T>, rho_tilde: &ScalarField<T>) -> Result<T> {
    if !rho.grid().same_as(rho_tilde.grid()) {
        return Err(Error::GridMismatch);
    }
    let diff = rho_tilde.sub(rho);
    let mean = diff.mean();
    let diff = diff.map(|v| v - mean);
    Ok(lit::<T>(0.5) * diff.inner(&inverse_laplacian(&diff)))
}

/// Gronwall rate extracted from the resolved states:
/// `2(1 + sup|∇ũ| + (d/2)sup|div ũ| + sup|∇div ũ| + sup|p″|·sup|div ũ|)`,
/// with `sup|p″|` over every density value in `densities`.
pub fn gronwall_rate<T: Real>(fine: &[FluidState<T>], p: &PressureLaw<T>, densities: &[&ScalarField<T>]) -> Result<T> {
    let per_state: Vec<[T; 3]> = fine
        .par_iter()
        .map(|s| {
            let u = s.j.scale_by(&s.rho.map(|v| T::one() / v));
            let grad = velocity_gradient(&u).iter().fold(T::zero(), |m, g| m.max(g.max_abs()));
            let div = divergence_unchecked(&u);
            [grad, div.max_abs(), gradient_unchecked(&div).max_abs()]
        })
        .collect();
    let sup = |i: usize| per_state.iter().fold(T::zero(), |m, v| m.max(v[i]));
    let p2 = densities
        .iter()
        .flat_map(|f| f.values().iter())
        .fold(T::zero(), |m, &v| m.max(p.p_second(v).abs()));
    let d = fine.first().map_or(1, |s| s.rho.grid().dim());
    let half_d = lit::<T>(d as f64 * 0.5);
    let rate = lit::<T>(2.0) * (T::one() + sup(0) + half_d * sup(1) + sup(2) + p2 * sup(1));
    if !rate.is_finite() {
        return Err(Error::arg("non-finite Gronwall rate"));
    }
    Ok(rate)
}

/// Absolute roundoff allowance when comparing `E` with its envelope.
pub const CONTAINMENT_SLACK: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub e_rel: f64,
    pub envelope: f64,
    pub contained: bool,
    /// `½∫(ϱ̃ − ϱ)Δ⁻¹(ϱ̃ − ϱ)`, subtracted from `E` before Gronwall.
    pub poisson: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorReport {
    pub rate: f64,
    pub records: Vec<MonitorRecord>,
    pub all_contained: bool,
}

/// Relative energy of `coarse` against `fine` (truncated to the coarse grid)
/// at every stored time the two share, and the envelope
/// `(E − poisson)(0)·exp(Λt)`.
pub fn weak_strong_monitor<T: Real>(coarse: &Trajectory<T>, fine: &Trajectory<T>, p: &PressureLaw<T>) -> Result<MonitorReport> {
    let k = constant_k(&fine.model.capillarity)?;
    let grid = coarse.states[0].rho.grid().clone();
    for s in &fine.states {
        let (m, i) = s.rho.min_with_index();
        if m <= lit(VACUUM_FLOOR) {
            return Err(Error::Vacuum {
                min: to_f64(m),
                index: i,
                floor: VACUUM_FLOOR,
            });
        }
    }
    let close = |a: T, b: T| (a - b).abs() <= lit::<T>(1e-9) * (T::one() + a.abs());
    let pairs: Vec<(&FluidState<T>, &FluidState<T>)> = coarse
        .states
        .iter()
        .filter_map(|c| fine.states.iter().find(|f| close(c.t, f.t)).map(|f| (c, f)))
        .collect();
    if pairs.first().map_or(true, |(c, _)| c.t != T::zero()) {
        return Err(Error::SeriesMismatch("trajectories share no stored time starting at t = 0".into()));
    }
    let evaluated: Vec<(T, T, T, ScalarField<T>)> = pairs
        .par_iter()
        .map(|(c, f)| {
            let r = resample(&f.rho, &grid)?;
            let l = resample_vector(&f.j, &grid)?;
            let e = relative_energy_parts(&c.rho, &c.j, &r, &l, p, k)?.total();
            let q = poisson_correction(&c.rho, &r)?;
            Ok((c.t, e, q, r))
        })
        .collect::<Result<_>>()?;
    let mut densities: Vec<&ScalarField<T>> = pairs.iter().map(|(c, _)| &c.rho).collect();
    densities.extend(evaluated.iter().map(|(_, _, _, r)| r));
    let fine_states: Vec<FluidState<T>> = pairs.iter().map(|(_, f)| (*f).clone()).collect();
    let rate = to_f64(gronwall_rate(&fine_states, p, &densities)?);
    let start = to_f64(evaluated[0].1 - evaluated[0].2);
    let records: Vec<MonitorRecord> = evaluated
        .iter()
        .map(|(t, e, q, _)| {
            let t = to_f64(*t);
            let envelope = start * (rate * t).exp();
            let e_rel = to_f64(*e);
            MonitorRecord {
                t,
                e_rel,
                envelope,
                contained: e_rel <= envelope * (1.0 + 1e-12) + CONTAINMENT_SLACK,
                poisson: to_f64(*q),
            }
        })
        .collect();
    let all_contained = records.iter().all(|r| r.contained);
    Ok(MonitorReport {
        rate,
        records,
        all_contained,
    })
}
