//! Damped Euler-Korteweg-Poisson dynamics:
//!
//! ```text
//! ϱ_t + div J = 0
//! J_t + div(J⊗J/ϱ) + ∇p(ϱ) = −αJ + ϱ∇(KΔϱ + ½K′|∇ϱ|²) + ϱ∇V,   ΔV = ϱ − ϱ̄
//! ```
//!
//! advanced by classical RK4, with the energy and its balance recorded
//! after every step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    dealias_vector, divergence_unchecked, gradient_unchecked, inverse_laplacian,
    tensor_divergence_unchecked, ScalarField, SymTensorField, VectorField,
};
use crate::korteweg::{capillary_energy_density, check_positive, force_direct_unchecked, VACUUM_FLOOR};
use crate::laws::{CapillarityLaw, PressureLaw};
use crate::scalar::{count, lit, to_f64, Real};

/// Constitutive laws plus the damping coefficient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Model<T: Real> {
    pub pressure: PressureLaw<T>,
    pub capillarity: CapillarityLaw<T>,
    pub alpha: T,
}

impl<T: Real> Model<T> {
    pub fn new(pressure: PressureLaw<T>, capillarity: CapillarityLaw<T>, alpha: T) -> Result<Self> {
        if !(alpha >= T::zero()) || !alpha.is_finite() {
            return Err(Error::arg(format!("damping must be non-negative, got {alpha}")));
        }
        Ok(Self {
            pressure,
            capillarity,
            alpha,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidState<T: Real> {
    pub t: T,
    pub rho: ScalarField<T>,
    pub j: VectorField<T>,
}

impl<T: Real> FluidState<T> {
    pub fn new(t: T, rho: ScalarField<T>, j: VectorField<T>) -> Result<Self> {
        if !rho.grid().same_as(j.grid()) {
            return Err(Error::GridMismatch);
        }
        rho.validate()?;
        j.validate()?;
        if rho.min() < T::zero() {
            return Err(Error::arg("density must be non-negative"));
        }
        Ok(Self { t, rho, j })
    }

    pub fn mass(&self) -> T {
        self.rho.integral()
    }

    fn max_norm(&self) -> T {
        self.rho.max_abs().max(self.j.max_abs())
    }
}

/// `V` with `ΔV = ϱ − ϱ̄` and zero mean.
pub fn electric_potential<T: Real>(rho: &ScalarField<T>) -> ScalarField<T> {
    let mean = rho.mean();
    inverse_laplacian(&rho.map(|v| v - mean))
}

/// Pointwise `J⊗J/ϱ`.
pub fn convective_flux<T: Real>(rho: &ScalarField<T>, j: &VectorField<T>) -> SymTensorField<T> {
    let u = j.scale_by(&rho.map(|v| T::one() / v));
    SymTensorField::outer(&u, j)
}

/// `−div(J⊗J/ϱ) − ∇p − αJ + F_K + ϱ∇V`, dealiased.
pub fn momentum_rhs<T: Real>(state: &FluidState<T>, model: &Model<T>) -> Result<VectorField<T>> {
    check_positive(&state.rho)?;
    state.j.validate()?;
    Ok(momentum_rhs_unchecked(&state.rho, &state.j, model))
}

fn momentum_rhs_unchecked<T: Real>(rho: &ScalarField<T>, j: &VectorField<T>, model: &Model<T>) -> VectorField<T> {
    let conv = tensor_divergence_unchecked(&convective_flux(rho, j));
    let grad_p = gradient_unchecked(&model.pressure.pressure_field(rho));
    let korteweg = force_direct_unchecked(rho, &model.capillarity);
    let field = gradient_unchecked(&electric_potential(rho)).scale_by(rho);
    let mut rhs = korteweg;
    rhs.add_scaled(-T::one(), &conv);
    rhs.add_scaled(-T::one(), &grad_p);
    rhs.add_scaled(-model.alpha, j);
    rhs.add_scaled(T::one(), &field);
    dealias_vector(&rhs)
}

/// Step bound `0.25·h²/(max χ/min ϱ + max|J/ϱ|·h + 1)`.
pub fn stable_dt<T: Real>(state: &FluidState<T>, model: &Model<T>) -> Result<T> {
    check_positive(&state.rho)?;
    let h = state.rho.grid().spacing();
    let min_rho = state.rho.min();
    let max_chi = state
        .rho
        .values()
        .iter()
        .fold(T::zero(), |m, &r| m.max(model.capillarity.chi(r)));
    let mut max_u = T::zero();
    for p in 0..state.rho.values().len() {
        let jp = state.j.at(p);
        let speed = jp.iter().fold(T::zero(), |a, &c| a + c * c).sqrt() / state.rho.values()[p];
        max_u = max_u.max(speed);
    }
    Ok(lit::<T>(0.25) * h * h / (max_chi / min_rho + max_u * h + T::one()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AbortReason {
    Vacuum { time: f64, min_density: f64, index: usize },
    Instability { time: f64, growth: f64 },
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::Vacuum { time, min_density, index } => write!(
                f,
                "density {min_density:e} at grid index {index} fell below the vacuum floor at t = {time}"
            ),
            AbortReason::Instability { time, growth } => {
                write!(f, "state norm grew by a factor {growth} in one step at t = {time}")
            }
        }
    }
}

/// A step that could not be completed, together with the last good state.
#[derive(Clone, Debug)]
pub struct Abort<T: Real> {
    pub reason: AbortReason,
    pub state: FluidState<T>,
}

fn vacuum_abort<T: Real>(rho: &ScalarField<T>, t: T) -> Option<AbortReason> {
    let (min, index) = rho.min_with_index();
    (!(min >= lit(VACUUM_FLOOR))).then(|| AbortReason::Vacuum {
        time: to_f64(t),
        min_density: to_f64(min),
        index,
    })
}

/// One RK4 step.
///
/// # Panics
///
/// If `dt` is not positive.
pub fn step<T: Real>(state: &FluidState<T>, dt: T, model: &Model<T>) -> std::result::Result<FluidState<T>, Abort<T>> {
    let abort = |reason| Abort {
        reason,
        state: state.clone(),
    };
    assert!(dt > T::zero(), "time step must be positive");
    if let Some(r) = vacuum_abort(&state.rho, state.t) {
        return Err(abort(r));
    }
    let half = lit::<T>(0.5);
    let stage = |rho: &ScalarField<T>, j: &VectorField<T>| {
        (
            divergence_unchecked(j).scale(-T::one()),
            momentum_rhs_unchecked(rho, j, model),
        )
    };
    let shifted = |s: T, k: &(ScalarField<T>, VectorField<T>)| {
        let mut rho = state.rho.clone();
        rho.add_scaled(s, &k.0);
        let mut j = state.j.clone();
        j.add_scaled(s, &k.1);
        (rho, j)
    };
    let k1 = stage(&state.rho, &state.j);
    let (r2, j2) = shifted(half * dt, &k1);
    if let Some(r) = vacuum_abort(&r2, state.t) {
        return Err(abort(r));
    }
    let k2 = stage(&r2, &j2);
    let (r3, j3) = shifted(half * dt, &k2);
    if let Some(r) = vacuum_abort(&r3, state.t) {
        return Err(abort(r));
    }
    let k3 = stage(&r3, &j3);
    let (r4, j4) = shifted(dt, &k3);
    if let Some(r) = vacuum_abort(&r4, state.t) {
        return Err(abort(r));
    }
    let k4 = stage(&r4, &j4);
    let w = dt / lit(6.0);
    let two = lit::<T>(2.0);
    let mut rho = state.rho.clone();
    let mut j = state.j.clone();
    for (s, k) in [(w, &k1), (two * w, &k2), (two * w, &k3), (w, &k4)] {
        rho.add_scaled(s, &k.0);
        j.add_scaled(s, &k.1);
    }
    let next = FluidState {
        t: state.t + dt,
        rho,
        j,
    };
    let before = state.max_norm();
    let after = next.max_norm();
    if !after.is_finite() || after > lit::<T>(10.0) * before {
        return Err(abort(AbortReason::Instability {
            time: to_f64(state.t),
            growth: to_f64(after / before),
        }));
    }
    if let Some(r) = vacuum_abort(&next.rho, next.t) {
        return Err(abort(r));
    }
    Ok(next)
}

/// `∫[½|J|²/ϱ + P(ϱ) + 2χ|∇√ϱ|² + ½|∇V|²]`.
pub fn energy<T: Real>(state: &FluidState<T>, model: &Model<T>) -> Result<T> {
    Ok(energy_parts(state, model)?.total())
}

/// The four integrated energy blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParts<T: Real> {
    pub kinetic: T,
    pub internal: T,
    pub capillary: T,
    pub electric: T,
}

impl<T: Real> EnergyParts<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.internal + self.capillary + self.electric
    }
}

pub fn energy_parts<T: Real>(state: &FluidState<T>, model: &Model<T>) -> Result<EnergyParts<T>> {
    check_positive(&state.rho)?;
    let half = lit::<T>(0.5);
    let kinetic = state
        .rho
        .zip_map(&state.j.norm_squared(), |r, q| half * q / r)
        .integral();
    let internal = model.pressure.internal_energy_field(&state.rho)?.integral();
    let capillary = capillary_energy_density(&state.rho, &model.capillarity)?.integral();
    let electric = half * gradient_unchecked(&electric_potential(&state.rho)).norm_squared().integral();
    Ok(EnergyParts {
        kinetic,
        internal,
        capillary,
        electric,
    })
}

/// `α∫|J|²/ϱ`, the instantaneous dissipation rate.
pub fn dissipation_rate<T: Real>(state: &FluidState<T>, model: &Model<T>) -> T {
    model.alpha * state.rho.zip_map(&state.j.norm_squared(), |r, q| q / r).integral()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord<T: Real> {
    pub t: T,
    pub mass: T,
    pub energy: T,
    /// `∫₀ᵗ α∫|J|²/ϱ`, trapezoidal in time.
    pub dissipation: T,
    /// `|E(t) + dissipation − E(0)| / E(0)` (absolute when `E(0) = 0`).
    pub balance_residual: T,
    pub min_density: T,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub model: Model<T>,
    pub dt: T,
    /// Stored states: the initial one, every `store_every`-th, and the last.
    pub states: Vec<FluidState<T>>,
    /// One record per step, including `t = 0`.
    pub diagnostics: Vec<StepRecord<T>>,
    pub abort: Option<AbortReason>,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &FluidState<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions<T: Real> {
    pub t_final: T,
    /// Fixed step; `None` takes [`stable_dt`] of the initial state.
    pub dt: Option<T>,
    pub store_every: usize,
}

/// Fixed-step integration to `t_final`, with the step shrunk so an integer
/// number of steps lands exactly on it.
pub fn integrate<T: Real>(
    initial: &FluidState<T>,
    model: &Model<T>,
    options: IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    if !(options.t_final >= T::zero()) || !options.t_final.is_finite() {
        return Err(Error::arg("final time must be non-negative"));
    }
    let bound = match options.dt {
        Some(dt) if dt > T::zero() && dt.is_finite() => dt,
        Some(dt) => return Err(Error::arg(format!("time step must be positive, got {dt}"))),
        None => stable_dt(initial, model)?,
    };
    let steps = (options.t_final / bound).ceil().to_usize().unwrap_or(0);
    let dt = if steps == 0 { bound } else { options.t_final / count(steps) };
    let store_every = options.store_every.max(1);

    let record = |state: &FluidState<T>, e0: T, dissipation: T| -> Result<StepRecord<T>> {
        let e = energy(state, model)?;
        let residual = (e + dissipation - e0).abs() / if e0 > T::zero() { e0 } else { T::one() };
        Ok(StepRecord {
            t: state.t,
            mass: state.mass(),
            energy: e,
            dissipation,
            balance_residual: residual,
            min_density: state.rho.min(),
        })
    };
    let e0 = energy(initial, model)?;
    let mut traj = Trajectory {
        model: model.clone(),
        dt,
        states: vec![initial.clone()],
        diagnostics: vec![record(initial, e0, T::zero())?],
        abort: None,
    };
    let mut state = initial.clone();
    let mut rate = dissipation_rate(&state, model);
    let mut dissipation = T::zero();
    let half = lit::<T>(0.5);
    for n in 1..=steps {
        match step(&state, dt, model) {
            Ok(mut next) => {
                if n == steps {
                    next.t = options.t_final;
                }
                let next_rate = dissipation_rate(&next, model);
                dissipation = dissipation + half * dt * (rate + next_rate);
                rate = next_rate;
                traj.diagnostics.push(record(&next, e0, dissipation)?);
                if n % store_every == 0 || n == steps {
                    traj.states.push(next.clone());
                }
                state = next;
            }
            Err(abort) => {
                traj.abort = Some(abort.reason);
                if traj.states.last().map(|s| s.t) != Some(state.t) {
                    traj.states.push(state);
                }
                break;
            }
        }
    }
    Ok(traj)
}

/// `max_n |E(tₙ) + ∫₀^{tₙ}α∫|J|²/ϱ − E(0)| / E(0)` over the recorded steps.
pub fn energy_balance_residual<T: Real>(traj: &Trajectory<T>) -> T {
    traj.diagnostics
        .iter()
        .fold(T::zero(), |m, r| m.max(r.balance_residual))
}
