//! Wave-function oracle: the Schrödinger-Poisson equation
//!
//! ```text
//! iħψ_t = −(ħ²/2)Δψ + f(|ψ|²)ψ − Vψ,   ΔV = |ψ|² − ϱ̄
//! ```
//!
//! solved by Strang splitting, and the map `ϱ = |ψ|²`, `J = ħ Im(ψ̄∇ψ)` to
//! hydrodynamic variables. With `χ = ħ²/4` the pair evolves by the
//! undamped dynamics of [`crate::dynamics`].

use num_complex::Complex;
use serde::Serialize;

use crate::dynamics::{electric_potential, energy, integrate, AbortReason, FluidState, IntegrateOptions, Model};
use crate::error::{Error, Result};
use crate::fields::{apply_derivative, ensure_finite, k_squared, Grid, ScalarField, VectorField};
use crate::laws::{CapillarityLaw, PressureLaw};
use crate::scalar::{count, lit, to_f64, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct WaveState<T: Real> {
    pub t: T,
    pub grid: Grid<T>,
    pub psi: Vec<Complex<T>>,
    pub hbar: T,
}

impl<T: Real> WaveState<T> {
    pub fn new(t: T, grid: &Grid<T>, psi: Vec<Complex<T>>, hbar: T) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::Length {
                what: "wave function",
                got: psi.len(),
                expected: grid.len(),
            });
        }
        if !(hbar > T::zero()) || !hbar.is_finite() {
            return Err(Error::arg(format!("hbar must be positive, got {hbar}")));
        }
        if let Some(index) = psi.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "wave function",
                index,
            });
        }
        Ok(Self {
            t,
            grid: grid.clone(),
            psi,
            hbar,
        })
    }

    pub fn from_fn(grid: &Grid<T>, hbar: T, f: impl Fn([T; 3]) -> Complex<T>) -> Result<Self> {
        let psi = (0..grid.len()).map(|p| f(grid.point(p))).collect();
        Self::new(T::zero(), grid, psi, hbar)
    }

    /// `ψ = √ϱ e^{iθ}` from sampled amplitude and phase.
    pub fn from_amplitude_phase(rho: &ScalarField<T>, phase: &ScalarField<T>, hbar: T) -> Result<Self> {
        if !rho.grid().same_as(phase.grid()) {
            return Err(Error::GridMismatch);
        }
        ensure_finite("density", rho.values())?;
        let psi = rho
            .values()
            .iter()
            .zip(phase.values())
            .map(|(&r, &th)| Complex::from_polar(r.max(T::zero()).sqrt(), th))
            .collect();
        Self::new(T::zero(), rho.grid(), psi, hbar)
    }

    pub fn density(&self) -> ScalarField<T> {
        ScalarField::from_raw(&self.grid, self.psi.iter().map(|c| c.norm_sqr()).collect())
    }

    /// `∫|ψ|²`.
    pub fn mass(&self) -> T {
        self.density().integral()
    }
}

fn forward<T: Real>(grid: &Grid<T>, data: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = data.to_vec();
    grid.fft(&mut out, false);
    out
}

fn inverse<T: Real>(grid: &Grid<T>, mut data: Vec<Complex<T>>) -> Vec<Complex<T>> {
    grid.fft(&mut data, true);
    let norm = T::one() / count(grid.len());
    for c in data.iter_mut() {
        *c = *c * norm;
    }
    data
}

/// Spectral `∇ψ`, one complex array per axis.
pub fn wave_gradient<T: Real>(w: &WaveState<T>) -> Vec<Vec<Complex<T>>> {
    let spec = forward(&w.grid, &w.psi);
    (0..w.grid.dim())
        .map(|a| inverse(&w.grid, apply_derivative(&w.grid, &spec, a)))
        .collect()
}

/// `(ϱ, J) = (|ψ|², ħ Im(ψ̄∇ψ))`.
pub fn madelung_transform<T: Real>(w: &WaveState<T>) -> (ScalarField<T>, VectorField<T>) {
    let grad = wave_gradient(w);
    let comps = grad
        .iter()
        .map(|g| {
            w.psi
                .iter()
                .zip(g)
                .map(|(psi, d)| w.hbar * (psi.conj() * d).im)
                .collect()
        })
        .collect();
    (w.density(), VectorField::from_raw(&w.grid, comps))
}

fn phase_rotate<T: Real>(w: &mut WaveState<T>, dt: T, p: &PressureLaw<T>) {
    let rho = w.density();
    let v = electric_potential(&rho);
    for ((psi, &r), &vp) in w.psi.iter_mut().zip(rho.values()).zip(v.values()) {
        let angle = (vp - p.enthalpy(r)) * dt / w.hbar;
        *psi = *psi * Complex::from_polar(T::one(), angle);
    }
}

/// One Strang step: half phase rotation by `(V − f(|ψ|²))dt/(2ħ)`, exact
/// kinetic propagation `exp(−i(ħ/2)|k|²dt)`, half phase rotation.
pub fn split_step<T: Real>(w: &WaveState<T>, dt: T, p: &PressureLaw<T>) -> Result<WaveState<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::arg(format!("time step must be positive, got {dt}")));
    }
    Ok(split_step_unchecked(w, dt, p))
}

fn split_step_unchecked<T: Real>(w: &WaveState<T>, dt: T, p: &PressureLaw<T>) -> WaveState<T> {
    let half = lit::<T>(0.5);
    let mut next = w.clone();
    phase_rotate(&mut next, half * dt, p);
    let mut spec = forward(&next.grid, &next.psi);
    for (q, c) in spec.iter_mut().enumerate() {
        let angle = -half * w.hbar * k_squared(&next.grid, q) * dt;
        *c = *c * Complex::from_polar(T::one(), angle);
    }
    next.psi = inverse(&next.grid, spec);
    phase_rotate(&mut next, half * dt, p);
    next.t = w.t + dt;
    next
}

/// `steps` Strang steps of size `t_final/steps`.
pub fn evolve<T: Real>(w: &WaveState<T>, p: &PressureLaw<T>, t_final: T, steps: usize) -> Result<WaveState<T>> {
    if steps == 0 {
        return Err(Error::arg("at least one wave step is required"));
    }
    let dt = t_final / count(steps);
    let mut state = split_step(w, dt, p)?;
    for _ in 1..steps {
        state = split_step_unchecked(&state, dt, p);
    }
    state.t = w.t + t_final;
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrosscheckOptions<T: Real> {
    pub t_final: T,
    pub wave_steps: usize,
    /// Hydrodynamic step; `None` uses the stability bound.
    pub hydro_dt: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckReport {
    /// `‖ϱ_wave − ϱ_hydro‖_{L²}` at the final (or breach) time.
    pub l2_rho_gap: f64,
    pub l2_j_gap: f64,
    pub energy_gap: f64,
    pub time: f64,
    pub hydro_steps: usize,
    pub wave_steps: usize,
    pub breach: Option<AbortReason>,
}

/// Runs both solvers from `psi0` with `α = 0` and the quantum capillarity
/// `χ = ħ²/4`, then compares the hydrodynamic fields.
pub fn crosscheck_qhd<T: Real>(
    psi0: &WaveState<T>,
    p: &PressureLaw<T>,
    options: CrosscheckOptions<T>,
) -> Result<CrosscheckReport> {
    let rho0 = psi0.density();
    if rho0.min() < lit(0.1) {
        return Err(Error::arg(format!(
            "initial |psi|^2 must be at least 0.1, got {}",
            to_f64(rho0.min())
        )));
    }
    let (rho0, j0) = madelung_transform(psi0);
    let model = Model::new(p.clone(), CapillarityLaw::quantum(psi0.hbar)?, T::zero())?;
    let initial = FluidState::new(psi0.t, rho0, j0)?;
    let traj = integrate(
        &initial,
        &model,
        IntegrateOptions {
            t_final: options.t_final,
            dt: options.hydro_dt,
            store_every: usize::MAX,
        },
    )?;
    let hydro = traj.last();
    let elapsed = hydro.t - psi0.t;
    // on a breach compare at the breach time, with the wave run matched to it
    let wave_steps = if traj.completed() {
        options.wave_steps
    } else {
        let frac = to_f64(elapsed / options.t_final);
        ((options.wave_steps as f64) * frac).ceil().max(1.0) as usize
    };
    let wave = if elapsed > T::zero() {
        evolve(psi0, p, elapsed, wave_steps)?
    } else {
        psi0.clone()
    };
    let (rho_w, j_w) = madelung_transform(&wave);
    let wave_state = FluidState::new(hydro.t, rho_w.clone(), j_w.clone())?;
    let energy_gap = match (energy(hydro, &model), energy(&wave_state, &model)) {
        (Ok(a), Ok(b)) => to_f64((a - b).abs()),
        _ => f64::NAN,
    };
    Ok(CrosscheckReport {
        l2_rho_gap: to_f64(rho_w.sub(&hydro.rho).l2_norm()),
        l2_j_gap: to_f64(j_w.sub(&hydro.j).l2_norm()),
        energy_gap,
        time: to_f64(hydro.t),
        hydro_steps: traj.diagnostics.len() - 1,
        wave_steps,
        breach: traj.abort.clone(),
    })
}
