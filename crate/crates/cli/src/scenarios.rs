//! Scenario runners. Each returns the diagnostics table, a JSON report and
//! an optional field series; writing them is left to the caller.
//!
//! CSV columns:
//!
//! | scenario | columns |
//! |---|---|
//! | simulate | `step,t,mass,energy,dissipation,balance_residual,min_density` |
//! | madelung-check | `level,n,wave_steps,hydro_steps,l2_rho_gap,l2_j_gap,energy_gap` |
//! | extend | `t,z_0,z_1,z_2` |
//! | subsolution-check | `t,omega,min_margin,min_e` |
//! | whitney | `generation,side,diam,dist,predicate` |
//! | weak-strong | `t,E_rel,envelope,contained` |

use std::f64::consts::TAU;

use ekp_core::convexint::{calibrated_initial_subsolution, i_functional, initial_subsolution, subsolution_margin};
use ekp_core::dynamics::{energy_balance_residual, integrate, stable_dt, FluidState, IntegrateOptions, Model, Trajectory};
use ekp_core::extension::{
    advective_dt, extend, reformulate, solve_z, verify_extension, Extension, InitialData, Omega,
};
use ekp_core::madelung::{crosscheck_qhd, CrosscheckOptions, WaveState};
use ekp_core::profiles::{DensityProfile, MomentumProfile};
use ekp_core::relent::weak_strong_monitor;
use ekp_core::whitney::{whitney_decompose, BoxSet, DyadicCube};
use ekp_core::{Error, Grid64, ScalarField64, VectorField64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::experiment::{
    ExtendSettings, InitialSource, MadelungSettings, OmegaChoice, PhaseProfile, Settings, SimulateSettings,
    SubsolutionSettings, SubsolutionSource, WeakStrongSettings, WhitneySettings,
};
use crate::fieldseries::{FieldSeries, SeriesError};
use crate::output::Table;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Vacuum { .. } | Error::VacuumFraction { .. } | Error::MomentumOnVacuum { .. } | Error::NonFinite { .. } => {
                RunError::Numerical(e.to_string())
            }
            other => RunError::Invalid(other.to_string()),
        }
    }
}

impl From<SeriesError> for RunError {
    fn from(e: SeriesError) -> Self {
        RunError::Invalid(e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Artifacts {
    pub table: Table,
    pub report: Value,
    pub series: Option<FieldSeries>,
    /// Numerical abort after which partial artifacts were still produced.
    pub abort: Option<String>,
}

pub fn run_settings(settings: &Settings, want_series: bool) -> Result<Artifacts, RunError> {
    match settings {
        Settings::Simulate(s) => simulate(s, want_series),
        Settings::MadelungCheck(s) => madelung(s),
        Settings::Extend(s) => extend_scenario(s),
        Settings::SubsolutionCheck(s) => subsolution(s),
        Settings::Whitney(s) => Ok(whitney(s)),
        Settings::WeakStrong(s) => weak_strong(s),
    }
}

fn sample_profiles(grid: &Grid64, density: &DensityProfile, momentum: &MomentumProfile) -> Result<(ScalarField64, VectorField64), RunError> {
    Ok((density.sample(grid)?, momentum.sample(grid)?))
}

fn load_initial(source: &InitialSource, grid: Option<&Grid64>) -> Result<FluidState<f64>, RunError> {
    match source {
        InitialSource::Profiles { density, momentum } => {
            let grid = grid.ok_or_else(|| RunError::Invalid("profiles need a grid".into()))?;
            let (rho, j) = sample_profiles(grid, density, momentum)?;
            Ok(FluidState::new(0.0, rho, j)?)
        }
        InitialSource::File { path, frame } => {
            let series = FieldSeries::read(path).map_err(|e| RunError::Invalid(format!("{}: {e}", path.display())))?;
            let file_grid = series.grid()?;
            if let Some(g) = grid {
                if !g.same_as(&file_grid) {
                    return Err(RunError::Invalid(format!(
                        "grid in the config differs from {}: {file_grid:?}",
                        path.display()
                    )));
                }
            }
            let rho = series.scalars("rho")?;
            let j = series.vectors("j")?;
            let take = |len: usize| {
                if *frame < len {
                    Ok(*frame)
                } else {
                    Err(RunError::Invalid(format!("frame {frame} outside a series of {len}")))
                }
            };
            let k = take(rho.len().min(j.len()))?;
            let t = series.times().ok().and_then(|t| t.get(k).copied()).unwrap_or(0.0);
            Ok(FluidState::new(t, rho[k].clone(), j[k].clone())?)
        }
    }
}

fn trajectory_series(traj: &Trajectory<f64>) -> Result<FieldSeries, RunError> {
    let first = &traj.states[0];
    let mut series = FieldSeries::new(first.rho.grid());
    let times: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    series.push_times(&times)?;
    let rho: Vec<ScalarField64> = traj.states.iter().map(|s| s.rho.clone()).collect();
    let j: Vec<VectorField64> = traj.states.iter().map(|s| s.j.clone()).collect();
    series.push_scalars("rho", &rho)?;
    series.push_vectors("j", &j)?;
    Ok(series)
}

fn simulate(s: &SimulateSettings, want_series: bool) -> Result<Artifacts, RunError> {
    let initial = load_initial(&s.initial, s.grid.as_ref())?;
    let model = Model::new(s.pressure.clone(), s.capillarity.clone(), s.alpha)?;
    let traj = integrate(
        &initial,
        &model,
        IntegrateOptions {
            t_final: initial.t + s.time.t_final,
            dt: s.time.dt,
            store_every: s.time.store_every,
        },
    )?;
    let mut table = Table::new(&["step", "t", "mass", "energy", "dissipation", "balance_residual", "min_density"]);
    for (k, r) in traj.diagnostics.iter().enumerate() {
        table.push(vec![
            k.into(),
            r.t.into(),
            r.mass.into(),
            r.energy.into(),
            r.dissipation.into(),
            r.balance_residual.into(),
            r.min_density.into(),
        ]);
    }
    let m0 = traj.diagnostics[0].mass;
    let mass_drift = traj.diagnostics.iter().fold(0.0f64, |m, r| m.max((r.mass - m0).abs())) / m0.abs().max(f64::MIN_POSITIVE);
    let report = json!({
        "model": model,
        "dt": traj.dt,
        "steps": traj.diagnostics.len() - 1,
        "final_time": traj.last().t,
        "energy_balance_residual": energy_balance_residual(&traj),
        "mass_drift": mass_drift,
        "abort": traj.abort,
    });
    let series = if want_series { Some(trajectory_series(&traj)?) } else { None };
    Ok(Artifacts {
        table,
        report,
        series,
        abort: traj.abort.as_ref().map(ToString::to_string),
    })
}

fn phase_field(grid: &Grid64, phase: &PhaseProfile) -> ScalarField64 {
    let l = grid.period();
    ScalarField64::from_fn(grid, |x| {
        let arg: f64 = (0..grid.dim()).map(|a| phase.mode[a] as f64 * x[a]).sum();
        phase.amplitude * (TAU * arg / l).sin()
    })
}

fn madelung(s: &MadelungSettings) -> Result<Artifacts, RunError> {
    let mut table = Table::new(&["level", "n", "wave_steps", "hydro_steps", "l2_rho_gap", "l2_j_gap", "energy_gap"]);
    let mut levels = Vec::new();
    let mut abort = None;
    for level in 0..s.levels {
        let n = s.grid.n() << level;
        let wave_steps = s.wave_steps << level;
        let grid = s.grid.with_points(n)?;
        let rho = s.density.sample(&grid)?;
        let psi = WaveState::from_amplitude_phase(&rho, &phase_field(&grid, &s.phase), s.hbar)?;
        let rep = crosscheck_qhd(
            &psi,
            &s.pressure,
            CrosscheckOptions {
                t_final: s.t_final,
                wave_steps,
                hydro_dt: None,
            },
        )?;
        table.push(vec![
            level.into(),
            n.into(),
            rep.wave_steps.into(),
            rep.hydro_steps.into(),
            rep.l2_rho_gap.into(),
            rep.l2_j_gap.into(),
            rep.energy_gap.into(),
        ]);
        if let Some(b) = &rep.breach {
            abort = Some(format!("level {level}: {b}"));
        }
        levels.push(rep);
        if abort.is_some() {
            break;
        }
    }
    let ratios = |f: fn(&ekp_core::madelung::CrosscheckReport) -> f64| -> Vec<f64> {
        levels.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect()
    };
    let report = json!({
        "pressure": s.pressure,
        "hbar": s.hbar,
        "t_final": s.t_final,
        "levels": levels,
        "rho_gap_ratios": ratios(|r| r.l2_rho_gap),
        "j_gap_ratios": ratios(|r| r.l2_j_gap),
    });
    Ok(Artifacts {
        table,
        report,
        series: None,
        abort,
    })
}

fn extension_pipeline(s: &ExtendSettings) -> Result<(InitialData<f64>, Extension<f64>, Value), RunError> {
    let state = load_initial(&s.initial, s.grid.as_ref())?;
    let u0 = state.j.scale_by(&state.rho.map(|r| 1.0 / r));
    let data = InitialData::new(state.rho.clone(), u0)?;
    let dt = s.dt.unwrap_or_else(|| advective_dt(&data));
    let drift = solve_z(&data, s.t_final, dt)?;
    let ext = extend(&data, &drift)?;
    let summary = json!({
        "dt": ext.dt(),
        "iterations": drift.iterations,
        "converged": drift.converged,
        "residual": drift.residual,
        "final_increment": drift.increments.last(),
    });
    Ok((data, ext, summary))
}

fn extension_series(ext: &Extension<f64>) -> Result<FieldSeries, RunError> {
    let mut series = FieldSeries::new(ext.rho[0].grid());
    series.push_times(&ext.times)?;
    series.push_scalars("rho", &ext.rho)?;
    series.push_vectors("j_tilde", &ext.j_tilde)?;
    Ok(series)
}

fn extend_scenario(s: &ExtendSettings) -> Result<Artifacts, RunError> {
    let (data, ext, drift) = extension_pipeline(s)?;
    if ext.rho.iter().any(|r| !r.values().iter().all(|v| v.is_finite())) {
        return Err(RunError::Numerical("transported density is not finite".into()));
    }
    let check = verify_extension(&data, &ext, &s.pressure, &s.capillarity)?;
    let mut table = Table::new(&["t", "z_0", "z_1", "z_2"]);
    for (t, z) in ext.times.iter().zip(&ext.z) {
        table.push(vec![(*t).into(), z[0].into(), z[1].into(), z[2].into()]);
    }
    let report = json!({ "drift": drift, "extension": check });
    Ok(Artifacts {
        table,
        report,
        series: Some(extension_series(&ext)?),
        abort: None,
    })
}

fn subsolution(s: &SubsolutionSettings) -> Result<Artifacts, RunError> {
    let (ext, pressure, capillarity, drift) = match &s.source {
        SubsolutionSource::Pipeline(e) => {
            let (_, ext, drift) = extension_pipeline(e)?;
            (ext, e.pressure.clone(), e.capillarity.clone(), drift)
        }
        SubsolutionSource::Series { path, pressure, capillarity } => {
            let series = FieldSeries::read(path).map_err(|e| RunError::Invalid(format!("{}: {e}", path.display())))?;
            let times = series.times()?;
            let rho = series.scalars("rho")?;
            let j_tilde = series.vectors("j_tilde")?;
            if times.len() < 2 || rho.len() != times.len() || j_tilde.len() != times.len() {
                return Err(RunError::Invalid(format!("{}: inconsistent series lengths", path.display())));
            }
            let z = vec![[0.0; 3]; times.len()];
            (Extension { times, z, rho, j_tilde }, pressure.clone(), capillarity.clone(), Value::Null)
        }
    };
    let placeholder = Omega::Exponential { m: 1.0 };
    let omega = match &s.omega {
        OmegaChoice::Auto => &placeholder,
        OmegaChoice::Given(w) => w,
    };
    let data = reformulate(&ext, &pressure, &capillarity, omega)?;
    let (data, candidate) = match s.omega {
        OmegaChoice::Auto => calibrated_initial_subsolution(data)?,
        OmegaChoice::Given(_) => {
            let c = initial_subsolution(&data)?;
            (data, c)
        }
    };
    let margin = subsolution_margin(&candidate, &data)?;
    let functional = i_functional(&candidate, &data)?;
    let constraints = candidate.report(&data)?;
    let mut table = Table::new(&["t", "omega", "min_margin", "min_e"]);
    for (n, &t) in data.times.iter().enumerate() {
        let mins = margin.values[n]
            .values()
            .iter()
            .zip(data.e[n].values())
            .zip(&margin.evaluated[n])
            .filter(|(_, &used)| used)
            .fold((f64::INFINITY, f64::INFINITY), |(m, e), ((&mv, &ev), _)| (m.min(mv), e.min(ev)));
        table.push(vec![t.into(), data.omega[n].into(), mins.0.into(), mins.1.into()]);
    }
    let omega_used = match &s.omega {
        OmegaChoice::Auto => json!({ "kind": "auto", "m": data.omega[0] }),
        OmegaChoice::Given(w) => serde_json::to_value(w).unwrap_or(Value::Null),
    };
    let report = json!({
        "drift": drift,
        "omega": omega_used,
        "constraints": constraints,
        "min_margin": margin.min,
        "argmin": { "time_index": margin.argmin.0, "grid_index": margin.argmin.1 },
        "evaluated_points": margin.evaluated_points,
        "nonpositive_e": margin.nonpositive_e,
        "admissible": margin.admissible(),
        "i_functional": functional,
        "i_functional_nonpositive": functional <= 0.0,
    });
    Ok(Artifacts {
        table,
        report,
        series: None,
        abort: None,
    })
}

/// Per-cube recheck with the distance recomputed from the corners.
fn recheck(set: &BoxSet<f64>, lo: &[f64], hi: &[f64]) -> (f64, f64, bool) {
    let diam = (hi[0] - lo[0]) * (set.dim() as f64).sqrt();
    let dist = set.distance_from_box(lo, hi);
    (diam, dist, diam <= dist && dist <= 4.0 * diam)
}

fn whitney(s: &WhitneySettings) -> Artifacts {
    let dec = match whitney_decompose(&s.set, s.max_generation) {
        Ok(d) => d,
        Err(e) => {
            return Artifacts {
                table: Table::new(&["generation", "side", "diam", "dist", "predicate"]),
                report: json!({ "error": e.to_string() }),
                series: None,
                abort: Some(e.to_string()),
            }
        }
    };
    let mut table = Table::new(&["generation", "side", "diam", "dist", "predicate"]);
    let mut cubes = Vec::with_capacity(dec.cubes.len());
    let mut all_pass = true;
    let mut seen = std::collections::HashSet::new();
    let mut disjoint = true;
    for c in &dec.cubes {
        let (_, _, retest) = recheck(&s.set, &c.lo, &c.hi);
        let ok = c.satisfies_predicate() && retest;
        all_pass &= ok;
        for g in 0..=c.cube.generation {
            let shift = c.cube.generation - g;
            let anc = DyadicCube {
                generation: g,
                index: c.cube.index.iter().map(|&i| i >> shift).collect(),
            };
            disjoint &= !seen.contains(&anc);
        }
        seen.insert(c.cube.clone());
        let side = c.cube.side(dec.root_side);
        table.push(vec![c.cube.generation.into(), side.into(), c.diam.into(), c.dist.into(), ok.into()]);
        cubes.push(json!({
            "generation": c.cube.generation,
            "index": c.cube.index,
            "lo": c.lo,
            "hi": c.hi,
            "diam": c.diam,
            "dist": c.dist,
            "predicate": ok,
        }));
    }
    let coverage = monte_carlo_coverage(&s.set, &dec, s.samples, s.seed);
    let report = json!({
        "dim": s.set.dim(),
        "max_generation": s.max_generation,
        "root_side": dec.root_side,
        "origin": dec.origin,
        "measure": dec.measure,
        "covered_measure": dec.covered_measure(),
        "residual_bound": dec.residual_bound,
        "all_predicates": all_pass,
        "disjoint": disjoint,
        "coverage": coverage,
        "cubes": cubes,
    });
    Artifacts {
        table,
        report,
        series: None,
        abort: None,
    }
}

/// Fraction of uniform points of `U` left uncovered against the certified
/// bound `residual_bound / |U|`, with a four-sigma sampling allowance.
pub fn monte_carlo_coverage(set: &BoxSet<f64>, dec: &ekp_core::whitney::Decomposition<f64>, samples: usize, seed: u64) -> Value {
    let Some(bb) = set.bounding_box() else {
        return json!({ "samples": 0, "within_bound": true });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inside, mut missed, mut drawn) = (0usize, 0usize, 0usize);
    while inside < samples && drawn < samples.saturating_mul(1000).max(1) {
        drawn += 1;
        let x: Vec<f64> = (0..set.dim()).map(|a| rng.gen_range(bb.lo[a]..bb.hi[a])).collect();
        if !set.contains(&x) {
            continue;
        }
        inside += 1;
        if dec.locate(&x).is_none() {
            missed += 1;
        }
    }
    let fraction = if inside > 0 { missed as f64 / inside as f64 } else { 0.0 };
    let bound = if dec.measure > 0.0 { dec.residual_bound / dec.measure } else { 0.0 };
    let sigma = (bound * (1.0 - bound) / inside.max(1) as f64).sqrt();
    json!({
        "samples": inside,
        "missed": missed,
        "missed_fraction": fraction,
        "bound": bound,
        "within_bound": fraction <= bound + 4.0 * sigma + 1e-12,
    })
}

fn weak_strong(s: &WeakStrongSettings) -> Result<Artifacts, RunError> {
    let model = Model::new(s.pressure.clone(), s.capillarity.clone(), s.alpha)?;
    let fine_grid = s.grid.with_points(s.fine_n)?;
    let (rho_f, j_f) = sample_profiles(&fine_grid, &s.density, &s.momentum)?;
    let fine0 = FluidState::new(0.0, rho_f, j_f)?;
    let (rho_c, j_c) = sample_profiles(&s.grid, &s.density, &s.momentum)?;
    let l = s.grid.period();
    let bump = ScalarField64::from_fn(&s.grid, |x| {
        let arg: f64 = (0..s.grid.dim()).map(|a| s.mode[a] as f64 * x[a]).sum();
        (TAU * arg / l).sin()
    });
    let rho_c = rho_c.zip_map(&bump, |a, b| a + s.delta * b);
    let coarse0 = FluidState::new(0.0, rho_c, j_c)?;
    let dt = match s.time.dt {
        Some(dt) => dt,
        None => stable_dt(&fine0, &model)?,
    };
    let options = IntegrateOptions {
        t_final: s.time.t_final,
        dt: Some(dt),
        store_every: s.time.store_every,
    };
    let fine = integrate(&fine0, &model, options)?;
    let coarse = integrate(&coarse0, &model, options)?;
    if let Some(reason) = fine.abort.as_ref().or(coarse.abort.as_ref()) {
        let which = if fine.abort.is_some() { "strong" } else { "weak" };
        return Err(RunError::Numerical(format!("{which} run: {reason}")));
    }
    let monitor = weak_strong_monitor(&coarse, &fine, &s.pressure)?;
    let mut table = Table::new(&["t", "E_rel", "envelope", "contained"]);
    for r in &monitor.records {
        table.push(vec![r.t.into(), r.e_rel.into(), r.envelope.into(), r.contained.into()]);
    }
    let monotone = monitor.records.windows(2).all(|w| w[1].envelope >= w[0].envelope);
    let report = json!({
        "dt": fine.dt,
        "coarse_n": s.grid.n(),
        "fine_n": s.fine_n,
        "delta": s.delta,
        "rate": monitor.rate,
        "all_contained": monitor.all_contained,
        "envelope_monotone": monotone,
        "records": monitor.records,
    });
    Ok(Artifacts {
        table,
        report,
        series: None,
        abort: None,
    })
}
