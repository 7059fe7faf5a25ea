//! Typed experiment configuration assembled from a [`Config`].
//!
//! Key reference (all scenarios):
//!
//! | key | meaning |
//! |---|---|
//! | `scenario` | optional; must match the command line |
//! | `seed` | seed for `random` profiles without their own `seed` |
//! | `grid.dim`, `grid.n`, `grid.period` | torus; `period` defaults to 1 |
//! | `pressure.kind` | `zero`, `quadratic`, `power` (`gamma`, `coefficient`), `polynomial` (`coefficients`) |
//! | `capillarity.kind` | `constant-k` (`k`), `quantum` (`hbar`, `exponent`), `constant-chi` (`chi`), `polynomial` (`coefficients`) |
//! | `time.t_final`, `time.dt`, `time.store_every` | `dt = auto` or absent uses the stability rule |
//! | `alpha` | damping, default 0 |
//! | `initial.density.*`, `initial.momentum.*` | named profiles, see `ekp_core::profiles` |
//! | `initial.file`, `initial.frame` | field-series file with `rho` and `j.*` instead of profiles |
//! | `output.csv`, `output.report`, `output.series` | file names inside the output directory |
//!
//! Scenario sections: `madelung.*`, `extend.*`, `omega.*`, `whitney.*`,
//! `weak_strong.*`; see the individual settings types.

use std::path::PathBuf;
use std::str::FromStr;

use ekp_core::extension::Omega;
use ekp_core::laws::{CapillarityLaw, PressureLaw};
use ekp_core::profiles::{DensityProfile, MomentumProfile};
use ekp_core::whitney::{AxisBox, BoxSet};
use ekp_core::{CapillarityLaw64, Grid64, PressureLaw64};
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError, ConfigResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    MadelungCheck,
    Extend,
    SubsolutionCheck,
    Whitney,
    WeakStrong,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Simulate,
        Scenario::MadelungCheck,
        Scenario::Extend,
        Scenario::SubsolutionCheck,
        Scenario::Whitney,
        Scenario::WeakStrong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::MadelungCheck => "madelung-check",
            Scenario::Extend => "extend",
            Scenario::SubsolutionCheck => "subsolution-check",
            Scenario::Whitney => "whitney",
            Scenario::WeakStrong => "weak-strong",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            ConfigError::field("scenario", format!("unknown scenario `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSettings {
    pub t_final: f64,
    pub dt: Option<f64>,
    pub store_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSource {
    Profiles {
        density: DensityProfile,
        momentum: MomentumProfile,
    },
    File {
        path: PathBuf,
        frame: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub csv: String,
    pub report: String,
    pub series: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSettings {
    pub grid: Option<Grid64>,
    pub pressure: PressureLaw64,
    pub capillarity: CapillarityLaw64,
    pub alpha: f64,
    pub time: TimeSettings,
    pub initial: InitialSource,
}

/// `θ = amplitude·sin(2π m·x/L)`.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseProfile {
    pub amplitude: f64,
    pub mode: [i64; 3],
}

/// Keys `madelung.hbar` (1), `madelung.wave_steps` (200) and
/// `madelung.levels` (2): level `k` runs on `2^k·n` points with
/// `2^k·wave_steps` split steps.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungSettings {
    pub grid: Grid64,
    pub pressure: PressureLaw64,
    pub hbar: f64,
    pub density: DensityProfile,
    pub phase: PhaseProfile,
    pub t_final: f64,
    pub wave_steps: usize,
    pub levels: usize,
}

/// Initial data and laws for the extension pipeline; `time.dt` defaults
/// to the advective step.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendSettings {
    pub grid: Option<Grid64>,
    pub pressure: PressureLaw64,
    pub capillarity: CapillarityLaw64,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub initial: InitialSource,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OmegaChoice {
    /// Calibrated from the initial subsolution.
    Auto,
    Given(Omega<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SubsolutionSource {
    /// Run the extension pipeline first.
    Pipeline(ExtendSettings),
    /// An `extend` series file with `t`, `rho` and `j_tilde.*`.
    Series {
        path: PathBuf,
        pressure: PressureLaw64,
        capillarity: CapillarityLaw64,
    },
}

/// `omega.kind = auto | exponential` with `omega.m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsolutionSettings {
    pub source: SubsolutionSource,
    pub omega: OmegaChoice,
}

/// `whitney.set = unit-square | unit-cube | l-shape | boxes`; for `boxes`,
/// `whitney.dim` and `whitney.boxes = lo…, hi…; lo…, hi…`. Also
/// `whitney.max_generation` (10) and `whitney.samples` (100000) Monte Carlo
/// points for the coverage check.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitneySettings {
    pub set: BoxSet<f64>,
    pub max_generation: u32,
    pub samples: usize,
    pub seed: u64,
}

/// The weak run lives on `grid.n` with density perturbed by
/// `weak_strong.delta·sin(2π m·x/L)`, `m = weak_strong.mode`; the strong run
/// is unperturbed on `weak_strong.fine_n`. Both use one step, by default the
/// stable step of the strong run.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakStrongSettings {
    pub grid: Grid64,
    pub fine_n: usize,
    pub pressure: PressureLaw64,
    pub capillarity: CapillarityLaw64,
    pub alpha: f64,
    pub time: TimeSettings,
    pub density: DensityProfile,
    pub momentum: MomentumProfile,
    pub delta: f64,
    pub mode: [i64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Settings {
    Simulate(SimulateSettings),
    MadelungCheck(MadelungSettings),
    Extend(ExtendSettings),
    SubsolutionCheck(SubsolutionSettings),
    Whitney(WhitneySettings),
    WeakStrong(WeakStrongSettings),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub outputs: Outputs,
    pub settings: Settings,
}

fn core_err(key: &str) -> impl Fn(ekp_core::Error) -> ConfigError + '_ {
    move |e| ConfigError::field(key, e.to_string())
}

fn grid(cfg: &Config) -> ConfigResult<Grid64> {
    let dim = cfg.required::<usize>("grid.dim")?;
    let n = cfg.required::<usize>("grid.n")?;
    let period = cfg.parsed_or("grid.period", 1.0)?;
    Grid64::new(dim, n, period).map_err(core_err("grid"))
}

fn pressure(cfg: &Config) -> ConfigResult<PressureLaw64> {
    let kind = cfg.string("pressure.kind")?;
    let key = "pressure.kind";
    match kind.as_str() {
        "zero" => Ok(PressureLaw::Zero),
        "quadratic" => Ok(PressureLaw::quadratic()),
        "power" => PressureLaw::power(cfg.required("pressure.gamma")?, cfg.parsed_or("pressure.coefficient", 1.0)?)
            .map_err(core_err("pressure")),
        "polynomial" => {
            let c = cfg.list("pressure.coefficients")?.ok_or_else(|| ConfigError::field("pressure.coefficients", "missing"))?;
            PressureLaw::polynomial(c).map_err(core_err("pressure"))
        }
        other => Err(ConfigError::field(key, format!("unknown pressure law `{other}`"))),
    }
}

fn capillarity(cfg: &Config) -> ConfigResult<CapillarityLaw64> {
    let kind = cfg.string("capillarity.kind")?;
    let law = match kind.as_str() {
        "constant-k" => CapillarityLaw::constant_k(cfg.required("capillarity.k")?),
        "quantum" => CapillarityLaw::quantum_with_exponent(
            cfg.parsed_or("capillarity.hbar", 1.0)?,
            cfg.parsed_or("capillarity.exponent", 2.0)?,
        ),
        "constant-chi" => CapillarityLaw::constant_chi(cfg.required("capillarity.chi")?),
        "polynomial" => {
            let c = cfg
                .list("capillarity.coefficients")?
                .ok_or_else(|| ConfigError::field("capillarity.coefficients", "missing"))?;
            CapillarityLaw::polynomial(c)
        }
        other => return Err(ConfigError::field("capillarity.kind", format!("unknown capillarity law `{other}`"))),
    };
    law.map_err(core_err("capillarity"))
}

fn positive(cfg: &Config, key: &str) -> ConfigResult<f64> {
    let v: f64 = cfg.required(key)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::field(key, format!("must be positive, got {v}")))
    }
}

/// `None` for `auto` or an absent key.
fn optional_dt(cfg: &Config) -> ConfigResult<Option<f64>> {
    match cfg.raw("time.dt") {
        None | Some("auto") => Ok(None),
        Some(_) => positive(cfg, "time.dt").map(Some),
    }
}

fn time(cfg: &Config) -> ConfigResult<TimeSettings> {
    let t_final: f64 = cfg.required("time.t_final")?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(ConfigError::field("time.t_final", "must be non-negative"));
    }
    let store_every = cfg.parsed_or("time.store_every", 1usize)?;
    if store_every == 0 {
        return Err(ConfigError::field("time.store_every", "must be at least 1"));
    }
    Ok(TimeSettings {
        t_final,
        dt: optional_dt(cfg)?,
        store_every,
    })
}

fn alpha(cfg: &Config) -> ConfigResult<f64> {
    let a: f64 = cfg.parsed_or("alpha", 0.0)?;
    if a >= 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(ConfigError::field("alpha", format!("must be non-negative, got {a}")))
    }
}

/// A profile section; `random` kinds without a seed take `seed`.
/// Keys given per axis, padded to three entries; a density `value` is a scalar.
const DENSITY_VECTORS: &[&str] = &["mode", "center"];
const MOMENTUM_VECTORS: &[&str] = &["mode", "value"];

fn profile<T: serde::de::DeserializeOwned>(cfg: &mut Config, prefix: &str, seed: u64, vectors: &[&str]) -> ConfigResult<T> {
    let kind_key = format!("{prefix}.kind");
    let seed_key = format!("{prefix}.seed");
    if cfg.has(&kind_key) && !cfg.has(&seed_key) && cfg.raw(&kind_key) == Some("random") {
        cfg.set(&seed_key, seed.to_string());
    }
    cfg.section(prefix, vectors)
}

fn initial(cfg: &mut Config, seed: u64) -> ConfigResult<InitialSource> {
    if let Some(path) = cfg.path("initial.file")? {
        if cfg.has_section("initial.density") || cfg.has_section("initial.momentum") {
            return Err(ConfigError::field("initial.file", "give either a file or profiles, not both"));
        }
        if !path.is_file() {
            return Err(ConfigError::field("initial.file", format!("{} does not exist", path.display())));
        }
        let frame = cfg.parsed_or("initial.frame", 0usize)?;
        return Ok(InitialSource::File { path, frame });
    }
    let density = profile(cfg, "initial.density", seed, DENSITY_VECTORS)?;
    let momentum = if cfg.has_section("initial.momentum") {
        profile(cfg, "initial.momentum", seed.wrapping_add(1), MOMENTUM_VECTORS)?
    } else {
        MomentumProfile::Zero
    };
    Ok(InitialSource::Profiles { density, momentum })
}

/// The grid is required with profiles and optional with a file, where it
/// must then agree with the file.
fn grid_for(cfg: &Config, source: &InitialSource) -> ConfigResult<Option<Grid64>> {
    match source {
        InitialSource::Profiles { .. } => grid(cfg).map(Some),
        InitialSource::File { .. } if cfg.has_section("grid") => grid(cfg).map(Some),
        InitialSource::File { .. } => Ok(None),
    }
}

fn extend_settings(cfg: &mut Config, seed: u64) -> ConfigResult<ExtendSettings> {
    let initial = initial(cfg, seed)?;
    let grid = grid_for(cfg, &initial)?;
    Ok(ExtendSettings {
        grid,
        pressure: pressure(cfg)?,
        capillarity: capillarity(cfg)?,
        t_final: positive(cfg, "time.t_final")?,
        dt: optional_dt(cfg)?,
        initial,
    })
}

fn box_list(cfg: &Config) -> ConfigResult<BoxSet<f64>> {
    let dim = cfg.parsed_or("whitney.dim", 2usize)?;
    let raw = cfg.string("whitney.boxes")?;
    let mut boxes = Vec::new();
    for part in raw.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<f64> = part
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ConfigError::field("whitney.boxes", format!("`{part}`: {e}")))?;
        if nums.len() != 2 * dim {
            return Err(ConfigError::field(
                "whitney.boxes",
                format!("box `{part}` needs {} numbers for dimension {dim}", 2 * dim),
            ));
        }
        boxes.push(AxisBox::new(nums[..dim].to_vec(), nums[dim..].to_vec()).map_err(core_err("whitney.boxes"))?);
    }
    BoxSet::new(dim, boxes).map_err(core_err("whitney.boxes"))
}

pub fn l_shape() -> BoxSet<f64> {
    BoxSet::new(
        2,
        vec![
            AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).expect("valid box"),
            AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).expect("valid box"),
        ],
    )
    .expect("valid set")
}

fn whitney_settings(cfg: &Config, seed: u64) -> ConfigResult<WhitneySettings> {
    let kind = cfg.string("whitney.set")?;
    let set = match kind.as_str() {
        "unit-square" => BoxSet::unit_cube(2).map_err(core_err("whitney.set"))?,
        "unit-cube" => BoxSet::unit_cube(3).map_err(core_err("whitney.set"))?,
        "l-shape" => l_shape(),
        "boxes" => box_list(cfg)?,
        other => return Err(ConfigError::field("whitney.set", format!("unknown set `{other}`"))),
    };
    Ok(WhitneySettings {
        set,
        max_generation: cfg.parsed_or("whitney.max_generation", 10u32)?,
        samples: cfg.parsed_or("whitney.samples", 100_000usize)?,
        seed,
    })
}

fn omega(cfg: &Config) -> ConfigResult<OmegaChoice> {
    match cfg.raw("omega.kind").unwrap_or("auto") {
        "auto" => Ok(OmegaChoice::Auto),
        "exponential" => Ok(OmegaChoice::Given(Omega::Exponential {
            m: positive(cfg, "omega.m")?,
        })),
        other => Err(ConfigError::field("omega.kind", format!("unknown omega `{other}`"))),
    }
}

fn mode3(cfg: &Config, key: &str, default: [i64; 3]) -> ConfigResult<[i64; 3]> {
    let Some(list) = cfg.list::<i64>(key)? else { return Ok(default) };
    if list.is_empty() || list.len() > 3 {
        return Err(ConfigError::field(key, "one to three integers"));
    }
    let mut m = [0; 3];
    m[..list.len()].copy_from_slice(&list);
    Ok(m)
}

impl ExperimentConfig {
    /// Validates `cfg` for `scenario`; `seed` overrides the `seed` key.
    pub fn build(scenario: Scenario, mut cfg: Config, seed: Option<u64>) -> ConfigResult<Self> {
        if let Some(named) = cfg.raw("scenario") {
            let named: Scenario = named.parse()?;
            if named != scenario {
                return Err(ConfigError::field(
                    "scenario",
                    format!("config is for `{named}` but `{scenario}` was requested"),
                ));
            }
        }
        let seed = match seed {
            Some(s) => {
                cfg.raw("seed");
                s
            }
            None => cfg.parsed_or("seed", 0u64)?,
        };
        let settings = match scenario {
            Scenario::Simulate => {
                let initial = initial(&mut cfg, seed)?;
                Settings::Simulate(SimulateSettings {
                    grid: grid_for(&cfg, &initial)?,
                    pressure: pressure(&cfg)?,
                    capillarity: capillarity(&cfg)?,
                    alpha: alpha(&cfg)?,
                    time: time(&cfg)?,
                    initial,
                })
            }
            Scenario::MadelungCheck => {
                let density = profile(&mut cfg, "initial.density", seed, DENSITY_VECTORS)?;
                let phase = if cfg.has_section("initial.phase") {
                    cfg.section("initial.phase", &["mode"])?
                } else {
                    PhaseProfile {
                        amplitude: 0.0,
                        mode: [1, 0, 0],
                    }
                };
                let levels = cfg.parsed_or("madelung.levels", 2usize)?;
                if levels == 0 {
                    return Err(ConfigError::field("madelung.levels", "must be at least 1"));
                }
                Settings::MadelungCheck(MadelungSettings {
                    grid: grid(&cfg)?,
                    pressure: pressure(&cfg)?,
                    hbar: cfg.parsed_or("madelung.hbar", 1.0)?,
                    density,
                    phase,
                    t_final: positive(&cfg, "time.t_final")?,
                    wave_steps: cfg.parsed_or("madelung.wave_steps", 200usize)?.max(1),
                    levels,
                })
            }
            Scenario::Extend => Settings::Extend(extend_settings(&mut cfg, seed)?),
            Scenario::SubsolutionCheck => {
                let source = match cfg.path("extend.series")? {
                    Some(path) => {
                        if !path.is_file() {
                            return Err(ConfigError::field("extend.series", format!("{} does not exist", path.display())));
                        }
                        SubsolutionSource::Series {
                            path,
                            pressure: pressure(&cfg)?,
                            capillarity: capillarity(&cfg)?,
                        }
                    }
                    None => SubsolutionSource::Pipeline(extend_settings(&mut cfg, seed)?),
                };
                Settings::SubsolutionCheck(SubsolutionSettings {
                    source,
                    omega: omega(&cfg)?,
                })
            }
            Scenario::Whitney => Settings::Whitney(whitney_settings(&cfg, seed)?),
            Scenario::WeakStrong => {
                let grid = grid(&cfg)?;
                let fine_n: usize = cfg.required("weak_strong.fine_n")?;
                grid.with_points(fine_n).map_err(core_err("weak_strong.fine_n"))?;
                let density = profile(&mut cfg, "initial.density", seed, DENSITY_VECTORS)?;
                let momentum = if cfg.has_section("initial.momentum") {
                    profile(&mut cfg, "initial.momentum", seed.wrapping_add(1), MOMENTUM_VECTORS)?
                } else {
                    MomentumProfile::Zero
                };
                Settings::WeakStrong(WeakStrongSettings {
                    grid,
                    fine_n,
                    pressure: pressure(&cfg)?,
                    capillarity: capillarity(&cfg)?,
                    alpha: alpha(&cfg)?,
                    time: time(&cfg)?,
                    density,
                    momentum,
                    delta: cfg.parsed_or("weak_strong.delta", 0.0)?,
                    mode: mode3(&cfg, "weak_strong.mode", [2, 0, 0])?,
                })
            }
        };
        let series_default = match scenario {
            Scenario::Extend => Some("extension.ekpf".to_string()),
            _ => None,
        };
        let outputs = Outputs {
            csv: cfg.raw("output.csv").unwrap_or("diagnostics.csv").to_string(),
            report: cfg.raw("output.report").unwrap_or("report.json").to_string(),
            series: cfg.raw("output.series").map(str::to_string).or(series_default),
        };
        for name in [Some(&outputs.csv), Some(&outputs.report), outputs.series.as_ref()].into_iter().flatten() {
            if name.is_empty() || name.contains('/') || name.contains('\\') {
                return Err(ConfigError::field("output", format!("`{name}` must be a plain file name")));
            }
        }
        cfg.reject_unused()?;
        Ok(Self {
            scenario,
            seed,
            outputs,
            settings,
        })
    }
}
