//! Extension of initial data to `[0, T]`: the density is transported by
//! `U₀ − Z(t)`, with the homogeneous drift `Z` fixed by
//! `e^t∫ϱ(U₀ − Z) = ∫ϱ₀U₀`, and the momentum `J̃ = ϱ(U₀ − Z)` is then
//! rewritten through its Helmholtz decomposition into the quantities
//! `r, h, Π, H, e` used by the subsolution criterion.

use serde::Serialize;

use crate::dynamics::{electric_potential, AbortReason};
use crate::error::{Error, Result};
use crate::fields::{
    dealias, divergence_unchecked, gradient_unchecked, helmholtz_project, laplacian_unchecked, sym_index,
    ScalarField, SymTensorField, VectorField,
};
use crate::korteweg::VACUUM_FLOOR;
use crate::laws::{CapillarityLaw, PressureLaw};
use crate::scalar::{count, lit, to_f64, Real};
use crate::series::{derivative_scalars, derivative_vectors, lagrange_cubic, uniform_times};

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData<T: Real> {
    pub rho0: ScalarField<T>,
    pub u0: VectorField<T>,
}

impl<T: Real> InitialData<T> {
    pub fn new(rho0: ScalarField<T>, u0: VectorField<T>) -> Result<Self> {
        if !rho0.grid().same_as(u0.grid()) {
            return Err(Error::GridMismatch);
        }
        rho0.validate()?;
        u0.validate()?;
        if rho0.min() < T::zero() {
            return Err(Error::arg("initial density must be non-negative"));
        }
        Ok(Self { rho0, u0 })
    }

    /// `ϱ₀ = r₀²`.
    pub fn from_root(r0: &ScalarField<T>, u0: VectorField<T>) -> Result<Self> {
        Self::new(r0.map(|v| v * v), u0)
    }

    pub fn j0(&self) -> VectorField<T> {
        self.u0.scale_by(&self.rho0)
    }
}

/// Drift samples on the time grid; unused trailing components are zero.
pub type Drift<T> = Vec<[T; 3]>;

/// `0.25·h / (max|U₀| + 1)`, the default transport step.
pub fn advective_dt<T: Real>(data: &InitialData<T>) -> T {
    let h = data.rho0.grid().spacing();
    lit::<T>(0.25) * h / (data.u0.max_norm() + T::one())
}

fn step_count<T: Real>(t_final: T, dt: T) -> Result<usize> {
    if !(t_final > T::zero()) || !(dt > T::zero()) || !t_final.is_finite() || !dt.is_finite() {
        return Err(Error::arg("final time and step must be positive"));
    }
    Ok((t_final / dt).ceil().to_usize().unwrap_or(0).max(4))
}

fn transport_rhs<T: Real>(rho: &ScalarField<T>, u0: &VectorField<T>, z: [T; 3]) -> ScalarField<T> {
    let d = u0.dim();
    let comps = (0..d)
        .map(|a| {
            rho.values()
                .iter()
                .zip(u0.component(a))
                .map(|(&r, &u)| r * (u - z[a]))
                .collect()
        })
        .collect();
    let flux = VectorField::from_raw(rho.grid(), comps);
    dealias(&divergence_unchecked(&flux).scale(-T::one()))
}

/// Density series solving `ϱ_t + div(ϱ[U₀ − Z]) = 0` by RK4 on the time grid
/// of `z`, with `Z` at half steps from cubic interpolation.
pub fn transport_density<T: Real>(
    data: &InitialData<T>,
    z: &[[T; 3]],
    t_final: T,
) -> std::result::Result<Vec<ScalarField<T>>, AbortReason> {
    let steps = z.len().saturating_sub(1);
    assert!(steps >= 1, "drift series needs at least two samples");
    let dt = t_final / count(steps);
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(z.len());
    out.push(data.rho0.clone());
    let mut rho = data.rho0.clone();
    for n in 0..steps {
        let z0 = z[n];
        let zm = lagrange_cubic(z, count::<T>(n) + half);
        let z1 = z[n + 1];
        let k1 = transport_rhs(&rho, &data.u0, z0);
        let mut s = rho.clone();
        s.add_scaled(half * dt, &k1);
        let k2 = transport_rhs(&s, &data.u0, zm);
        let mut s = rho.clone();
        s.add_scaled(half * dt, &k2);
        let k3 = transport_rhs(&s, &data.u0, zm);
        let mut s = rho.clone();
        s.add_scaled(dt, &k3);
        let k4 = transport_rhs(&s, &data.u0, z1);
        let before = rho.max_abs();
        let w = dt / lit(6.0);
        for (c, k) in [(w, &k1), (w + w, &k2), (w + w, &k3), (w, &k4)] {
            rho.add_scaled(c, k);
        }
        let after = rho.max_abs();
        if !after.is_finite() || after > lit::<T>(10.0) * before {
            return Err(AbortReason::Instability {
                time: to_f64(dt * count(n)),
                growth: to_f64(after / before),
            });
        }
        out.push(rho.clone());
    }
    Ok(out)
}

fn weighted_mean<T: Real>(rho: &ScalarField<T>, u: &VectorField<T>) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (a, o) in out.iter_mut().enumerate().take(u.dim()) {
        *o = rho
            .values()
            .iter()
            .zip(u.component(a))
            .map(|(&r, &v)| r * v)
            .sum::<T>()
            * rho.grid().cell_volume();
    }
    out
}

/// `𝒯[Z](t) = (∫ϱ₀)⁻¹(∫ϱ(t)U₀ − e^{−t}∫ϱ₀U₀)` on the time grid.
fn fixed_point_map<T: Real>(data: &InitialData<T>, rho: &[ScalarField<T>], times: &[T]) -> Drift<T> {
    let mass0 = data.rho0.integral();
    let m0 = weighted_mean(&data.rho0, &data.u0);
    rho.iter()
        .zip(times)
        .map(|(r, &t)| {
            let m = weighted_mean(r, &data.u0);
            let decay = (-t).exp();
            let mut z = [T::zero(); 3];
            for a in 0..3 {
                z[a] = (m[a] - decay * m0[a]) / mass0;
            }
            z
        })
        .collect()
}

/// `sup_t |e^t∫ϱ[U₀ − Z] − ∫ϱ₀U₀| / (|∫ϱ₀U₀| + 1)`.
pub fn drift_residual<T: Real>(data: &InitialData<T>, rho: &[ScalarField<T>], z: &[[T; 3]], times: &[T]) -> T {
    let m0 = weighted_mean(&data.rho0, &data.u0);
    let scale = m0.iter().fold(T::zero(), |a, &v| a + v * v).sqrt() + T::one();
    let mut worst = T::zero();
    for ((r, zt), &t) in rho.iter().zip(z).zip(times) {
        let m = weighted_mean(r, &data.u0);
        let mass = r.integral();
        let growth = t.exp();
        let mut gap = T::zero();
        for a in 0..3 {
            let g = growth * (m[a] - zt[a] * mass) - m0[a];
            gap = gap + g * g;
        }
        worst = worst.max(gap.sqrt() / scale);
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftSolution<T: Real> {
    pub times: Vec<T>,
    pub z: Drift<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `max_t |Z_{k+1} − Z_k|` per iteration.
    pub increments: Vec<T>,
    /// Defining-relation residual of the returned drift.
    pub residual: T,
}

pub const PICARD_RELAXATION: f64 = 0.5;
pub const PICARD_TOLERANCE: f64 = 1e-10;
pub const PICARD_MAX_ITERATIONS: usize = 200;

/// Damped Picard iteration `Z ← ½Z + ½𝒯[Z]` from `Z = 0`.
pub fn solve_z<T: Real>(data: &InitialData<T>, t_final: T, dt: T) -> Result<DriftSolution<T>> {
    let mass0 = data.rho0.integral();
    if !(mass0 > T::zero()) {
        return Err(Error::arg("initial mass must be positive"));
    }
    let steps = step_count(t_final, dt)?;
    let times = uniform_times(T::zero(), t_final, steps);
    let theta = lit::<T>(PICARD_RELAXATION);
    let mut z: Drift<T> = vec![[T::zero(); 3]; steps + 1];
    let mut increments = Vec::new();
    let mut converged = false;
    let mut rho = Vec::new();
    for _ in 0..PICARD_MAX_ITERATIONS {
        rho = transport_density(data, &z, t_final).map_err(|r| Error::arg(format!("transport failed: {r}")))?;
        let tz = fixed_point_map(data, &rho, &times);
        let mut inc = T::zero();
        for (zk, tk) in z.iter_mut().zip(&tz) {
            for a in 0..3 {
                let next = (T::one() - theta) * zk[a] + theta * tk[a];
                inc = inc.max((next - zk[a]).abs());
                zk[a] = next;
            }
        }
        increments.push(inc);
        if inc < lit(PICARD_TOLERANCE) {
            converged = true;
            break;
        }
    }
    rho = transport_density(data, &z, t_final).unwrap_or(rho);
    let residual = drift_residual(data, &rho, &z, &times);
    Ok(DriftSolution {
        times,
        z,
        iterations: increments.len(),
        converged,
        increments,
        residual,
    })
}

/// The extended pair `(ϱ, J̃)` on the time grid.
#[derive(Clone, Debug)]
pub struct Extension<T: Real> {
    pub times: Vec<T>,
    pub z: Drift<T>,
    pub rho: Vec<ScalarField<T>>,
    pub j_tilde: Vec<VectorField<T>>,
}

impl<T: Real> Extension<T> {
    pub fn dt(&self) -> T {
        self.times[1] - self.times[0]
    }
}

pub fn extend<T: Real>(data: &InitialData<T>, drift: &DriftSolution<T>) -> Result<Extension<T>> {
    let t_final = *drift.times.last().expect("drift has samples");
    let rho = transport_density(data, &drift.z, t_final).map_err(|r| Error::arg(format!("transport failed: {r}")))?;
    let d = data.u0.dim();
    let j_tilde = rho
        .iter()
        .zip(&drift.z)
        .map(|(r, z)| {
            let comps = (0..d)
                .map(|a| {
                    r.values()
                        .iter()
                        .zip(data.u0.component(a))
                        .map(|(&rv, &u)| rv * (u - z[a]))
                        .collect()
                })
                .collect();
            VectorField::from_raw(r.grid(), comps)
        })
        .collect();
    Ok(Extension {
        times: drift.times.clone(),
        z: drift.z.clone(),
        rho,
        j_tilde,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// `sup_t |e^t∫J̃ − ∫J₀| / (|∫J₀| + 1)`.
    pub momentum_residual: f64,
    /// `sup_t |∂_t∫H[J̃] + ∫H[J̃]| / (|∫J₀| + 1)`, derivative by differencing.
    pub decay_residual: f64,
    /// `sup_{t,x}` of `½|J̃|²/ϱ + P(ϱ) + ½K(ϱ)|∇ϱ|²` over points with `ϱ > ε`.
    pub energy_bound: f64,
    /// Largest fraction of grid points with `ϱ ≤ ε` at any sample time.
    pub vacuum_fraction: f64,
    pub mass_drift: f64,
    pub max_density: f64,
}

pub fn verify_extension<T: Real>(
    data: &InitialData<T>,
    ext: &Extension<T>,
    pressure: &PressureLaw<T>,
    capillarity: &CapillarityLaw<T>,
) -> Result<ExtensionReport> {
    let j0 = data.j0().integral();
    let scale = j0.iter().fold(T::zero(), |a, &v| a + v * v).sqrt() + T::one();
    let d = data.u0.dim();
    let mut momentum = T::zero();
    let mut means: Vec<ScalarField<T>> = Vec::new();
    let unit = crate::fields::Grid::new(1, 8, T::one())?;
    for (j, &t) in ext.j_tilde.iter().zip(&ext.times) {
        let proj = helmholtz_project(j)?;
        let m = proj.solenoidal.integral();
        let mut gap = T::zero();
        for (a, &jm) in j.integral().iter().enumerate() {
            let g = t.exp() * jm - j0[a];
            gap = gap + g * g;
        }
        momentum = momentum.max(gap.sqrt() / scale);
        // one constant frame per time so the series differentiator applies
        let mut frame = vec![T::zero(); unit.len()];
        for (a, v) in m.iter().enumerate().take(d) {
            frame[a] = *v;
        }
        means.push(ScalarField::from_raw(&unit, frame));
    }
    let dm = derivative_scalars(&means, ext.dt())?;
    let mut decay = T::zero();
    for (m, dmv) in means.iter().zip(&dm) {
        let mut gap = T::zero();
        for a in 0..d {
            let g = dmv.values()[a] + m.values()[a];
            gap = gap + g * g;
        }
        decay = decay.max(gap.sqrt() / scale);
    }
    let half = lit::<T>(0.5);
    let floor = lit::<T>(VACUUM_FLOOR);
    let mass0 = data.rho0.integral();
    let mut energy_bound = T::zero();
    let mut vacuum = 0.0f64;
    let mut mass_drift = T::zero();
    let mut max_density = T::zero();
    for (rho, j) in ext.rho.iter().zip(&ext.j_tilde) {
        let g2 = gradient_unchecked(rho).norm_squared();
        let j2 = j.norm_squared();
        let mut breaches = 0usize;
        for p in 0..rho.values().len() {
            let r = rho.values()[p];
            if r <= floor {
                breaches += 1;
                continue;
            }
            let e = half * j2.values()[p] / r
                + pressure.internal_energy(r)?
                + half * capillarity.k(r) * g2.values()[p];
            energy_bound = energy_bound.max(e);
        }
        vacuum = vacuum.max(breaches as f64 / rho.values().len() as f64);
        mass_drift = mass_drift.max((rho.integral() - mass0).abs() / mass0);
        max_density = max_density.max(rho.max());
    }
    Ok(ExtensionReport {
        momentum_residual: to_f64(momentum),
        decay_residual: to_f64(decay),
        energy_bound: to_f64(energy_bound),
        vacuum_fraction: vacuum,
        mass_drift: to_f64(mass_drift),
        max_density: to_f64(max_density),
    })
}

/// The homogeneous function `ω(t)` in `e = ω − (d/2)Π`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Omega<T: Real> {
    /// `ω(t) = e^{−2t} M`.
    Exponential { m: T },
    /// One value per sample time.
    Tabulated { values: Vec<T> },
}

impl<T: Real> Omega<T> {
    pub fn sample(&self, times: &[T]) -> Result<Vec<T>> {
        match self {
            Omega::Exponential { m } => Ok(times.iter().map(|&t| (lit::<T>(-2.0) * t).exp() * *m).collect()),
            Omega::Tabulated { values } if values.len() == times.len() => Ok(values.clone()),
            Omega::Tabulated { values } => Err(Error::SeriesMismatch(format!(
                "omega has {} samples for {} times",
                values.len(),
                times.len()
            ))),
        }
    }
}

/// Largest vacuum fraction accepted by [`reformulate`].
pub const VACUUM_FRACTION_LIMIT: f64 = 1e-3;

/// Reformulated data on the time grid.
#[derive(Clone, Debug)]
pub struct SubsolutionData<T: Real> {
    pub times: Vec<T>,
    pub rho: Vec<ScalarField<T>>,
    pub j_tilde: Vec<VectorField<T>>,
    /// `H[J̃]`, solenoidal part of `J̃`.
    pub solenoidal: Vec<VectorField<T>>,
    /// Potential `M` of `∇M = J̃ − H[J̃]`.
    pub m: Vec<ScalarField<T>>,
    pub v_field: Vec<ScalarField<T>>,
    pub r: Vec<ScalarField<T>>,
    pub h: Vec<VectorField<T>>,
    pub pi: Vec<ScalarField<T>>,
    pub big_h: Vec<SymTensorField<T>>,
    pub omega: Vec<T>,
    pub e: Vec<ScalarField<T>>,
}

impl<T: Real> SubsolutionData<T> {
    pub fn dim(&self) -> usize {
        self.rho[0].grid().dim()
    }

    pub fn dt(&self) -> T {
        self.times[1] - self.times[0]
    }

    /// Recomputes `e = ω − (d/2)Π` for a new `ω`.
    pub fn set_omega(&mut self, omega: &Omega<T>) -> Result<()> {
        self.omega = omega.sample(&self.times)?;
        let half_d = count::<T>(self.dim()) / lit(2.0);
        self.e = self
            .pi
            .iter()
            .zip(&self.omega)
            .map(|(pi, &w)| pi.map(|v| w - half_d * v))
            .collect();
        Ok(())
    }
}

/// `ϱ∇V` against `div(∇V⊗∇V − (1/d)|∇V|²I) + ∇(ϱ̄V + (1/d − ½)|∇V|²)`;
/// returns the max-norm gap relative to `‖ϱ∇V‖_max + 1e-30`.
pub fn electrostatic_identity_residual<T: Real>(rho: &ScalarField<T>) -> Result<T> {
    rho.validate()?;
    let d = rho.grid().dim();
    let v = electric_potential(rho);
    let gv = gradient_unchecked(&v);
    let inv_d = T::one() / count(d);
    let g2 = gv.norm_squared();
    let mut stress = SymTensorField::outer(&gv, &gv);
    for i in 0..d {
        for (s, &q) in stress.entry_mut(i, i).iter_mut().zip(g2.values()) {
            *s = *s - inv_d * q;
        }
    }
    let mean = rho.mean();
    let scalar = v.zip_map(&g2, |vv, q| mean * vv + (inv_d - lit(0.5)) * q);
    let rhs = crate::fields::tensor_divergence(&stress)?.add(&gradient_unchecked(&scalar));
    let lhs = gv.scale_by(rho);
    Ok(lhs.sub(&rhs).max_abs() / (lhs.max_abs() + lit(1e-30)))
}

/// Builds `r = e^tϱ`, `h = e^t∇M`, `Π`, `H` and `e` from the extension.
///
/// In dimension `d`,
/// `H = 4e^t(χ∇√ϱ⊗∇√ϱ − (1/d)χ|∇√ϱ|²I − ¼∇V⊗∇V + (1/4d)|∇V|²I)` and
/// `Π = e^t(p + ∂_tM + M − χΔϱ − ½χ′|∇ϱ|² + (4/d)χ|∇√ϱ|² − ϱ̄V + (½ − 1/d)|∇V|²)`.
pub fn reformulate<T: Real>(
    ext: &Extension<T>,
    pressure: &PressureLaw<T>,
    capillarity: &CapillarityLaw<T>,
    omega: &Omega<T>,
) -> Result<SubsolutionData<T>> {
    let floor = lit::<T>(VACUUM_FLOOR);
    let total: usize = ext.rho.iter().map(|r| r.values().len()).sum();
    let breaches: usize = ext
        .rho
        .iter()
        .map(|r| r.values().iter().filter(|&&v| v <= floor).count())
        .sum();
    let fraction = breaches as f64 / total as f64;
    if fraction > VACUUM_FRACTION_LIMIT {
        return Err(Error::VacuumFraction {
            fraction,
            allowed: VACUUM_FRACTION_LIMIT,
        });
    }
    let grid = ext.rho[0].grid().clone();
    let d = grid.dim();
    let inv_d = T::one() / count(d);
    let half = lit::<T>(0.5);
    let four = lit::<T>(4.0);

    let mut solenoidal = Vec::with_capacity(ext.times.len());
    let mut m = Vec::with_capacity(ext.times.len());
    for j in &ext.j_tilde {
        let proj = helmholtz_project(j)?;
        solenoidal.push(proj.solenoidal);
        m.push(proj.potential);
    }
    let dm = derivative_scalars(&m, ext.dt())?;

    let mut out = SubsolutionData {
        times: ext.times.clone(),
        rho: ext.rho.clone(),
        j_tilde: ext.j_tilde.clone(),
        solenoidal,
        m: m.clone(),
        v_field: Vec::new(),
        r: Vec::new(),
        h: Vec::new(),
        pi: Vec::new(),
        big_h: Vec::new(),
        omega: Vec::new(),
        e: Vec::new(),
    };
    for (n, &t) in ext.times.iter().enumerate() {
        let rho = &ext.rho[n];
        let growth = t.exp();
        let rho_bar = rho.mean();
        let v = electric_potential(rho);
        let gv = gradient_unchecked(&v);
        let grad = gradient_unchecked(rho);
        let lap = laplacian_unchecked(rho);
        let gs = gradient_unchecked(&rho.map(|x| x.max(T::zero()).sqrt()));
        let gm = gradient_unchecked(&m[n]);

        let mut pi = vec![T::zero(); grid.len()];
        let mut comps = vec![vec![T::zero(); grid.len()]; SymTensorField::<T>::storage_len(d)];
        for p in 0..grid.len() {
            let r = rho.values()[p];
            let chi = capillarity.chi(r);
            let g = grad.at(p);
            let s = gs.at(p);
            let e_v = gv.at(p);
            let g2 = (0..d).fold(T::zero(), |a, i| a + g[i] * g[i]);
            let s2 = (0..d).fold(T::zero(), |a, i| a + s[i] * s[i]);
            let v2 = (0..d).fold(T::zero(), |a, i| a + e_v[i] * e_v[i]);
            pi[p] = growth
                * (pressure.p(r) + dm[n].values()[p] + m[n].values()[p]
                    - chi * lap.values()[p]
                    - half * capillarity.chi_prime(r) * g2
                    + four * inv_d * chi * s2
                    - rho_bar * v.values()[p]
                    + (half - inv_d) * v2);
            for i in 0..d {
                for k in i..d {
                    let mut val = chi * s[i] * s[k] - lit::<T>(0.25) * e_v[i] * e_v[k];
                    if i == k {
                        val = val - inv_d * chi * s2 + lit::<T>(0.25) * inv_d * v2;
                    }
                    comps[sym_index(d, i, k)][p] = four * growth * val;
                }
            }
        }
        out.v_field.push(v);
        out.r.push(rho.scale(growth));
        out.h.push(gm.scale(growth));
        out.pi.push(ScalarField::from_raw(&grid, pi));
        // exact tracelessness up to round-off; project it out
        out.big_h.push(SymTensorField::from_raw(&grid, comps, false).deviatoric());
    }
    out.set_omega(omega)?;
    Ok(out)
}

/// Time derivative of `v = e^t H[J̃]` by fourth-order differencing.
pub fn solenoidal_growth_derivative<T: Real>(s: &SubsolutionData<T>) -> Result<Vec<VectorField<T>>> {
    let v: Vec<VectorField<T>> = s
        .solenoidal
        .iter()
        .zip(&s.times)
        .map(|(f, &t)| f.scale(t.exp()))
        .collect();
    derivative_vectors(&v, s.dt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::TAU;

    fn constant_data(dim: usize, u: [f64; 3]) -> InitialData<f64> {
        let g = Grid::<f64>::unit(dim, 16).unwrap();
        InitialData::new(ScalarField::constant(&g, 1.3), VectorField::constant(&g, &u[..dim])).unwrap()
    }

    fn smooth_data(dim: usize, n: usize) -> InitialData<f64> {
        let g = Grid::<f64>::unit(dim, n).unwrap();
        let r0 = ScalarField::from_fn(&g, |x| 1.0 + 0.2 * (TAU * x[0]).sin() * (TAU * x[1]).cos());
        let u0 = VectorField::from_fn(&g, |x| {
            [0.5 + 0.3 * (TAU * x[1]).sin(), -0.2 + 0.25 * (TAU * x[0]).cos(), 0.1]
        });
        InitialData::from_root(&r0, u0).unwrap()
    }

    #[test]
    fn zero_velocity_keeps_density() {
        let g = Grid::<f64>::unit(1, 16).unwrap();
        let rho0 = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * (TAU * x[0]).sin());
        let data = InitialData::new(rho0.clone(), VectorField::zeros(&g)).unwrap();
        let z = vec![[0.0; 3]; 11];
        for rho in transport_density(&data, &z, 1.0).unwrap() {
            assert!(rho.sub(&rho0).max_abs() < 1e-15);
        }
        let sol = solve_z(&data, 1.0, 0.1).unwrap();
        assert!(sol.z.iter().all(|z| z.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn constant_velocity_shifts_density() {
        let g = Grid::<f64>::unit(1, 32).unwrap();
        let rho0 = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * (TAU * x[0]).sin() + 0.1 * (TAU * 3.0 * x[0]).cos());
        let data = InitialData::new(rho0, VectorField::constant(&g, &[0.7])).unwrap();
        let steps = 200;
        let z = vec![[0.0; 3]; steps + 1];
        let out = transport_density(&data, &z, 1.0).unwrap();
        let last = out.last().unwrap();
        for p in 0..g.len() {
            let x = g.point(p)[0] - 0.7;
            let want = 1.0 + 0.3 * (TAU * x).sin() + 0.1 * (TAU * 3.0 * x).cos();
            assert!((last.values()[p] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn mass_is_conserved_over_unit_time() {
        let data = smooth_data(2, 32);
        let sol = solve_z(&data, 1.0, advective_dt(&data)).unwrap();
        let ext = extend(&data, &sol).unwrap();
        let m0 = data.rho0.integral();
        for rho in &ext.rho {
            assert!((rho.integral() - m0).abs() < 1e-10 * m0);
        }
    }

    #[test]
    fn constant_data_closed_form_drift() {
        let u = [0.4, -1.1, 0.0];
        let data = constant_data(2, u);
        let sol = solve_z(&data, 1.0, 0.05).unwrap();
        assert!(sol.converged);
        for (z, &t) in sol.z.iter().zip(&sol.times) {
            for a in 0..2 {
                assert!((z[a] - u[a] * (1.0 - (-t).exp())).abs() < 1e-8);
            }
        }
        assert_eq!(sol.z[0], [0.0; 3]);
        let ext = extend(&data, &sol).unwrap();
        let rep = verify_extension(&data, &ext, &PressureLaw::quadratic(), &CapillarityLaw::constant_k(1.0).unwrap())
            .unwrap();
        assert!(rep.momentum_residual < 1e-8);
        assert!(rep.decay_residual < 1e-6);
    }

    #[test]
    fn smooth_data_fixed_point_certificate() {
        let data = smooth_data(2, 32);
        let sol = solve_z(&data, 0.5, advective_dt(&data)).unwrap();
        assert!(sol.converged, "{:?}", sol.increments.last());
        assert!(sol.iterations <= PICARD_MAX_ITERATIONS);
        assert!(sol.residual < 1e-8, "{}", sol.residual);
        let ext = extend(&data, &sol).unwrap();
        let rep = verify_extension(&data, &ext, &PressureLaw::quadratic(), &CapillarityLaw::constant_k(1.0).unwrap())
            .unwrap();
        assert!(rep.momentum_residual < 1e-8);
        assert!(rep.decay_residual < 1e-6, "{}", rep.decay_residual);
        assert!(rep.energy_bound.is_finite() && rep.vacuum_fraction == 0.0);
    }

    #[test]
    fn density_maximum_bounded_by_compression() {
        let data = smooth_data(2, 32);
        let div_u = crate::fields::divergence(&data.u0).unwrap().max_abs();
        let t_final = 0.5;
        let steps = 40;
        for zc in [[0.0, 0.0, 0.0], [0.8, -0.3, 0.0]] {
            let z = vec![zc; steps + 1];
            let out = transport_density(&data, &z, t_final).unwrap();
            let bound = data.rho0.max() * (t_final * div_u).exp();
            for rho in &out {
                assert!(rho.max() <= bound * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn reformulated_tensor_is_traceless_and_static_without_flow() {
        let g = Grid::<f64>::unit(2, 32).unwrap();
        let rho0 = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * (TAU * x[0]).cos() * (TAU * x[1]).sin());
        let data = InitialData::new(rho0, VectorField::zeros(&g)).unwrap();
        let sol = solve_z(&data, 0.2, 0.02).unwrap();
        let ext = extend(&data, &sol).unwrap();
        let cap = CapillarityLaw::quantum(1.0).unwrap();
        let s = reformulate(&ext, &PressureLaw::quadratic(), &cap, &Omega::Exponential { m: 10.0 }).unwrap();
        for (n, &t) in s.times.iter().enumerate() {
            assert!(s.h[n].max_abs() < 1e-14);
            assert!(s.big_h[n].trace().max_abs() < 1e-10);
            let back = s.pi[n].scale((-t).exp());
            assert!(back.sub(&s.pi[0]).max_abs() < 1e-12 * (1.0 + s.pi[0].max_abs()));
        }
    }

    #[test]
    fn trace_vanishes_for_flowing_data() {
        let data = smooth_data(3, 16);
        let sol = solve_z(&data, 0.1, advective_dt(&data)).unwrap();
        let ext = extend(&data, &sol).unwrap();
        let cap = CapillarityLaw::constant_k(0.5).unwrap();
        let s = reformulate(&ext, &PressureLaw::quadratic(), &cap, &Omega::Exponential { m: 1.0 }).unwrap();
        for h in &s.big_h {
            assert!(h.trace().max_abs() < 1e-10);
        }
        // mean of the time derivative of v vanishes by the decay relation
        for dv in solenoidal_growth_derivative(&s).unwrap() {
            for m in dv.mean() {
                assert!(m.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn electrostatic_identity() {
        for dim in [1, 2, 3] {
            let g = Grid::<f64>::unit(dim, 32).unwrap();
            let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.4 * (TAU * x[0]).sin() + 0.2 * (TAU * (x[1] - x[2])).cos());
            assert!(electrostatic_identity_residual(&rho).unwrap() < 1e-8);
        }
    }

    #[test]
    fn reformulate_rejects_vacuum() {
        let g = Grid::<f64>::unit(1, 16).unwrap();
        let rho0 = ScalarField::from_fn(&g, |x| (TAU * x[0]).sin().powi(2));
        let data = InitialData::new(rho0, VectorField::zeros(&g)).unwrap();
        let sol = solve_z(&data, 0.1, 0.02).unwrap();
        let ext = extend(&data, &sol).unwrap();
        let err = reformulate(
            &ext,
            &PressureLaw::Zero,
            &CapillarityLaw::constant_k(1.0).unwrap(),
            &Omega::Exponential { m: 1.0 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::VacuumFraction { .. }));
    }
}
