//! The capillarity force in its direct form `ϱ∇(KΔϱ + ½K′|∇ϱ|²)` and as the
//! divergence of the stress
//! `𝒦 = [χΔϱ + ½χ′|∇ϱ|²] I − 4χ ∇√ϱ ⊗ ∇√ϱ`.

use crate::error::{Error, Result};
use crate::fields::{
    dealias_vector, gradient_unchecked, laplacian_unchecked, sym_index, tensor_divergence_unchecked,
    ScalarField, SymTensorField, VectorField,
};
use crate::laws::CapillarityLaw;
use crate::scalar::{lit, to_f64, Real};

/// Densities at or below this value are treated as vacuum.
pub const VACUUM_FLOOR: f64 = 1e-8;

pub(crate) fn check_positive<T: Real>(rho: &ScalarField<T>) -> Result<()> {
    rho.validate()?;
    let (min, index) = rho.min_with_index();
    if !(min > lit(VACUUM_FLOOR)) {
        return Err(Error::Vacuum {
            min: to_f64(min),
            index,
            floor: VACUUM_FLOOR,
        });
    }
    Ok(())
}

/// `ϱ∇(K(ϱ)Δϱ + ½K′(ϱ)|∇ϱ|²)`, dealiased.
pub fn korteweg_force_direct<T: Real>(
    rho: &ScalarField<T>,
    law: &CapillarityLaw<T>,
) -> Result<VectorField<T>> {
    check_positive(rho)?;
    Ok(force_direct_unchecked(rho, law))
}

pub(crate) fn force_direct_unchecked<T: Real>(rho: &ScalarField<T>, law: &CapillarityLaw<T>) -> VectorField<T> {
    let grad = gradient_unchecked(rho);
    let lap = laplacian_unchecked(rho);
    let g2 = grad.norm_squared();
    let half = lit::<T>(0.5);
    let mut bracket = lap.clone();
    for ((b, &r), &q) in bracket.values_mut().iter_mut().zip(rho.values()).zip(g2.values()) {
        *b = law.k(r) * *b + half * law.k_prime(r) * q;
    }
    let force = gradient_unchecked(&bracket).scale_by(rho);
    dealias_vector(&force)
}

/// `∇√ϱ`, differentiating the pointwise square root.
pub fn sqrt_gradient<T: Real>(rho: &ScalarField<T>) -> Result<VectorField<T>> {
    check_positive(rho)?;
    Ok(gradient_unchecked(&rho.map(|v| v.sqrt())))
}

/// The stress `𝒦(ϱ, ∇ϱ)`, not traceless.
pub fn korteweg_stress_tensor<T: Real>(
    rho: &ScalarField<T>,
    law: &CapillarityLaw<T>,
) -> Result<SymTensorField<T>> {
    check_positive(rho)?;
    Ok(stress_unchecked(rho, law))
}

pub(crate) fn stress_unchecked<T: Real>(rho: &ScalarField<T>, law: &CapillarityLaw<T>) -> SymTensorField<T> {
    let grid = rho.grid();
    let d = grid.dim();
    let grad = gradient_unchecked(rho);
    let lap = laplacian_unchecked(rho);
    let gs = gradient_unchecked(&rho.map(|v| v.sqrt()));
    let half = lit::<T>(0.5);
    let four = lit::<T>(4.0);
    let mut comps = vec![vec![T::zero(); grid.len()]; SymTensorField::<T>::storage_len(d)];
    for p in 0..grid.len() {
        let r = rho.values()[p];
        let chi = law.chi(r);
        let g = grad.at(p);
        let g2 = (0..d).fold(T::zero(), |a, i| a + g[i] * g[i]);
        let iso = chi * lap.values()[p] + half * law.chi_prime(r) * g2;
        let s = gs.at(p);
        for i in 0..d {
            for j in i..d {
                let mut v = -four * chi * s[i] * s[j];
                if i == j {
                    v = v + iso;
                }
                comps[sym_index(d, i, j)][p] = v;
            }
        }
    }
    SymTensorField::from_raw(grid, comps, false)
}

/// `‖F_direct − div 𝒦‖_max / (‖F_direct‖_max + 1e-30)`, both sides passed
/// through the same 2/3 filter.
pub fn korteweg_identity_residual<T: Real>(rho: &ScalarField<T>, law: &CapillarityLaw<T>) -> Result<T> {
    check_positive(rho)?;
    let direct = force_direct_unchecked(rho, law);
    let tensor = dealias_vector(&tensor_divergence_unchecked(&stress_unchecked(rho, law)));
    Ok(direct.sub(&tensor).max_abs() / (direct.max_abs() + lit(1e-30)))
}

/// Capillary energy density `2χ|∇√ϱ|²`.
pub fn capillary_energy_density<T: Real>(rho: &ScalarField<T>, law: &CapillarityLaw<T>) -> Result<ScalarField<T>> {
    let gs = sqrt_gradient(rho)?;
    let two = lit::<T>(2.0);
    Ok(rho.zip_map(&gs.norm_squared(), |r, q| two * law.chi(r) * q))
}

/// The same density in the form `½K|∇ϱ|²`.
pub fn capillary_energy_density_gradient_form<T: Real>(
    rho: &ScalarField<T>,
    law: &CapillarityLaw<T>,
) -> Result<ScalarField<T>> {
    check_positive(rho)?;
    let g2 = gradient_unchecked(rho).norm_squared();
    let half = lit::<T>(0.5);
    Ok(rho.zip_map(&g2, |r, q| half * law.k(r) * q))
}
