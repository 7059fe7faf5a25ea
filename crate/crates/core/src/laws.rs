//! Constitutive laws: pressure `p`, internal energy `P` with
//! `P(ϱ) = ϱ ∫₁^ϱ p(z)/z² dz`, and the capillarity pair `K`, `χ = ϱK`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::scalar::{count, lit, to_f64, Real};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PressureLaw<T: Real> {
    /// `p = a ϱ^γ`, `γ > 1`, `a > 0`.
    Power { gamma: T, coefficient: T },
    Zero,
    /// `p = Σᵢ cᵢ ϱ^i`; entry `i` of `coefficients` multiplies `ϱ^(i+1)`,
    /// so `p(0) = 0` holds by construction.
    Polynomial { coefficients: Vec<T> },
}

impl<T: Real> PressureLaw<T> {
    pub fn power(gamma: T, coefficient: T) -> Result<Self> {
        if !(gamma > T::one()) || !gamma.is_finite() {
            return Err(Error::arg(format!("power-law exponent must exceed 1, got {gamma}")));
        }
        if !(coefficient > T::zero()) || !coefficient.is_finite() {
            return Err(Error::arg(format!(
                "power-law coefficient must be positive, got {coefficient}"
            )));
        }
        Ok(PressureLaw::Power { gamma, coefficient })
    }

    /// `p(ϱ) = ϱ²`.
    pub fn quadratic() -> Self {
        PressureLaw::Power {
            gamma: lit(2.0),
            coefficient: T::one(),
        }
    }

    pub fn polynomial(coefficients: Vec<T>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("polynomial pressure coefficients must be finite"));
        }
        Ok(PressureLaw::Polynomial { coefficients })
    }

    pub fn p(&self, rho: T) -> T {
        match self {
            PressureLaw::Power { gamma, coefficient } => *coefficient * rho.powf(*gamma),
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => horner(coefficients, rho) * rho,
        }
    }

    pub fn p_prime(&self, rho: T) -> T {
        match self {
            PressureLaw::Power { gamma, coefficient } => {
                *coefficient * *gamma * rho.powf(*gamma - T::one())
            }
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(i, &c)| c * count::<T>(i + 1) * rho.powi(i as i32))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    pub fn p_second(&self, rho: T) -> T {
        match self {
            PressureLaw::Power { gamma, coefficient } => {
                *coefficient * *gamma * (*gamma - T::one()) * rho.powf(*gamma - lit(2.0))
            }
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * count::<T>((i + 1) * i) * rho.powi(i as i32 - 1))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// Internal energy `P(ϱ)`; at `ϱ = 0` the continuous limit `0`.
    pub fn internal_energy(&self, rho: T) -> Result<T> {
        check_density(rho)?;
        if rho == T::zero() {
            return Ok(T::zero());
        }
        Ok(match self {
            PressureLaw::Power { gamma, coefficient } => {
                *coefficient * (rho.powf(*gamma) - rho) / (*gamma - T::one())
            }
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => rho * primitive_over_square(coefficients, rho),
        })
    }

    /// `P′(ϱ) = ∫₁^ϱ p(z)/z² dz + p(ϱ)/ϱ`, for `ϱ > 0`.
    pub fn internal_energy_prime(&self, rho: T) -> Result<T> {
        if !(rho > T::zero()) {
            return Err(Error::arg(format!("P′ needs a positive density, got {rho}")));
        }
        Ok(match self {
            PressureLaw::Power { gamma, coefficient } => {
                *coefficient * (*gamma * rho.powf(*gamma - T::one()) - T::one()) / (*gamma - T::one())
            }
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => {
                primitive_over_square(coefficients, rho) + horner(coefficients, rho)
            }
        })
    }

    /// `P(ϱ) − P′(r)(ϱ − r) − P(r)`.
    pub fn relative_pressure_gap(&self, rho: T, r: T) -> Result<T> {
        if !(r > T::zero()) {
            return Err(Error::arg(format!("reference density must be positive, got {r}")));
        }
        let big_p = self.internal_energy(rho)?;
        Ok(big_p - self.internal_energy_prime(r)? * (rho - r) - self.internal_energy(r)?)
    }

    /// Nonlinearity `f` with `f′(ϱ) = p′(ϱ)/ϱ` and `f(1) = 0`.
    pub fn enthalpy(&self, rho: T) -> T {
        match self {
            PressureLaw::Power { gamma, coefficient } => {
                *coefficient * *gamma * (rho.powf(*gamma - T::one()) - T::one()) / (*gamma - T::one())
            }
            PressureLaw::Zero => T::zero(),
            PressureLaw::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    if i == 0 {
                        c * rho.ln()
                    } else {
                        let k = count::<T>(i);
                        c * count::<T>(i + 1) * (rho.powi(i as i32) - T::one()) / k
                    }
                })
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// True when `p′ ≥ 0` on the given density interval, sampled densely.
    pub fn is_monotone_on(&self, lo: T, hi: T) -> bool {
        match self {
            PressureLaw::Power { .. } | PressureLaw::Zero => true,
            PressureLaw::Polynomial { .. } => (0..=256).all(|i| {
                let s = count::<T>(i) / lit(256.0);
                self.p_prime(lo + (hi - lo) * s) >= T::zero()
            }),
        }
    }

    pub fn pressure_field(&self, rho: &ScalarField<T>) -> ScalarField<T> {
        rho.map(|v| self.p(v))
    }

    pub fn internal_energy_field(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        let values = rho
            .values()
            .iter()
            .map(|&v| self.internal_energy(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField::from_raw(rho.grid(), values))
    }
}

fn check_density<T: Real>(rho: T) -> Result<()> {
    if rho < T::zero() || !rho.is_finite() {
        return Err(Error::arg(format!("density must be non-negative, got {}", to_f64(rho))));
    }
    Ok(())
}

/// `Σᵢ cᵢ x^i` with `coefficients[i] = cᵢ`.
fn horner<T: Real>(coefficients: &[T], x: T) -> T {
    coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

/// `∫₁^ϱ p(z)/z² dz` for the polynomial law.
fn primitive_over_square<T: Real>(coefficients: &[T], rho: T) -> T {
    coefficients
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == 0 {
                c * rho.ln()
            } else {
                c * (rho.powi(i as i32) - T::one()) / count::<T>(i)
            }
        })
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CapillarityLaw<T: Real> {
    /// `K ≡ k`, so `χ = kϱ`.
    ConstantK { k: T },
    /// `χ ≡ ħ^exponent / 4`; the default exponent is 2.
    Quantum { hbar: T, exponent: T },
    ConstantChi { chi: T },
    /// `χ = Σᵢ cᵢ ϱ^(i+1)` with non-negative coefficients, not all zero.
    Polynomial { coefficients: Vec<T> },
}

impl<T: Real> CapillarityLaw<T> {
    pub fn constant_k(k: T) -> Result<Self> {
        positive("capillarity constant", k)?;
        Ok(CapillarityLaw::ConstantK { k })
    }

    pub fn quantum(hbar: T) -> Result<Self> {
        Self::quantum_with_exponent(hbar, lit(2.0))
    }

    pub fn quantum_with_exponent(hbar: T, exponent: T) -> Result<Self> {
        positive("hbar", hbar)?;
        if !exponent.is_finite() {
            return Err(Error::arg("hbar exponent must be finite"));
        }
        Ok(CapillarityLaw::Quantum { hbar, exponent })
    }

    pub fn constant_chi(chi: T) -> Result<Self> {
        positive("chi", chi)?;
        Ok(CapillarityLaw::ConstantChi { chi })
    }

    pub fn polynomial(coefficients: Vec<T>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite() || *c < T::zero())
            || !coefficients.iter().any(|c| *c > T::zero())
        {
            return Err(Error::arg(
                "polynomial chi needs finite non-negative coefficients, at least one positive",
            ));
        }
        Ok(CapillarityLaw::Polynomial { coefficients })
    }

    pub fn chi(&self, rho: T) -> T {
        match self {
            CapillarityLaw::ConstantK { k } => *k * rho,
            CapillarityLaw::Quantum { .. } | CapillarityLaw::ConstantChi { .. } => self.chi_constant(),
            CapillarityLaw::Polynomial { coefficients } => horner(coefficients, rho) * rho,
        }
    }

    pub fn chi_prime(&self, rho: T) -> T {
        match self {
            CapillarityLaw::ConstantK { k } => *k,
            CapillarityLaw::Quantum { .. } | CapillarityLaw::ConstantChi { .. } => T::zero(),
            CapillarityLaw::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(i, &c)| c * count::<T>(i + 1) * rho.powi(i as i32))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// `K(ϱ) = χ(ϱ)/ϱ`, for `ϱ > 0`.
    pub fn k(&self, rho: T) -> T {
        match self {
            CapillarityLaw::ConstantK { k } => *k,
            CapillarityLaw::Quantum { .. } | CapillarityLaw::ConstantChi { .. } => {
                self.chi_constant() / rho
            }
            CapillarityLaw::Polynomial { coefficients } => horner(coefficients, rho),
        }
    }

    pub fn k_prime(&self, rho: T) -> T {
        match self {
            CapillarityLaw::ConstantK { .. } => T::zero(),
            CapillarityLaw::Quantum { .. } | CapillarityLaw::ConstantChi { .. } => {
                -self.chi_constant() / (rho * rho)
            }
            CapillarityLaw::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * count::<T>(i) * rho.powi(i as i32 - 1))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// The constant value of `K` when the law has one.
    pub fn constant_k_value(&self) -> Option<T> {
        match self {
            CapillarityLaw::ConstantK { k } => Some(*k),
            CapillarityLaw::Polynomial { coefficients }
                if coefficients.iter().skip(1).all(|c| *c == T::zero()) =>
            {
                coefficients.first().copied()
            }
            _ => None,
        }
    }

    /// `ħ` of the quantum law.
    pub fn hbar(&self) -> Option<T> {
        match self {
            CapillarityLaw::Quantum { hbar, .. } => Some(*hbar),
            _ => None,
        }
    }

    fn chi_constant(&self) -> T {
        match self {
            CapillarityLaw::Quantum { hbar, exponent } => hbar.powf(*exponent) / lit(4.0),
            CapillarityLaw::ConstantChi { chi } => *chi,
            _ => unreachable!("chi_constant on a density-dependent law"),
        }
    }

    pub fn chi_field(&self, rho: &ScalarField<T>) -> ScalarField<T> {
        rho.map(|v| self.chi(v))
    }
}

fn positive<T: Real>(what: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be positive, got {v}")))
    }
}
