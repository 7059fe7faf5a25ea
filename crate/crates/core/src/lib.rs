//! Numerical laboratory for the Euler-Korteweg-Poisson system on the
//! periodic torus.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix double precision, which the acceptance
//! tolerances assume.

pub mod error;
pub mod convexint;
pub mod dynamics;
pub mod extension;
pub mod fields;
pub mod korteweg;
pub mod laws;
pub mod madelung;
pub mod profiles;
pub mod relent;
pub mod scalar;
pub mod series;
pub mod whitney;

pub use error::{Error, Result};
pub use fields::{Grid, ScalarField, SymTensorField, VectorField};
pub use scalar::Real;

pub type Grid64 = Grid<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type SymTensorField64 = SymTensorField<f64>;
pub type PressureLaw64 = laws::PressureLaw<f64>;
pub type CapillarityLaw64 = laws::CapillarityLaw<f64>;
