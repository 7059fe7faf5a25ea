//! Periodic grids, sampled fields and spectral calculus on the torus.

mod field;
mod grid;
mod solvers;
mod spectral;

pub use field::{sym_index, ScalarField, SymTensorField, VectorField};
pub use grid::Grid;
pub use solvers::{helmholtz_project, inverse_laplacian, solve_poisson, solve_symmetric_div, Helmholtz};
pub use spectral::{
    dealias, dealias_vector, divergence, gradient, interpolate_at, laplacian, partial, resample,
    resample_vector, sample_scaled, tensor_divergence,
};

pub(crate) use field::ensure_finite;
pub(crate) use spectral::{
    apply_derivative, divergence_unchecked, gradient_unchecked, k_squared, laplacian_unchecked,
    tensor_divergence_unchecked,
};
#[cfg(test)]
pub(crate) use spectral::forward;
