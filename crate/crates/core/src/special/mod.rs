//! Special functions and quadrature shared by every integral evaluation.

mod bessel;
mod quadrature;

pub use bessel::{bessel_j0, bessel_j1, bessel_j2, kernel_k1, kernel_retrieval, DomainError};
pub use quadrature::{
    integrate, integrate_samples, simpson_weight, Estimate, Integrand, NonConvergence,
    QuadratureOptions,
};
