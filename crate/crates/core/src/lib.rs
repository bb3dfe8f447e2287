//! Self-repelling diffusions on the flat circle `T_L`, reduced to a finite
//! spectral model: the position `x` and the environment coefficients `u`
//! evolve jointly, and the law `μ̂ = N(0, diag(1/(a_j|λ_j|))) ⊗ uniform` is
//! invariant.
//!
//! Modules:
//! - [`torus_basis`]: Laplace eigenbasis of `T_L` and exact trapezoid quadrature
//! - [`model`]: the spectral model, drift, generators, invariant law
//! - [`tensors`]: quartic interaction tensors `χ`, `χ̃` and the frequency selection rule
//! - [`bounds`]: closed-form relaxation-time bounds
//! - [`simulate`]: SDE integrators, exact OU sampler, ergodic statistics
//! - [`galerkin`]: Hermite ⊗ Fourier discretisation and measured relaxation times
//!
//! Numerical code is generic over [`Scalar`] (`f32`, `f64`) where it only
//! needs arithmetic; the Galerkin and statistics layers use `f64`.

pub mod bounds;
pub mod error;
pub mod galerkin;
pub mod hermite;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod tensors;
pub mod torus_basis;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SpectralModel64 = model::SpectralModel<f64>;
pub type SpectralModel32 = model::SpectralModel<f32>;
pub type SystemState64 = model::SystemState<f64>;
pub type ChiTensors64 = tensors::ChiTensors<f64>;
pub type BoundsReport64 = bounds::BoundsReport<f64>;
pub type IntegratorConfig64 = simulate::IntegratorConfig<f64>;
