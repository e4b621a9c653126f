//! Density-matrix tomography from measurements of abelian subalgebras.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] dense complex kernels (Hermitian eigensolves, trace norm,
//!   unitary propagators) and the validated [`DensityMatrix`] type;
//! * [`su_basis`] the normalised su(N) generator basis, adjoint
//!   representation, Haar sampling and the special frames used by the
//!   finite protocols;
//! * [`reconstruct`] simulated measurements and three reconstruction
//!   routes (Haar Monte-Carlo inversion, Cartan + root frames, and the
//!   N² single-projector protocol);
//! * [`ambiguity`] the lift set of a diagonal state and its diameter;
//! * [`stochastic`] doubly stochastic maps induced by frames and their
//!   Birkhoff–von Neumann decomposition;
//! * [`coupled`] system/apparatus evolution and linear recovery of the
//!   system state from apparatus-side expectations;
//! * [`circle`] the particle-on-a-circle model driven by scalar mode
//!   equations;
//! * [`entropy`] Hausdorff–Young and entropic inequalities on the real
//!   line, U(1) and SU(2), plus spin tensor-operator tomography.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod circle;
pub mod coupled;
pub mod entropy;
pub mod error;
pub mod json;
pub mod linalg;
pub mod reconstruct;
pub mod rng;
pub mod stochastic;
pub mod su_basis;

pub use error::{Error, Result};
pub use linalg::{CMatrix, DensityMatrix, Tolerances, C64};
pub use su_basis::HermitianBasis;
