//! Numerical spectral shift functions for non-self-adjoint perturbations
//! H = H0 + V of self-adjoint operators.
//!
//! Three mutually cross-validating pipelines compute the SSF: the
//! functional-calculus trace pairing Tr(f(H) - f(H0)), resolvent boundary
//! values of sigma(z) = Tr(R_H(z) - R_0(z)), and the phase-tracked
//! perturbation determinant. A dedicated engine handles 3D Schrodinger
//! operators with complex potentials, including spectral-singularity
//! detection on the essential spectrum.

pub mod aax;
pub mod error;
pub mod funcalc;
pub mod jet;
pub mod linalg;
pub mod operators;
pub mod quad;
pub mod schrodinger;
pub mod ssf_trace;
pub mod toy_models;

pub use error::{Result, SsfError};
pub use faer::c64;
