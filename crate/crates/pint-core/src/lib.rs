//! Parallel-in-time solvers for fourth-order parabolic PDEs.
//!
//! The crate implements waveform-relaxation outer iterations whose inner
//! all-at-once space-time systems are solved by alpha-circulant
//! diagonalization: a scaled DFT across the time blocks, one independent
//! shifted spatial solve per time frequency, and the inverse transform.
//! Covered problems: the biharmonic heat equation, the linearized
//! Cahn-Hilliard equation, a general fourth-order operator, and the
//! nonlinear Cahn-Hilliard equation (fully implicit and Eyre-split
//! all-at-once variants solved by quasi-Newton with a time-averaged
//! Jacobian). Sequential reference integrators, closed-form convergence
//! factors, and physics diagnostics round out the toolkit.

pub mod band;
pub mod circulant;
pub mod diagnostics;
pub mod error;
pub mod pint_ch;
pub mod pint_linear;
pub mod spatial;
pub mod steppers;
pub mod theory;

pub use error::{Error, Result};
