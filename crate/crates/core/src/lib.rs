//! Numerical toolkit for the n-system no-go measurement against
//! psi-epistemic ontological models.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: n-qubit state vectors, the three circuit gates and Born-rule
//!   probabilities.
//! * [`circuit`]: the minimal system count for a preparation angle, the
//!   `(alpha, beta)` parameter solver and the measurement it defines.
//! * [`verifier`]: end-to-end checks that every outcome is forbidden on one
//!   product preparation, including the explicit two-qubit basis.
//! * [`ontology`]: finite ontological models, total variation distance,
//!   overlap and the noise-tolerant bound `D >= 1 - 2 eps^(1/n)`.
//! * [`bounds`]: the discrimination objective `sigma`, its minimum over the
//!   circuit family, overlap upper bounds and region data.
//! * [`cli`]: the command-line front end.
//!
//! Basis indices put qubit 1 in the most significant bit.

pub mod bounds;
pub mod circuit;
pub mod cli;
pub mod error;
pub mod ontology;
pub mod qcore;
pub mod verifier;

pub use error::{Error, Result};
