//! Majorization, divergences and thermodynamic resource theories for
//! classical probability vectors and quantum states.

pub mod catalysis;
pub mod divergence;
pub mod error;
pub mod lp;
pub mod majorization;
pub mod prob;
pub mod qdivergence;
pub mod qmajorization;
pub mod quantum;
pub mod smoothing;
pub mod thermo;

pub use error::{Error, Result};
pub use prob::{GibbsSpec, Permutation, ProbVec, StochasticMatrix};
