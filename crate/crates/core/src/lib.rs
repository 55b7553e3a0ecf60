//! Randomized barrier walk for Beck–Fiala discrepancy, with baselines and an
//! experiment harness.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod rounding;
pub mod sampler;
pub mod walk;

pub use error::{Error, Result};
pub use instance::{canonicalize, discrepancy, CanonicalInstance, Coloring, SetSystem};
