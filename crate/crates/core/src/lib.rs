//! Privacy–utility analysis for differentially private releases.

pub mod csvout;
pub mod advisor;
pub mod api;
pub mod attacksim;
pub mod error;
pub mod numerics;
pub mod risk;
pub mod tradeoff;
pub mod utility;

pub use error::{Error, ErrorCategory, Result};

/// Version string stamped on every serialized result.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
