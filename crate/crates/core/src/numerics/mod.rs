//! Numerical building blocks: noise distributions and monotone root finding.

pub mod distributions;
pub mod roots;

pub use distributions::{
    normal_cdf, normal_quantile, normal_sf, NoiseDistribution, NoiseFamily, StandardLaplace,
    StandardLogistic, StandardNormal,
};
pub use roots::{smallest_satisfying, solve_increasing, SearchOptions, SearchOutcome};
