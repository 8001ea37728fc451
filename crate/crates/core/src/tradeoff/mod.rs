//! Trade-off functions of release mechanisms.
//!
//! A trade-off function maps a false-positive rate α of a membership test
//! to the smallest achievable false-negative rate β. Built-in mechanisms
//! use closed forms; custom log-concave noise goes through
//! `f(α) = F(F⁻¹(1 − α) − μ)` with the caller's distribution.

mod mechanism;

use std::io;

use serde::{Serialize, Serializer};

pub use mechanism::{MechanismKind, MechanismSpec, MechanismWire};

use crate::error::{check_probability, Error, Result};
use crate::numerics::{NoiseDistribution, StandardLaplace, StandardNormal};
use crate::risk::{probe_verdict, ProbeVerdict};

/// What is known analytically about the relative disclosure risk of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskBound {
    Bounded(f64),
    Unbounded,
    NotAnalyzed,
}

impl Serialize for RiskBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RiskBound::Bounded(rho) => s.serialize_f64(*rho),
            RiskBound::Unbounded => s.serialize_str("unbounded"),
            RiskBound::NotAnalyzed => s.serialize_str("not-analyzed"),
        }
    }
}

/// Evaluable trade-off function with its analytic metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    mech: MechanismSpec,
    f_at_zero: f64,
    convex: bool,
    risk: RiskBound,
}

/// Probe levels 10^-1 … 10^-9 used to analyse custom curves.
pub const RISK_PROBE_LEVELS: [f64; 9] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

const AUDIT_POINTS: usize = 1001;

impl TradeoffCurve {
    pub fn new(mech: MechanismSpec) -> Result<Self> {
        mech.validate()?;
        let mut curve = TradeoffCurve {
            mech,
            f_at_zero: 1.0,
            convex: true,
            risk: RiskBound::NotAnalyzed,
        };
        curve.f_at_zero = curve.beta_unchecked(0.0);
        curve.risk = curve.analyse_risk();
        if let MechanismSpec::CustomLogConcave { .. } = curve.mech {
            curve.convex = curve.audit_convexity();
        }
        Ok(curve)
    }

    pub fn mechanism(&self) -> &MechanismSpec {
        &self.mech
    }

    pub fn f_at_zero(&self) -> f64 {
        self.f_at_zero
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    pub fn risk_bound(&self) -> RiskBound {
        self.risk
    }

    /// β = f(α).
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        check_probability("alpha", alpha)?;
        Ok(self.beta_unchecked(alpha))
    }

    /// Power 1 − f(α) of the most powerful test at level α, computed without
    /// cancellation in the small-α tail.
    pub fn power(&self, alpha: f64) -> Result<f64> {
        check_probability("alpha", alpha)?;
        Ok(self.power_unchecked(alpha))
    }

    pub fn sample(&self, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        check_grid(grid)?;
        Ok(grid.iter().map(|&a| (a, self.beta_unchecked(a))).collect())
    }

    fn beta_unchecked(&self, alpha: f64) -> f64 {
        match self.mech {
            MechanismSpec::Laplace { mu, .. } => laplace_tradeoff(mu, alpha),
            MechanismSpec::Gaussian { mu, .. } => log_concave_tradeoff(&StandardNormal, mu, alpha),
            MechanismSpec::UniformSampling { mu, n } => {
                (1.0 - uniform_sampling_leak(mu, n) - alpha).max(0.0)
            }
            MechanismSpec::DpBound { epsilon, delta } => dp_bound_tradeoff(epsilon, delta, alpha),
            MechanismSpec::CustomLogConcave { mu, ref noise, .. } => {
                log_concave_tradeoff(noise.distribution(), mu, alpha)
            }
        }
    }

    fn power_unchecked(&self, alpha: f64) -> f64 {
        match self.mech {
            MechanismSpec::Gaussian { mu, .. } => log_concave_power(&StandardNormal, mu, alpha),
            MechanismSpec::CustomLogConcave { mu, ref noise, .. } => {
                log_concave_power(noise.distribution(), mu, alpha)
            }
            MechanismSpec::Laplace { mu, .. } => laplace_power(mu, alpha),
            MechanismSpec::UniformSampling { mu, n } => {
                (uniform_sampling_leak(mu, n) + alpha).min(1.0)
            }
            MechanismSpec::DpBound { .. } => 1.0 - self.beta_unchecked(alpha),
        }
    }

    fn analyse_risk(&self) -> RiskBound {
        if self.mech.parameter() == 0.0 {
            return RiskBound::Bounded(1.0);
        }
        match self.mech {
            MechanismSpec::Laplace { mu, .. } => RiskBound::Bounded(mu.exp()),
            MechanismSpec::DpBound { epsilon, delta } => {
                if delta == 0.0 {
                    RiskBound::Bounded(epsilon.exp())
                } else {
                    RiskBound::Unbounded
                }
            }
            MechanismSpec::Gaussian { .. } | MechanismSpec::UniformSampling { .. } => {
                RiskBound::Unbounded
            }
            MechanismSpec::CustomLogConcave { .. } => {
                let values: Vec<f64> = RISK_PROBE_LEVELS
                    .iter()
                    .map(|&a| self.power_unchecked(a) / a)
                    .collect();
                match probe_verdict(&RISK_PROBE_LEVELS, &values) {
                    Ok(ProbeVerdict::Bounded) => RiskBound::Bounded(values[values.len() - 1]),
                    Ok(ProbeVerdict::Diverging) => RiskBound::Unbounded,
                    _ => RiskBound::NotAnalyzed,
                }
            }
        }
    }

    fn audit_convexity(&self) -> bool {
        let step = 1.0 / (AUDIT_POINTS - 1) as f64;
        let ys: Vec<f64> = (0..AUDIT_POINTS)
            .map(|i| self.beta_unchecked((i as f64 * step).min(1.0)))
            .collect();
        let monotone = ys.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let convex = ys.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        monotone && convex
    }
}

/// Probability that the uniform-sampling mechanism releases one particular
/// record: (1 − e^{−μ}) / n.
pub fn uniform_sampling_leak(mu: f64, n: u64) -> f64 {
    -(-mu).exp_m1() / n as f64
}

/// Piecewise closed form of the Laplace trade-off function (unit sensitivity
/// after standardization).
pub fn laplace_tradeoff(mu: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    let tail = (-mu).exp();
    if alpha < 0.5 * tail {
        1.0 - mu.exp() * alpha
    } else if alpha <= 0.5 {
        tail / (4.0 * alpha)
    } else {
        tail * (1.0 - alpha)
    }
}

fn laplace_power(mu: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let tail = (-mu).exp();
    if alpha < 0.5 * tail {
        mu.exp() * alpha
    } else if alpha <= 0.5 {
        1.0 - tail / (4.0 * alpha)
    } else {
        1.0 - tail * (1.0 - alpha)
    }
}

/// `max{0, 1 − δ − e^ε α, e^{−ε}(1 − δ − α)}`; δ = 0 gives the pure-DP curve.
pub fn dp_bound_tradeoff(epsilon: f64, delta: f64, alpha: f64) -> f64 {
    let a = 1.0 - delta - epsilon.exp() * alpha;
    let b = (-epsilon).exp() * (1.0 - delta - alpha);
    a.max(b).max(0.0)
}

/// `F(F⁻¹(1 − α) − μ)` for a zero-mean unit-scale noise law on ℝ, with the
/// endpoints α ∈ {0, 1} fixed analytically.
pub fn log_concave_tradeoff(dist: &dyn NoiseDistribution, mu: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 1.0;
    }
    if alpha >= 1.0 {
        return 0.0;
    }
    dist.cdf(dist.isf(alpha) - mu)
}

/// `1 − F(F⁻¹(1 − α) − μ)` evaluated through the survival function.
pub fn log_concave_power(dist: &dyn NoiseDistribution, mu: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    if alpha >= 1.0 {
        return 1.0;
    }
    dist.sf(dist.isf(alpha) - mu)
}

/// The Laplace curve through the generic log-concave route.
pub fn laplace_tradeoff_generic(mu: f64, alpha: f64) -> f64 {
    log_concave_tradeoff(&StandardLaplace, mu, alpha)
}

pub fn tradeoff_eval(mech: &MechanismSpec, alpha: f64) -> Result<f64> {
    check_probability("alpha", alpha)?;
    TradeoffCurve::new(mech.clone())?.eval(alpha)
}

pub fn tradeoff_curve(
    mech: &MechanismSpec,
    grid: &[f64],
) -> Result<(TradeoffCurve, Vec<(f64, f64)>)> {
    let curve = TradeoffCurve::new(mech.clone())?;
    let points = curve.sample(grid)?;
    Ok((curve, points))
}

/// A grid must be strictly increasing inside [0, 1].
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("grid must not be empty".into()));
    }
    for &a in grid {
        check_probability("grid value", a)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Writes `alpha,beta` rows in grid order.
pub fn write_curve_csv<W: io::Write>(points: &[(f64, f64)], out: W) -> io::Result<()> {
    crate::csvout::write_pairs(out, ["alpha", "beta"], points)
}
