//! Bayesian membership-attack analysis.
//!
//! An attacker who knows every record but the target's tests "target in"
//! against "target out" at level α. Through the trade-off curve, each α
//! fixes the attack power, hence the posterior belief after a positive
//! test and the factor by which that belief can exceed the prior.

use std::fmt;
use std::io;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_open_probability, check_probability, Error, Result};
use crate::numerics::NoiseDistribution;
use crate::tradeoff::{RiskBound, TradeoffCurve};

/// The α₀ levels reported when the caller does not choose any.
pub const DEFAULT_ALPHA0_GRID: [f64; 4] = [0.001, 0.01, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureClass {
    None,
    Graceful,
    Catastrophic,
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureClass::None => "none",
            FailureClass::Graceful => "graceful",
            FailureClass::Catastrophic => "catastrophic",
        })
    }
}

/// A non-negative value that may be infinite; serialized as a number or the
/// string `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Unbounded,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Unbounded => None,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtendedReal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"unbounded\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtendedReal, E> {
                if v == "unbounded" {
                    Ok(ExtendedReal::Unbounded)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeliefUpdate {
    pub p_prior: f64,
    pub alpha: f64,
    pub p_posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub failure_class: FailureClass,
    pub rho: ExtendedReal,
    pub rho_at: Vec<(f64, f64)>,
    pub attack_power_at: Vec<(f64, f64)>,
}

/// Posterior belief in membership after a positive test at level `alpha`:
/// p(1 − f(α)) / {(1 − p)α + p(1 − f(α))}.
pub fn posterior(p_prior: f64, alpha: f64, curve: &TradeoffCurve) -> Result<f64> {
    check_open_probability("p_prior", p_prior)?;
    let power = curve.power(alpha)?;
    let hit = p_prior * power;
    let denom = (1.0 - p_prior) * alpha + hit;
    if denom == 0.0 {
        return Err(Error::IndeterminateUpdate(format!(
            "a level-{alpha} test with power {power} never rejects; the posterior is 0/0"
        )));
    }
    Ok(hit / denom)
}

pub fn belief_update(p_prior: f64, alpha: f64, curve: &TradeoffCurve) -> Result<BeliefUpdate> {
    Ok(BeliefUpdate {
        p_prior,
        alpha,
        p_posterior: posterior(p_prior, alpha, curve)?,
    })
}

/// Posterior along a grid; levels where the update is 0/0 are skipped.
pub fn posterior_series(p_prior: f64, grid: &[f64], curve: &TradeoffCurve) -> Result<Vec<(f64, f64)>> {
    crate::tradeoff::check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    for &a in grid {
        match posterior(p_prior, a, curve) {
            Ok(p) => out.push((a, p)),
            Err(Error::IndeterminateUpdate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Catastrophic iff f(0) < 1; otherwise none or graceful according to
/// whether the relative risk is bounded.
pub fn classify_failure(curve: &TradeoffCurve) -> Result<FailureClass> {
    if curve.f_at_zero() < 1.0 {
        return Ok(FailureClass::Catastrophic);
    }
    match curve.risk_bound() {
        RiskBound::Bounded(_) => Ok(FailureClass::None),
        RiskBound::Unbounded => Ok(FailureClass::Graceful),
        RiskBound::NotAnalyzed => Err(not_analyzed(curve)),
    }
}

fn not_analyzed(curve: &TradeoffCurve) -> Error {
    Error::NotAnalyzed(format!(
        "the tail probe for {} is inconclusive",
        curve.mechanism().kind()
    ))
}

/// ρ = sup over α of (1 − f(α))/α. Catastrophic curves report `Unbounded`.
pub fn relative_risk(curve: &TradeoffCurve) -> Result<ExtendedReal> {
    if curve.f_at_zero() < 1.0 {
        return Ok(ExtendedReal::Unbounded);
    }
    match curve.risk_bound() {
        RiskBound::Bounded(rho) => Ok(ExtendedReal::Finite(rho)),
        RiskBound::Unbounded => Ok(ExtendedReal::Unbounded),
        RiskBound::NotAnalyzed => Err(not_analyzed(curve)),
    }
}

/// ρ restricted to α ≥ α₀. For convex curves the chord slope
/// (1 − f(α))/α is non-increasing, so the supremum sits at α₀.
pub fn relative_risk_at(curve: &TradeoffCurve, alpha0: f64) -> Result<f64> {
    check_probability("alpha0", alpha0)?;
    if alpha0 == 0.0 {
        return match (curve.f_at_zero() < 1.0, curve.risk_bound()) {
            (false, RiskBound::Bounded(rho)) => Ok(rho),
            _ => Err(Error::Domain(
                "alpha0 = 0 is only defined for curves with bounded relative risk".into(),
            )),
        };
    }
    Ok(curve.power(alpha0)? / alpha0)
}

/// Power 1 − f(α₀) of the strongest membership attack at false-positive rate α₀.
pub fn attack_power(curve: &TradeoffCurve, alpha0: f64) -> Result<f64> {
    curve.power(alpha0)
}

pub fn risk_profile(curve: &TradeoffCurve, alpha0_grid: &[f64]) -> Result<RiskProfile> {
    let failure_class = classify_failure(curve)?;
    let rho = relative_risk(curve)?;
    let mut rho_at = Vec::with_capacity(alpha0_grid.len());
    let mut attack_power_at = Vec::with_capacity(alpha0_grid.len());
    for &a in alpha0_grid {
        rho_at.push((a, relative_risk_at(curve, a)?));
        attack_power_at.push((a, attack_power(curve, a)?));
    }
    Ok(RiskProfile {
        failure_class,
        rho,
        rho_at,
        attack_power_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    Bounded,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProbe {
    pub alphas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: ProbeVerdict,
}

const STABLE_REL: f64 = 1e-3;
const DIVERGING_GROWTH_PER_DECADE: f64 = 1.1;

/// Classifies a sequence of ratios measured at strictly decreasing levels.
///
/// Bounded: the last three values agree within relative 1e-3. Diverging:
/// every step grows by more than 10% per decade of α. Non-finite values are
/// accepted as divergence only after a strictly increasing finite prefix.
pub fn probe_verdict(alphas: &[f64], values: &[f64]) -> Result<ProbeVerdict> {
    debug_assert_eq!(alphas.len(), values.len());
    let finite = values.iter().take_while(|v| v.is_finite()).count();
    if finite < values.len() {
        let tail_inf = values[finite..].iter().all(|&v| v == f64::INFINITY);
        let rising = values[..finite].windows(2).all(|w| w[1] > w[0]);
        return if tail_inf && rising {
            Ok(ProbeVerdict::Diverging)
        } else {
            Err(Error::NumericOverflow(format!(
                "non-finite ratio in probe sequence {values:?}"
            )))
        };
    }
    let n = values.len();
    if n >= 3 {
        let last = &values[n - 3..];
        let hi = last.iter().cloned().fold(f64::MIN, f64::max);
        let lo = last.iter().cloned().fold(f64::MAX, f64::min);
        if hi / lo - 1.0 < STABLE_REL {
            return Ok(ProbeVerdict::Bounded);
        }
    }
    if n >= 2 {
        let diverging = (1..n).all(|i| {
            let decades = (alphas[i - 1] / alphas[i]).log10();
            values[i] > values[i - 1]
                && (values[i] / values[i - 1]).powf(1.0 / decades) > DIVERGING_GROWTH_PER_DECADE
        });
        if diverging {
            return Ok(ProbeVerdict::Diverging);
        }
    }
    Ok(ProbeVerdict::Inconclusive)
}

/// Tail ratio F̄(F⁻¹(1 − α) − μ) / F̄(F⁻¹(1 − α)) along a decreasing α
/// sequence; it stays bounded exactly when the relative risk does.
pub fn tail_ratio_probe(
    noise: &dyn NoiseDistribution,
    mu: f64,
    alphas: &[f64],
) -> Result<TailProbe> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::Domain(format!("mu must be finite and >= 0, got {mu}")));
    }
    if alphas.is_empty() {
        return Err(Error::Domain("alpha sequence must not be empty".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a < 0.5)) {
        return Err(Error::Domain("alpha values must lie in (0, 1/2)".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("alpha sequence must be strictly decreasing".into()));
    }
    let ratios: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let t = noise.isf(a);
            noise.sf(t - mu) / noise.sf(t)
        })
        .collect();
    let verdict = probe_verdict(alphas, &ratios)?;
    Ok(TailProbe {
        alphas: alphas.to_vec(),
        ratios,
        verdict,
    })
}

pub fn write_posterior_csv<W: io::Write>(points: &[(f64, f64)], out: W) -> io::Result<()> {
    crate::csvout::write_pairs(out, ["alpha", "posterior"], points)
}
