//! Reliability of a one-sided mean Z-test under Gaussian-mechanism noise.
//!
//! Each of `n` observations carries Gaussian measurement error with standard
//! deviation σ. The released mean adds noise of scale Δq/μ, so the test
//! statistic has standard deviation σₙ = √(σ²/n + Δq²/μ²).

use std::fmt;
use std::io;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_open_probability, check_probability, Error, Result};
use crate::numerics::{
    normal_cdf, normal_quantile, normal_sf, smallest_satisfying, SearchOptions, SearchOutcome,
};

/// Slack granted to probability comparisons in the power-floor search.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Privacy-loss parameter of the release; `Unprotected` means no noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyLoss {
    Finite(f64),
    Unprotected,
}

impl PrivacyLoss {
    pub fn from_f64(mu: f64) -> Self {
        if mu == f64::INFINITY {
            PrivacyLoss::Unprotected
        } else {
            PrivacyLoss::Finite(mu)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            PrivacyLoss::Finite(mu) => mu,
            PrivacyLoss::Unprotected => f64::INFINITY,
        }
    }
}

impl fmt::Display for PrivacyLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrivacyLoss::Finite(mu) => write!(f, "{mu}"),
            PrivacyLoss::Unprotected => f.write_str("unprotected"),
        }
    }
}

impl Serialize for PrivacyLoss {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PrivacyLoss::Finite(mu) => s.serialize_f64(*mu),
            PrivacyLoss::Unprotected => s.serialize_str("unprotected"),
        }
    }
}

impl<'de> Deserialize<'de> for PrivacyLoss {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PrivacyLoss;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"unprotected\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<PrivacyLoss, E> {
                Ok(PrivacyLoss::from_f64(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<PrivacyLoss, E> {
                Ok(PrivacyLoss::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<PrivacyLoss, E> {
                Ok(PrivacyLoss::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<PrivacyLoss, E> {
                match v {
                    "unprotected" | "inf" => Ok(PrivacyLoss::Unprotected),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Everything about the analysis except the privacy-loss parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySetting {
    pub n: u64,
    pub sigma: f64,
    pub delta_q: f64,
    pub m0: f64,
    pub m: f64,
    pub alpha0: f64,
}

impl UtilitySetting {
    /// Derives Δq = (hi − lo)/n from a public data range.
    pub fn from_data_range(
        n: u64,
        sigma: f64,
        range: (f64, f64),
        m0: f64,
        m: f64,
        alpha0: f64,
    ) -> Result<Self> {
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Domain(format!(
                "data range must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("n must be a positive integer".into()));
        }
        let s = UtilitySetting {
            n,
            sigma,
            delta_q: (hi - lo) / n as f64,
            m0,
            m,
            alpha0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be a positive integer".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta_q.is_finite() && self.delta_q > 0.0) {
            return Err(Error::Domain(format!("delta_q must be positive, got {}", self.delta_q)));
        }
        if !(self.m0.is_finite() && self.m.is_finite()) {
            return Err(Error::Domain("m0 and m must be finite".into()));
        }
        if self.m < self.m0 {
            return Err(Error::Domain(format!(
                "the alternative mean m = {} lies below m0 = {}",
                self.m, self.m0
            )));
        }
        check_open_probability("alpha0", self.alpha0)
    }

    pub fn with_mu(self, mu: PrivacyLoss) -> UtilityModel {
        UtilityModel { setting: self, mu }
    }
}

/// Wire form of a [`UtilitySetting`]: Δq is given directly or derived from
/// a public data range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingInput {
    pub n: u64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_range: Option<(f64, f64)>,
    #[serde(default)]
    pub m0: f64,
    pub m: f64,
    pub alpha0: f64,
}

impl SettingInput {
    pub fn resolve(&self) -> Result<UtilitySetting> {
        match (self.delta_q, self.data_range) {
            (Some(delta_q), None) => {
                let s = UtilitySetting {
                    n: self.n,
                    sigma: self.sigma,
                    delta_q,
                    m0: self.m0,
                    m: self.m,
                    alpha0: self.alpha0,
                };
                s.validate()?;
                Ok(s)
            }
            (None, Some(range)) => UtilitySetting::from_data_range(
                self.n, self.sigma, range, self.m0, self.m, self.alpha0,
            ),
            _ => Err(Error::Configuration(
                "give exactly one of delta_q and data_range".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    #[serde(flatten)]
    pub setting: UtilitySetting,
    pub mu: PrivacyLoss,
}

impl UtilityModel {
    pub fn validate(&self) -> Result<()> {
        self.setting.validate()?;
        match self.mu {
            PrivacyLoss::Unprotected => Ok(()),
            PrivacyLoss::Finite(mu) if mu > 0.0 => Ok(()),
            PrivacyLoss::Finite(mu) => Err(Error::Domain(format!(
                "mu must be positive or unprotected, got {mu}"
            ))),
        }
    }
}

pub fn sigma_n(model: &UtilityModel) -> Result<f64> {
    model.validate()?;
    Ok(sigma_n_unchecked(&model.setting, model.mu.as_f64()))
}

fn sigma_n_unchecked(s: &UtilitySetting, mu: f64) -> f64 {
    let sampling = s.sigma * s.sigma / s.n as f64;
    let noise = s.delta_q / mu;
    (sampling + noise * noise).sqrt()
}

fn standardized_effect(s: &UtilitySetting, mu: f64) -> f64 {
    (s.m - s.m0) / sigma_n_unchecked(s, mu)
}

fn beta_unchecked(s: &UtilitySetting, mu: f64, alpha: f64) -> f64 {
    normal_cdf(normal_quantile(1.0 - alpha) - standardized_effect(s, mu))
}

fn power_unchecked(s: &UtilitySetting, mu: f64, alpha: f64) -> f64 {
    normal_sf(normal_quantile(1.0 - alpha) - standardized_effect(s, mu))
}

/// Type II error β = Φ(z₁₋α₀ − (m − m₀)/σₙ) of the level-α₀ test.
pub fn type_ii_error(model: &UtilityModel) -> Result<f64> {
    model.validate()?;
    Ok(beta_unchecked(&model.setting, model.mu.as_f64(), model.setting.alpha0))
}

/// Power 1 − β of the level-α₀ Z-test against the alternative mean `m`.
pub fn power_at(model: &UtilityModel) -> Result<f64> {
    model.validate()?;
    Ok(power_unchecked(&model.setting, model.mu.as_f64(), model.setting.alpha0))
}

/// Power as a function of the alternative mean, at fixed level α₀.
pub fn power_curve(model: &UtilityModel, m_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    if m_grid.is_empty() {
        return Err(Error::Domain("m grid must not be empty".into()));
    }
    m_grid
        .iter()
        .map(|&m| {
            let mut shifted = *model;
            shifted.setting.m = m;
            Ok((m, power_at(&shifted)?))
        })
        .collect()
}

/// ROC of the test: power at each significance level in the grid.
pub fn power_roc(model: &UtilityModel, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    crate::tradeoff::check_grid(grid)?;
    let mu = model.mu.as_f64();
    Ok(grid
        .iter()
        .map(|&a| (a, power_unchecked(&model.setting, mu, a)))
        .collect())
}

/// Which error rate the relative-tolerance criterion compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilityMetric {
    /// |β_μ − β_∞| / β_∞
    #[default]
    TypeIiError,
    /// |(1 − β_μ) − (1 − β_∞)| / (1 − β_∞)
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuMin {
    pub mu: f64,
    /// True when every μ down to the search floor already satisfies the
    /// constraint.
    pub at_floor: bool,
    /// The compared quantity without privacy noise.
    pub unprotected: f64,
    /// The same quantity at the returned μ.
    pub achieved: f64,
}

fn solve(setting: &UtilitySetting, predicate: impl Fn(f64) -> bool) -> Result<(f64, bool)> {
    let out = smallest_satisfying(predicate, &SearchOptions::default())?;
    log::debug!("mu_min for {setting:?}: {out:?}");
    Ok((out.value(), matches!(out, SearchOutcome::AtFloor(_))))
}

/// Does μ keep the chosen error rate within `rel_tol` of its noiseless value?
pub fn relative_criterion_holds(
    setting: &UtilitySetting,
    mu: f64,
    rel_tol: f64,
    metric: ReliabilityMetric,
) -> bool {
    let a = setting.alpha0;
    let (reference, at) = match metric {
        ReliabilityMetric::TypeIiError => (
            beta_unchecked(setting, f64::INFINITY, a),
            beta_unchecked(setting, mu, a),
        ),
        ReliabilityMetric::Power => (
            power_unchecked(setting, f64::INFINITY, a),
            power_unchecked(setting, mu, a),
        ),
    };
    (at - reference).abs() <= rel_tol * reference
}

/// Smallest μ whose relative loss of reliability is at most `rel_tol`.
pub fn mu_min_relative_beta(
    setting: &UtilitySetting,
    rel_tol: f64,
    metric: ReliabilityMetric,
) -> Result<MuMin> {
    setting.validate()?;
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let a = setting.alpha0;
    let quantity = |mu: f64| match metric {
        ReliabilityMetric::TypeIiError => beta_unchecked(setting, mu, a),
        ReliabilityMetric::Power => power_unchecked(setting, mu, a),
    };
    let unprotected = quantity(f64::INFINITY);
    if unprotected == 0.0 {
        return Err(Error::ZeroDenominator(
            "the noiseless type II error underflows to zero; relative inflation is undefined"
                .into(),
        ));
    }
    let (mu, at_floor) = solve(setting, |mu| relative_criterion_holds(setting, mu, rel_tol, metric))?;
    Ok(MuMin {
        mu,
        at_floor,
        unprotected,
        achieved: quantity(mu),
    })
}

/// Smallest μ at which the test still reaches `power_floor`.
pub fn mu_min_power_floor(setting: &UtilitySetting, power_floor: f64) -> Result<MuMin> {
    setting.validate()?;
    check_probability("power_floor", power_floor)?;
    let a = setting.alpha0;
    let unprotected = power_unchecked(setting, f64::INFINITY, a);
    if unprotected + PROBABILITY_SLACK < power_floor {
        return Err(Error::Infeasible(format!(
            "even without privacy noise the power is {unprotected}, below the floor {power_floor}"
        )));
    }
    let (mu, at_floor) = solve(setting, |mu| {
        power_unchecked(setting, mu, a) >= power_floor - PROBABILITY_SLACK
    })?;
    Ok(MuMin {
        mu,
        at_floor,
        unprotected,
        achieved: power_unchecked(setting, mu, a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Correction {
    None,
    Bonferroni { k: u32 },
    BenjaminiHochberg { q: f64 },
}

/// A family of one-sided mean tests (H0: mean = m0 against mean > m0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub correction: Correction,
}

/// Per-test significance level after the plan's correction. For
/// Benjamini–Hochberg the FDR level `q` itself is returned; the per-rank
/// thresholds are applied by [`bh_reject`].
pub fn adjust_level(plan: &TestPlan, alpha0: f64) -> Result<f64> {
    check_open_probability("alpha0", alpha0)?;
    match plan.correction {
        Correction::None => Ok(alpha0),
        Correction::Bonferroni { k } if k >= 1 => Ok(alpha0 / k as f64),
        Correction::Bonferroni { .. } => Err(Error::Domain("bonferroni k must be >= 1".into())),
        Correction::BenjaminiHochberg { q } => {
            check_open_probability("q", q)?;
            Ok(q)
        }
    }
}

/// Benjamini–Hochberg step-up: rejects the hypotheses with the `i`
/// smallest p-values, where `i` is the largest rank with p₍ᵢ₎ ≤ iq/m.
pub fn bh_reject(pvalues: &[f64], q: f64) -> Result<Vec<bool>> {
    check_open_probability("q", q)?;
    for &p in pvalues {
        check_probability("p-value", p)?;
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvalues[i].total_cmp(&pvalues[j]));
    let cutoff = (1..=m)
        .rev()
        .find(|&rank| pvalues[order[rank - 1]] <= rank as f64 * q / m as f64)
        .unwrap_or(0);
    let mut out = vec![false; m];
    for &i in &order[..cutoff] {
        out[i] = true;
    }
    Ok(out)
}

pub fn write_power_curve_csv<W: io::Write>(points: &[(f64, f64)], out: W) -> io::Result<()> {
    crate::csvout::write_pairs(out, ["m", "power"], points)
}

pub fn write_roc_csv<W: io::Write>(points: &[(f64, f64)], out: W) -> io::Result<()> {
    crate::csvout::write_pairs(out, ["alpha", "power"], points)
}
