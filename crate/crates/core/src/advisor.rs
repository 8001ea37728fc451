//! Governance workflows that turn answers or reliability goals into a
//! concrete mechanism.
//!
//! Privacy-first starts from acceptable risk: three questions filter the
//! mechanism families, then μ is solved from the risk target. Utility-first
//! starts from the reliability an analysis needs and discloses the risk
//! implied by the smallest admissible μ.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_probability, Error, Result};
use crate::numerics::{normal_quantile, solve_increasing};
use crate::risk::{risk_profile, FailureClass, RiskProfile, DEFAULT_ALPHA0_GRID};
use crate::tradeoff::{tradeoff_eval, MechanismKind, MechanismSpec, TradeoffCurve};
use crate::utility::{
    mu_min_power_floor, mu_min_relative_beta, sigma_n, PrivacyLoss, ReliabilityMetric,
    SettingInput,
};

/// Answer to the third question: either a cap on the relative disclosure
/// risk or a cap on the power of a membership attack at level α₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiskTarget {
    MaxRelativeRisk {
        max_relative_risk: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_alpha0: Option<f64>,
    },
    MaxPower {
        max_power: f64,
        at_alpha0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyFirstAnswers {
    pub allow_blatant: bool,
    pub allow_arbitrary_confidence: bool,
    pub risk_target: RiskTarget,
}

fn default_sensitivity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyFirstRequest {
    pub answers: PrivacyFirstAnswers,
    #[serde(default = "default_sensitivity")]
    pub sensitivity: f64,
    /// Dataset size; needed before uniform sampling can be considered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Restricts the choice to one admissible family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MechanismKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reliability {
    RelBetaTol {
        rel_beta_tol: f64,
        #[serde(default)]
        metric: ReliabilityMetric,
    },
    PowerFloor {
        power_floor: f64,
    },
}

fn default_kind() -> MechanismKind {
    MechanismKind::Gaussian
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityFirstRequest {
    pub setting: SettingInput,
    pub reliability: Reliability,
    #[serde(default = "default_kind")]
    pub kind: MechanismKind,
}

/// Advisor output. `inputs` is a snapshot of the request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub inputs: serde_json::Value,
    pub admissible: Vec<MechanismKind>,
    pub chosen: MechanismSpec,
    pub risk_profile: RiskProfile,
    pub rationale: Vec<String>,
    pub warnings: Vec<String>,
}

const UNINFORMATIVE: &str =
    "mu = 0: the target only admits a release that carries no information about the data";

/// Families the advisor can recommend, in canonical tie-break order.
const CANDIDATES: [MechanismKind; 4] = [
    MechanismKind::Laplace,
    MechanismKind::DpBound,
    MechanismKind::Gaussian,
    MechanismKind::UniformSampling,
];

fn table_class(kind: MechanismKind) -> FailureClass {
    match kind {
        MechanismKind::Laplace | MechanismKind::DpBound => FailureClass::None,
        MechanismKind::Gaussian | MechanismKind::CustomLogConcave => FailureClass::Graceful,
        MechanismKind::UniformSampling => FailureClass::Catastrophic,
    }
}

/// Applies the first two questions to the candidate families.
pub fn admissible_families(answers: &PrivacyFirstAnswers, n: Option<u64>) -> Vec<MechanismKind> {
    CANDIDATES
        .into_iter()
        .filter(|&k| match table_class(k) {
            FailureClass::None => true,
            FailureClass::Graceful => answers.allow_arbitrary_confidence,
            FailureClass::Catastrophic => {
                answers.allow_blatant && answers.allow_arbitrary_confidence && n.is_some()
            }
        })
        .collect()
}

fn build(kind: MechanismKind, mu: f64, sensitivity: f64, n: Option<u64>) -> Result<MechanismSpec> {
    match kind {
        MechanismKind::Laplace => MechanismSpec::laplace(mu, sensitivity),
        MechanismKind::Gaussian => MechanismSpec::gaussian(mu, sensitivity),
        MechanismKind::DpBound => MechanismSpec::dp_bound(mu, 0.0),
        MechanismKind::UniformSampling => {
            let n = n.ok_or_else(|| Error::Configuration("uniform sampling needs n".into()))?;
            MechanismSpec::uniform_sampling(mu, n)
        }
        MechanismKind::CustomLogConcave => Err(Error::Configuration(
            "the advisor does not recommend custom noise families".into(),
        )),
    }
}

/// Smallest μ at which the family's attack power at level α₀ reaches `target`.
fn mu_for_power(
    kind: MechanismKind,
    alpha0: f64,
    target: f64,
    sensitivity: f64,
    n: Option<u64>,
) -> Result<f64> {
    if target <= alpha0 {
        return Ok(0.0);
    }
    match kind {
        MechanismKind::Gaussian => Ok(normal_quantile(target) - normal_quantile(alpha0)),
        MechanismKind::UniformSampling => {
            let n = n.ok_or_else(|| Error::Configuration("uniform sampling needs n".into()))? as f64;
            let leak = n * (target - alpha0);
            if leak >= 1.0 {
                return Err(Error::UnsatisfiableTarget(format!(
                    "uniform sampling never reaches attack power {target} at alpha0 = {alpha0}"
                )));
            }
            Ok(-(-leak).ln_1p())
        }
        _ => {
            let base = build(kind, 0.0, sensitivity, n)?;
            let power = |mu: f64| match base.with_parameter(mu) {
                Ok(m) => 1.0 - tradeoff_eval(&m, alpha0).unwrap_or(1.0),
                Err(_) => 0.0,
            };
            let mut hi = 1.0;
            while power(hi) < target {
                hi *= 2.0;
                if hi > 1e4 {
                    return Err(Error::BracketLimit(format!(
                        "attack power {target} not reached for {kind}"
                    )));
                }
            }
            solve_increasing(power, target, 0.0, hi)
        }
    }
}

fn alpha0_grid(extra: Option<f64>) -> Vec<f64> {
    let mut grid = DEFAULT_ALPHA0_GRID.to_vec();
    if let Some(a) = extra {
        if !grid.contains(&a) {
            grid.push(a);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid
}

struct Candidate {
    kind: MechanismKind,
    mu: f64,
}

pub fn privacy_first(req: &PrivacyFirstRequest) -> Result<Recommendation> {
    let answers = &req.answers;
    if !(req.sensitivity.is_finite() && req.sensitivity > 0.0) {
        return Err(Error::Domain(format!(
            "sensitivity must be positive, got {}",
            req.sensitivity
        )));
    }
    if req.n == Some(0) {
        return Err(Error::Domain("n must be a positive integer".into()));
    }
    let mut rationale = Vec::new();
    let mut warnings = Vec::new();

    let admissible = admissible_families(answers, req.n);
    rationale.push(if answers.allow_blatant {
        "q1: blatant disclosure acceptable".to_string()
    } else {
        "q1: blatant disclosure not acceptable; catastrophic families excluded".to_string()
    });
    rationale.push(if answers.allow_arbitrary_confidence {
        "q2: arbitrarily confident attacks acceptable".to_string()
    } else {
        "q2: arbitrarily confident attacks not acceptable; only bounded-risk families remain"
            .to_string()
    });
    if answers.allow_blatant && answers.allow_arbitrary_confidence && req.n.is_none() {
        rationale.push("uniform-sampling not considered: n not given".into());
    }
    let names: Vec<&str> = admissible.iter().map(|k| k.as_str()).collect();
    rationale.push(format!("admissible families: {}", names.join(", ")));

    let considered: Vec<MechanismKind> = match req.kind {
        Some(k) if admissible.contains(&k) => {
            rationale.push(format!("requested family: {k}"));
            vec![k]
        }
        Some(k) => {
            return Err(Error::EmptyAdmissibleSet(format!(
                "requested family {k} is excluded by the answers"
            )))
        }
        None => admissible.clone(),
    };
    if considered.is_empty() {
        return Err(Error::EmptyAdmissibleSet("no family satisfies the answers".into()));
    }

    let extra_alpha0;
    let mut candidates = Vec::new();
    let mut first_err = None;
    match answers.risk_target {
        RiskTarget::MaxRelativeRisk { max_relative_risk: r, at_alpha0 } => {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::UnsatisfiableTarget(format!(
                    "relative risk is always at least 1; target R = {r} cannot be met"
                )));
            }
            if let Some(a) = at_alpha0 {
                check_open_probability("at_alpha0", a)?;
            }
            extra_alpha0 = at_alpha0;
            rationale.push(match at_alpha0 {
                Some(a) => format!("q3: maximum relative risk R = {r} at alpha0 = {a}"),
                None => format!("q3: maximum relative risk R = {r}"),
            });
            for &kind in &considered {
                let solved = if table_class(kind) == FailureClass::None {
                    let mu = r.ln();
                    rationale.push(format!("{kind}: rho = e^mu = {r} gives mu = ln R = {mu}"));
                    Ok(mu)
                } else {
                    let a = at_alpha0.ok_or_else(|| {
                        Error::MissingAlpha0(format!(
                            "{kind} has unbounded relative risk; the target needs at_alpha0"
                        ))
                    })?;
                    let target = r * a;
                    if target >= 1.0 {
                        Err(Error::UnsatisfiableTarget(format!(
                            "R * alpha0 = {target} >= 1 places no restriction on {kind}"
                        )))
                    } else {
                        mu_for_power(kind, a, target, req.sensitivity, req.n).inspect(|mu| {
                            rationale.push(format!(
                                "{kind}: rho_alpha0 = {r} at alpha0 = {a} gives mu = {mu}"
                            ))
                        })
                    }
                };
                match solved {
                    Ok(mu) => candidates.push(Candidate { kind, mu }),
                    Err(e) => {
                        warnings.push(format!("{kind} dropped: {}", e.detail()));
                        first_err.get_or_insert(e);
                    }
                }
            }
        }
        RiskTarget::MaxPower { max_power, at_alpha0: a } => {
            check_open_probability("at_alpha0", a)?;
            check_open_probability("max_power", max_power)?;
            if max_power < a {
                return Err(Error::UnsatisfiableTarget(format!(
                    "every test at level {a} has power at least {a}; max_power = {max_power} cannot be met"
                )));
            }
            extra_alpha0 = Some(a);
            let beta0 = 1.0 - max_power;
            rationale.push(format!(
                "q3: maximum attack power {max_power} at alpha0 = {a}, i.e. f(alpha0) = {beta0}"
            ));
            for &kind in &considered {
                match mu_for_power(kind, a, max_power, req.sensitivity, req.n) {
                    Ok(mu) => {
                        rationale.push(format!("{kind}: f_mu({a}) = {beta0} gives mu = {mu}"));
                        candidates.push(Candidate { kind, mu });
                    }
                    Err(e) => {
                        warnings.push(format!("{kind} dropped: {}", e.detail()));
                        first_err.get_or_insert(e);
                    }
                }
            }
        }
    }

    let rank = |c: &Candidate| {
        let order = CANDIDATES.iter().position(|&k| k == c.kind).unwrap_or(CANDIDATES.len());
        (table_class(c.kind), order)
    };
    let best = candidates
        .iter()
        .min_by(|a, b| {
            let (ca, oa) = rank(a);
            let (cb, ob) = rank(b);
            ca.cmp(&cb).then(a.mu.total_cmp(&b.mu)).then(oa.cmp(&ob))
        })
        .ok_or_else(|| {
            first_err.unwrap_or_else(|| Error::EmptyAdmissibleSet("no family could be solved".into()))
        })?;
    if candidates.len() > 1 {
        rationale.push(format!(
            "chosen {}: strongest guarantee among solved families (failure class, then mu)",
            best.kind
        ));
    }
    if best.mu == 0.0 {
        warnings.push(UNINFORMATIVE.into());
    }

    let chosen = build(best.kind, best.mu, req.sensitivity, req.n)?;
    let curve = TradeoffCurve::new(chosen.clone())?;
    let profile = risk_profile(&curve, &alpha0_grid(extra_alpha0))?;
    rationale.push(format!(
        "risk profile: failure class {}, rho = {}",
        profile.failure_class, profile.rho
    ));
    Ok(Recommendation {
        inputs: snapshot(req)?,
        admissible,
        chosen,
        risk_profile: profile,
        rationale,
        warnings,
    })
}

pub fn utility_first(req: &UtilityFirstRequest) -> Result<Recommendation> {
    if req.kind != MechanismKind::Gaussian {
        return Err(Error::Configuration(format!(
            "utility-first analysis models Gaussian noise on the released mean; {} is not supported",
            req.kind
        )));
    }
    let setting = req.setting.resolve()?;
    let mut rationale = vec![format!(
        "setting: n = {}, sigma = {}, delta_q = {}, m - m0 = {}, alpha0 = {}",
        setting.n,
        setting.sigma,
        setting.delta_q,
        setting.m - setting.m0,
        setting.alpha0
    )];
    let mut warnings = Vec::new();
    let sol = match req.reliability {
        Reliability::RelBetaTol { rel_beta_tol, metric } => {
            let sol = mu_min_relative_beta(&setting, rel_beta_tol, metric)?;
            let what = match metric {
                ReliabilityMetric::TypeIiError => "type II error",
                ReliabilityMetric::Power => "power",
            };
            rationale.push(format!(
                "unprotected {what} = {}; allowed relative change {rel_beta_tol}",
                sol.unprotected
            ));
            rationale.push(format!("mu_min = {}, where the {what} is {}", sol.mu, sol.achieved));
            sol
        }
        Reliability::PowerFloor { power_floor } => {
            let sol = mu_min_power_floor(&setting, power_floor)?;
            rationale.push(format!(
                "unprotected power = {}; required power {power_floor}",
                sol.unprotected
            ));
            rationale.push(format!("mu_min = {}, where the power is {}", sol.mu, sol.achieved));
            sol
        }
    };
    if sol.at_floor {
        warnings.push(format!(
            "the reliability goal holds for every mu; the search floor {} is reported",
            sol.mu
        ));
    }
    let sd = sigma_n(&setting.with_mu(PrivacyLoss::Finite(sol.mu)))?;
    rationale.push(format!("sigma_n at mu_min = {sd}"));

    let chosen = MechanismSpec::gaussian(sol.mu, setting.delta_q)?;
    let curve = TradeoffCurve::new(chosen.clone())?;
    let profile = risk_profile(&curve, &DEFAULT_ALPHA0_GRID)?;
    for (a, rho) in &profile.rho_at {
        rationale.push(format!("disclosed risk: rho_alpha0 = {rho} at alpha0 = {a}"));
    }
    Ok(Recommendation {
        inputs: snapshot(req)?,
        admissible: vec![MechanismKind::Gaussian],
        chosen,
        risk_profile: profile,
        rationale,
        warnings,
    })
}

fn snapshot<T: Serialize>(req: &T) -> Result<serde_json::Value> {
    serde_json::to_value(req).map_err(|e| Error::Configuration(format!("unserializable input: {e}")))
}
