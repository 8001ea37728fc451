//! Request and response types shared by the HTTP service and the CLI.
//!
//! Both front ends reduce their input to the same flat key/value
//! parameters (query string or command-line flags), parse them here, and
//! render the result with [`render_json`] or the CSV writers, so the two
//! produce byte-identical output for the same request.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attacksim::{self, AdjacentScenario, AttackRun, Threshold};
use crate::csvout::{self, fmt_f64};
use crate::error::{Error, Result};
use crate::risk::{self, RiskProfile, DEFAULT_ALPHA0_GRID};
use crate::tradeoff::{MechanismKind, MechanismSpec, MechanismWire, TradeoffCurve};
use crate::utility::{self, PrivacyLoss, SettingInput, UtilityModel};

/// Largest grid accepted from a range expression.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// α levels probed by a simulation when none are given.
pub const DEFAULT_SIMULATION_ALPHAS: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];

/// Every response: the engine version, the normalized request, and the
/// operation's result fields.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, Q: Serialize, B: Serialize> {
    pub engine_version: &'static str,
    pub inputs_echo: &'a Q,
    #[serde(flatten)]
    pub body: B,
}

pub fn envelope<Q: Serialize, B: Serialize>(inputs: &Q, body: B) -> Envelope<'_, Q, B> {
    Envelope {
        engine_version: crate::ENGINE_VERSION,
        inputs_echo: inputs,
        body,
    }
}

/// Pretty JSON terminated by a newline.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    detail: String,
}

/// Structured error payload `{"error": code, "detail": text}`.
pub fn render_error(e: &Error) -> String {
    render_json(&ErrorBody {
        error: e.code(),
        detail: e.detail(),
    })
}

/// Flat string parameters with strict bookkeeping: every key must be
/// consumed, and each key may appear once.
#[derive(Debug, Default)]
pub struct Params {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Params {
    pub fn new<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            let k = k.into();
            if map.insert(k.clone(), v.into()).is_some() {
                return Err(Error::Configuration(format!("parameter '{k}' given twice")));
            }
        }
        Ok(Params {
            map,
            used: BTreeSet::new(),
        })
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    /// First present key among aliases.
    fn take_any(&mut self, keys: &[&str]) -> Result<Option<String>> {
        let present: Vec<&str> = keys.iter().copied().filter(|k| self.map.contains_key(*k)).collect();
        if present.len() > 1 {
            return Err(Error::Configuration(format!(
                "parameters {} are aliases; give only one",
                present.join(", ")
            )));
        }
        Ok(present.first().and_then(|k| self.take(k)))
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| parse_f64(key, &v)).transpose()
    }

    pub fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.take(key)
            .map(|v| {
                v.trim().parse::<u64>().map_err(|_| {
                    Error::Configuration(format!("parameter '{key}' must be a non-negative integer, got '{v}'"))
                })
            })
            .transpose()
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self.map.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            Err(Error::Configuration(format!("unknown parameter(s): {}", names.join(", "))))
        }
    }
}

fn missing(key: &str) -> Error {
    Error::Configuration(format!("missing parameter '{key}'"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|x| !x.is_nan())
            .ok_or_else(|| Error::Configuration(format!("parameter '{key}' must be a number, got '{v}'"))),
    }
}

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Parses `a:b:step` (inclusive range) or a comma-separated list.
pub fn parse_grid(key: &str, spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (parse_f64(key, a)?, parse_f64(key, b)?, parse_f64(key, step)?);
            if !(a.is_finite() && b.is_finite() && step.is_finite() && step > 0.0 && b >= a) {
                return Err(Error::Configuration(format!(
                    "range '{spec}' must read lo:hi:step with lo <= hi and step > 0"
                )));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            if count > MAX_GRID_POINTS {
                return Err(Error::Configuration(format!(
                    "range '{spec}' has {count} points; the limit is {MAX_GRID_POINTS}"
                )));
            }
            Ok((0..count).map(|i| round12(a + i as f64 * step)).collect())
        }
        [_] => spec
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_f64(key, s))
            .collect::<Result<Vec<_>>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err(Error::Configuration(format!("parameter '{key}' is empty")))
                } else {
                    Ok(v)
                }
            }),
        _ => Err(Error::Configuration(format!("cannot parse grid '{spec}'"))),
    }
}

fn grid_param(p: &mut Params, keys: &[&str]) -> Result<Option<Vec<f64>>> {
    let key = keys[0];
    p.take_any(keys)?.map(|s| parse_grid(key, &s)).transpose()
}

/// Mechanism from `kind`, `mu`, `sensitivity`, `n`, `epsilon`, `delta`, `noise`.
pub fn mechanism_from_params(p: &mut Params) -> Result<MechanismSpec> {
    let kind: MechanismKind = p.take("kind").ok_or_else(|| missing("kind"))?.parse()?;
    let wire = MechanismWire {
        kind,
        mu: p.f64("mu")?,
        sensitivity: p.f64("sensitivity")?,
        n: p.u64("n")?,
        epsilon: p.f64("epsilon")?,
        delta: p.f64("delta")?,
        noise: p.take("noise"),
    };
    MechanismSpec::try_from(wire)
}

// ---------------------------------------------------------------- tradeoff

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRequest {
    pub mech: MechanismSpec,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffResponse {
    pub points: Vec<(f64, f64)>,
    pub f_at_zero: f64,
    pub convex: bool,
}

impl TradeoffRequest {
    /// `grid` (alias `alpha`) defaults to 0:1:0.01.
    pub fn from_params(mut p: Params) -> Result<Self> {
        let mech = mechanism_from_params(&mut p)?;
        let grid = match grid_param(&mut p, &["grid", "alpha"])? {
            Some(g) => g,
            None => parse_grid("grid", "0:1:0.01")?,
        };
        p.finish()?;
        Ok(TradeoffRequest { mech, grid })
    }

    pub fn run(&self) -> Result<TradeoffResponse> {
        let (curve, points) = crate::tradeoff::tradeoff_curve(&self.mech, &self.grid)?;
        Ok(TradeoffResponse {
            points,
            f_at_zero: curve.f_at_zero(),
            convex: curve.convex(),
        })
    }
}

pub fn tradeoff_csv(resp: &TradeoffResponse) -> String {
    csvout::to_string(|b| crate::tradeoff::write_curve_csv(&resp.points, b))
}

// -------------------------------------------------------------------- risk

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRequest {
    pub mech: MechanismSpec,
    pub alpha0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub mu: f64,
    pub alpha0: f64,
    pub rho_at: f64,
    pub attack_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RiskResponse {
    Profile(RiskProfile),
    Sweep { sweep: Vec<SweepRow> },
}

impl RiskRequest {
    /// `alpha0` defaults to the standard grid; `mu_grid` sweeps the
    /// privacy-loss parameter (ε for dp-bound).
    pub fn from_params(mut p: Params) -> Result<Self> {
        let mu_grid = grid_param(&mut p, &["mu_grid"])?;
        if mu_grid.is_some() && p.map.contains_key("mu") {
            return Err(Error::Configuration("give either mu or mu_grid".into()));
        }
        let mech = if let Some(g) = &mu_grid {
            let first = *g.first().ok_or_else(|| missing("mu_grid"))?;
            // fill the swept parameter so the wire form validates
            let kind = p.map.get("kind").cloned().unwrap_or_default();
            let key = if kind == "dp-bound" { "epsilon" } else { "mu" };
            p.map.insert(key.into(), first.to_string());
            let m = mechanism_from_params(&mut p)?;
            p.map.remove(key);
            p.used.remove(key);
            m
        } else {
            mechanism_from_params(&mut p)?
        };
        let alpha0 = grid_param(&mut p, &["alpha0"])?.unwrap_or_else(|| DEFAULT_ALPHA0_GRID.to_vec());
        p.finish()?;
        Ok(RiskRequest { mech, alpha0, mu_grid })
    }

    pub fn run(&self) -> Result<RiskResponse> {
        match &self.mu_grid {
            None => {
                let curve = TradeoffCurve::new(self.mech.clone())?;
                Ok(RiskResponse::Profile(risk::risk_profile(&curve, &self.alpha0)?))
            }
            Some(grid) => {
                let mut sweep = Vec::with_capacity(grid.len() * self.alpha0.len());
                for &mu in grid {
                    let curve = TradeoffCurve::new(self.mech.with_parameter(mu)?)?;
                    for &a in &self.alpha0 {
                        sweep.push(SweepRow {
                            mu,
                            alpha0: a,
                            rho_at: risk::relative_risk_at(&curve, a)?,
                            attack_power: risk::attack_power(&curve, a)?,
                        });
                    }
                }
                Ok(RiskResponse::Sweep { sweep })
            }
        }
    }
}

/// CSV `mu,alpha0,rho_at,attack_power`; a single profile is one μ block.
pub fn risk_csv(req: &RiskRequest, resp: &RiskResponse) -> String {
    let rows: Vec<SweepRow> = match resp {
        RiskResponse::Sweep { sweep } => sweep.clone(),
        RiskResponse::Profile(p) => p
            .rho_at
            .iter()
            .zip(&p.attack_power_at)
            .map(|(&(alpha0, rho_at), &(_, attack_power))| SweepRow {
                mu: req.mech.parameter(),
                alpha0,
                rho_at,
                attack_power,
            })
            .collect(),
    };
    csvout::to_string(|b| {
        csvout::write_rows(
            b,
            ["mu", "alpha0", "rho_at", "attack_power"],
            rows.iter()
                .map(|r| [fmt_f64(r.mu), fmt_f64(r.alpha0), fmt_f64(r.rho_at), fmt_f64(r.attack_power)]),
        )
    })
}

// --------------------------------------------------------------- posterior

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorRequest {
    pub mech: MechanismSpec,
    pub priors: Vec<f64>,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSeries {
    pub prior: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorResponse {
    pub series: Vec<PosteriorSeries>,
}

impl PosteriorRequest {
    /// `prior` (alias `p_prior`) is a list; `grid` (alias `alpha`)
    /// defaults to 0:1:0.01.
    pub fn from_params(mut p: Params) -> Result<Self> {
        let mech = mechanism_from_params(&mut p)?;
        let priors = grid_param(&mut p, &["prior", "p_prior"])?.ok_or_else(|| missing("prior"))?;
        let grid = match grid_param(&mut p, &["grid", "alpha"])? {
            Some(g) => g,
            None => parse_grid("grid", "0:1:0.01")?,
        };
        p.finish()?;
        Ok(PosteriorRequest { mech, priors, grid })
    }

    pub fn run(&self) -> Result<PosteriorResponse> {
        let curve = TradeoffCurve::new(self.mech.clone())?;
        let series = self
            .priors
            .iter()
            .map(|&prior| {
                Ok(PosteriorSeries {
                    prior,
                    points: risk::posterior_series(prior, &self.grid, &curve)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PosteriorResponse { series })
    }
}

/// `alpha,posterior` for one prior, `prior,alpha,posterior` for several.
pub fn posterior_csv(resp: &PosteriorResponse) -> String {
    if let [only] = resp.series.as_slice() {
        return csvout::to_string(|b| risk::write_posterior_csv(&only.points, b));
    }
    csvout::to_string(|b| {
        csvout::write_rows(
            b,
            ["prior", "alpha", "posterior"],
            resp.series.iter().flat_map(|s| {
                s.points
                    .iter()
                    .map(move |&(a, post)| [fmt_f64(s.prior), fmt_f64(a), fmt_f64(post)])
            }),
        )
    })
}

// ------------------------------------------------------------------- power

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerView {
    /// Power against the alternative mean, CSV `m,power`.
    Power,
    /// Power against the level, CSV `alpha,power`.
    Roc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRequest {
    pub setting: SettingInput,
    pub mu: PrivacyLoss,
    pub view: PowerView,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerResponse {
    pub model: UtilityModel,
    pub sigma_n: f64,
    pub power_at: f64,
    pub points: Vec<(f64, f64)>,
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts = parse_grid(key, v)?;
    match parts.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::Configuration(format!("'{key}' must read lo,hi"))),
    }
}

impl PowerRequest {
    /// Keys `n`, `sigma`, `delta_q` or `data_range=lo,hi`, `m0` (default
    /// 0), `m`, `alpha0`, `mu` (a number, `inf` or `unprotected`),
    /// `view=power|roc` (default roc) and `grid`. The default grid is
    /// 0:1:0.01 for the ROC and m0:m0+0.5:0.01 for the power view.
    pub fn from_params(mut p: Params) -> Result<Self> {
        let n = p.u64("n")?.ok_or_else(|| missing("n"))?;
        let sigma = p.require_f64("sigma")?;
        let delta_q = p.f64("delta_q")?;
        let data_range = p.take("data_range").map(|v| parse_range("data_range", &v)).transpose()?;
        let m0 = p.f64("m0")?.unwrap_or(0.0);
        let m = p.require_f64("m")?;
        let alpha0 = p.require_f64("alpha0")?;
        let mu = match p.take("mu").ok_or_else(|| missing("mu"))?.as_str() {
            "unprotected" => PrivacyLoss::Unprotected,
            other => PrivacyLoss::from_f64(parse_f64("mu", other)?),
        };
        let view = match p.take("view").as_deref() {
            None | Some("roc") => PowerView::Roc,
            Some("power") => PowerView::Power,
            Some(v) => {
                return Err(Error::Configuration(format!("view must be power or roc, got '{v}'")))
            }
        };
        let grid = match grid_param(&mut p, &["grid"])? {
            Some(g) => g,
            None => match view {
                PowerView::Roc => parse_grid("grid", "0:1:0.01")?,
                PowerView::Power => parse_grid("grid", &format!("{m0}:{}:0.01", m0 + 0.5))?,
            },
        };
        p.finish()?;
        let setting = SettingInput { n, sigma, delta_q, data_range, m0, m, alpha0 };
        Ok(PowerRequest { setting, mu, view, grid })
    }

    pub fn run(&self) -> Result<PowerResponse> {
        let model = self.setting.resolve()?.with_mu(self.mu);
        let points = match self.view {
            PowerView::Roc => utility::power_roc(&model, &self.grid)?,
            PowerView::Power => utility::power_curve(&model, &self.grid)?,
        };
        Ok(PowerResponse {
            model,
            sigma_n: utility::sigma_n(&model)?,
            power_at: utility::power_at(&model)?,
            points,
        })
    }
}

pub fn power_csv(req: &PowerRequest, resp: &PowerResponse) -> String {
    csvout::to_string(|b| match req.view {
        PowerView::Roc => utility::write_roc_csv(&resp.points, b),
        PowerView::Power => utility::write_power_curve_csv(&resp.points, b),
    })
}

// -------------------------------------------------------------- simulation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub scenario: AdjacentScenario,
    pub trials: u64,
    pub seed: u64,
    /// Explicit thresholds; when absent, thresholds are calibrated to
    /// `alphas` on an independent H0 sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<Threshold>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Size of the calibration sample; defaults to `trials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateResponse {
    #[serde(flatten)]
    pub run: AttackRun,
    /// 1 − f(α̂) at each empirical level: the best power any test can have.
    pub analytic_power: Vec<f64>,
}

impl SimulateRequest {
    pub fn run(&self) -> Result<SimulateResponse> {
        let thresholds = match (&self.thresholds, &self.alphas) {
            (Some(_), Some(_)) => {
                return Err(Error::Configuration("give either thresholds or alphas".into()))
            }
            (Some(t), None) => t.clone(),
            (None, alphas) => {
                let alphas = alphas.clone().unwrap_or_else(|| DEFAULT_SIMULATION_ALPHAS.to_vec());
                attacksim::calibrate_thresholds(
                    &self.scenario,
                    &alphas,
                    self.calibration_trials.unwrap_or(self.trials),
                    self.seed,
                )?
            }
        };
        let run = attacksim::lr_attack(&self.scenario, self.trials, &thresholds, self.seed)?;
        let curve = TradeoffCurve::new(self.scenario.mech.clone())?;
        let analytic_power = run
            .empirical
            .iter()
            .map(|p| curve.power(p.alpha_hat))
            .collect::<Result<_>>()?;
        Ok(SimulateResponse { run, analytic_power })
    }

    pub fn total_trials(&self) -> u64 {
        let calibration = if self.thresholds.is_some() {
            0
        } else {
            self.calibration_trials.unwrap_or(self.trials)
        };
        self.trials.saturating_add(calibration)
    }
}

pub fn simulate_csv(resp: &SimulateResponse) -> String {
    csvout::to_string(|b| attacksim::write_run_csv(&resp.run, b))
}
