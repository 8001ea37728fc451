//! `dpnav` command line. Every subcommand lowers its flags into the same
//! request types the HTTP service uses, so output is byte-identical.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dpnav_core::advisor::{self, PrivacyFirstRequest, UtilityFirstRequest};
use dpnav_core::api::{
    self, envelope, render_json, Params, PosteriorRequest, PowerRequest, RiskRequest,
    SimulateRequest, TradeoffRequest,
};
use dpnav_core::{Error, ErrorCategory};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("{0}")]
    Input(String),
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// 2 for rejected input, 3 for a valid but unsatisfiable request, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(e) => match e.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Infeasible => 3,
            },
            CliError::Input(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    /// Structured message for stderr.
    pub fn render(&self) -> String {
        match self {
            CliError::Engine(e) => api::render_error(e),
            CliError::Input(d) => render_json(&json!({"error": "configuration_error", "detail": d})),
            CliError::Io(e) => render_json(&json!({"error": "io_error", "detail": e.to_string()})),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dpnav", version, about = "Privacy-utility decision engine for differentially private releases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format; each subcommand has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    /// laplace, gaussian, uniform-sampling, dp-bound or custom-log-concave.
    #[arg(long)]
    pub kind: String,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    #[arg(long)]
    pub sensitivity: Option<String>,
    /// Dataset size for uniform sampling.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    /// Noise density for custom-log-concave (normal or logistic).
    #[arg(long)]
    pub noise: Option<String>,
}

impl MechArgs {
    fn push(&self, out: &mut Vec<(String, String)>) {
        out.push(("kind".into(), self.kind.clone()));
        opt(out, "mu", &self.mu);
        opt(out, "sensitivity", &self.sensitivity);
        opt(out, "n", &self.n);
        opt(out, "epsilon", &self.epsilon);
        opt(out, "delta", &self.delta);
        opt(out, "noise", &self.noise);
    }
}

fn opt(out: &mut Vec<(String, String)>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.clone()));
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trade-off curve beta = f(alpha) on a grid.
    Curve {
        #[command(flatten)]
        mech: MechArgs,
        /// Grid as lo:hi:step or a comma list.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Failure class and relative risk, optionally swept over mu.
    Risk {
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        alpha0: Option<String>,
        /// Sweep of mu (epsilon for dp-bound) as lo:hi:step or a list.
        #[arg(long)]
        mu_grid: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Posterior belief after a rejection at each alpha.
    Posterior {
        #[command(flatten)]
        mech: MechArgs,
        /// One prior or a comma list.
        #[arg(long)]
        prior: String,
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Power of the one-sided Z-test on a noisy mean.
    Power {
        #[command(flatten)]
        setting: SettingArgs,
        /// Privacy loss, or `unprotected`.
        #[arg(long)]
        mu: String,
        #[arg(long, value_parser = ["power", "roc"])]
        view: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Recommend a mechanism.
    Advise {
        #[command(subcommand)]
        mode: AdviseMode,
    },
    /// Monte Carlo likelihood-ratio attack on one adjacent pair.
    Simulate {
        /// JSON request file (`-` for stdin).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "STORE_PATH", default_value = "scenarios")]
        store_path: PathBuf,
        #[arg(long, env = "STATIC_DIR")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SettingArgs {
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub sigma: String,
    /// Query sensitivity; alternatively give --data-range.
    #[arg(long)]
    pub delta_q: Option<String>,
    /// lo,hi of the data domain.
    #[arg(long, allow_hyphen_values = true)]
    pub data_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m: String,
    #[arg(long)]
    pub alpha0: String,
}

impl SettingArgs {
    fn push(&self, out: &mut Vec<(String, String)>) {
        out.push(("n".into(), self.n.clone()));
        out.push(("sigma".into(), self.sigma.clone()));
        opt(out, "delta_q", &self.delta_q);
        opt(out, "data_range", &self.data_range);
        opt(out, "m0", &self.m0);
        out.push(("m".into(), self.m.clone()));
        out.push(("alpha0".into(), self.alpha0.clone()));
    }
}

#[derive(Debug, Subcommand)]
pub enum AdviseMode {
    /// Start from disclosure-risk answers.
    PrivacyFirst {
        /// JSON request file (`-` for stdin); replaces the flags below.
        #[arg(long, conflicts_with_all = ["allow_blatant", "allow_arbitrary", "max_rho", "max_power"])]
        input: Option<PathBuf>,
        /// Accept mechanisms that can reveal a record outright.
        #[arg(long)]
        allow_blatant: bool,
        /// Accept risk that grows without bound as alpha shrinks.
        #[arg(long)]
        allow_arbitrary: bool,
        /// Largest acceptable relative risk.
        #[arg(long, conflicts_with = "max_power")]
        max_rho: Option<f64>,
        /// Largest acceptable attack power at --at-alpha0.
        #[arg(long, requires = "at_alpha0")]
        max_power: Option<f64>,
        #[arg(long)]
        at_alpha0: Option<f64>,
        #[arg(long)]
        sensitivity: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        /// Restrict the choice to one family.
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Start from a required hypothesis-test reliability.
    UtilityFirst {
        #[arg(long, conflicts_with_all = ["n", "sigma", "rel_beta_tol", "power_floor"])]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        delta_q: Option<f64>,
        /// lo,hi of the data domain.
        #[arg(long, allow_hyphen_values = true)]
        data_range: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        m0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
        #[arg(long)]
        alpha0: Option<f64>,
        /// Relative tolerance on the protected test's shortfall.
        #[arg(long, conflicts_with = "power_floor")]
        rel_beta_tol: Option<f64>,
        /// type-ii-error or power.
        #[arg(long, requires = "rel_beta_tol")]
        metric: Option<String>,
        /// Minimum acceptable power.
        #[arg(long)]
        power_floor: Option<f64>,
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// Rendered output of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub body: String,
    pub output: Option<PathBuf>,
}

fn params(pairs: Vec<(String, String)>) -> Result<Params, CliError> {
    Ok(Params::new(pairs)?)
}

fn read_json(path: &PathBuf) -> Result<Value, CliError> {
    let text = if path.as_os_str() == "-" {
        io::read_to_string(io::stdin())
    } else {
        fs::read_to_string(path)
    }
    .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid JSON in {}: {e}", path.display())))
}

fn decode<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Engine(Error::Configuration(format!("invalid request: {e}"))))
}

fn pick(format: Option<Format>, default: Format) -> Format {
    format.unwrap_or(default)
}

fn data_range_value(s: &str) -> Result<Value, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    let parsed: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    match parsed {
        Ok(v) if v.len() == 2 => Ok(json!([v[0], v[1]])),
        _ => Err(CliError::Input(format!("--data-range must be lo,hi, got '{s}'"))),
    }
}

fn privacy_first_request(mode: &AdviseMode) -> Result<PrivacyFirstRequest, CliError> {
    let AdviseMode::PrivacyFirst {
        input, allow_blatant, allow_arbitrary, max_rho, max_power, at_alpha0, sensitivity, n, kind, ..
    } = mode
    else {
        unreachable!()
    };
    if let Some(path) = input {
        return decode(read_json(path)?);
    }
    let target = match (max_rho, max_power) {
        (Some(r), _) => {
            let mut t = json!({"max_relative_risk": r});
            if let Some(a) = at_alpha0 {
                t["at_alpha0"] = json!(a);
            }
            t
        }
        (None, Some(p)) => json!({"max_power": p, "at_alpha0": at_alpha0}),
        (None, None) => return Err(CliError::Input("give --max-rho or --max-power".into())),
    };
    let mut req = json!({
        "answers": {
            "allow_blatant": allow_blatant,
            "allow_arbitrary_confidence": allow_arbitrary,
            "risk_target": target,
        }
    });
    if let Some(s) = sensitivity {
        req["sensitivity"] = json!(s);
    }
    if let Some(n) = n {
        req["n"] = json!(n);
    }
    if let Some(k) = kind {
        req["kind"] = json!(k);
    }
    decode(req)
}

fn utility_first_request(mode: &AdviseMode) -> Result<UtilityFirstRequest, CliError> {
    let AdviseMode::UtilityFirst {
        input, n, sigma, delta_q, data_range, m0, m, alpha0, rel_beta_tol, metric, power_floor, kind, ..
    } = mode
    else {
        unreachable!()
    };
    if let Some(path) = input {
        return decode(read_json(path)?);
    }
    let mut setting = json!({"n": n, "sigma": sigma, "m": m, "alpha0": alpha0});
    if let Some(d) = delta_q {
        setting["delta_q"] = json!(d);
    }
    if let Some(r) = data_range {
        setting["data_range"] = data_range_value(r)?;
    }
    if let Some(m0) = m0 {
        setting["m0"] = json!(m0);
    }
    let reliability = match (rel_beta_tol, power_floor) {
        (Some(t), _) => {
            let mut r = json!({"rel_beta_tol": t});
            if let Some(m) = metric {
                r["metric"] = json!(m);
            }
            r
        }
        (None, Some(f)) => json!({"power_floor": f}),
        (None, None) => return Err(CliError::Input("give --rel-beta-tol or --power-floor".into())),
    };
    let mut req = json!({"setting": setting, "reliability": reliability});
    if let Some(k) = kind {
        req["kind"] = json!(k);
    }
    decode(req)
}

/// Runs a compute subcommand. `serve` is handled by [`main`].
pub fn execute(command: &Command) -> Result<Rendered, CliError> {
    let (body, output) = match command {
        Command::Curve { mech, grid, out } => {
            let mut kv = Vec::new();
            mech.push(&mut kv);
            opt(&mut kv, "grid", grid);
            let req = TradeoffRequest::from_params(params(kv)?)?;
            let resp = req.run()?;
            let body = match pick(out.format, Format::Csv) {
                Format::Json => render_json(&envelope(&req, &resp)),
                Format::Csv => api::tradeoff_csv(&resp),
            };
            (body, out.output.clone())
        }
        Command::Risk { mech, alpha0, mu_grid, out } => {
            let mut kv = Vec::new();
            mech.push(&mut kv);
            opt(&mut kv, "alpha0", alpha0);
            opt(&mut kv, "mu_grid", mu_grid);
            let req = RiskRequest::from_params(params(kv)?)?;
            let resp = req.run()?;
            let body = match pick(out.format, Format::Json) {
                Format::Json => render_json(&envelope(&req, &resp)),
                Format::Csv => api::risk_csv(&req, &resp),
            };
            (body, out.output.clone())
        }
        Command::Posterior { mech, prior, grid, out } => {
            let mut kv = Vec::new();
            mech.push(&mut kv);
            kv.push(("prior".into(), prior.clone()));
            opt(&mut kv, "grid", grid);
            let req = PosteriorRequest::from_params(params(kv)?)?;
            let resp = req.run()?;
            let body = match pick(out.format, Format::Csv) {
                Format::Json => render_json(&envelope(&req, &resp)),
                Format::Csv => api::posterior_csv(&resp),
            };
            (body, out.output.clone())
        }
        Command::Power { setting, mu, view, grid, out } => {
            let mut kv = Vec::new();
            setting.push(&mut kv);
            kv.push(("mu".into(), mu.clone()));
            opt(&mut kv, "view", view);
            opt(&mut kv, "grid", grid);
            let req = PowerRequest::from_params(params(kv)?)?;
            let resp = req.run()?;
            let body = match pick(out.format, Format::Csv) {
                Format::Json => render_json(&envelope(&req, &resp)),
                Format::Csv => api::power_csv(&req, &resp),
            };
            (body, out.output.clone())
        }
        Command::Advise { mode } => {
            let (body, out) = match mode {
                AdviseMode::PrivacyFirst { out, .. } => {
                    let req = privacy_first_request(mode)?;
                    let rec = advisor::privacy_first(&req)?;
                    (render_json(&envelope(&req, &rec)), out)
                }
                AdviseMode::UtilityFirst { out, .. } => {
                    let req = utility_first_request(mode)?;
                    let rec = advisor::utility_first(&req)?;
                    (render_json(&envelope(&req, &rec)), out)
                }
            };
            if out.format == Some(Format::Csv) {
                return Err(CliError::Input("advise only produces JSON".into()));
            }
            (body, out.output.clone())
        }
        Command::Simulate { input, trials, seed, out } => {
            let mut v = read_json(input)?;
            if let (Some(t), Some(obj)) = (trials, v.as_object_mut()) {
                obj.insert("trials".into(), json!(t));
            }
            if let (Some(s), Some(obj)) = (seed, v.as_object_mut()) {
                obj.insert("seed".into(), json!(s));
            }
            let req: SimulateRequest = decode(v)?;
            let resp = req.run()?;
            let body = match pick(out.format, Format::Json) {
                Format::Json => render_json(&envelope(&req, &resp)),
                Format::Csv => api::simulate_csv(&resp),
            };
            (body, out.output.clone())
        }
        Command::Serve { .. } => return Err(CliError::Input("serve is not a compute command".into())),
    };
    Ok(Rendered { body, output })
}

fn emit(r: &Rendered) -> Result<(), CliError> {
    match &r.output {
        Some(path) => fs::write(path, &r.body)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(r.body.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Parses argv, runs, and returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Serve { port, store_path, static_dir } => {
            let config = dpnav_service::Config {
                port: *port,
                store_path: store_path.clone(),
                static_dir: static_dir.clone(),
            };
            dpnav_service::serve_blocking(config).map_err(CliError::Io)
        }
        other => execute(other).and_then(|r| emit(&r)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprint!("{}", e.render());
            e.exit_code()
        }
    }
}
