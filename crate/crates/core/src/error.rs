use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the engine can report.
///
/// Variants fall into two categories: validation problems with the
/// caller's input, and infeasibility of a solver or advisor request.
/// Transports map them onto status codes via [`Error::category`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("indeterminate posterior update: {0}")]
    IndeterminateUpdate(String),
    #[error("risk not analyzed: {0}")]
    NotAnalyzed(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),
    #[error("missing alpha0: {0}")]
    MissingAlpha0(String),
    #[error("unsatisfiable target: {0}")]
    UnsatisfiableTarget(String),
    #[error("no admissible mechanism family: {0}")]
    EmptyAdmissibleSet(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("bracket expansion limit reached: {0}")]
    BracketLimit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Infeasible,
}

impl Error {
    /// Stable machine-readable code used in structured error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain_error",
            Error::Configuration(_) => "configuration_error",
            Error::IndeterminateUpdate(_) => "indeterminate_update",
            Error::NotAnalyzed(_) => "not_analyzed",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::NumericOverflow(_) => "numeric_overflow",
            Error::MissingAlpha0(_) => "missing_alpha0",
            Error::UnsatisfiableTarget(_) => "unsatisfiable_target",
            Error::EmptyAdmissibleSet(_) => "empty_admissible_set",
            Error::Infeasible(_) => "infeasible",
            Error::NoSolution(_) => "no_solution",
            Error::BracketLimit(_) => "bracket_limit",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::UnsatisfiableTarget(_)
            | Error::EmptyAdmissibleSet(_)
            | Error::Infeasible(_)
            | Error::NoSolution(_)
            | Error::BracketLimit(_) => ErrorCategory::Infeasible,
            _ => ErrorCategory::Validation,
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Error::Domain(s)
            | Error::Configuration(s)
            | Error::IndeterminateUpdate(s)
            | Error::NotAnalyzed(s)
            | Error::ZeroDenominator(s)
            | Error::NumericOverflow(s)
            | Error::MissingAlpha0(s)
            | Error::UnsatisfiableTarget(s)
            | Error::EmptyAdmissibleSet(s)
            | Error::Infeasible(s)
            | Error::NoSolution(s)
            | Error::BracketLimit(s) => s.clone(),
        }
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

pub(crate) fn check_open_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}
