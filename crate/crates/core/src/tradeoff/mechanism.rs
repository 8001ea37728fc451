use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::NoiseFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Laplace,
    Gaussian,
    UniformSampling,
    DpBound,
    CustomLogConcave,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::Laplace,
        MechanismKind::Gaussian,
        MechanismKind::UniformSampling,
        MechanismKind::DpBound,
        MechanismKind::CustomLogConcave,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::Laplace => "laplace",
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::UniformSampling => "uniform-sampling",
            MechanismKind::DpBound => "dp-bound",
            MechanismKind::CustomLogConcave => "custom-log-concave",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Configuration(format!("unknown mechanism kind '{s}'")))
    }
}

/// A randomized release mechanism and its privacy-loss parameter.
///
/// `mu` is the standardized shift between the two adjacent output laws:
/// the additive mechanisms use noise of scale `sensitivity / mu`.
/// `DpBound` is not a release mechanism but the generic trade-off bound
/// implied by (ε, δ)-DP.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismSpec {
    Laplace { mu: f64, sensitivity: f64 },
    Gaussian { mu: f64, sensitivity: f64 },
    /// Releases a dummy symbol with probability e^{-μ}, otherwise one of the
    /// `n` records uniformly at random.
    UniformSampling { mu: f64, n: u64 },
    DpBound { epsilon: f64, delta: f64 },
    CustomLogConcave { mu: f64, sensitivity: f64, noise: NoiseFamily },
}

impl MechanismSpec {
    pub fn laplace(mu: f64, sensitivity: f64) -> Result<Self> {
        MechanismSpec::Laplace { mu, sensitivity }.validated()
    }

    pub fn gaussian(mu: f64, sensitivity: f64) -> Result<Self> {
        MechanismSpec::Gaussian { mu, sensitivity }.validated()
    }

    pub fn uniform_sampling(mu: f64, n: u64) -> Result<Self> {
        MechanismSpec::UniformSampling { mu, n }.validated()
    }

    pub fn dp_bound(epsilon: f64, delta: f64) -> Result<Self> {
        MechanismSpec::DpBound { epsilon, delta }.validated()
    }

    pub fn custom_log_concave(mu: f64, sensitivity: f64, noise: NoiseFamily) -> Result<Self> {
        MechanismSpec::CustomLogConcave {
            mu,
            sensitivity,
            noise,
        }
        .validated()
    }

    /// Same family with a different privacy-loss parameter (ε for `DpBound`).
    pub fn with_parameter(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            MechanismSpec::Laplace { mu, .. }
            | MechanismSpec::Gaussian { mu, .. }
            | MechanismSpec::UniformSampling { mu, .. }
            | MechanismSpec::CustomLogConcave { mu, .. } => *mu = value,
            MechanismSpec::DpBound { epsilon, .. } => *epsilon = value,
        }
        out.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        fn check_mu(mu: f64) -> Result<()> {
            if mu.is_nan() || mu < 0.0 {
                return Err(Error::Configuration(format!("mu must be >= 0, got {mu}")));
            }
            Ok(())
        }
        fn check_sensitivity(s: f64) -> Result<()> {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Configuration(format!(
                    "sensitivity must be a positive finite number, got {s}"
                )));
            }
            Ok(())
        }
        match *self {
            MechanismSpec::Laplace { mu, sensitivity }
            | MechanismSpec::Gaussian { mu, sensitivity }
            | MechanismSpec::CustomLogConcave {
                mu, sensitivity, ..
            } => {
                check_mu(mu)?;
                check_sensitivity(sensitivity)
            }
            MechanismSpec::UniformSampling { mu, n } => {
                check_mu(mu)?;
                if n == 0 {
                    return Err(Error::Configuration("n must be >= 1".into()));
                }
                Ok(())
            }
            MechanismSpec::DpBound { epsilon, delta } => {
                if epsilon.is_nan() || epsilon < 0.0 {
                    return Err(Error::Configuration(format!(
                        "epsilon must be >= 0, got {epsilon}"
                    )));
                }
                if !(0.0..=1.0).contains(&delta) {
                    return Err(Error::Configuration(format!(
                        "delta must lie in [0, 1], got {delta}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            MechanismSpec::Laplace { .. } => MechanismKind::Laplace,
            MechanismSpec::Gaussian { .. } => MechanismKind::Gaussian,
            MechanismSpec::UniformSampling { .. } => MechanismKind::UniformSampling,
            MechanismSpec::DpBound { .. } => MechanismKind::DpBound,
            MechanismSpec::CustomLogConcave { .. } => MechanismKind::CustomLogConcave,
        }
    }

    /// μ, or ε for the DP bound.
    pub fn parameter(&self) -> f64 {
        match *self {
            MechanismSpec::Laplace { mu, .. }
            | MechanismSpec::Gaussian { mu, .. }
            | MechanismSpec::UniformSampling { mu, .. }
            | MechanismSpec::CustomLogConcave { mu, .. } => mu,
            MechanismSpec::DpBound { epsilon, .. } => epsilon,
        }
    }

    pub fn sensitivity(&self) -> Option<f64> {
        match *self {
            MechanismSpec::Laplace { sensitivity, .. }
            | MechanismSpec::Gaussian { sensitivity, .. }
            | MechanismSpec::CustomLogConcave { sensitivity, .. } => Some(sensitivity),
            _ => None,
        }
    }

    /// Noise scale `sensitivity / mu` of additive mechanisms.
    pub fn noise_scale(&self) -> Option<f64> {
        self.sensitivity().map(|s| s / self.parameter())
    }

    pub fn to_wire(&self) -> MechanismWire {
        let mut w = MechanismWire {
            kind: self.kind(),
            ..MechanismWire::default()
        };
        match self {
            MechanismSpec::Laplace { mu, sensitivity } | MechanismSpec::Gaussian { mu, sensitivity } => {
                w.mu = Some(*mu);
                w.sensitivity = Some(*sensitivity);
            }
            MechanismSpec::UniformSampling { mu, n } => {
                w.mu = Some(*mu);
                w.n = Some(*n);
            }
            MechanismSpec::DpBound { epsilon, delta } => {
                w.epsilon = Some(*epsilon);
                w.delta = Some(*delta);
            }
            MechanismSpec::CustomLogConcave {
                mu,
                sensitivity,
                noise,
            } => {
                w.mu = Some(*mu);
                w.sensitivity = Some(*sensitivity);
                w.noise = Some(noise.name().to_string());
            }
        }
        w
    }
}

/// JSON shape of a mechanism specification.
///
/// Fields not used by `kind` must be absent; `sensitivity` defaults to 1 and
/// `delta` to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismWire {
    pub kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
}

impl Default for MechanismWire {
    fn default() -> Self {
        MechanismWire {
            kind: MechanismKind::Laplace,
            mu: None,
            sensitivity: None,
            n: None,
            epsilon: None,
            delta: None,
            noise: None,
        }
    }
}

impl TryFrom<MechanismWire> for MechanismSpec {
    type Error = Error;

    fn try_from(w: MechanismWire) -> Result<Self> {
        let kind = w.kind;
        let forbid = |present: bool, field: &str| -> Result<()> {
            if present {
                Err(Error::Configuration(format!(
                    "field '{field}' is not used by kind '{kind}'"
                )))
            } else {
                Ok(())
            }
        };
        let require = |v: Option<f64>, field: &str| -> Result<f64> {
            v.ok_or_else(|| {
                Error::Configuration(format!("kind '{kind}' requires field '{field}'"))
            })
        };
        let spec = match kind {
            MechanismKind::Laplace | MechanismKind::Gaussian => {
                forbid(w.n.is_some(), "n")?;
                forbid(w.epsilon.is_some(), "epsilon")?;
                forbid(w.delta.is_some(), "delta")?;
                forbid(w.noise.is_some(), "noise")?;
                let mu = require(w.mu, "mu")?;
                let sensitivity = w.sensitivity.unwrap_or(1.0);
                if kind == MechanismKind::Laplace {
                    MechanismSpec::Laplace { mu, sensitivity }
                } else {
                    MechanismSpec::Gaussian { mu, sensitivity }
                }
            }
            MechanismKind::UniformSampling => {
                forbid(w.sensitivity.is_some(), "sensitivity")?;
                forbid(w.epsilon.is_some(), "epsilon")?;
                forbid(w.delta.is_some(), "delta")?;
                forbid(w.noise.is_some(), "noise")?;
                let mu = require(w.mu, "mu")?;
                let n = w.n.ok_or_else(|| {
                    Error::Configuration("kind 'uniform-sampling' requires field 'n'".into())
                })?;
                MechanismSpec::UniformSampling { mu, n }
            }
            MechanismKind::DpBound => {
                forbid(w.mu.is_some(), "mu")?;
                forbid(w.sensitivity.is_some(), "sensitivity")?;
                forbid(w.n.is_some(), "n")?;
                forbid(w.noise.is_some(), "noise")?;
                MechanismSpec::DpBound {
                    epsilon: require(w.epsilon, "epsilon")?,
                    delta: w.delta.unwrap_or(0.0),
                }
            }
            MechanismKind::CustomLogConcave => {
                forbid(w.n.is_some(), "n")?;
                forbid(w.epsilon.is_some(), "epsilon")?;
                forbid(w.delta.is_some(), "delta")?;
                let name = w.noise.ok_or_else(|| {
                    Error::Configuration("kind 'custom-log-concave' requires field 'noise'".into())
                })?;
                let noise = NoiseFamily::from_name(&name).ok_or_else(|| {
                    Error::Configuration(format!(
                        "unknown noise family '{name}' (expected normal, laplace or logistic)"
                    ))
                })?;
                MechanismSpec::CustomLogConcave {
                    mu: require(w.mu, "mu")?,
                    sensitivity: w.sensitivity.unwrap_or(1.0),
                    noise,
                }
            }
        };
        spec.validated()
    }
}

impl Serialize for MechanismSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if let MechanismSpec::CustomLogConcave {
            noise: NoiseFamily::Custom(_),
            ..
        } = self
        {
            return Err(serde::ser::Error::custom(
                "caller-supplied noise distributions cannot be serialized",
            ));
        }
        self.to_wire().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MechanismSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = MechanismWire::deserialize(deserializer)?;
        MechanismSpec::try_from(wire).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_defaults_and_round_trip() {
        let spec: MechanismSpec = serde_json::from_str(r#"{"kind":"gaussian","mu":1}"#).unwrap();
        assert_eq!(
            spec,
            MechanismSpec::Gaussian {
                mu: 1.0,
                sensitivity: 1.0
            }
        );
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"gaussian","mu":1.0,"sensitivity":1.0}"#);

        let bound: MechanismSpec =
            serde_json::from_str(r#"{"kind":"dp-bound","epsilon":0.5}"#).unwrap();
        assert_eq!(
            bound,
            MechanismSpec::DpBound {
                epsilon: 0.5,
                delta: 0.0
            }
        );
    }

    #[test]
    fn kind_specific_fields_are_enforced() {
        let cases = [
            r#"{"kind":"laplace"}"#,
            r#"{"kind":"laplace","mu":1,"n":5}"#,
            r#"{"kind":"uniform-sampling","mu":1}"#,
            r#"{"kind":"uniform-sampling","mu":1,"n":5,"sensitivity":1}"#,
            r#"{"kind":"dp-bound","mu":1,"epsilon":1}"#,
            r#"{"kind":"dp-bound","epsilon":1,"delta":1.5}"#,
            r#"{"kind":"gaussian","mu":-1}"#,
            r#"{"kind":"gaussian","mu":1,"sensitivity":0}"#,
            r#"{"kind":"uniform-sampling","mu":1,"n":0}"#,
            r#"{"kind":"custom-log-concave","mu":1}"#,
            r#"{"kind":"custom-log-concave","mu":1,"noise":"cauchy"}"#,
            r#"{"kind":"gaussian","mu":1,"extra":2}"#,
        ];
        for c in cases {
            assert!(serde_json::from_str::<MechanismSpec>(c).is_err(), "{c}");
        }
    }

    #[test]
    fn kind_parses_from_kebab_case() {
        for k in MechanismKind::ALL {
            assert_eq!(k.as_str().parse::<MechanismKind>().unwrap(), k);
        }
        assert!("poisson".parse::<MechanismKind>().is_err());
    }
}
