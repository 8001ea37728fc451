//! Monte Carlo membership attacks against adjacent releases.
//!
//! The attacker knows every record except whether the target is in the
//! data. Each trial draws one release under H0 (target absent) and one
//! under H1 (target present) and applies the likelihood-ratio test at every
//! threshold. Randomness is keyed by (seed, trial, domain), so a trial's
//! draws do not depend on batching or on how many trials run.

use std::fmt;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal as NormalDraw};
use rayon::prelude::*;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_open_probability, check_probability, Error, Result};
use crate::numerics::{normal_quantile, NoiseDistribution, StandardLaplace};
use crate::tradeoff::MechanismSpec;
use crate::utility::UtilityModel;

/// Trials per parallel batch.
const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Domain {
    Null = 0,
    Alternative = 1,
    Calibration = 2,
    ZTest = 3,
}

fn keyed_rng(seed: u64, trial: u64, domain: Domain) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 2) | domain as u64);
    rng
}

/// Two adjacent datasets as seen through one scalar query.
///
/// For uniform sampling, `record_pool` lists the n − 1 known records, then
/// the target record, then the record that replaces it under H0. When it is
/// empty, placeholder values are used; only record identity matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacentScenario {
    pub query_value_without: f64,
    pub query_value_with: f64,
    pub mech: MechanismSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub record_pool: Vec<f64>,
}

impl AdjacentScenario {
    /// Worst case: query values one sensitivity apart.
    pub fn worst_case(mech: MechanismSpec) -> Self {
        let gap = mech.sensitivity().unwrap_or(1.0);
        AdjacentScenario {
            query_value_without: 0.0,
            query_value_with: gap,
            mech,
            record_pool: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mech.validate()?;
        let (q0, q1) = (self.query_value_without, self.query_value_with);
        if !(q0.is_finite() && q1.is_finite()) {
            return Err(Error::Domain("query values must be finite".into()));
        }
        match &self.mech {
            MechanismSpec::DpBound { .. } => Err(Error::Configuration(
                "dp-bound is a trade-off bound, not a sampling mechanism".into(),
            )),
            MechanismSpec::UniformSampling { n, .. } => {
                let want = *n as usize + 1;
                if !self.record_pool.is_empty() && self.record_pool.len() != want {
                    return Err(Error::Configuration(format!(
                        "record_pool needs {want} entries (n - 1 known, target, replacement), got {}",
                        self.record_pool.len()
                    )));
                }
                Ok(())
            }
            m => {
                let s = m.sensitivity().unwrap_or(f64::INFINITY);
                if (q1 - q0).abs() > s * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "|q1 - q0| = {} exceeds the sensitivity {s}",
                        (q1 - q0).abs()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// One mechanism output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Release {
    Value(f64),
    /// Index into the record pool.
    Record(usize),
    /// The dummy symbol of uniform sampling.
    Dummy,
}

/// Rejection rule "ℓ > log_lr, or ℓ = log_lr and u > tie" for a tie-break
/// draw u ~ U(0, 1). `tie = 1` gives the plain test ℓ > log_lr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub log_lr: f64,
    pub tie: f64,
}

impl Threshold {
    pub fn strict(log_lr: f64) -> Self {
        Threshold { log_lr, tie: 1.0 }
    }

    fn rejects(&self, ell: f64, u: f64) -> bool {
        ell > self.log_lr || (ell == self.log_lr && u > self.tie)
    }
}

fn ser_ext<S: Serializer>(x: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x == f64::INFINITY {
        s.serialize_str("inf")
    } else if x == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(x)
    }
}

struct ExtVisitor;

impl Visitor<'_> for ExtVisitor {
    type Value = f64;
    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number, \"inf\" or \"-inf\"")
    }
    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
        Ok(v)
    }
    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
        match v {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
        }
    }
}

struct ExtF64(f64);

impl<'de> Deserialize<'de> for ExtF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_any(ExtVisitor).map(ExtF64)
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        struct Ext(f64);
        impl Serialize for Ext {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                ser_ext(self.0, s)
            }
        }
        let mut st = s.serialize_struct("Threshold", 2)?;
        st.serialize_field("log_lr", &Ext(self.log_lr))?;
        st.serialize_field("tie", &self.tie)?;
        st.end()
    }
}

/// Accepts `{"log_lr": x, "tie": t}` or a bare number (strict threshold).
impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Threshold;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a threshold number or {\"log_lr\", \"tie\"}")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Threshold, E> {
                Ok(Threshold::strict(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Threshold, E> {
                Ok(Threshold::strict(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Threshold, E> {
                Ok(Threshold::strict(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Threshold, E> {
                ExtVisitor.visit_str(v).map(Threshold::strict)
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Threshold, A::Error> {
                let mut log_lr = None;
                let mut tie = 1.0;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "log_lr" => log_lr = Some(map.next_value::<ExtF64>()?.0),
                        "tie" => tie = map.next_value()?,
                        other => return Err(de::Error::unknown_field(other, &["log_lr", "tie"])),
                    }
                }
                let log_lr = log_lr.ok_or_else(|| de::Error::missing_field("log_lr"))?;
                Ok(Threshold { log_lr, tie })
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: Threshold,
    pub alpha_hat: f64,
    pub power_hat: f64,
    pub alpha_se: f64,
    pub power_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackRun {
    pub trials: u64,
    pub seed: u64,
    pub thresholds: Vec<Threshold>,
    pub empirical: Vec<RocPoint>,
    pub warnings: Vec<String>,
}

/// Scenario reduced to what sampling and scoring need.
enum Prepared<'a> {
    Additive {
        q0: f64,
        q1: f64,
        scale: f64,
        noise: Noise<'a>,
    },
    Uniform {
        n: u64,
        dummy_prob: f64,
    },
}

#[derive(Clone, Copy)]
enum Noise<'a> {
    Normal,
    Laplace,
    Other(&'a dyn NoiseDistribution),
}

impl Noise<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Noise::Normal => rng.sample(NormalDraw),
            Noise::Laplace => StandardLaplace.quantile(rng.sample(Open01)),
            Noise::Other(d) => d.quantile(rng.sample(Open01)),
        }
    }
}

impl<'a> Prepared<'a> {
    fn new(s: &'a AdjacentScenario) -> Result<Self> {
        s.validate()?;
        let (q0, q1) = (s.query_value_without, s.query_value_with);
        Ok(match &s.mech {
            MechanismSpec::Laplace { mu, sensitivity } => Prepared::Additive {
                q0,
                q1,
                scale: sensitivity / mu,
                noise: Noise::Laplace,
            },
            MechanismSpec::Gaussian { mu, sensitivity } => Prepared::Additive {
                q0,
                q1,
                scale: sensitivity / mu,
                noise: Noise::Normal,
            },
            MechanismSpec::CustomLogConcave {
                mu,
                sensitivity,
                noise,
            } => Prepared::Additive {
                q0,
                q1,
                scale: sensitivity / mu,
                noise: Noise::Other(noise.distribution()),
            },
            MechanismSpec::UniformSampling { mu, n } => Prepared::Uniform {
                n: *n,
                dummy_prob: (-mu).exp(),
            },
            MechanismSpec::DpBound { .. } => unreachable!("rejected by validate"),
        })
    }

    fn sample(&self, under_h1: bool, rng: &mut ChaCha8Rng) -> Release {
        match *self {
            Prepared::Additive { q0, q1, scale, noise } => {
                let q = if under_h1 { q1 } else { q0 };
                if scale == 0.0 {
                    Release::Value(q)
                } else {
                    Release::Value(q + scale * noise.draw(rng))
                }
            }
            Prepared::Uniform { n, dummy_prob } => {
                let u: f64 = rng.random();
                if u < dummy_prob {
                    return Release::Dummy;
                }
                let slot = rng.random_range(0..n) as usize;
                let last = n as usize - 1;
                if slot == last && !under_h1 {
                    Release::Record(last + 1)
                } else {
                    Release::Record(slot)
                }
            }
        }
    }

    /// log p_H1(release) / p_H0(release).
    fn log_lr(&self, release: Release) -> f64 {
        match (self, release) {
            (&Prepared::Additive { q0, q1, scale, noise }, Release::Value(y)) => {
                if q0 == q1 || scale.is_infinite() {
                    return 0.0;
                }
                if scale == 0.0 {
                    return if y == q1 {
                        f64::INFINITY
                    } else if y == q0 {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    };
                }
                let w = (y - q0) / scale;
                let s = (q1 - q0) / scale;
                match noise {
                    Noise::Normal => s * w - 0.5 * s * s,
                    Noise::Laplace => w.abs() - (w - s).abs(),
                    Noise::Other(d) => d.ln_pdf(w - s) - d.ln_pdf(w),
                }
            }
            (&Prepared::Uniform { n, .. }, Release::Record(i)) => {
                let target = n as usize - 1;
                if i == target {
                    f64::INFINITY
                } else if i == target + 1 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    /// Log-LR and tie-break draw for one simulated release.
    fn score(&self, under_h1: bool, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let release = self.sample(under_h1, rng);
        let u: f64 = rng.random();
        (self.log_lr(release), u)
    }
}

/// One mechanism output for `trial`, drawn under H1 (target present) or H0.
pub fn sample_release(
    scenario: &AdjacentScenario,
    under_h1: bool,
    seed: u64,
    trial: u64,
) -> Result<Release> {
    let prepared = Prepared::new(scenario)?;
    let domain = if under_h1 { Domain::Alternative } else { Domain::Null };
    Ok(prepared.sample(under_h1, &mut keyed_rng(seed, trial, domain)))
}

/// Log likelihood ratio the optimal attacker assigns to a release.
pub fn log_likelihood_ratio(scenario: &AdjacentScenario, release: Release) -> Result<f64> {
    Ok(Prepared::new(scenario)?.log_lr(release))
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    if trials >= 1 << 60 {
        return Err(Error::Domain("trials must be below 2^60".into()));
    }
    Ok(())
}

fn batches(trials: u64) -> Vec<(u64, u64)> {
    (0..trials.div_ceil(BATCH))
        .map(|b| (b * BATCH, ((b + 1) * BATCH).min(trials)))
        .collect()
}

fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Empirical false-positive rate and power of the likelihood-ratio test at
/// each threshold.
pub fn lr_attack(
    scenario: &AdjacentScenario,
    trials: u64,
    thresholds: &[Threshold],
    seed: u64,
) -> Result<AttackRun> {
    check_trials(trials)?;
    if thresholds.is_empty() {
        return Err(Error::Domain("at least one threshold is required".into()));
    }
    if thresholds.iter().any(|t| t.log_lr.is_nan() || t.tie.is_nan()) {
        return Err(Error::Domain("thresholds must not be NaN".into()));
    }
    let prepared = Prepared::new(scenario)?;
    let k = thresholds.len();
    let counts = batches(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut c = vec![(0u64, 0u64); k];
            for trial in start..end {
                let h0 = prepared.score(false, &mut keyed_rng(seed, trial, Domain::Null));
                let h1 = prepared.score(true, &mut keyed_rng(seed, trial, Domain::Alternative));
                for (slot, t) in c.iter_mut().zip(thresholds) {
                    slot.0 += t.rejects(h0.0, h0.1) as u64;
                    slot.1 += t.rejects(h1.0, h1.1) as u64;
                }
            }
            c
        })
        .reduce(
            || vec![(0, 0); k],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    let mut warnings = Vec::new();
    let empirical = thresholds
        .iter()
        .zip(counts)
        .map(|(t, (fp, tp))| {
            let alpha_hat = fp as f64 / trials as f64;
            let power_hat = tp as f64 / trials as f64;
            if alpha_hat == 0.0 || alpha_hat == 1.0 {
                warnings.push(format!(
                    "threshold {} (tie {}) is degenerate: alpha_hat = {alpha_hat}",
                    t.log_lr, t.tie
                ));
            }
            RocPoint {
                threshold: *t,
                alpha_hat,
                power_hat,
                alpha_se: binomial_se(alpha_hat, trials),
                power_se: binomial_se(power_hat, trials),
            }
        })
        .collect();
    Ok(AttackRun {
        trials,
        seed,
        thresholds: thresholds.to_vec(),
        empirical,
        warnings,
    })
}

/// Thresholds whose false-positive rate on an independent H0 sample of
/// size `calibration_trials` is exactly round(α·N)/N for each α.
pub fn calibrate_thresholds(
    scenario: &AdjacentScenario,
    alphas: &[f64],
    calibration_trials: u64,
    seed: u64,
) -> Result<Vec<Threshold>> {
    check_trials(calibration_trials)?;
    for &a in alphas {
        check_probability("alpha", a)?;
    }
    let prepared = Prepared::new(scenario)?;
    let mut sample: Vec<(f64, f64)> = batches(calibration_trials)
        .into_par_iter()
        .flat_map_iter(|(start, end)| {
            let prepared = &prepared;
            (start..end).map(move |trial| {
                prepared.score(false, &mut keyed_rng(seed, trial, Domain::Calibration))
            })
        })
        .collect();
    sample.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let n = sample.len();
    Ok(alphas
        .iter()
        .map(|&a| {
            let k = (a * n as f64).round() as usize;
            if k >= n {
                Threshold { log_lr: f64::NEG_INFINITY, tie: -1.0 }
            } else {
                Threshold { log_lr: sample[k].0, tie: sample[k].1 }
            }
        })
        .collect())
}

/// Bayes update using the empirical error rates of one threshold.
pub fn empirical_posterior(run: &AttackRun, p_prior: f64, threshold_index: usize) -> Result<f64> {
    check_open_probability("p_prior", p_prior)?;
    let point = run.empirical.get(threshold_index).ok_or_else(|| {
        Error::Domain(format!(
            "threshold index {threshold_index} out of range for {} thresholds",
            run.empirical.len()
        ))
    })?;
    let hit = p_prior * point.power_hat;
    let denom = (1.0 - p_prior) * point.alpha_hat + hit;
    if denom == 0.0 {
        return Err(Error::ZeroDenominator(
            "the threshold never rejected in the simulation".into(),
        ));
    }
    Ok(hit / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTestEstimate {
    pub replications: u64,
    pub power_hat: f64,
    pub se: f64,
}

/// Simulates the whole pipeline: draw n observations with mean m, release
/// their mean with Gaussian noise of scale Δq/μ, and run the level-α₀
/// Z-test against m0.
pub fn simulate_z_test_power(model: &UtilityModel, replications: u64, seed: u64) -> Result<ZTestEstimate> {
    check_trials(replications)?;
    let sd_n = crate::utility::sigma_n(model)?;
    let s = model.setting;
    let noise_sd = s.delta_q / model.mu.as_f64();
    let critical = normal_quantile(1.0 - s.alpha0);
    let rejections: u64 = batches(replications)
        .into_par_iter()
        .map(|(start, end)| {
            let mut hits = 0u64;
            for rep in start..end {
                let mut rng = keyed_rng(seed, rep, Domain::ZTest);
                let mut sum = 0.0;
                for _ in 0..s.n {
                    let z: f64 = rng.sample(NormalDraw);
                    sum += s.m + s.sigma * z;
                }
                let mut released = sum / s.n as f64;
                if noise_sd > 0.0 {
                    let z: f64 = rng.sample(NormalDraw);
                    released += noise_sd * z;
                }
                hits += ((released - s.m0) / sd_n > critical) as u64;
            }
            hits
        })
        .sum();
    let power_hat = rejections as f64 / replications as f64;
    Ok(ZTestEstimate {
        replications,
        power_hat,
        se: binomial_se(power_hat, replications),
    })
}

pub fn write_run_csv<W: io::Write>(run: &AttackRun, out: W) -> io::Result<()> {
    use crate::csvout::fmt_f64;
    crate::csvout::write_rows(
        out,
        ["threshold", "alpha_hat", "power_hat", "alpha_se", "power_se"],
        run.empirical.iter().map(|p| {
            [
                fmt_f64(p.threshold.log_lr),
                fmt_f64(p.alpha_hat),
                fmt_f64(p.power_hat),
                fmt_f64(p.alpha_se),
                fmt_f64(p.power_se),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::TradeoffCurve;
    use crate::utility::{power_at, PrivacyLoss, UtilitySetting};

    fn worst(m: MechanismSpec) -> AdjacentScenario {
        AdjacentScenario::worst_case(m)
    }

    #[test]
    fn infinite_mu_releases_exact_value() {
        let s = worst(MechanismSpec::laplace(f64::INFINITY, 1.0).unwrap());
        for t in 0..10 {
            assert_eq!(sample_release(&s, false, 3, t).unwrap(), Release::Value(0.0));
            assert_eq!(sample_release(&s, true, 3, t).unwrap(), Release::Value(1.0));
        }
        let ell = log_likelihood_ratio(&s, Release::Value(1.0)).unwrap();
        assert_eq!(ell, f64::INFINITY);
    }

    #[test]
    fn uniform_dummy_frequency() {
        let s = worst(MechanismSpec::uniform_sampling(1.0, 5).unwrap());
        let draws = 100_000u64;
        let dummies = (0..draws)
            .filter(|&t| sample_release(&s, true, 11, t).unwrap() == Release::Dummy)
            .count() as f64
            / draws as f64;
        let p = (-1f64).exp();
        assert!((dummies - p).abs() < 3.0 * binomial_se(p, draws), "{dummies}");
    }

    #[test]
    fn gaussian_noise_scale() {
        let s = worst(MechanismSpec::gaussian(1.0, 1.0).unwrap());
        let xs: Vec<f64> = (0..100_000)
            .map(|t| match sample_release(&s, false, 5, t).unwrap() {
                Release::Value(y) => y,
                other => panic!("{other:?}"),
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_mu_gives_diagonal() {
        for m in [
            MechanismSpec::laplace(0.0, 1.0).unwrap(),
            MechanismSpec::gaussian(0.0, 1.0).unwrap(),
            MechanismSpec::uniform_sampling(0.0, 5).unwrap(),
        ] {
            let s = worst(m);
            let th = calibrate_thresholds(&s, &[0.1, 0.5], 20_000, 1).unwrap();
            let run = lr_attack(&s, 20_000, &th, 2).unwrap();
            for p in &run.empirical {
                let se = (p.alpha_se.powi(2) + p.power_se.powi(2)).sqrt();
                assert!((p.alpha_hat - p.power_hat).abs() < 3.0 * se + 1e-12);
            }
        }
    }

    #[test]
    fn laplace_roc_tracks_tradeoff() {
        let mech = MechanismSpec::laplace(1.0, 1.0).unwrap();
        let curve = TradeoffCurve::new(mech.clone()).unwrap();
        let s = worst(mech);
        let alphas = [0.01, 0.05, 0.1, 0.25, 0.5];
        let th = calibrate_thresholds(&s, &alphas, 100_000, 7).unwrap();
        let run = lr_attack(&s, 100_000, &th, 8).unwrap();
        for (p, a) in run.empirical.iter().zip(alphas) {
            assert!((p.alpha_hat - a).abs() < 0.01);
            let want = curve.power(p.alpha_hat).unwrap();
            assert!((p.power_hat - want).abs() < 0.02, "{a}: {} vs {want}", p.power_hat);
        }
    }

    #[test]
    fn uniform_blatant_point() {
        let s = worst(MechanismSpec::uniform_sampling(1.0, 5).unwrap());
        let run = lr_attack(&s, 100_000, &[Threshold::strict(0.0)], 4).unwrap();
        let p = run.empirical[0];
        assert_eq!(p.alpha_hat, 0.0);
        let leak = (1.0 - (-1f64).exp()) / 5.0;
        assert!((p.power_hat - leak).abs() < 3.0 * binomial_se(leak, 100_000));
        assert_eq!(empirical_posterior(&run, 0.3, 0).unwrap(), 1.0);
        assert_eq!(run.warnings.len(), 1);
    }

    #[test]
    fn deterministic_and_batch_independent() {
        let s = worst(MechanismSpec::gaussian(1.0, 1.0).unwrap());
        let th = [Threshold::strict(0.0), Threshold::strict(1.0)];
        let a = lr_attack(&s, 10_000, &th, 9).unwrap();
        let b = lr_attack(&s, 10_000, &th, 9).unwrap();
        assert_eq!(a, b);
        // a different thread count must not change anything
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let d = pool.install(|| lr_attack(&s, 10_000, &th, 9).unwrap());
        assert_eq!(a, d);
        let c = lr_attack(&s, 10_000, &th, 10).unwrap();
        assert_ne!(a.empirical, c.empirical);
    }

    #[test]
    fn calibration_hits_requested_rate_on_its_sample() {
        let s = worst(MechanismSpec::uniform_sampling(1.0, 5).unwrap());
        let th = calibrate_thresholds(&s, &[0.0, 0.2, 1.0], 10_000, 3).unwrap();
        assert_eq!(th[2], Threshold { log_lr: f64::NEG_INFINITY, tie: -1.0 });
        assert_eq!(th[1].log_lr, 0.0);
        let run = lr_attack(&s, 50_000, &th, 4).unwrap();
        assert_eq!(run.empirical[2].alpha_hat, 1.0);
        assert!((run.empirical[1].alpha_hat - 0.2).abs() < 0.01);
    }

    #[test]
    fn posterior_matches_bayes_rule() {
        let s = worst(MechanismSpec::laplace(1.0, 1.0).unwrap());
        let th = calibrate_thresholds(&s, &[0.05], 100_000, 1).unwrap();
        let run = lr_attack(&s, 100_000, &th, 2).unwrap();
        let post = empirical_posterior(&run, 0.5, 0).unwrap();
        assert!((post - 0.731_058_578_630_005).abs() < 0.02);
        assert!(matches!(empirical_posterior(&run, 0.5, 3), Err(Error::Domain(_))));
        let never = lr_attack(&s, 100, &[Threshold::strict(f64::INFINITY)], 2).unwrap();
        assert!(matches!(empirical_posterior(&never, 0.5, 0), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn z_test_simulation_matches_formula() {
        let setting = UtilitySetting::from_data_range(15, 0.25, (0.0, 1.0), 0.0, 0.2, 0.01).unwrap();
        let model = setting.with_mu(PrivacyLoss::Finite(1.0));
        let est = simulate_z_test_power(&model, 20_000, 1).unwrap();
        let want = power_at(&model).unwrap();
        assert!((est.power_hat - want).abs() < 4.0 * est.se, "{} vs {want}", est.power_hat);
    }

    #[test]
    fn scenario_validation() {
        let mut s = worst(MechanismSpec::laplace(1.0, 1.0).unwrap());
        s.query_value_with = 2.0;
        assert!(s.validate().is_err());
        let s = worst(MechanismSpec::dp_bound(1.0, 0.0).unwrap());
        assert!(matches!(s.validate(), Err(Error::Configuration(_))));
        let mut s = worst(MechanismSpec::uniform_sampling(1.0, 3).unwrap());
        s.record_pool = vec![1.0, 2.0];
        assert!(s.validate().is_err());
        s.record_pool = vec![1.0, 2.0, 3.0, 4.0];
        assert!(s.validate().is_ok());
    }

    #[test]
    fn threshold_json() {
        let t: Vec<Threshold> = serde_json::from_str(r#"[1.5, {"log_lr": "-inf", "tie": 0.25}]"#).unwrap();
        assert_eq!(t[0], Threshold::strict(1.5));
        assert_eq!(t[1], Threshold { log_lr: f64::NEG_INFINITY, tie: 0.25 });
        assert_eq!(serde_json::to_string(&t[1]).unwrap(), r#"{"log_lr":"-inf","tie":0.25}"#);
    }

    #[test]
    fn csv_layout() {
        let s = worst(MechanismSpec::gaussian(1.0, 1.0).unwrap());
        let run = lr_attack(&s, 4, &[Threshold::strict(f64::INFINITY)], 1).unwrap();
        let out = crate::csvout::to_string(|b| write_run_csv(&run, b));
        assert_eq!(out, "threshold,alpha_hat,power_hat,alpha_se,power_se\ninf,0,0,0,0\n");
    }
}
