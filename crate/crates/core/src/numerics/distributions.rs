//! Zero-mean, unit-scale noise distributions.
//!
//! Each distribution exposes its CDF, survival function and both quantile
//! directions. Tail probabilities are computed directly rather than as
//! `1 - cdf` so that ratios of tiny survival probabilities stay accurate.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::fmt;
use std::sync::Arc;

/// A continuous noise law on the whole real line.
pub trait NoiseDistribution: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn cdf(&self, x: f64) -> f64;
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }
    /// Inverse of `cdf` on (0, 1).
    fn quantile(&self, p: f64) -> f64;
    /// Inverse of `sf` on (0, 1).
    fn isf(&self, p: f64) -> f64 {
        self.quantile(1.0 - p)
    }
    fn ln_pdf(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StandardNormal;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StandardLaplace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StandardLogistic;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

impl NoiseDistribution for StandardNormal {
    fn name(&self) -> &str {
        "normal"
    }

    fn cdf(&self, x: f64) -> f64 {
        normal_cdf(x)
    }

    fn sf(&self, x: f64) -> f64 {
        normal_cdf(-x)
    }

    fn quantile(&self, p: f64) -> f64 {
        normal_quantile(p)
    }

    fn isf(&self, p: f64) -> f64 {
        -normal_quantile(p)
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        -0.5 * x * x - LN_SQRT_2PI
    }
}

impl NoiseDistribution for StandardLaplace {
    fn name(&self) -> &str {
        "laplace"
    }

    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * x.exp()
        } else {
            1.0 - 0.5 * (-x).exp()
        }
    }

    fn sf(&self, x: f64) -> f64 {
        self.cdf(-x)
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.5 {
            (2.0 * p).ln()
        } else {
            -(2.0 * (1.0 - p)).ln()
        }
    }

    fn isf(&self, p: f64) -> f64 {
        -self.quantile(p)
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        -LN_2 - x.abs()
    }
}

impl NoiseDistribution for StandardLogistic {
    fn name(&self) -> &str {
        "logistic"
    }

    fn cdf(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }

    fn sf(&self, x: f64) -> f64 {
        self.cdf(-x)
    }

    fn quantile(&self, p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    fn isf(&self, p: f64) -> f64 {
        ((1.0 - p) / p).ln()
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        // log(e^{-|x|} / (1 + e^{-|x|})^2), symmetric in x
        let a = x.abs();
        -a - 2.0 * (-a).exp().ln_1p()
    }
}

/// Standard normal CDF, Φ(x) = erfc(-x/√2)/2.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// Standard normal quantile (Wichura's AS 241, PPND16).
///
/// Returns -∞ at 0, +∞ at 1 and NaN outside [0, 1].
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Named noise families accepted for custom log-concave mechanisms.
///
/// The `Custom` variant wraps a caller-supplied distribution; it can be
/// evaluated but not round-tripped through JSON.
#[derive(Clone)]
pub enum NoiseFamily {
    Normal,
    Laplace,
    Logistic,
    Custom(Arc<dyn NoiseDistribution>),
}

impl NoiseFamily {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "normal" | "gaussian" => Some(NoiseFamily::Normal),
            "laplace" => Some(NoiseFamily::Laplace),
            "logistic" => Some(NoiseFamily::Logistic),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        self.distribution().name()
    }

    pub fn distribution(&self) -> &dyn NoiseDistribution {
        match self {
            NoiseFamily::Normal => &StandardNormal,
            NoiseFamily::Laplace => &StandardLaplace,
            NoiseFamily::Logistic => &StandardLogistic,
            NoiseFamily::Custom(d) => d.as_ref(),
        }
    }
}

impl fmt::Debug for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NoiseFamily({})", self.name())
    }
}

impl PartialEq for NoiseFamily {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (NoiseFamily::Custom(a), NoiseFamily::Custom(b)) => Arc::ptr_eq(a, b),
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        }
    }
}
