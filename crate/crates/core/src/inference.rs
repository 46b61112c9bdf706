//! Confidence intervals for the relative score and the comparison verdict.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::edgeworth::{shortest_interval, EdgeworthParams, ExpansionKind, QuantileMethod};
use crate::error::{Error, Result};
use crate::estimator::{moment_summary, MomentSummary, ScoreSample};
use crate::numeric::norm_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Clt,
    EeZ,
    EeT,
    Subsampling,
    Hulc,
    /// Normal interval around a statistic with a jackknife standard error.
    Jackknife,
}

impl CiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMethod::Clt => "clt",
            CiMethod::EeZ => "ee_z",
            CiMethod::EeT => "ee_t",
            CiMethod::Subsampling => "subsampling",
            CiMethod::Hulc => "hulc",
            CiMethod::Jackknife => "jackknife",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Model1Better,
    Model2Better,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Model1Better => "model 1 is closer to the test distribution",
            Verdict::Model2Better => "model 2 is closer to the test distribution",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub method: CiMethod,
    /// Point estimate (δ̂ for the score-based methods).
    pub point: f64,
    /// Scale used to map standardized quantiles back to the score.
    pub stderr: f64,
    pub verdict: Verdict,
    /// Which quantile solver produced the Edgeworth interval.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quantiles: Option<QuantileMethod>,
    /// The interval was scaled with a caller-supplied variance.
    #[serde(default)]
    pub known_variance: bool,
    /// HulC batch count.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub batches: Option<usize>,
}

impl ConfidenceInterval {
    pub(crate) fn new(lower: f64, upper: f64, alpha: f64, method: CiMethod, point: f64, stderr: f64) -> Self {
        let mut ci = Self {
            lower,
            upper,
            alpha,
            method,
            point,
            stderr,
            verdict: Verdict::Inconclusive,
            quantiles: None,
            known_variance: false,
            batches: None,
        };
        ci.verdict = verdict(&ci);
        ci
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// Whether the interval excludes zero.
    pub fn rejects_zero(&self) -> bool {
        !self.contains(0.0)
    }
}

/// Sign rule: model 1 wins iff the interval lies strictly above 0, model 2
/// iff strictly below.
pub fn verdict(ci: &ConfidenceInterval) -> Verdict {
    if ci.lower > 0.0 {
        Verdict::Model1Better
    } else if ci.upper < 0.0 {
        Verdict::Model2Better
    } else {
        Verdict::Inconclusive
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn nondegenerate_summary(sample: &ScoreSample, min_n: usize) -> Result<MomentSummary> {
    if sample.len() < min_n {
        return Err(Error::SampleTooSmall { needed: min_n, got: sample.len() });
    }
    let m = moment_summary(sample)?;
    if m.degenerate || m.variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(m)
}

/// Normal-theory interval `δ̂ ± Φ⁻¹(1−α/2)·√(V̂/n)`.
pub fn ci_clt(sample: &ScoreSample, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let m = nondegenerate_summary(sample, 2)?;
    Ok(ci_clt_from_summary(&m, alpha))
}

pub fn ci_clt_from_summary(m: &MomentSummary, alpha: f64) -> ConfidenceInterval {
    let q = norm_quantile(1.0 - alpha / 2.0);
    let s = m.stderr();
    ConfidenceInterval::new(m.mean - q * s, m.mean + q * s, alpha, CiMethod::Clt, m.mean, s)
}

/// Edgeworth-corrected interval from the shortest `(1−α)` interval of the
/// expansion with plug-in skewness and kurtosis.
///
/// For kind `Z` the scale is `√(V/n)` with `V = known_variance` when given,
/// else `V̂`. For kind `T` the pivot is studentized with the central second
/// moment `m̂₂` (denominator `n`), the normalization the `T` expansion is
/// written for.
pub fn ci_edgeworth(
    sample: &ScoreSample,
    alpha: f64,
    kind: ExpansionKind,
    known_variance: Option<f64>,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let m = nondegenerate_summary(sample, 4)?;
    if let Some(v) = known_variance {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!("known variance must be positive, got {v}")));
        }
        if v == 0.0 {
            return Err(Error::ZeroVariance);
        }
    }
    ci_edgeworth_from_summary(&m, alpha, kind, known_variance)
}

pub fn ci_edgeworth_from_summary(
    m: &MomentSummary,
    alpha: f64,
    kind: ExpansionKind,
    known_variance: Option<f64>,
) -> Result<ConfidenceInterval> {
    let n = m.n as f64;
    let params = EdgeworthParams::new(m.n, m.skewness, m.kurtosis_excess, kind)?;
    let (scale, method, known) = match kind {
        ExpansionKind::Z => match known_variance {
            Some(v) => ((v / n).sqrt(), CiMethod::EeZ, true),
            None => (m.stderr(), CiMethod::EeZ, false),
        },
        ExpansionKind::T => ((m.second_central / n).sqrt(), CiMethod::EeT, false),
    };
    let pair = shortest_interval(&params, alpha)?;
    let mut ci =
        ConfidenceInterval::new(m.mean - pair.hi * scale, m.mean - pair.lo * scale, alpha, method, m.mean, scale);
    ci.quantiles = Some(pair.method);
    ci.known_variance = known;
    Ok(ci)
}
