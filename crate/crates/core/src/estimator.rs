//! Relative score point estimate and moment summary.
//!
//! Each test point `Y_i` contributes a log-density pair `(ℓ₁ᵢ, ℓ₂ᵢ)` and a
//! difference `Xᵢ = ℓ₁ᵢ − ℓ₂ᵢ`. The sample mean of the differences is an
//! unbiased estimate of the relative score
//! `δ = −KL(P‖P̂₁) + KL(P‖P̂₂)`; positive values favour model 1.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Per-test-point log-densities (in nats) under two models.
///
/// Conditional models use the same type with `ℓₖ = log p̂ₖ(yᵢ | xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    // Empty when the sample was built without explicit ids; ids are then `#<index>`.
    ids: Vec<String>,
    ell1: Vec<f64>,
    ell2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub id: String,
    pub ell1: f64,
    pub ell2: f64,
}

impl ScoreSample {
    /// Builds a sample from id-tagged entries, rejecting non-finite values.
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut ids = Vec::with_capacity(entries.len());
        let mut ell1 = Vec::with_capacity(entries.len());
        let mut ell2 = Vec::with_capacity(entries.len());
        for e in entries {
            if !e.ell1.is_finite() || !e.ell2.is_finite() {
                return Err(Error::NonFiniteInput { id: e.id });
            }
            ids.push(e.id);
            ell1.push(e.ell1);
            ell2.push(e.ell2);
        }
        Ok(Self { ids, ell1, ell2 })
    }

    /// Builds a sample from two parallel log-density vectors; entries get
    /// positional ids.
    pub fn from_log_densities(ell1: Vec<f64>, ell2: Vec<f64>) -> Result<Self> {
        if ell1.len() != ell2.len() {
            return Err(Error::DimensionMismatch { expected: ell1.len(), got: ell2.len() });
        }
        if let Some(i) = ell1.iter().zip(&ell2).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFiniteInput { id: format!("#{i}") });
        }
        Ok(Self { ids: Vec::new(), ell1, ell2 })
    }

    /// Builds a sample directly from differences (`ℓ₂ = 0`).
    pub fn from_diffs(diffs: &[f64]) -> Result<Self> {
        Self::from_log_densities(diffs.to_vec(), vec![0.0; diffs.len()])
    }

    pub fn len(&self) -> usize {
        self.ell1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell1.is_empty()
    }

    pub fn id(&self, i: usize) -> Cow<'_, str> {
        match self.ids.get(i) {
            Some(s) => Cow::Borrowed(s.as_str()),
            None => Cow::Owned(format!("#{i}")),
        }
    }

    pub fn ell1(&self) -> &[f64] {
        &self.ell1
    }

    pub fn ell2(&self) -> &[f64] {
        &self.ell2
    }

    pub fn entries(&self) -> impl Iterator<Item = ScoreEntry> + '_ {
        (0..self.len()).map(|i| ScoreEntry { id: self.id(i).into_owned(), ell1: self.ell1[i], ell2: self.ell2[i] })
    }

    pub fn diffs(&self) -> impl ExactSizeIterator<Item = f64> + Clone + '_ {
        self.ell1.iter().zip(&self.ell2).map(|(a, b)| a - b)
    }

    /// The same sample with the two models' roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { ids: self.ids.clone(), ell1: self.ell2.clone(), ell2: self.ell1.clone() }
    }
}

/// Moments of the log-density differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    /// δ̂.
    pub mean: f64,
    /// V̂, with denominator `n − 1`.
    pub variance: f64,
    /// κ̂₃ = m̂₃ / m̂₂^{3/2}.
    pub skewness: f64,
    /// κ̂₄ = m̂₄ / m̂₂² − 3.
    pub kurtosis_excess: f64,
    /// m̂₂, central second moment with denominator `n`.
    pub second_central: f64,
    pub third_central: f64,
    pub fourth_central: f64,
    /// All differences are identical; skewness and kurtosis are reported as 0.
    pub degenerate: bool,
}

impl MomentSummary {
    /// `√(V̂/n)`.
    pub fn stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Mean of the log-density differences.
pub fn relative_score(sample: &ScoreSample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let sum: KahanSum = sample.diffs().collect();
    Ok(sum.value() / sample.len() as f64)
}

pub fn moment_summary(sample: &ScoreSample) -> Result<MomentSummary> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let mean = relative_score(sample)?;
    let (lo, hi) = sample.diffs().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));

    if lo == hi {
        return Ok(MomentSummary {
            n,
            mean: lo,
            variance: 0.0,
            skewness: 0.0,
            kurtosis_excess: 0.0,
            second_central: 0.0,
            third_central: 0.0,
            fourth_central: 0.0,
            degenerate: true,
        });
    }

    let (mut s2, mut s3, mut s4) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for x in sample.diffs() {
        let d = x - mean;
        let d2 = d * d;
        s2.add(d2);
        s3.add(d2 * d);
        s4.add(d2 * d2);
    }
    let nf = n as f64;
    let m2 = s2.value() / nf;
    let m3 = s3.value() / nf;
    let m4 = s4.value() / nf;
    Ok(MomentSummary {
        n,
        mean,
        variance: s2.value() / (nf - 1.0),
        skewness: m3 / m2.powf(1.5),
        kurtosis_excess: m4 / (m2 * m2) - 3.0,
        second_central: m2,
        third_central: m3,
        fourth_central: m4,
        degenerate: false,
    })
}
