//! Relative-score comparison of two generative models.
//!
//! Given per-test-point log-densities `ℓ₁ᵢ = log p̂₁(Yᵢ)` and
//! `ℓ₂ᵢ = log p̂₂(Yᵢ)` for test points drawn from the data distribution `P`,
//! the mean difference estimates
//!
//! ```text
//! δ = −KL(P ‖ P̂₁) + KL(P ‖ P̂₂)
//! ```
//!
//! without ever touching the (unknown) entropy of `P`. `δ > 0` means model 1
//! is closer. Confidence intervals come from the CLT or from Edgeworth
//! expansions that correct for skewness and kurtosis at small `n`.
//!
//! Modules:
//! - [`estimator`]: point estimate and moment summary
//! - [`edgeworth`]: expansion CDFs/densities and quantile solvers
//! - [`inference`]: confidence intervals and verdicts
//! - [`densities`]: analytic models for simulation
//! - [`baselines`]: kNN KL, relative MMD, Wasserstein-2, subsampling, HulC
//! - [`sim`]: coverage/power Monte Carlo harness
//! - [`scorefile`]: log-density dump ingestion
//! - [`cli`]: the `relscore` command line

pub mod assignment;
pub mod baselines;
pub mod cli;
pub mod densities;
pub mod edgeworth;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod matrix;
pub mod numeric;
pub mod plot;
pub mod rng;
pub mod scorefile;
pub mod sim;

pub use edgeworth::{
    ee_cdf, ee_cdf_raw, ee_pdf, equal_tailed_quantiles, hermite, shortest_interval, EdgeworthParams, ExpansionKind,
    QuantileMethod, QuantilePair,
};
pub use error::{Error, Result};
pub use estimator::{moment_summary, relative_score, MomentSummary, ScoreEntry, ScoreSample};
pub use inference::{ci_clt, ci_edgeworth, verdict, CiMethod, ConfidenceInterval, Verdict};
