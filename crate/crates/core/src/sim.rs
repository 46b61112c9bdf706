//! Monte Carlo harness for coverage, power and interval length.
//!
//! Each grid point fixes `(ε, n)`. The reference model `P` and model 1 are
//! the unperturbed transform model; model 2 is perturbed by `ε`. Every
//! replication draws `n` test points from `P`, scores them under both
//! models, and runs each requested method. Baselines that need generated
//! samples get their own independent draws from `P`, `P̂₁` and `P̂₂`.
//!
//! Random streams are keyed by `(seed, grid index, replication, purpose)`,
//! so reports are bit-identical for a fixed config regardless of thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    default_block, empirical_w22, gaussian_w2_closed, hulc_ci, knn_kl, median_heuristic, relative_mmd, subsampling_ci,
    Kernel, TwoSampleInput,
};
use crate::densities::{
    sample, true_delta_gaussian, true_delta_monte_carlo, DensityModel, GaussianAffineModel, InputDistribution,
    Transform, TransformModel,
};
use crate::edgeworth::ExpansionKind;
use crate::error::{Error, Result};
use crate::estimator::{moment_summary, ScoreSample};
use crate::inference::{ci_clt_from_summary, ci_edgeworth_from_summary, ConfidenceInterval};
use crate::matrix::Matrix;
use crate::numeric::KahanSum;
use crate::rng::stream_rng;

const STREAM_MODEL: u64 = 0;
const STREAM_ORACLE: u64 = 1;
const STREAM_REP: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Clt,
    EeZ,
    EeT,
    KnnSub,
    KnnHulc,
    W2Sub,
    Mmd,
}

impl SimMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMethod::Clt => "clt",
            SimMethod::EeZ => "ee_z",
            SimMethod::EeT => "ee_t",
            SimMethod::KnnSub => "knn_sub",
            SimMethod::KnnHulc => "knn_hulc",
            SimMethod::W2Sub => "w2_sub",
            SimMethod::Mmd => "mmd",
        }
    }

    fn uses_scores(self) -> bool {
        matches!(self, SimMethod::Clt | SimMethod::EeZ | SimMethod::EeT)
    }
}

fn default_d() -> usize {
    10
}
fn default_n() -> usize {
    1000
}
fn default_reps() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.1
}
fn default_methods() -> Vec<SimMethod> {
    vec![SimMethod::Clt]
}
fn default_oracle_n() -> usize {
    1_000_000
}
fn default_knn_k() -> usize {
    1
}
fn default_subsample_replicates() -> usize {
    crate::baselines::SUBSAMPLING_REPLICATES
}
fn default_w2_max_points() -> usize {
    256
}
fn default_input() -> InputDistribution {
    InputDistribution::Normal
}
fn default_transform() -> Transform {
    Transform::Identity
}

/// Default sample sizes for the small-sample sweep.
pub const DEFAULT_N_GRID: [usize; 6] = [30, 50, 100, 200, 500, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub eps_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default = "default_transform")]
    pub transform: Transform,
    #[serde(default = "default_input")]
    pub input_dist: InputDistribution,
    #[serde(default = "default_methods")]
    pub methods: Vec<SimMethod>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    /// Subsample size; `⌊√n⌋` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_block: Option<usize>,
    #[serde(default = "default_subsample_replicates")]
    pub subsample_replicates: usize,
    /// The empirical-W2 baseline uses at most this many points per sample.
    #[serde(default = "default_w2_max_points")]
    pub w2_max_points: usize,
    /// RBF with median-heuristic bandwidth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmd_kernel: Option<Kernel>,
}

impl ExperimentConfig {
    /// Gaussian-affine setting with `d = 10` and the given grid.
    pub fn gaussian(n: usize, reps: usize, eps_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            d: default_d(),
            n,
            reps,
            alpha: default_alpha(),
            eps_grid,
            n_grid: None,
            transform: Transform::Identity,
            input_dist: InputDistribution::Normal,
            methods: default_methods(),
            seed,
            oracle_n: default_oracle_n(),
            knn_k: default_knn_k(),
            subsample_block: None,
            subsample_replicates: default_subsample_replicates(),
            w2_max_points: default_w2_max_points(),
            mmd_kernel: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: &str| Err(Error::Config { path: path.into(), message: message.into() });
        if self.d == 0 {
            return fail("d", "must be at least 1");
        }
        if self.reps == 0 {
            return fail("reps", "must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail("alpha", "must lie strictly between 0 and 1");
        }
        if self.eps_grid.is_empty() {
            return fail("eps_grid", "must not be empty");
        }
        if let Some(i) = self.eps_grid.iter().position(|e| !e.is_finite() || *e <= -0.8) {
            return fail(&format!("eps_grid[{i}]"), "must be finite and keep a + eps positive");
        }
        if self.n < 2 {
            return fail("n", "must be at least 2");
        }
        if let Some(g) = &self.n_grid {
            if g.is_empty() {
                return fail("n_grid", "must not be empty");
            }
            if let Some(i) = g.iter().position(|&n| n < 2) {
                return fail(&format!("n_grid[{i}]"), "must be at least 2");
            }
        }
        if self.methods.is_empty() {
            return fail("methods", "must not be empty");
        }
        if self.oracle_n < 2 {
            return fail("oracle_n", "must be at least 2");
        }
        if self.knn_k == 0 {
            return fail("knn_k", "must be at least 1");
        }
        if self.subsample_replicates < 2 {
            return fail("subsample_replicates", "must be at least 2");
        }
        if self.w2_max_points < 2 || self.w2_max_points > crate::baselines::W2_MAX_POINTS {
            return fail("w2_max_points", "must lie in [2, 512]");
        }
        if let Err(e) = self.input_dist.validate() {
            return fail("input_dist", &e.to_string());
        }
        if self.transform == Transform::Logit && !self.input_dist.unit_interval_support() {
            return fail("transform", "logit needs an input distribution supported on (0, 1)");
        }
        Ok(())
    }

    /// Parses TOML or JSON (chosen by `format`), reporting the field path of
    /// any error.
    pub fn parse(text: &str, format: ConfigFormat) -> Result<Self> {
        let cfg: Self = match format {
            ConfigFormat::Json => {
                let de = &mut serde_json::Deserializer::from_str(text);
                serde_path_to_error::deserialize(de)
                    .map_err(|e| Error::Config { path: e.path().to_string(), message: e.inner().to_string() })?
            }
            ConfigFormat::Toml => {
                let de = toml::Deserializer::parse(text)
                    .map_err(|e| Error::Config { path: ".".into(), message: e.to_string() })?;
                serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
                    path: e.path().to_string(),
                    message: e.inner().message().to_string(),
                })?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

/// The three models of one grid point.
#[derive(Debug, Clone)]
pub struct ModelTriple {
    pub reference: TransformModel,
    pub model1: TransformModel,
    pub model2: TransformModel,
}

impl ModelTriple {
    fn gaussians(&self) -> Option<(GaussianAffineModel, GaussianAffineModel, GaussianAffineModel)> {
        Some((self.reference.as_gaussian()?, self.model1.as_gaussian()?, self.model2.as_gaussian()?))
    }
}

/// Diagonal scale `A ~ U(0.8, 1.2)` and shift `B ~ N(0, I)`, fixed by the seed.
pub fn draw_affine(d: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, &[STREAM_MODEL]);
    let unif = Uniform::new(0.8, 1.2).expect("valid range");
    let a = (0..d).map(|_| rng.sample(unif)).collect();
    let b = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    (a, b)
}

pub fn build_models(cfg: &ExperimentConfig, eps: f64) -> Result<ModelTriple> {
    let (a, b) = draw_affine(cfg.d, cfg.seed);
    let reference = TransformModel::new(cfg.input_dist, cfg.transform, a, b, 0.0)?;
    Ok(ModelTriple { model1: reference.clone(), model2: reference.with_eps(eps)?, reference })
}

/// Ground truth at one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTruth {
    pub eps: f64,
    pub true_delta: Option<f64>,
    /// Zero for closed-form truths.
    pub mc_stderr: f64,
    /// Variance of one log-density difference, when estimated.
    pub oracle_variance: Option<f64>,
    /// `−W₂²(P, P̂₁) + W₂²(P, P̂₂)`, Gaussian setting only.
    pub w2_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn compute_truth(cfg: &ExperimentConfig, eps_idx: usize, eps: f64) -> Result<GridTruth> {
    let models = build_models(cfg, eps)?;
    let need_variance = cfg.methods.contains(&SimMethod::EeZ);
    let oracle_seed = stream_rng(cfg.seed, &[STREAM_ORACLE, eps_idx as u64]).random::<u64>();
    let mut truth =
        GridTruth { eps, true_delta: None, mc_stderr: 0.0, oracle_variance: None, w2_target: None, note: None };
    let gaussian = models.gaussians();
    if let Some((p, p1, p2)) = &gaussian {
        truth.true_delta = Some(true_delta_gaussian(p, p1, p2)?);
        truth.w2_target = Some(gaussian_w2_closed(p, p2)? - gaussian_w2_closed(p, p1)?);
    }
    if gaussian.is_none() || need_variance {
        match true_delta_monte_carlo(&models.reference, &models.model1, &models.model2, cfg.oracle_n, oracle_seed) {
            Ok(mc) => {
                if gaussian.is_none() {
                    truth.true_delta = Some(mc.delta);
                    truth.mc_stderr = mc.mc_stderr;
                }
                truth.oracle_variance = Some(mc.variance);
            }
            Err(Error::SupportMismatch) => {
                truth.true_delta = None;
                truth.note = Some(Error::SupportMismatch.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(truth)
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Done { cover: Option<bool>, reject: bool, length: f64, point: f64 },
    Failed(Error),
}

fn outcome(ci: Result<ConfidenceInterval>, target: Option<f64>) -> Outcome {
    match ci {
        Ok(ci) => Outcome::Done {
            cover: target.map(|t| ci.contains(t)),
            reject: ci.rejects_zero(),
            length: ci.length(),
            point: ci.point,
        },
        Err(e) => Outcome::Failed(e),
    }
}

struct BaselineSamples {
    p: Matrix,
    s1: Matrix,
    s2: Matrix,
}

fn pair_stat<F>(bs: &BaselineSamples, idx: &[usize], f: F) -> Result<f64>
where
    F: Fn(&Matrix, &Matrix) -> Result<f64>,
{
    let p = bs.p.select_rows(idx);
    // −D(P, P̂₁) + D(P, P̂₂)
    Ok(f(&p, &bs.s2.select_rows(idx))? - f(&p, &bs.s1.select_rows(idx))?)
}

fn run_replication(
    cfg: &ExperimentConfig,
    models: &ModelTriple,
    truth: &GridTruth,
    n: usize,
    grid_idx: usize,
    rep: usize,
) -> Vec<Outcome> {
    let key = |purpose: u64| stream_rng(cfg.seed, &[STREAM_REP, grid_idx as u64, rep as u64, purpose]);
    let delta = truth.true_delta;

    let scores = if cfg.methods.iter().any(|m| m.uses_scores()) {
        let ys = sample(&models.reference, &mut key(0), n);
        let ell1 = ys.iter_rows().map(|y| models.model1.logpdf_unchecked(y)).collect();
        let ell2 = ys.iter_rows().map(|y| models.model2.logpdf_unchecked(y)).collect();
        Some(ScoreSample::from_log_densities(ell1, ell2).and_then(|s| moment_summary(&s)))
    } else {
        None
    };
    let score_ci = |kind: Option<ExpansionKind>, known: Option<f64>| -> Result<ConfidenceInterval> {
        let m = scores.as_ref().expect("scores drawn").clone()?;
        if m.degenerate {
            return Err(Error::ZeroVariance);
        }
        match kind {
            None => Ok(ci_clt_from_summary(&m, cfg.alpha)),
            Some(k) => {
                if m.n < 4 {
                    return Err(Error::SampleTooSmall { needed: 4, got: m.n });
                }
                ci_edgeworth_from_summary(&m, cfg.alpha, k, known)
            }
        }
    };

    let baseline = if cfg.methods.iter().any(|m| !m.uses_scores()) {
        let mut rng = key(1);
        Some(BaselineSamples {
            p: sample(&models.reference, &mut rng, n),
            s1: sample(&models.model1, &mut rng, n),
            s2: sample(&models.model2, &mut rng, n),
        })
    } else {
        None
    };

    cfg.methods
        .iter()
        .map(|method| match method {
            SimMethod::Clt => outcome(score_ci(None, None), delta),
            SimMethod::EeZ => outcome(score_ci(Some(ExpansionKind::Z), truth.oracle_variance), delta),
            SimMethod::EeT => outcome(score_ci(Some(ExpansionKind::T), None), delta),
            SimMethod::KnnSub | SimMethod::KnnHulc => {
                let bs = baseline.as_ref().expect("baseline samples drawn");
                let k = cfg.knn_k;
                let stat = |idx: &[usize]| pair_stat(bs, idx, |x, y| knn_kl(TwoSampleInput::new(x, y)?, k));
                let ci = if *method == SimMethod::KnnSub {
                    let block = cfg.subsample_block.unwrap_or_else(|| default_block(n));
                    subsampling_ci(n, stat, cfg.alpha, block, cfg.subsample_replicates, &mut key(2))
                } else {
                    hulc_ci(n, stat, cfg.alpha, &mut key(3))
                };
                outcome(ci, delta)
            }
            SimMethod::W2Sub => {
                let bs = baseline.as_ref().expect("baseline samples drawn");
                let m = n.min(cfg.w2_max_points);
                let stat = |idx: &[usize]| pair_stat(bs, idx, |x, y| empirical_w22(TwoSampleInput::new(x, y)?));
                let block = default_block(m).max(2).min(m - 1);
                outcome(
                    subsampling_ci(m, stat, cfg.alpha, block, cfg.subsample_replicates, &mut key(4)),
                    truth.w2_target,
                )
            }
            SimMethod::Mmd => {
                let bs = baseline.as_ref().expect("baseline samples drawn");
                let kernel = cfg
                    .mmd_kernel
                    .unwrap_or_else(|| Kernel::Rbf { bandwidth: median_heuristic(&[&bs.p, &bs.s1, &bs.s2]) });
                outcome(relative_mmd(&bs.p, &bs.s1, &bs.s2, kernel).and_then(|r| r.interval(cfg.alpha)), None)
            }
        })
        .collect()
}

/// One line of the report: a grid point × method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub eps: f64,
    pub n: usize,
    pub transform: String,
    pub input: String,
    pub method: SimMethod,
    pub reps: usize,
    /// Replications that produced an interval.
    pub valid: usize,
    pub excluded: usize,
    pub cover_count: Option<usize>,
    pub coverage: Option<f64>,
    pub reject_count: usize,
    /// Fraction of valid replications whose interval excludes 0; the type-I
    /// error when the true score is 0.
    pub power: Option<f64>,
    pub mean_length: Option<f64>,
    pub mean_point: Option<f64>,
    pub true_delta: Option<f64>,
    /// The quantity the method's interval targets (δ, or the W2 difference).
    pub target: Option<f64>,
    pub mc_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub errors: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Diagonal of `A`.
    pub scale: Vec<f64>,
    /// `B`.
    pub shift: Vec<f64>,
    pub truths: Vec<GridTruth>,
    /// Empirical-W2 baseline subsample size, when that method ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2_points: Option<usize>,
    pub rows: Vec<ReportRow>,
}

fn error_key(e: &Error) -> String {
    match e {
        Error::ZeroVariance => "zero_variance".into(),
        Error::NonFiniteInput { .. } => "non_finite_log_density".into(),
        Error::DuplicatePoint { .. } => "duplicate_point".into(),
        Error::SampleTooSmall { .. } => "sample_too_small".into(),
        other => other.to_string(),
    }
}

fn aggregate(
    cfg: &ExperimentConfig,
    truth: &GridTruth,
    n: usize,
    method: SimMethod,
    outcomes: impl Iterator<Item = Outcome>,
) -> ReportRow {
    let (mut valid, mut covers, mut has_target, mut rejects) = (0usize, 0usize, false, 0usize);
    let (mut len_sum, mut point_sum) = (KahanSum::new(), KahanSum::new());
    let mut errors = BTreeMap::new();
    for o in outcomes {
        match o {
            Outcome::Done { cover, reject, length, point } => {
                valid += 1;
                if let Some(c) = cover {
                    has_target = true;
                    covers += c as usize;
                }
                rejects += reject as usize;
                len_sum.add(length);
                point_sum.add(point);
            }
            Outcome::Failed(e) => *errors.entry(error_key(&e)).or_insert(0) += 1,
        }
    }
    let target = match method {
        SimMethod::W2Sub => truth.w2_target,
        SimMethod::Mmd => None,
        _ => truth.true_delta,
    };
    let frac = |k: usize| (valid > 0).then(|| k as f64 / valid as f64);
    let note = if valid == 0 && errors.len() == 1 && errors.contains_key("zero_variance") {
        Some("degenerate: identical models give zero-variance scores".to_string())
    } else if valid == 0 {
        Some("no valid replications".to_string())
    } else {
        truth.note.clone()
    };
    ReportRow {
        eps: truth.eps,
        n,
        transform: cfg.transform.name().to_string(),
        input: cfg.input_dist.name(),
        method,
        reps: cfg.reps,
        valid,
        excluded: cfg.reps - valid,
        cover_count: (has_target && valid > 0).then_some(covers),
        coverage: if has_target { frac(covers) } else { None },
        reject_count: rejects,
        power: frac(rejects),
        mean_length: frac(1).map(|_| len_sum.value() / valid as f64),
        mean_point: frac(1).map(|_| point_sum.value() / valid as f64),
        true_delta: truth.true_delta,
        target,
        mc_stderr: truth.mc_stderr,
        note,
        errors,
    }
}

fn run_grid(cfg: &ExperimentConfig, ns: &[usize]) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (scale, shift) = draw_affine(cfg.d, cfg.seed);
    let truths: Vec<GridTruth> =
        cfg.eps_grid.iter().enumerate().map(|(i, &eps)| compute_truth(cfg, i, eps)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut grid_idx = 0usize;
    for (eps_idx, truth) in truths.iter().enumerate() {
        let models = build_models(cfg, cfg.eps_grid[eps_idx])?;
        for &n in ns {
            let g = grid_idx;
            grid_idx += 1;
            if truth.true_delta.is_none() {
                for &method in &cfg.methods {
                    let failed = (0..cfg.reps).map(|_| Outcome::Failed(Error::SupportMismatch));
                    let mut row = aggregate(cfg, truth, n, method, failed);
                    row.note = truth.note.clone();
                    rows.push(row);
                }
                continue;
            }
            let per_rep: Vec<Vec<Outcome>> =
                (0..cfg.reps).into_par_iter().map(|rep| run_replication(cfg, &models, truth, n, g, rep)).collect();
            for (k, &method) in cfg.methods.iter().enumerate() {
                rows.push(aggregate(cfg, truth, n, method, per_rep.iter().map(|r| r[k].clone())));
            }
        }
    }
    let w2_points = cfg
        .methods
        .contains(&SimMethod::W2Sub)
        .then(|| ns.iter().map(|&n| n.min(cfg.w2_max_points)).max().unwrap_or(0));
    Ok(ExperimentReport { config: cfg.clone(), scale, shift, truths, w2_points, rows })
}

/// Coverage/power over `eps_grid` at sample size `cfg.n`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_grid(cfg, &[cfg.n])
}

/// Coverage/length over `eps_grid × n_grid` (default `n_grid`
/// [`DEFAULT_N_GRID`]).
pub fn run_small_n_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = cfg.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
    run_grid(cfg, &ns)
}

/// Runs the sweep when `n_grid` is set, else the ε experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.n_grid.is_some() {
        run_small_n_sweep(cfg)
    } else {
        run_experiment(cfg)
    }
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub const CSV_HEADER: &'static str = "eps,n,transform,input,method,reps,valid,excluded,cover_count,coverage,\
reject_count,power,mean_length,mean_point,true_delta,target,mc_stderr,note";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.eps,
                r.n,
                csv_field(&r.transform),
                csv_field(&r.input),
                r.method.as_str(),
                r.reps,
                r.valid,
                r.excluded,
                opt(&r.cover_count),
                opt(&r.coverage),
                r.reject_count,
                opt(&r.power),
                opt(&r.mean_length),
                opt(&r.mean_point),
                opt(&r.true_delta),
                opt(&r.target),
                r.mc_stderr,
                csv_field(r.note.as_deref().unwrap_or("")),
            );
        }
        out
    }

    pub fn rows_for(&self, method: SimMethod) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}
