//! Analytic generative models for simulation.
//!
//! A [`TransformModel`] draws `X` coordinatewise from an input distribution
//! and outputs `Y = (a + ε) ⊙ g(X) + b + ε`. Its log-density follows from the
//! change of variables
//!
//! ```text
//! log p(y) = Σⱼ [ log p_X(g⁻¹(uⱼ)) − log(aⱼ + ε) − log |g′(g⁻¹(uⱼ))| ],   uⱼ = (yⱼ − bⱼ − ε)/(aⱼ + ε)
//! ```
//!
//! with two-branch transforms (`x²`, `|x|^{3/2}`) summing both preimages.

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{log_add_exp, norm_logcdf, norm_logpdf};
use crate::rng::{stream_rng, StreamRng};

fn default_lambda() -> f64 {
    5.0
}
fn default_chi_k() -> f64 {
    3.0
}
fn default_gamma_shape() -> f64 {
    2.0
}
fn default_gamma_rate() -> f64 {
    1.0
}
fn default_beta_a() -> f64 {
    2.0
}
fn default_beta_b() -> f64 {
    5.0
}

/// Per-coordinate input distribution, i.i.d. across dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputDistribution {
    Normal,
    SkewNormal {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    ChiSquare {
        #[serde(default = "default_chi_k")]
        k: f64,
    },
    Gamma {
        #[serde(default = "default_gamma_shape")]
        shape: f64,
        #[serde(default = "default_gamma_rate")]
        rate: f64,
    },
    Beta {
        #[serde(default = "default_beta_a")]
        a: f64,
        #[serde(default = "default_beta_b")]
        b: f64,
    },
}

impl InputDistribution {
    pub fn skew_normal() -> Self {
        Self::SkewNormal { lambda: default_lambda() }
    }

    pub fn chi_square() -> Self {
        Self::ChiSquare { k: default_chi_k() }
    }

    pub fn gamma() -> Self {
        Self::Gamma { shape: default_gamma_shape(), rate: default_gamma_rate() }
    }

    pub fn beta() -> Self {
        Self::Beta { a: default_beta_a(), b: default_beta_b() }
    }

    pub fn name(&self) -> String {
        match *self {
            Self::Normal => "normal".into(),
            Self::SkewNormal { lambda } => format!("skew_normal({lambda})"),
            Self::ChiSquare { k } => format!("chi_square({k})"),
            Self::Gamma { shape, rate } => format!("gamma({shape},{rate})"),
            Self::Beta { a, b } => format!("beta({a},{b})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Normal => true,
            Self::SkewNormal { lambda } => lambda.is_finite(),
            Self::ChiSquare { k } => k > 0.0 && k.is_finite(),
            Self::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Self::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad input distribution parameters: {self:?}")))
        }
    }

    /// Whether the support lies inside `(0, 1)`.
    pub fn unit_interval_support(&self) -> bool {
        matches!(self, Self::Beta { .. })
    }

    /// Exact log-density; `-inf` outside the support.
    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal => norm_logpdf(x),
            Self::SkewNormal { lambda } => std::f64::consts::LN_2 + norm_logpdf(x) + norm_logcdf(lambda * x),
            Self::ChiSquare { k } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let h = 0.5 * k;
                (h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - libm::lgamma(h)
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - libm::lgamma(shape)
            }
            Self::Beta { a, b } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() + libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
            }
        }
    }

    fn sampler(&self) -> Result<InputSampler> {
        self.validate()?;
        let bad = |e: &dyn std::fmt::Display| Error::InvalidParameter(e.to_string());
        Ok(match *self {
            Self::Normal => InputSampler::Normal,
            Self::SkewNormal { lambda } => {
                let delta = lambda / (1.0 + lambda * lambda).sqrt();
                InputSampler::SkewNormal { delta, ortho: (1.0 - delta * delta).sqrt() }
            }
            Self::ChiSquare { k } => InputSampler::ChiSquare(ChiSquared::new(k).map_err(|e| bad(&e))?),
            Self::Gamma { shape, rate } => InputSampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| bad(&e))?),
            Self::Beta { a, b } => InputSampler::Beta(Beta::new(a, b).map_err(|e| bad(&e))?),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum InputSampler {
    Normal,
    SkewNormal { delta: f64, ortho: f64 },
    ChiSquare(ChiSquared<f64>),
    Gamma(Gamma<f64>),
    Beta(Beta<f64>),
}

impl InputSampler {
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Normal => rng.sample(StandardNormal),
            Self::SkewNormal { delta, ortho } => {
                let u0: f64 = rng.sample(StandardNormal);
                let u1: f64 = rng.sample(StandardNormal);
                delta * u0.abs() + ortho * u1
            }
            Self::ChiSquare(d) => d.sample(rng),
            Self::Gamma(d) => d.sample(rng),
            Self::Beta(d) => d.sample(rng),
        }
    }
}

/// Log-density of an input distribution at `x`.
pub fn input_logpdf(dist: &InputDistribution, x: f64) -> f64 {
    dist.logpdf(x)
}

/// Coordinatewise generator `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Sigmoid,
    Logit,
    /// `σ(a σ(a σ(x) + b) + b)` with the model's own `a`, `b`.
    MultilayerSigmoid,
    Square,
    #[serde(rename = "abs_pow32")]
    AbsPow32,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Sigmoid => "sigmoid",
            Transform::Logit => "logit",
            Transform::MultilayerSigmoid => "multilayer_sigmoid",
            Transform::Square => "square",
            Transform::AbsPow32 => "abs_pow32",
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// `ln σ(z)`.
#[inline]
fn ln_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[inline]
fn in_unit(u: f64) -> bool {
    u > 0.0 && u < 1.0
}

/// `Y = (a + ε) ⊙ g(X) + b + ε`.
#[derive(Debug, Clone)]
pub struct TransformModel {
    input: InputDistribution,
    transform: Transform,
    a: Vec<f64>,
    b: Vec<f64>,
    eps: f64,
    sampler: InputSampler,
}

impl TransformModel {
    pub fn new(input: InputDistribution, transform: Transform, a: Vec<f64>, b: Vec<f64>, eps: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        if a.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !eps.is_finite() || a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("model parameters must be finite".into()));
        }
        if a.iter().any(|&v| v + eps <= 0.0 || v <= 0.0) {
            return Err(Error::InvalidParameter("scales a and a + eps must be positive".into()));
        }
        if transform == Transform::Logit && !input.unit_interval_support() {
            return Err(Error::InvalidParameter("the logit transform needs an input supported on (0, 1)".into()));
        }
        let sampler = input.sampler()?;
        Ok(Self { input, transform, a, b, eps, sampler })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn input(&self) -> InputDistribution {
        self.input
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The same model with a different perturbation.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.input, self.transform, self.a.clone(), self.b.clone(), eps)
    }

    /// Normal input through the identity is a diagonal Gaussian.
    pub fn as_gaussian(&self) -> Option<GaussianAffineModel> {
        if self.input == InputDistribution::Normal && self.transform == Transform::Identity {
            let a = self.a.iter().map(|v| v + self.eps).collect();
            let b = self.b.iter().map(|v| v + self.eps).collect();
            GaussianAffineModel::new(a, b).ok()
        } else {
            None
        }
    }

    #[inline]
    fn forward(&self, j: usize, x: f64) -> f64 {
        let (a, b) = (self.a[j], self.b[j]);
        let g = match self.transform {
            Transform::Identity => x,
            Transform::Sigmoid => sigmoid(x),
            Transform::Logit => logit(x),
            Transform::MultilayerSigmoid => sigmoid(a * sigmoid(a * sigmoid(x) + b) + b),
            Transform::Square => x * x,
            Transform::AbsPow32 => x.abs().powf(1.5),
        };
        (a + self.eps) * g + b + self.eps
    }

    /// Log-density of `g(X)` at `u` for coordinate `j`.
    #[inline]
    fn transformed_logpdf(&self, j: usize, u: f64) -> f64 {
        let px = |x: f64| self.input.logpdf(x);
        match self.transform {
            Transform::Identity => px(u),
            Transform::Sigmoid => {
                if !in_unit(u) {
                    return f64::NEG_INFINITY;
                }
                px(logit(u)) - u.ln() - (-u).ln_1p()
            }
            Transform::Logit => {
                // x = σ(u); g'(x) = 1 / (x (1 − x))
                let x = sigmoid(u);
                px(x) + ln_sigmoid(u) + ln_sigmoid(-u)
            }
            Transform::MultilayerSigmoid => {
                let (a, b) = (self.a[j], self.b[j]);
                if !in_unit(u) {
                    return f64::NEG_INFINITY;
                }
                let s2 = (logit(u) - b) / a;
                if !in_unit(s2) {
                    return f64::NEG_INFINITY;
                }
                let s1 = (logit(s2) - b) / a;
                if !in_unit(s1) {
                    return f64::NEG_INFINITY;
                }
                let x = logit(s1);
                let log_jac = [u, s2, s1].iter().map(|s| s.ln() + (-s).ln_1p()).sum::<f64>() + 2.0 * a.ln();
                px(x) - log_jac
            }
            Transform::Square => {
                if u <= 0.0 {
                    return if u == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                let r = u.sqrt();
                log_add_exp(px(r), px(-r)) - (2.0 * r).ln()
            }
            Transform::AbsPow32 => {
                if u <= 0.0 {
                    return if u == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                let r = u.powf(2.0 / 3.0);
                log_add_exp(px(r), px(-r)) - (1.5 * u.cbrt()).ln()
            }
        }
    }
}

/// `Y ~ N(b, diag(a²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianAffineModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl GaussianAffineModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        if a.iter().any(|&v| v <= 0.0 || !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Gaussian scales must be positive and finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn standard(d: usize) -> Self {
        Self { a: vec![1.0; d], b: vec![0.0; d] }
    }
}

/// A model that can be sampled and whose log-density is available in closed form.
pub trait DensityModel: Sync {
    fn dim(&self) -> usize;

    /// Log-density of a point known to have length [`DensityModel::dim`].
    fn logpdf_unchecked(&self, y: &[f64]) -> f64;

    /// Fills `out` (length `dim`) with one draw.
    fn draw_into(&self, rng: &mut StreamRng, out: &mut [f64]);

    fn logpdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        Ok(self.logpdf_unchecked(y))
    }
}

impl DensityModel for TransformModel {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn logpdf_unchecked(&self, y: &[f64]) -> f64 {
        let mut total = 0.0;
        for (j, &yj) in y.iter().enumerate() {
            let scale = self.a[j] + self.eps;
            let u = (yj - self.b[j] - self.eps) / scale;
            total += self.transformed_logpdf(j, u) - scale.ln();
        }
        total
    }

    fn draw_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let x = self.sampler.draw(rng);
            *o = self.forward(j, x);
        }
    }
}

impl DensityModel for GaussianAffineModel {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn logpdf_unchecked(&self, y: &[f64]) -> f64 {
        y.iter().zip(self.a.iter().zip(&self.b)).map(|(&yj, (&a, &b))| norm_logpdf((yj - b) / a) - a.ln()).sum()
    }

    fn draw_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *o = self.b[j] + self.a[j] * z;
        }
    }
}

pub fn model_logpdf(model: &dyn DensityModel, y: &[f64]) -> Result<f64> {
    model.logpdf(y)
}

/// `count` i.i.d. draws as a `count × dim` matrix.
pub fn sample<M: DensityModel + ?Sized>(model: &M, rng: &mut StreamRng, count: usize) -> Matrix {
    let mut m = Matrix::zeros(count, model.dim());
    for i in 0..count {
        model.draw_into(rng, m.row_mut(i));
    }
    m
}

/// `KL(p ‖ q)` between diagonal Gaussians.
pub fn kl_gaussian(p: &GaussianAffineModel, q: &GaussianAffineModel) -> Result<f64> {
    if p.a.len() != q.a.len() {
        return Err(Error::DimensionMismatch { expected: p.a.len(), got: q.a.len() });
    }
    Ok((0..p.a.len())
        .map(|j| {
            let (ap, aq) = (p.a[j], q.a[j]);
            let db = p.b[j] - q.b[j];
            (aq / ap).ln() + (ap * ap + db * db) / (2.0 * aq * aq) - 0.5
        })
        .sum())
}

/// Exact relative score `−KL(p‖p1) + KL(p‖p2)` for diagonal Gaussians.
pub fn true_delta_gaussian(p: &GaussianAffineModel, p1: &GaussianAffineModel, p2: &GaussianAffineModel) -> Result<f64> {
    Ok(kl_gaussian(p, p2)? - kl_gaussian(p, p1)?)
}

/// Monte Carlo estimate of `E_p[log p1(Y) − log p2(Y)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloDelta {
    pub delta: f64,
    pub mc_stderr: f64,
    /// Variance of a single log-density difference.
    pub variance: f64,
    pub draws: usize,
}

const MC_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn merge(self, o: Welford) -> Welford {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Welford { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }
}

/// Ground-truth relative score by plain Monte Carlo with `draws` samples
/// from `p`, chunked into independent seeded streams.
pub fn true_delta_monte_carlo<P, M1, M2>(p: &P, p1: &M1, p2: &M2, draws: usize, seed: u64) -> Result<MonteCarloDelta>
where
    P: DensityModel + ?Sized,
    M1: DensityModel + ?Sized,
    M2: DensityModel + ?Sized,
{
    let d = p.dim();
    for m in [p1.dim(), p2.dim()] {
        if m != d {
            return Err(Error::DimensionMismatch { expected: d, got: m });
        }
    }
    if draws < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: draws });
    }
    let chunks = draws.div_ceil(MC_CHUNK);
    let parts: Vec<Result<Welford>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, &[c as u64]);
            let len = MC_CHUNK.min(draws - c * MC_CHUNK);
            let mut y = vec![0.0; d];
            let mut w = Welford { n: 0.0, mean: 0.0, m2: 0.0 };
            for _ in 0..len {
                p.draw_into(&mut rng, &mut y);
                let x = p1.logpdf_unchecked(&y) - p2.logpdf_unchecked(&y);
                if !x.is_finite() {
                    return Err(Error::SupportMismatch);
                }
                w.n += 1.0;
                let delta = x - w.mean;
                w.mean += delta / w.n;
                w.m2 += delta * (x - w.mean);
            }
            Ok(w)
        })
        .collect();
    let mut total = Welford { n: 0.0, mean: 0.0, m2: 0.0 };
    for part in parts {
        total = total.merge(part?);
    }
    let variance = total.m2 / (total.n - 1.0);
    Ok(MonteCarloDelta { delta: total.mean, mc_stderr: (variance / total.n).sqrt(), variance, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LN_SQRT_2PI;

    #[test]
    fn input_logpdf_values() {
        assert!((input_logpdf(&InputDistribution::Normal, 0.0) + LN_SQRT_2PI).abs() < 1e-15);
        for lambda in [-3.0, 0.5, 5.0] {
            let v = input_logpdf(&InputDistribution::SkewNormal { lambda }, 0.0);
            assert!((v + LN_SQRT_2PI).abs() < 1e-15);
        }
        let g = input_logpdf(&InputDistribution::Gamma { shape: 2.0, rate: 1.0 }, 1.0);
        assert!((g + 1.0).abs() < 1e-14);
        assert_eq!(input_logpdf(&InputDistribution::gamma(), -1.0), f64::NEG_INFINITY);
        assert_eq!(input_logpdf(&InputDistribution::beta(), 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn standard_gaussian_logpdf() {
        let m = GaussianAffineModel::standard(10);
        assert!((model_logpdf(&m, &[0.0; 10]).unwrap() + 9.189_385_332_046_728).abs() < 1e-12);
        assert_eq!(model_logpdf(&m, &[0.0; 3]), Err(Error::DimensionMismatch { expected: 10, got: 3 }));
    }

    #[test]
    fn square_transform_is_chi_square_one() {
        let m = TransformModel::new(InputDistribution::Normal, Transform::Square, vec![1.0], vec![0.0], 0.0).unwrap();
        let v = model_logpdf(&m, &[1.0]).unwrap().exp();
        let exact = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() < 1e-15);
        assert!((v - 0.241_970_7).abs() < 1e-7);
    }

    #[test]
    fn logit_requires_unit_support() {
        let e = TransformModel::new(InputDistribution::Normal, Transform::Logit, vec![1.0], vec![0.0], 0.0);
        assert!(matches!(e, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn kl_and_delta_gaussian() {
        let p = GaussianAffineModel::standard(3);
        let q = GaussianAffineModel::new(vec![1.1, 0.9, 1.0], vec![0.1, -0.2, 0.0]).unwrap();
        assert_eq!(true_delta_gaussian(&p, &q, &q).unwrap(), 0.0);
        let d = true_delta_gaussian(&p, &p, &q).unwrap();
        assert!(d > 0.0);
        assert_eq!(d, kl_gaussian(&p, &q).unwrap());
        assert!(true_delta_gaussian(&p, &GaussianAffineModel::standard(2), &q).is_err());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let m =
            TransformModel::new(InputDistribution::skew_normal(), Transform::Sigmoid, vec![1.0; 4], vec![0.0; 4], 0.1)
                .unwrap();
        let a = sample(&m, &mut stream_rng(3, &[1]), 50);
        let b = sample(&m, &mut stream_rng(3, &[1]), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_antisymmetry_and_null() {
        let p = GaussianAffineModel::standard(2);
        let q = GaussianAffineModel::new(vec![1.2, 0.8], vec![0.3, 0.0]).unwrap();
        let fwd = true_delta_monte_carlo(&p, &p, &q, 40_000, 11).unwrap();
        let back = true_delta_monte_carlo(&p, &q, &p, 40_000, 11).unwrap();
        assert_eq!(fwd.delta, -back.delta);
        let null = true_delta_monte_carlo(&p, &q, &q, 40_000, 11).unwrap();
        assert_eq!(null.delta, 0.0);
    }

    #[test]
    fn support_mismatch_is_reported() {
        // Gamma input shifted by eps: draws near b fall outside model 2's support
        let a = vec![1.0];
        let b = vec![0.0];
        let p =
            TransformModel::new(InputDistribution::gamma(), Transform::Identity, a.clone(), b.clone(), 0.0).unwrap();
        let p2 = p.with_eps(0.5).unwrap();
        assert_eq!(true_delta_monte_carlo(&p, &p, &p2, 20_000, 1), Err(Error::SupportMismatch));
    }
}
