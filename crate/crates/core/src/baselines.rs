//! Competing estimators and resampling intervals: kNN KL divergence,
//! relative MMD, Wasserstein-2 (closed form and empirical), subsampling and
//! HulC.

use rand::seq::index;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::densities::GaussianAffineModel;
use crate::error::{Error, Result};
use crate::inference::{check_alpha, CiMethod, ConfidenceInterval};
use crate::matrix::{squared_distance, Matrix};
use crate::numeric::{norm_quantile, quantile_sorted, KahanSum};
use crate::rng::StreamRng;

/// Largest sample size accepted by [`empirical_w22`].
pub const W2_MAX_POINTS: usize = 512;

/// Default subsample count for [`subsampling_ci`].
pub const SUBSAMPLING_REPLICATES: usize = 500;

/// Two samples in a common dimension.
#[derive(Debug, Clone, Copy)]
pub struct TwoSampleInput<'a> {
    pub xs: &'a Matrix,
    pub ys: &'a Matrix,
}

impl<'a> TwoSampleInput<'a> {
    pub fn new(xs: &'a Matrix, ys: &'a Matrix) -> Result<Self> {
        if xs.cols() != ys.cols() {
            return Err(Error::DimensionMismatch { expected: xs.cols(), got: ys.cols() });
        }
        Ok(Self { xs, ys })
    }
}

// k-th smallest squared distance from `q` to the rows of `pts`, skipping row `skip`.
fn kth_nearest_sq(q: &[f64], pts: &Matrix, k: usize, skip: Option<usize>) -> f64 {
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for (j, row) in pts.iter_rows().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d = squared_distance(q, row);
        if best.len() < k || d < best[best.len() - 1] {
            let pos = best.partition_point(|&b| b <= d);
            best.insert(pos, d);
            if best.len() > k {
                best.pop();
            }
        }
    }
    best[k - 1]
}

/// kNN estimate of `KL(P_x ‖ P_y)`:
/// `(d/n₁) Σᵢ log(νₖ(i)/ρₖ(i)) + log(n₂/(n₁ − 1))`.
pub fn knn_kl(input: TwoSampleInput<'_>, k: usize) -> Result<f64> {
    let (xs, ys) = (input.xs, input.ys);
    let (n1, n2, d) = (xs.rows(), ys.rows(), xs.cols());
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n1 < k + 1 {
        return Err(Error::SampleTooSmall { needed: k + 1, got: n1 });
    }
    if n2 < k {
        return Err(Error::SampleTooSmall { needed: k, got: n2 });
    }
    let terms: Vec<Result<f64>> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let x = xs.row(i);
            let rho = kth_nearest_sq(x, xs, k, Some(i));
            let nu = kth_nearest_sq(x, ys, k, None);
            if rho == 0.0 || nu == 0.0 {
                return Err(Error::DuplicatePoint { row: i });
            }
            Ok(0.5 * (nu / rho).ln())
        })
        .collect();
    let mut sum = KahanSum::new();
    for t in terms {
        sum.add(t?);
    }
    Ok(d as f64 * sum.value() / n1 as f64 + (n2 as f64 / (n1 as f64 - 1.0)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(−‖x − y‖² / (2h²))`.
    Rbf { bandwidth: f64 },
    /// `(⟨x, y⟩ / d + c)^degree`.
    Poly { degree: u32, c: f64 },
}

impl Kernel {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { bandwidth } => (-squared_distance(x, y) / (2.0 * bandwidth * bandwidth)).exp(),
            Kernel::Poly { degree, c } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot / x.len() as f64 + c).powi(degree as i32)
            }
        }
    }
}

/// Median pairwise Euclidean distance over the pooled samples, using at most
/// 1000 evenly strided points.
pub fn median_heuristic(samples: &[&Matrix]) -> f64 {
    let total: usize = samples.iter().map(|m| m.rows()).sum();
    let stride = total.div_ceil(1000).max(1);
    let pooled: Vec<&[f64]> = samples.iter().flat_map(|m| m.iter_rows()).step_by(stride).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pooled.len() * pooled.len() / 2);
    for i in 0..pooled.len() {
        for j in 0..i {
            d.push(squared_distance(pooled[i], pooled[j]));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let h = m.sqrt();
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdComparison {
    /// `MMD²ᵤ(p, s1) − MMD²ᵤ(p, s2)`; negative when `s1` is closer to `p`.
    pub stat: f64,
    pub stderr: f64,
}

impl MmdComparison {
    /// `stat ± Φ⁻¹(1−α/2)·stderr`.
    pub fn interval(&self, alpha: f64) -> Result<ConfidenceInterval> {
        check_alpha(alpha)?;
        let q = norm_quantile(1.0 - alpha / 2.0);
        Ok(ConfidenceInterval::new(
            self.stat - q * self.stderr,
            self.stat + q * self.stderr,
            alpha,
            CiMethod::Jackknife,
            self.stat,
            self.stderr,
        ))
    }
}

struct CrossSums {
    total: f64,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn cross_sums(a: &Matrix, b: &Matrix, kernel: &Kernel) -> CrossSums {
    let rows_k: Vec<Vec<f64>> =
        (0..a.rows()).into_par_iter().map(|i| b.iter_rows().map(|y| kernel.eval(a.row(i), y)).collect()).collect();
    let rows: Vec<f64> = rows_k.iter().map(|r| r.iter().sum()).collect();
    let mut cols = vec![0.0; b.rows()];
    for r in &rows_k {
        for (c, v) in cols.iter_mut().zip(r) {
            *c += v;
        }
    }
    CrossSums { total: rows.iter().sum(), rows, cols }
}

// Off-diagonal within-sample sums: (total over i≠j, per-row sums over j≠i).
fn within_sums(a: &Matrix, kernel: &Kernel) -> (f64, Vec<f64>) {
    let rows: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .map(|i| a.iter_rows().enumerate().filter(|&(j, _)| j != i).map(|(_, y)| kernel.eval(a.row(i), y)).sum())
        .collect();
    (rows.iter().sum(), rows)
}

fn jackknife_var(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (n - 1.0) / n * values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
}

/// Relative MMD comparison with unbiased U-statistic MMD² estimates.
///
/// The standard error is a delete-one jackknife applied to each of the three
/// independent samples in turn, with the three variance contributions summed.
pub fn relative_mmd(p: &Matrix, s1: &Matrix, s2: &Matrix, kernel: Kernel) -> Result<MmdComparison> {
    for s in [s1, s2] {
        if s.cols() != p.cols() {
            return Err(Error::DimensionMismatch { expected: p.cols(), got: s.cols() });
        }
    }
    for s in [p, s1, s2] {
        if s.rows() < 4 {
            return Err(Error::SampleTooSmall { needed: 4, got: s.rows() });
        }
    }
    let (m, n1, n2) = (p.rows() as f64, s1.rows() as f64, s2.rows() as f64);
    let c1 = cross_sums(p, s1, &kernel);
    let c2 = cross_sums(p, s2, &kernel);
    let (w1_total, w1_rows) = within_sums(s1, &kernel);
    let (w2_total, w2_rows) = within_sums(s2, &kernel);

    let w1 = w1_total / (n1 * (n1 - 1.0));
    let w2 = w2_total / (n2 * (n2 - 1.0));
    let x1 = c1.total / (m * n1);
    let x2 = c2.total / (m * n2);
    // the p-sample within term cancels between the two MMD² estimates
    let stat = (w1 - w2) + 2.0 * (x2 - x1);

    let loo_p: Vec<f64> = (0..p.rows())
        .map(|i| {
            let x1i = (c1.total - c1.rows[i]) / ((m - 1.0) * n1);
            let x2i = (c2.total - c2.rows[i]) / ((m - 1.0) * n2);
            (w1 - w2) + 2.0 * (x2i - x1i)
        })
        .collect();
    let loo_s1: Vec<f64> = (0..s1.rows())
        .map(|j| {
            let w1j = (w1_total - 2.0 * w1_rows[j]) / ((n1 - 1.0) * (n1 - 2.0));
            let x1j = (c1.total - c1.cols[j]) / (m * (n1 - 1.0));
            (w1j - w2) + 2.0 * (x2 - x1j)
        })
        .collect();
    let loo_s2: Vec<f64> = (0..s2.rows())
        .map(|j| {
            let w2j = (w2_total - 2.0 * w2_rows[j]) / ((n2 - 1.0) * (n2 - 2.0));
            let x2j = (c2.total - c2.cols[j]) / (m * (n2 - 1.0));
            (w1 - w2j) + 2.0 * (x2j - x1)
        })
        .collect();
    let var = jackknife_var(&loo_p) + jackknife_var(&loo_s1) + jackknife_var(&loo_s2);
    Ok(MmdComparison { stat, stderr: var.sqrt() })
}

/// Closed-form `W₂²` between diagonal Gaussians.
pub fn gaussian_w2_closed(m1: &GaussianAffineModel, m2: &GaussianAffineModel) -> Result<f64> {
    if m1.a.len() != m2.a.len() {
        return Err(Error::DimensionMismatch { expected: m1.a.len(), got: m2.a.len() });
    }
    Ok((0..m1.a.len())
        .map(|j| {
            let (db, da) = (m1.b[j] - m2.b[j], m1.a[j] - m2.a[j]);
            db * db + da * da
        })
        .sum())
}

/// Empirical `W₂²` between two equal-size samples: minimal mean squared
/// Euclidean cost over all matchings.
pub fn empirical_w22(input: TwoSampleInput<'_>) -> Result<f64> {
    let (xs, ys) = (input.xs, input.ys);
    let n = xs.rows();
    if ys.rows() != n {
        return Err(Error::UnequalSizes { left: n, right: ys.rows() });
    }
    if n > W2_MAX_POINTS {
        return Err(Error::TooLarge { size: n, limit: W2_MAX_POINTS });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut cost = Vec::with_capacity(n * n);
    for x in xs.iter_rows() {
        for y in ys.iter_rows() {
            cost.push(squared_distance(x, y));
        }
    }
    let (_, total) = solve_assignment(n, &cost)?;
    Ok(total / n as f64)
}

/// Subsampling interval for a statistic defined on index subsets of `0..n`.
///
/// With `θₙ` the full-data value and `θ_b` the values on `replicates` random
/// subsets of size `block` drawn without replacement, the interval is
/// `[θₙ − q_{1−α/2}/√n, θₙ − q_{α/2}/√n]` where `q` are quantiles of
/// `√b (θ_b − θₙ)`.
pub fn subsampling_ci<F>(
    n: usize,
    stat: F,
    alpha: f64,
    block: usize,
    replicates: usize,
    rng: &mut StreamRng,
) -> Result<ConfidenceInterval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    check_alpha(alpha)?;
    if block == 0 || block >= n {
        return Err(Error::InvalidBlock { block, n });
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 subsamples".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = stat(&all)?;
    let subsets: Vec<Vec<usize>> = (0..replicates).map(|_| index::sample(rng, n, block).into_vec()).collect();
    let values: Vec<f64> = subsets.par_iter().map(|s| stat(s)).collect::<Result<_>>()?;

    let (nf, bf) = (n as f64, block as f64);
    let mut roots: Vec<f64> = values.iter().map(|v| bf.sqrt() * (v - full)).collect();
    roots.sort_by(f64::total_cmp);
    let q_lo = quantile_sorted(&roots, alpha / 2.0);
    let q_hi = quantile_sorted(&roots, 1.0 - alpha / 2.0);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt();
    Ok(ConfidenceInterval::new(
        full - q_hi / nf.sqrt(),
        full - q_lo / nf.sqrt(),
        alpha,
        CiMethod::Subsampling,
        full,
        sd * (bf / nf).sqrt(),
    ))
}

/// Default subsample size `⌊√n⌋`.
pub fn default_block(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// `⌈log₂(2/α)⌉`.
pub fn hulc_batches(alpha: f64) -> usize {
    (2.0 / alpha).log2().ceil() as usize
}

/// HulC interval: the range of the statistic over `⌈log₂(2/α)⌉` disjoint
/// random batches.
pub fn hulc_ci<F>(n: usize, stat: F, alpha: f64, rng: &mut StreamRng) -> Result<ConfidenceInterval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    check_alpha(alpha)?;
    let b = hulc_batches(alpha);
    if n < 2 * b {
        return Err(Error::SampleTooSmall { needed: 2 * b, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let batches: Vec<&[usize]> = (0..b).map(|k| &idx[k * n / b..(k + 1) * n / b]).collect();
    let mut values: Vec<f64> = batches.par_iter().map(|s| stat(s)).collect::<Result<_>>()?;
    values.sort_by(f64::total_cmp);
    let (lo, hi) = (values[0], values[b - 1]);
    let mut ci = ConfidenceInterval::new(lo, hi, alpha, CiMethod::Hulc, quantile_sorted(&values, 0.5), f64::NAN);
    ci.batches = Some(b);
    Ok(ci)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_points(rng: &mut StreamRng, n: usize, d: usize, shift: f64) -> Matrix {
        let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn knn_errors() {
        let xs = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let ys = Matrix::from_rows(&[vec![0.5], vec![2.0]]).unwrap();
        let input = TwoSampleInput::new(&xs, &ys).unwrap();
        assert!(matches!(knn_kl(input, 2), Err(Error::SampleTooSmall { .. })));
        let dup = Matrix::from_rows(&[vec![0.0], vec![3.0]]).unwrap();
        assert_eq!(knn_kl(TwoSampleInput::new(&xs, &dup).unwrap(), 1), Err(Error::DuplicatePoint { row: 0 }));
    }

    #[test]
    fn mmd_identity_and_antisymmetry() {
        let mut rng = stream_rng(5, &[]);
        let p = gaussian_points(&mut rng, 60, 3, 0.0);
        let s1 = gaussian_points(&mut rng, 50, 3, 0.2);
        let s2 = gaussian_points(&mut rng, 40, 3, 0.5);
        let k = Kernel::Rbf { bandwidth: median_heuristic(&[&p, &s1, &s2]) };
        assert_eq!(relative_mmd(&p, &s1, &s1, k).unwrap().stat, 0.0);
        let fwd = relative_mmd(&p, &s1, &s2, k).unwrap();
        let back = relative_mmd(&p, &s2, &s1, k).unwrap();
        assert_eq!(fwd.stat, -back.stat);
        assert!(fwd.stderr > 0.0);
        let poly = Kernel::Poly { degree: 3, c: 1.0 };
        assert_eq!(relative_mmd(&p, &s1, &s2, poly).unwrap().stat, -relative_mmd(&p, &s2, &s1, poly).unwrap().stat);
    }

    #[test]
    fn mmd_matches_direct_u_statistics() {
        let mut rng = stream_rng(9, &[]);
        let p = gaussian_points(&mut rng, 12, 2, 0.0);
        let s1 = gaussian_points(&mut rng, 9, 2, 0.3);
        let s2 = gaussian_points(&mut rng, 10, 2, -0.4);
        let k = Kernel::Rbf { bandwidth: 1.3 };
        let mmd2 = |x: &Matrix, y: &Matrix| {
            let (m, n) = (x.rows() as f64, y.rows() as f64);
            let mut xx = 0.0;
            for i in 0..x.rows() {
                for j in 0..x.rows() {
                    if i != j {
                        xx += k.eval(x.row(i), x.row(j));
                    }
                }
            }
            let mut yy = 0.0;
            for i in 0..y.rows() {
                for j in 0..y.rows() {
                    if i != j {
                        yy += k.eval(y.row(i), y.row(j));
                    }
                }
            }
            let mut xy = 0.0;
            for i in 0..x.rows() {
                for j in 0..y.rows() {
                    xy += k.eval(x.row(i), y.row(j));
                }
            }
            xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
        };
        let direct = mmd2(&p, &s1) - mmd2(&p, &s2);
        let fast = relative_mmd(&p, &s1, &s2, k).unwrap();
        assert!((direct - fast.stat).abs() < 1e-12);

        // jackknife contribution of the p-sample, recomputed by brute force
        let loo: Vec<f64> = (0..p.rows())
            .map(|i| {
                let keep: Vec<usize> = (0..p.rows()).filter(|&r| r != i).collect();
                let pi = p.select_rows(&keep);
                mmd2(&pi, &s1) - mmd2(&pi, &s2)
            })
            .collect();
        let loo1: Vec<f64> = (0..s1.rows())
            .map(|i| {
                let keep: Vec<usize> = (0..s1.rows()).filter(|&r| r != i).collect();
                mmd2(&p, &s1.select_rows(&keep)) - mmd2(&p, &s2)
            })
            .collect();
        let loo2: Vec<f64> = (0..s2.rows())
            .map(|i| {
                let keep: Vec<usize> = (0..s2.rows()).filter(|&r| r != i).collect();
                mmd2(&p, &s1) - mmd2(&p, &s2.select_rows(&keep))
            })
            .collect();
        let var = jackknife_var(&loo) + jackknife_var(&loo1) + jackknife_var(&loo2);
        assert!((var.sqrt() - fast.stderr).abs() < 1e-10, "{} vs {}", var.sqrt(), fast.stderr);
    }

    #[test]
    fn w2_closed_form() {
        let a = GaussianAffineModel::standard(1);
        let shifted = GaussianAffineModel::new(vec![1.0], vec![1.0]).unwrap();
        let wide = GaussianAffineModel::new(vec![2.0], vec![0.0]).unwrap();
        assert_eq!(gaussian_w2_closed(&a, &a).unwrap(), 0.0);
        assert_eq!(gaussian_w2_closed(&a, &shifted).unwrap(), 1.0);
        assert_eq!(gaussian_w2_closed(&a, &wide).unwrap(), 1.0);
    }

    #[test]
    fn w2_errors_and_identity() {
        let mut rng = stream_rng(1, &[]);
        let xs = gaussian_points(&mut rng, 20, 2, 0.0);
        assert_eq!(empirical_w22(TwoSampleInput::new(&xs, &xs).unwrap()).unwrap(), 0.0);
        let ys = gaussian_points(&mut rng, 19, 2, 0.0);
        assert_eq!(
            empirical_w22(TwoSampleInput::new(&xs, &ys).unwrap()),
            Err(Error::UnequalSizes { left: 20, right: 19 })
        );
        let big = Matrix::zeros(513, 1);
        assert!(matches!(empirical_w22(TwoSampleInput::new(&big, &big).unwrap()), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn subsampling_block_checks() {
        let mut rng = stream_rng(2, &[]);
        let stat = |_: &[usize]| Ok(0.0);
        assert_eq!(
            subsampling_ci(10, stat, 0.1, 10, 50, &mut rng).unwrap_err(),
            Error::InvalidBlock { block: 10, n: 10 }
        );
        assert_eq!(default_block(2000), 44);
    }

    #[test]
    fn hulc_batches_and_degenerate_data() {
        assert_eq!(hulc_batches(0.1), 5);
        assert_eq!(hulc_batches(0.05), 6);
        let data = vec![2.5; 40];
        let mut rng = stream_rng(4, &[]);
        let mean = |idx: &[usize]| Ok(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let ci = hulc_ci(data.len(), mean, 0.1, &mut rng).unwrap();
        assert_eq!((ci.lower, ci.upper), (2.5, 2.5));
        assert_eq!(ci.batches, Some(5));
        assert!(matches!(hulc_ci(9, mean, 0.1, &mut rng), Err(Error::SampleTooSmall { needed: 10, got: 9 })));
    }
}
