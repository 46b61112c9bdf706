//! Edgeworth expansions of the standardized (`Z`) and studentized (`T`)
//! mean, to order `n⁻¹`, and quantile solvers built on them.
//!
//! Hermite polynomials follow the probabilists' convention, so that
//! `d/dx [He_k(x) φ(x)] = −He_{k+1}(x) φ(x)`.
//!
//! An expansion is a signed measure rather than a distribution: for large
//! skewness at small `n` its density can dip below zero and its CDF can
//! leave `[0, 1]`. Quantiles are therefore taken from a monotonized CDF
//! (running maximum over a fixed grid), and the shortest-interval solver
//! falls back to equal-tailed or normal quantiles when the expansion is too
//! distorted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, norm_cdf, norm_pdf, norm_quantile};

/// Half-width of the standardized bracket.
pub const BRACKET: f64 = 12.0;
/// Number of grid nodes on `[-BRACKET, BRACKET]`.
pub const GRID_POINTS: usize = 4001;
/// Densities below this on the grid mark the expansion as invalid.
pub const DENSITY_FLOOR: f64 = -1e-12;

const MASS_TOL: f64 = 1e-9;
const ABSCISSA_TOL: f64 = 1e-10;

/// Which pivot the expansion describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionKind {
    /// `Zₙ = √n (δ̂ − δ)/√V` with known variance.
    Z,
    /// `Tₙ`, studentized with the plug-in variance.
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthParams {
    pub n: usize,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kind: ExpansionKind,
}

impl EdgeworthParams {
    pub fn new(n: usize, kappa3: f64, kappa4: f64, kind: ExpansionKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::SampleTooSmall { needed: 2, got: n });
        }
        if !kappa3.is_finite() || !kappa4.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cumulants must be finite (kappa3 = {kappa3}, kappa4 = {kappa4})"
            )));
        }
        Ok(Self { n, kappa3, kappa4, kind })
    }

    /// The same expansion with the sign of the skewness flipped.
    pub fn mirrored(self) -> Self {
        Self { kappa3: -self.kappa3, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileMethod {
    ShortestInterval,
    EqualTailed,
    NormalFallback,
}

/// Standardized quantiles `lo < hi` enclosing probability `mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePair {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub method: QuantileMethod,
}

impl QuantilePair {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Probabilists' Hermite polynomial `He_k(x)` for `k ≤ 8`.
pub fn hermite(k: usize, x: f64) -> Result<f64> {
    if k > 8 {
        return Err(Error::UnsupportedOrder(k));
    }
    Ok(hermite_unchecked(k, x))
}

#[inline]
fn hermite_unchecked(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Unclamped expansion CDF: `G(x)` for kind `Z`, `G*(x)` for kind `T`.
pub fn ee_cdf_raw(x: f64, p: &EdgeworthParams) -> f64 {
    let n = p.n as f64;
    let (k3, k4) = (p.kappa3, p.kappa4);
    let phi = norm_pdf(x);
    let correction = match p.kind {
        ExpansionKind::Z => {
            let h2 = x * x - 1.0;
            let h3 = x * (x * x - 3.0);
            let h5 = x * (x * x * (x * x - 10.0) + 15.0);
            -(k3 / 6.0) * h2 * phi / n.sqrt() - ((k4 / 24.0) * h3 + (k3 * k3 / 72.0) * h5) * phi / n
        }
        ExpansionKind::T => {
            let x2 = x * x;
            let q1 = (k3 / 6.0) * (2.0 * x2 + 1.0);
            let q2 = (k4 / 12.0) * x * (x2 - 3.0)
                - (k3 * k3 / 18.0) * x * (x2 * x2 + 2.0 * x2 - 3.0)
                - 0.25 * x * (x2 + 3.0);
            q1 * phi / n.sqrt() + q2 * phi / n
        }
    };
    if x > 0.0 {
        // form the upper tail first so rounding near 1 stays monotone
        1.0 - (norm_cdf(-x) - correction)
    } else {
        norm_cdf(x) + correction
    }
}

/// Expansion CDF clamped to `[0, 1]`.
pub fn ee_cdf(x: f64, p: &EdgeworthParams) -> f64 {
    ee_cdf_raw(x, p).clamp(0.0, 1.0)
}

/// Exact derivative of [`ee_cdf_raw`]. May be negative.
pub fn ee_pdf(x: f64, p: &EdgeworthParams) -> f64 {
    let n = p.n as f64;
    let (k3, k4) = (p.kappa3, p.kappa4);
    let phi = norm_pdf(x);
    let x2 = x * x;
    match p.kind {
        ExpansionKind::Z => {
            let h3 = x * (x2 - 3.0);
            let h4 = x2 * (x2 - 6.0) + 3.0;
            let h6 = x2 * (x2 * (x2 - 15.0) + 45.0) - 15.0;
            phi * (1.0 + (k3 / 6.0) * h3 / n.sqrt() + ((k4 / 24.0) * h4 + (k3 * k3 / 72.0) * h6) / n)
        }
        ExpansionKind::T => {
            // d/dx [q(x) φ(x)] = (q'(x) − x q(x)) φ(x)
            let q1 = (k3 / 6.0) * (2.0 * x2 + 1.0);
            let dq1 = (k3 / 6.0) * 4.0 * x;
            let q2 = (k4 / 12.0) * x * (x2 - 3.0)
                - (k3 * k3 / 18.0) * x * (x2 * x2 + 2.0 * x2 - 3.0)
                - 0.25 * x * (x2 + 3.0);
            let dq2 = (k4 / 12.0) * (3.0 * x2 - 3.0)
                - (k3 * k3 / 18.0) * (5.0 * x2 * x2 + 6.0 * x2 - 3.0)
                - 0.25 * (3.0 * x2 + 3.0);
            phi * (1.0 + (dq1 - x * q1) / n.sqrt() + (dq2 - x * q2) / n)
        }
    }
}

/// The expansion tabulated on the fixed grid, with a nondecreasing
/// running-maximum CDF.
#[derive(Debug, Clone)]
pub struct ExpansionGrid {
    params: EdgeworthParams,
    step: f64,
    pdf: Vec<f64>,
    // running max of the clamped CDF up to and including node k
    prefix_max: Vec<f64>,
    // interior local maximum of the raw CDF in cell k, if the density changes sign there
    cell_peak: Vec<Option<(f64, f64)>>,
    min_pdf: f64,
}

impl ExpansionGrid {
    pub fn new(params: EdgeworthParams) -> Self {
        let step = 2.0 * BRACKET / (GRID_POINTS - 1) as f64;
        let xs: Vec<f64> = (0..GRID_POINTS).map(|k| Self::node_at(step, k)).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| ee_pdf(x, &params)).collect();
        let cdf: Vec<f64> = xs.iter().map(|&x| ee_cdf(x, &params)).collect();

        let mut cell_peak = vec![None; GRID_POINTS - 1];
        for k in 0..GRID_POINTS - 1 {
            if pdf[k] > 0.0 && pdf[k + 1] < 0.0 {
                let r = bisect_increasing(|x| -ee_pdf(x, &params), 0.0, xs[k], xs[k + 1], 1e-13, 0.0);
                cell_peak[k] = Some((r, ee_cdf(r, &params)));
            }
        }
        let mut prefix_max = Vec::with_capacity(GRID_POINTS);
        let mut run = cdf[0];
        prefix_max.push(run);
        for k in 1..GRID_POINTS {
            if let Some((_, v)) = cell_peak[k - 1] {
                run = run.max(v);
            }
            run = run.max(cdf[k]);
            prefix_max.push(run);
        }
        let min_pdf = pdf.iter().copied().fold(f64::INFINITY, f64::min);
        Self { params, step, pdf, prefix_max, cell_peak, min_pdf }
    }

    #[inline]
    fn node_at(step: f64, k: usize) -> f64 {
        // symmetric about 0 so mirrored expansions see mirrored grids
        (k as f64 - ((GRID_POINTS - 1) / 2) as f64) * step
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        Self::node_at(self.step, k)
    }

    pub fn params(&self) -> &EdgeworthParams {
        &self.params
    }

    /// Density is at least [`DENSITY_FLOOR`] at every node.
    pub fn is_valid_density(&self) -> bool {
        self.min_pdf >= DENSITY_FLOOR
    }

    /// Monotonized CDF: `max(clamped raw CDF, running maximum to the left)`.
    pub fn cdf_monotone(&self, x: f64) -> f64 {
        let raw = ee_cdf(x, &self.params);
        if x <= -BRACKET {
            return raw.min(self.prefix_max[0]);
        }
        if x >= BRACKET {
            return raw.max(self.prefix_max[GRID_POINTS - 1]);
        }
        let half = ((GRID_POINTS - 1) / 2) as f64;
        let mut k = ((x / self.step + half).floor().max(0.0) as usize).min(GRID_POINTS - 2);
        if x < self.node(k) && k > 0 {
            k -= 1;
        }
        let mut v = self.prefix_max[k].max(raw);
        if let Some((r, peak)) = self.cell_peak[k] {
            if x >= r {
                v = v.max(peak);
            }
        }
        v
    }

    /// Whether the monotonized CDF reaches `α/4` and `1 − α/4` inside the bracket.
    pub fn spans(&self, alpha: f64) -> bool {
        self.cdf_monotone(-BRACKET) <= alpha / 4.0 && self.cdf_monotone(BRACKET) >= 1.0 - alpha / 4.0
    }

    fn quantile(&self, prob: f64) -> f64 {
        bisect_increasing(|x| self.cdf_monotone(x), prob, -BRACKET, BRACKET, 1e-13, 1e-10 * 0.1)
    }

    fn equal_tailed(&self, alpha: f64) -> QuantilePair {
        let lo = self.quantile(alpha / 2.0);
        let hi = self.quantile(1.0 - alpha / 2.0);
        QuantilePair {
            lo,
            hi,
            mass: self.cdf_monotone(hi) - self.cdf_monotone(lo),
            method: QuantileMethod::EqualTailed,
        }
    }

    // Crossing of pdf = level between node i (below) and node j (at/above).
    fn crossing(&self, below: usize, above: usize, level: f64) -> f64 {
        let (a, b) = (self.node(below), self.node(above));
        let f = |x: f64| ee_pdf(x, &self.params);
        // `lo` stays on the side with density below the level; works for either orientation
        let (mut lo, mut hi) = (a, b);
        for _ in 0..100 {
            if (hi - lo).abs() <= ABSCISSA_TOL * 1e-3 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    // Superlevel set {pdf >= level} hull as (left, right, first node, last node).
    fn level_hull(&self, level: f64, left_max: &[f64], right_max: &[f64]) -> (f64, f64, usize, usize) {
        // left_max is nondecreasing, right_max nonincreasing
        let first = left_max.partition_point(|&m| m < level);
        let last = right_max.partition_point(|&m| m >= level) - 1;
        let left = if first == 0 { self.node(0) } else { self.crossing(first - 1, first, level) };
        let right =
            if last == GRID_POINTS - 1 { self.node(GRID_POINTS - 1) } else { self.crossing(last + 1, last, level) };
        (left, right, first, last)
    }

    fn shortest(&self, alpha: f64) -> Option<QuantilePair> {
        let target = 1.0 - alpha;
        let mut left_max = Vec::with_capacity(GRID_POINTS);
        let mut m = f64::NEG_INFINITY;
        for &v in &self.pdf {
            m = m.max(v);
            left_max.push(m);
        }
        let mut right_max = vec![0.0; GRID_POINTS];
        let mut m = f64::NEG_INFINITY;
        for k in (0..GRID_POINTS).rev() {
            m = m.max(self.pdf[k]);
            right_max[k] = m;
        }
        let peak = left_max[GRID_POINTS - 1];
        if peak <= 0.0 {
            return None;
        }

        let mass_at = |level: f64| {
            let (l, r, _, _) = self.level_hull(level, &left_max, &right_max);
            self.cdf_monotone(r) - self.cdf_monotone(l)
        };

        // mass is nonincreasing in the level
        let (mut lo_c, mut hi_c) = (0.0_f64, peak);
        for _ in 0..200 {
            let mid = 0.5 * (lo_c + hi_c);
            if mid <= lo_c || mid >= hi_c {
                break;
            }
            if mass_at(mid) > target {
                lo_c = mid;
            } else {
                hi_c = mid;
            }
        }
        let level = 0.5 * (lo_c + hi_c);
        let (l, r, first, last) = self.level_hull(level, &left_max, &right_max);
        let mass = self.cdf_monotone(r) - self.cdf_monotone(l);
        let contiguous = self.pdf[first..=last].iter().all(|&v| v >= level);
        if !contiguous || (mass - target).abs() > MASS_TOL || l >= r {
            return None;
        }
        Some(QuantilePair { lo: l, hi: r, mass, method: QuantileMethod::ShortestInterval })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn normal_pair(alpha: f64) -> QuantilePair {
    let q = norm_quantile(1.0 - alpha / 2.0);
    QuantilePair { lo: -q, hi: q, mass: 1.0 - alpha, method: QuantileMethod::NormalFallback }
}

/// Shortest `(1−α)`-mass interval of the expansion: endpoints with equal
/// density, found by bisection on the density level.
///
/// Falls back to [`equal_tailed_quantiles`] when the density is negative
/// somewhere on the grid or the level set is not a single interval, and to
/// normal quantiles when the monotonized CDF does not span
/// `[α/4, 1 − α/4]` inside the bracket.
pub fn shortest_interval(p: &EdgeworthParams, alpha: f64) -> Result<QuantilePair> {
    check_alpha(alpha)?;
    let grid = ExpansionGrid::new(*p);
    if !grid.spans(alpha) {
        return Ok(normal_pair(alpha));
    }
    if grid.is_valid_density() {
        if let Some(pair) = grid.shortest(alpha) {
            return Ok(pair);
        }
    }
    Ok(grid.equal_tailed(alpha))
}

/// Quantiles of the monotonized CDF at `α/2` and `1 − α/2`.
pub fn equal_tailed_quantiles(p: &EdgeworthParams, alpha: f64) -> Result<QuantilePair> {
    check_alpha(alpha)?;
    let grid = ExpansionGrid::new(*p);
    if !grid.spans(alpha) {
        return Ok(normal_pair(alpha));
    }
    Ok(grid.equal_tailed(alpha))
}
