//! Independent numerical oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature of `f` over `(lo, hi)`. `f` receives the abscissa
/// and its distances to both endpoints, which stay accurate near the ends
/// where `x - lo` would round to zero.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    tanh_sinh_step(f, lo, hi, 1.0 / 256.0)
}

/// [`tanh_sinh`] with an explicit step; `1/64` already gives about twelve
/// digits for smooth integrands.
pub fn tanh_sinh_step<F: Fn(f64, f64, f64) -> f64>(f: F, lo: f64, hi: f64, h: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mut sum = 0.0;
    let kmax = (4.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        // 1 ∓ tanh(u) computed without cancellation
        let to_hi = 2.0 / ((2.0 * u).exp() + 1.0);
        let to_lo = 2.0 / ((-2.0 * u).exp() + 1.0);
        let (d_lo, d_hi) = (half * to_lo, half * to_hi);
        if d_lo <= 0.0 || d_hi <= 0.0 {
            continue;
        }
        let x = if u < 0.0 { lo + d_lo } else { hi - d_hi };
        // nodes that round onto an endpoint carry negligible weight
        if x <= lo || x >= hi {
            continue;
        }
        sum += w * f(x, d_lo, d_hi);
    }
    sum * half * h
}

/// `∫ f` over `(lo, ∞)` via `y = lo + s/(1 − s)`.
pub fn half_line<F: Fn(f64) -> f64>(f: F, lo: f64) -> f64 {
    tanh_sinh(
        |_, s, one_minus_s| {
            let y = lo + s / one_minus_s;
            if y <= lo || !y.is_finite() {
                return 0.0;
            }
            f(y) / (one_minus_s * one_minus_s)
        },
        0.0,
        1.0,
    )
}

/// `∫ f` over the real line via `y = c + t/(1 − t²)`.
pub fn whole_line<F: Fn(f64) -> f64>(f: F, c: f64) -> f64 {
    tanh_sinh(
        |t, d_lo, d_hi| {
            // 1 − t² = (1 + t)(1 − t)
            let q = d_lo * d_hi;
            let y = c + t / q;
            f(y) * (1.0 + t * t) / (q * q)
        },
        -1.0,
        1.0,
    )
}

/// Sup distance between the empirical CDF of sorted `xs` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Standard normal CDF via the complementary error function.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Composite Simpson rule with `2m` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
