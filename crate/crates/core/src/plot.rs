//! Minimal static SVG line charts for simulation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::sim::{ExperimentReport, SimMethod};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders `series` as polylines. `reference` draws a dashed horizontal line.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], reference: Option<f64>) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(reference));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<polyline points="{l},{t} {l},{b} {r},{b}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, px(xv), b + 18.0, xv);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, l - 6.0, py(yv) + 4.0, yv);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    if let Some(y) = reference {
        let _ = writeln!(
            svg,
            r#"<line x1="{l}" x2="{r}" y1="{0:.1}" y2="{0:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
            py(y)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ =
            writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
        let ly = t + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            r - 110.0,
            r - 90.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, r - 85.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn collect<F>(report: &ExperimentReport, key: F, value: fn(&crate::sim::ReportRow) -> Option<f64>) -> Vec<Series>
where
    F: Fn(&crate::sim::ReportRow) -> f64,
{
    let mut by_method: BTreeMap<SimMethod, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &report.rows {
        if let Some(v) = value(row) {
            by_method.entry(row.method).or_default().push((key(row), v));
        }
    }
    by_method
        .into_iter()
        .filter(|(_, pts)| !pts.is_empty())
        .map(|(m, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label: m.as_str().to_string(), points }
        })
        .collect()
}

/// Named charts for a report: coverage and power against ε at the largest
/// `n`, and mean length against `n` at the largest ε.
pub fn report_charts(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let n_max = report.rows.iter().map(|r| r.n).max().unwrap_or(0);
    let at_n =
        ExperimentReport { rows: report.rows.iter().filter(|r| r.n == n_max).cloned().collect(), ..report.clone() };
    let target = 1.0 - report.config.alpha;
    let cov = collect(&at_n, |r| r.eps, |r| r.coverage);
    if !cov.is_empty() {
        out.push((
            "coverage_vs_eps.svg".into(),
            line_chart(&format!("Coverage (n = {n_max})"), "eps", "coverage", &cov, Some(target)),
        ));
    }
    let pow = collect(&at_n, |r| r.eps, |r| r.power);
    if !pow.is_empty() {
        out.push(("power_vs_eps.svg".into(), line_chart(&format!("Power (n = {n_max})"), "eps", "power", &pow, None)));
    }
    let eps_max = report.rows.iter().map(|r| r.eps).fold(f64::NEG_INFINITY, f64::max);
    let at_eps =
        ExperimentReport { rows: report.rows.iter().filter(|r| r.eps == eps_max).cloned().collect(), ..report.clone() };
    let len = collect(&at_eps, |r| r.n as f64, |r| r.mean_length);
    if !len.is_empty() {
        out.push((
            "length_vs_n.svg".into(),
            line_chart(&format!("Mean interval length (eps = {eps_max})"), "n", "length", &len, None),
        ));
    }
    out
}
