//! The `relscore` command line.
//!
//! Exit codes for `compare`: 0 model 1 better, 1 model 2 better,
//! 2 inconclusive. Anything above 2 is an error: 64 usage, 65 bad input
//! data, 74 I/O, 78 bad config, 70 other.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::edgeworth::{ee_cdf_raw, ee_pdf, EdgeworthParams, ExpansionGrid, ExpansionKind};
use crate::error::{Error, Result};
use crate::estimator::{moment_summary, MomentSummary};
use crate::inference::{ci_clt, ci_edgeworth, ConfidenceInterval, Verdict};
use crate::scorefile::{join_scores, read_score_file, ScoreFormat};
use crate::sim::{run, ConfigFormat, ExperimentConfig};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;
pub const EXIT_CONFIG: i32 = 78;

#[derive(Debug, Parser)]
#[command(name = "relscore", version, about = "Compare two generative models by their relative score on held-out data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Clt,
    EeZ,
    EeT,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Jsonl,
}

impl From<InputFormat> for ScoreFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Csv => ScoreFormat::Csv,
            InputFormat::Jsonl => ScoreFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Z,
    T,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare two models from per-point log-density dumps on the same test set.
    Compare {
        /// Scores of model 1 (`id`, `logp`).
        file_a: PathBuf,
        /// Scores of model 2 (`id`, `logp`).
        file_b: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Clt)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Input format; inferred from the file extension when omitted.
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        /// Log-densities are base 2.
        #[arg(long)]
        bits: bool,
        /// The dumps hold conditional log-densities log p(y | x).
        #[arg(long)]
        conditional: bool,
    },
    /// Run a coverage/power simulation described by a TOML or JSON config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write SVG line charts to OUT/plots.
        #[arg(long)]
        plots: bool,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate an Edgeworth expansion as CSV.
    EeTable {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        kappa3: f64,
        #[arg(long, allow_hyphen_values = true)]
        kappa4: f64,
        #[arg(long, value_enum, default_value_t = KindArg::Z)]
        kind: KindArg,
        /// `start:stop:count`, evenly spaced and inclusive.
        #[arg(long, default_value = "-4:4:81", allow_hyphen_values = true)]
        grid: String,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Config { .. } => EXIT_CONFIG,
        Error::InvalidAlpha(_) | Error::InvalidGrid(_) => EXIT_USAGE,
        Error::Parse { .. }
        | Error::Join { .. }
        | Error::ZeroVariance
        | Error::EmptySample
        | Error::NonFiniteInput { .. }
        | Error::SampleTooSmall { .. } => EXIT_DATA,
        _ => EXIT_SOFTWARE,
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Model1Better => 0,
        Verdict::Model2Better => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Compare { file_a, file_b, alpha, method, format, input_format, bits, conditional } => {
            let opts = CompareOptions { alpha, method, format, input_format, bits, conditional };
            compare(&file_a, &file_b, &opts, out)
        }
        Command::Simulate { config, out: dir, plots, seed } => simulate(&config, &dir, plots, seed, out).map(|()| 0),
        Command::EeTable { n, kappa3, kappa4, kind, grid } => ee_table(n, kappa3, kappa4, kind, &grid, out).map(|()| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct CompareOptions {
    alpha: f64,
    method: MethodArg,
    format: OutputFormat,
    input_format: Option<InputFormat>,
    bits: bool,
    conditional: bool,
}

#[derive(Serialize)]
struct CompareReport {
    n: usize,
    conditional: bool,
    alpha: f64,
    delta: f64,
    variance: f64,
    skewness: f64,
    kurtosis_excess: f64,
    intervals: Vec<ConfidenceInterval>,
    verdict: Verdict,
}

/// Model 1 or 2 only when every interval agrees; otherwise inconclusive.
fn consensus(intervals: &[ConfidenceInterval]) -> Verdict {
    match intervals.first() {
        Some(first) if intervals.iter().all(|c| c.verdict == first.verdict) => first.verdict,
        _ => Verdict::Inconclusive,
    }
}

fn compare(a: &Path, b: &Path, opts: &CompareOptions, out: &mut dyn Write) -> Result<i32> {
    let fa = read_score_file(a, opts.input_format.map(Into::into), opts.bits)?;
    let fb = read_score_file(b, opts.input_format.map(Into::into), opts.bits)?;
    let sample = join_scores(&fa, &fb)?;
    let summary: MomentSummary = moment_summary(&sample)?;
    let methods: &[MethodArg] = match opts.method {
        MethodArg::All => &[MethodArg::Clt, MethodArg::EeZ, MethodArg::EeT],
        ref m => std::slice::from_ref(m),
    };
    let intervals = methods
        .iter()
        .map(|m| match m {
            MethodArg::EeZ => ci_edgeworth(&sample, opts.alpha, ExpansionKind::Z, None),
            MethodArg::EeT => ci_edgeworth(&sample, opts.alpha, ExpansionKind::T, None),
            _ => ci_clt(&sample, opts.alpha),
        })
        .collect::<Result<Vec<_>>>()?;
    let report = CompareReport {
        n: summary.n,
        conditional: opts.conditional,
        alpha: opts.alpha,
        delta: summary.mean,
        variance: summary.variance,
        skewness: summary.skewness,
        kurtosis_excess: summary.kurtosis_excess,
        verdict: consensus(&intervals),
        intervals,
    };
    let text = match opts.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))? + "\n",
        OutputFormat::Csv => compare_csv(&report),
        OutputFormat::Text => compare_text(&report),
    };
    out.write_all(text.as_bytes())?;
    Ok(verdict_code(report.verdict))
}

fn compare_csv(r: &CompareReport) -> String {
    let mut s =
        String::from("method,lower,upper,alpha,point,stderr,verdict,n,delta,variance,skewness,kurtosis_excess\n");
    for c in &r.intervals {
        let verdict =
            serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.method.as_str(),
            c.lower,
            c.upper,
            c.alpha,
            c.point,
            c.stderr,
            verdict,
            r.n,
            r.delta,
            r.variance,
            r.skewness,
            r.kurtosis_excess
        );
    }
    s
}

fn compare_text(r: &CompareReport) -> String {
    let kind = if r.conditional { "conditional log-densities" } else { "log-densities" };
    let mut s = String::new();
    let _ = writeln!(s, "test points:      {} ({kind})", r.n);
    let _ = writeln!(s, "relative score:   {:.6}", r.delta);
    let _ = writeln!(s, "variance:         {:.6}", r.variance);
    let _ = writeln!(s, "skewness:         {:.4}", r.skewness);
    let _ = writeln!(s, "excess kurtosis:  {:.4}", r.kurtosis_excess);
    let level = 100.0 * (1.0 - r.alpha);
    for c in &r.intervals {
        let _ =
            writeln!(s, "{:<5} {level:.0}% CI:    ({:.6}, {:.6})  {}", c.method.as_str(), c.lower, c.upper, c.verdict);
    }
    let _ = writeln!(s, "verdict:          {}", r.verdict);
    s
}

fn simulate(config: &Path, dir: &Path, plots: bool, seed: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
    let format = match config.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => ConfigFormat::Json,
        _ => ConfigFormat::Toml,
    };
    let mut cfg = ExperimentConfig::parse(&text, format)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = run(&cfg)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), report.to_csv())?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    if plots {
        let plot_dir = dir.join("plots");
        std::fs::create_dir_all(&plot_dir)?;
        for (name, svg) in crate::plot::report_charts(&report) {
            std::fs::write(plot_dir.join(name), svg)?;
        }
    }
    writeln!(out, "wrote {} rows to {}", report.rows.len(), dir.join("report.csv").display())?;
    Ok(())
}

/// Parses `start:stop:count` into evenly spaced inclusive abscissae.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::InvalidGrid(format!("`{spec}`: {m}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:stop:count"));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad("start is not a number"))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad("stop is not a number"))?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad("count is not a positive integer"))?;
    if !start.is_finite() || !stop.is_finite() {
        return Err(bad("bounds must be finite"));
    }
    match count {
        0 => Err(bad("count must be positive")),
        1 if start == stop => Ok(vec![start]),
        1 => Err(bad("a single point needs start == stop")),
        _ if start >= stop => Err(bad("start must be below stop")),
        _ => {
            let span = stop - start;
            let last = (count - 1) as f64;
            Ok((0..count).map(|i| start + span * i as f64 / last).collect())
        }
    }
}

fn ee_table(n: usize, kappa3: f64, kappa4: f64, kind: KindArg, grid: &str, out: &mut dyn Write) -> Result<()> {
    let xs = parse_grid(grid)?;
    let kind = match kind {
        KindArg::Z => ExpansionKind::Z,
        KindArg::T => ExpansionKind::T,
    };
    let params = EdgeworthParams::new(n, kappa3, kappa4, kind)?;
    let eg = ExpansionGrid::new(params);
    let mut s = String::from("x,ee_cdf_raw,ee_cdf_monotone,ee_pdf\n");
    for x in xs {
        let _ = writeln!(s, "{x},{},{},{}", ee_cdf_raw(x, &params), eg.cdf_monotone(x), ee_pdf(x, &params));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}
