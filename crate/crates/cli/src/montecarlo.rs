//! `tamper-mc` and `failure-mc`: histogram CSVs plus a JSON summary.

use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;
use xref_core::tamper_mc::{self, DistributionSummary, FailureMode, McConfig, McOutcome};

use crate::config::{self, McSection};
use crate::output::{ensure_dir, num, write_json, write_text};
use crate::{CliResult, McArgs};

#[derive(Debug, Serialize)]
struct Stats {
    count: usize,
    mean: f64,
    median: f64,
    variance: f64,
    min: f64,
    max: f64,
    mode_bin_left: Option<f64>,
}

impl From<&DistributionSummary> for Stats {
    fn from(d: &DistributionSummary) -> Self {
        Self {
            count: d.count,
            mean: d.mean,
            median: d.median,
            variance: d.variance,
            min: d.min,
            max: d.max,
            mode_bin_left: d.mode_bin_left,
        }
    }
}

#[derive(Debug, Serialize)]
struct Cell {
    m: usize,
    alpha: f64,
    top_x_percent: f64,
    failed_domains: usize,
    r: Stats,
    r_prime: Stats,
    r_at_least_one_fraction: f64,
    r_prime_at_most_one_fraction: f64,
    /// `|median_f - median_0| / median_0` against the failure-free run.
    #[serde(skip_serializing_if = "Option::is_none")]
    r_median_shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_prime_median_shift: Option<f64>,
    r_file: Option<String>,
    r_prime_file: String,
}

#[derive(Debug, Serialize)]
struct RPrimeReport {
    /// Share of all samples with `R' <= 1`.
    at_most_one_fraction: f64,
    median_min: f64,
    median_max: f64,
    any_median_above_one: bool,
    note: &'static str,
}

#[derive(Debug, Serialize)]
struct Summary {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    n_nodes: usize,
    trials: usize,
    bin_width: f64,
    failure_mode: FailureMode,
    cells: Vec<Cell>,
    r_prime: RPrimeReport,
}

const R_PRIME_NOTE: &str = "top-X% selections use equal counts in numerator and denominator, \
which bounds R' by 1; medians are measured values";

fn section(args: &McArgs, seed: Option<u64>) -> anyhow::Result<McSection> {
    let mut s = config::load_optional(args.config.as_deref())?.and_then(|c| c.monte_carlo).unwrap_or_default();
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(t) = args.trials {
        s.trials = t;
    }
    if s.m_values.is_empty() || s.alpha_values.is_empty() || s.top_x_values.is_empty() {
        return Err(anyhow!("m_values, alpha_values and top_x_values must be non-empty"));
    }
    Ok(s)
}

fn base_config(s: &McSection, m: usize, alpha: f64, x: f64) -> McConfig {
    McConfig {
        n_nodes: s.n_nodes,
        m,
        alpha,
        top_x_percent: x,
        trials: s.trials,
        failed_domains: 0,
        failure_mode: s.failure_mode,
        seed: s.seed,
        bin_width: s.bin_width,
    }
}

fn write_samples(path: &Path, outcome: &McOutcome) -> anyhow::Result<()> {
    let mut s = String::from("trial,a,a_prime,b,b_prime,r,r_prime\n");
    for (i, x) in outcome.samples.iter().enumerate() {
        s.push_str(&format!("{i},{},{},{},{},{},{}\n", x.a, x.a_prime, x.b, x.b_prime, x.r, x.r_prime));
    }
    write_text(path, &s)
}

fn cell(outcome: &McOutcome, r_file: Option<String>, r_prime_file: String, baseline: Option<&McOutcome>) -> Cell {
    let c = &outcome.config;
    let shift = |a: f64, b: f64| (a - b).abs() / b;
    Cell {
        m: c.m,
        alpha: c.alpha,
        top_x_percent: c.top_x_percent,
        failed_domains: c.failed_domains,
        r: (&outcome.r).into(),
        r_prime: (&outcome.r_prime).into(),
        r_at_least_one_fraction: outcome.r_at_least_one_fraction,
        r_prime_at_most_one_fraction: outcome.r_prime_at_most_one_fraction,
        r_median_shift: baseline.map(|b| shift(outcome.r.median, b.r.median)),
        r_prime_median_shift: baseline.map(|b| shift(outcome.r_prime.median, b.r_prime.median)),
        r_file,
        r_prime_file,
    }
}

fn r_prime_report(cells: &[Cell]) -> RPrimeReport {
    let total: f64 = cells.iter().map(|c| c.r_prime.count as f64).sum();
    let at_most: f64 = cells.iter().map(|c| c.r_prime_at_most_one_fraction * c.r_prime.count as f64).sum();
    let medians = cells.iter().map(|c| c.r_prime.median);
    RPrimeReport {
        at_most_one_fraction: at_most / total,
        median_min: medians.clone().fold(f64::INFINITY, f64::min),
        median_max: medians.clone().fold(f64::NEG_INFINITY, f64::max),
        any_median_above_one: medians.into_iter().any(|m| m > 1.0),
        note: R_PRIME_NOTE,
    }
}

fn summary(command: &'static str, s: &McSection, cells: Vec<Cell>) -> Summary {
    Summary {
        schema_version: config::SCHEMA_VERSION,
        command,
        seed: s.seed,
        n_nodes: s.n_nodes,
        trials: s.trials,
        bin_width: s.bin_width,
        failure_mode: s.failure_mode,
        r_prime: r_prime_report(&cells),
        cells,
    }
}

pub fn tamper_mc(args: &McArgs, seed: Option<u64>) -> CliResult {
    let s = section(args, seed)?;
    ensure_dir(&args.out)?;
    let mut cells = Vec::new();
    for &m in &s.m_values {
        for &alpha in &s.alpha_values {
            for (i, &x) in s.top_x_values.iter().enumerate() {
                let outcome = tamper_mc::run_monte_carlo(&base_config(&s, m, alpha, x), args.workers)?;
                let tag = format!("m{m}_alpha{}", num(alpha));
                // R does not depend on X, so one histogram per (m, alpha).
                let r_file = (i == 0).then(|| format!("r_{tag}.csv"));
                if let Some(f) = &r_file {
                    write_text(&args.out.join(f), &outcome.r.histogram.to_csv())?;
                }
                let rp_file = format!("rprime_{tag}_x{}.csv", num(x));
                write_text(&args.out.join(&rp_file), &outcome.r_prime.histogram.to_csv())?;
                if args.raw_samples {
                    write_samples(&args.out.join(format!("samples_{tag}_x{}.csv", num(x))), &outcome)?;
                }
                cells.push(cell(&outcome, r_file, rp_file, None));
            }
        }
    }
    write_json(&args.out.join("summary.json"), &summary("tamper-mc", &s, cells))?;
    println!("wrote {}", args.out.join("summary.json").display());
    Ok(())
}

pub fn failure_mc(args: &McArgs, seed: Option<u64>) -> CliResult {
    let s = section(args, seed)?;
    for &m in &s.failure_m_values {
        if let Some(f) = s.f_values.iter().find(|&&f| f >= m) {
            return Err(anyhow!("f = {f} must be below m = {m}").into());
        }
    }
    ensure_dir(&args.out)?;
    let mut cells = Vec::new();
    let (alpha, x) = (s.failure_alpha, s.failure_top_x);
    for &m in &s.failure_m_values {
        let cfg = base_config(&s, m, alpha, x);
        let baseline = tamper_mc::run_monte_carlo(&cfg, args.workers)?;
        for (f, outcome) in tamper_mc::run_failure_sweep(&cfg, &s.f_values, args.workers)? {
            let tag = format!("m{m}_alpha{}", num(alpha));
            let r_file = format!("r_{tag}_f{f}.csv");
            let rp_file = format!("rprime_{tag}_x{}_f{f}.csv", num(x));
            write_text(&args.out.join(&r_file), &outcome.r.histogram.to_csv())?;
            write_text(&args.out.join(&rp_file), &outcome.r_prime.histogram.to_csv())?;
            if args.raw_samples {
                write_samples(&args.out.join(format!("samples_{tag}_x{}_f{f}.csv", num(x))), &outcome)?;
            }
            cells.push(cell(&outcome, Some(r_file), rp_file, Some(&baseline)));
        }
    }
    write_json(&args.out.join("summary.json"), &summary("failure-mc", &s, cells))?;
    println!("wrote {}", args.out.join("summary.json").display());
    Ok(())
}
