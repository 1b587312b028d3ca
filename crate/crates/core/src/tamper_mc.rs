//! Monte Carlo estimation of the tamper-resistance ratios `R = B/A` and
//! `R' = B'/A'` under Pareto-distributed hash rates.
//!
//! `A` is the largest hash rate in the merged population and `B` the sum of
//! per-domain maxima. `A'` is the sum of the top X% of the merged population
//! and `B'` the sum of each domain's top X%. Selection counts use
//! `ceil(X/100 * size)`.

use rand::distributions::Open01;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("empty system")]
    EmptySystem,
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("failed domain {domain} is not below m = {m}")]
    UnknownDomain { domain: usize, m: usize },
}

/// Draws one Pareto(alpha) rate on `(1, inf)` by inverse CDF.
fn draw_pareto<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    loop {
        let u: f64 = rng.sample(Open01);
        let h = u.powf(-1.0 / alpha);
        // u within an ulp of 1 can round to exactly 1.0, outside the support.
        if h > 1.0 {
            return h;
        }
    }
}

/// `count` i.i.d. samples with density `alpha / h^(1 + alpha)` on `h > 1`.
pub fn sample_pareto(alpha: f64, count: usize, seed: u64) -> Result<Vec<f64>, McError> {
    check_alpha(alpha)?;
    let mut rng = seed::rng_for(seed, &[]);
    Ok((0..count).map(|_| draw_pareto(&mut rng, alpha)).collect())
}

pub fn pareto_cdf(alpha: f64, h: f64) -> f64 {
    if h <= 1.0 {
        0.0
    } else {
        1.0 - h.powf(-alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<(), McError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(McError::InvalidAlpha(alpha))
    }
}

/// Hash rates of every core node, stored domain after domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashRatePopulation {
    pub rates: Vec<f64>,
    pub domain_sizes: Vec<usize>,
    pub alpha: f64,
}

impl HashRatePopulation {
    pub fn from_domains(domains: &[Vec<f64>], alpha: f64) -> Result<Self, McError> {
        let pop = Self {
            rates: domains.iter().flatten().copied().collect(),
            domain_sizes: domains.iter().map(Vec::len).collect(),
            alpha,
        };
        pop.validate()?;
        Ok(pop)
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, domain_sizes: &[usize], alpha: f64) -> Result<Self, McError> {
        check_alpha(alpha)?;
        let n = domain_sizes.iter().sum();
        let rates = (0..n).map(|_| draw_pareto(rng, alpha)).collect();
        Ok(Self { rates, domain_sizes: domain_sizes.to_vec(), alpha })
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.domain_sizes.iter().sum::<usize>() != self.rates.len() {
            return Err(McError::InvalidPopulation("domain sizes do not sum to the node count".into()));
        }
        if self.domain_sizes.contains(&0) {
            return Err(McError::InvalidPopulation("empty domain".into()));
        }
        // Pareto support is h > 1; hand-built populations only need positive rates.
        if self.rates.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(McError::InvalidPopulation("rates must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.domain_sizes.len()
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }

    pub fn domain(&self, i: usize) -> &[f64] {
        let start: usize = self.domain_sizes[..i].iter().sum();
        &self.rates[start..start + self.domain_sizes[i]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// Failed domains vanish from the system: numerator and denominator.
    #[default]
    ExcludeFromBoth,
    /// Failed domains drop out of `B`, `B'` only; `A`, `A'` keep every node.
    #[serde(rename = "exclude_from_B_only", alias = "exclude_from_b_only")]
    ExcludeFromBOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSample {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub r: f64,
    pub r_prime: f64,
}

/// `ceil(x/100 * size)` clamped to `[1, size]`. The epsilon keeps exact
/// integer products such as `10% of 1000` from rounding up.
pub fn selection_count(top_x_percent: f64, size: usize) -> usize {
    let k = (top_x_percent / 100.0 * size as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(size)
}

/// Sum of the `k` largest values, added in ascending order.
fn top_k_ascending(values: &mut [f64], k: usize) -> Vec<f64> {
    let n = values.len();
    if k < n {
        values.select_nth_unstable_by(n - k, f64::total_cmp);
    }
    let mut top = values[n - k..].to_vec();
    top.sort_unstable_by(f64::total_cmp);
    top
}

/// Summing both top-X% selections in ascending order makes `B' <= A'` hold
/// exactly in floating point whenever `B'`'s selection is dominated
/// element-wise by `A'`'s, since rounded addition is monotone.
fn ascending_sum(sorted: &[f64]) -> f64 {
    sorted.iter().sum()
}

pub fn compute_sample(
    population: &HashRatePopulation,
    top_x_percent: f64,
    failed_domains: &[usize],
    mode: FailureMode,
) -> Result<MonteCarloSample, McError> {
    let m = population.m();
    if let Some(&domain) = failed_domains.iter().find(|&&d| d >= m) {
        return Err(McError::UnknownDomain { domain, m });
    }
    let mut alive = vec![true; m];
    for &d in failed_domains {
        alive[d] = false;
    }
    if !alive.iter().any(|&a| a) {
        return Err(McError::EmptySystem);
    }

    let mut b = 0.0;
    let mut b_selection = Vec::new();
    let mut merged = Vec::with_capacity(population.n());
    let mut start = 0;
    for (i, &size) in population.domain_sizes.iter().enumerate() {
        let rates = &population.rates[start..start + size];
        start += size;
        if alive[i] || mode == FailureMode::ExcludeFromBOnly {
            merged.extend_from_slice(rates);
        }
        if alive[i] {
            b += rates.iter().copied().fold(f64::MIN, f64::max);
            let mut own = rates.to_vec();
            let k = selection_count(top_x_percent, size);
            b_selection.extend(top_k_ascending(&mut own, k));
        }
    }
    b_selection.sort_unstable_by(f64::total_cmp);
    let b_prime = ascending_sum(&b_selection);

    let a = merged.iter().copied().fold(f64::MIN, f64::max);
    let k = selection_count(top_x_percent, merged.len());
    let a_prime = ascending_sum(&top_k_ascending(&mut merged, k));

    Ok(MonteCarloSample { a, a_prime, b, b_prime, r: b / a, r_prime: b_prime / a_prime })
}

fn default_bin_width() -> f64 {
    0.1
}

fn default_top_x() -> f64 {
    10.0
}

fn default_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_nodes: usize,
    pub m: usize,
    pub alpha: f64,
    #[serde(default = "default_top_x")]
    pub top_x_percent: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub failed_domains: usize,
    #[serde(default)]
    pub failure_mode: FailureMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

impl McConfig {
    pub fn new(n_nodes: usize, m: usize, alpha: f64) -> Self {
        Self {
            n_nodes,
            m,
            alpha,
            top_x_percent: default_top_x(),
            trials: default_trials(),
            failed_domains: 0,
            failure_mode: FailureMode::default(),
            seed: 0,
            bin_width: default_bin_width(),
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        let mut problems = Vec::new();
        if self.m == 0 {
            problems.push("m must be at least 1".to_string());
        } else if self.n_nodes == 0 || !self.n_nodes.is_multiple_of(self.m) {
            problems.push(format!("n_nodes = {} must be a positive multiple of m = {}", self.n_nodes, self.m));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            problems.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.top_x_percent > 0.0 && self.top_x_percent <= 100.0) {
            problems.push(format!("top_x_percent must be in (0, 100], got {}", self.top_x_percent));
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if self.m > 0 && self.failed_domains >= self.m {
            problems.push(format!("failed_domains = {} must be below m = {}", self.failed_domains, self.m));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            problems.push(format!("bin_width must be positive, got {}", self.bin_width));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(McError::InvalidConfig(problems))
        }
    }

    fn domain_sizes(&self) -> Vec<usize> {
        vec![self.n_nodes / self.m; self.m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub count: u64,
    pub density: f64,
}

/// Histogram normalized to a probability density. Bins are contiguous from
/// the lowest to the highest occupied bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Self {
        if values.is_empty() {
            return Self { bin_width, bins: Vec::new() };
        }
        let index = |v: f64| (v / bin_width).floor() as i64;
        let lo = values.iter().map(|&v| index(v)).min().unwrap();
        let hi = values.iter().map(|&v| index(v)).max().unwrap();
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for &v in values {
            counts[(index(v) - lo) as usize] += 1;
        }
        let norm = values.len() as f64 * bin_width;
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                bin_left: (lo + i as i64) as f64 * bin_width,
                count,
                density: count as f64 / norm,
            })
            .collect();
        Self { bin_width, bins }
    }

    /// Left edge of the most populated bin (lowest on ties).
    pub fn mode_bin_left(&self) -> Option<f64> {
        let mut best: Option<&HistogramBin> = None;
        for b in &self.bins {
            if best.is_none_or(|x| b.count > x.count) {
                best = Some(b);
            }
        }
        best.map(|b| b.bin_left)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,density\n");
        for b in &self.bins {
            out.push_str(&format!("{:.6},{:.9}\n", b.bin_left, b.density));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample variance (n - 1 denominator).
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub mode_bin_left: Option<f64>,
    pub histogram: Histogram,
}

impl DistributionSummary {
    pub fn from_values(values: &[f64], bin_width: f64) -> Self {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mean = if n == 0 { f64::NAN } else { sorted.iter().sum::<f64>() / n as f64 };
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => sorted[n / 2],
            _ => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
        };
        let variance =
            if n < 2 { 0.0 } else { sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 };
        let histogram = Histogram::from_values(&sorted, bin_width);
        Self {
            count: n,
            mean,
            median,
            variance,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            mode_bin_left: histogram.mode_bin_left(),
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub config: McConfig,
    pub r: DistributionSummary,
    pub r_prime: DistributionSummary,
    pub r_at_least_one_fraction: f64,
    pub r_prime_at_most_one_fraction: f64,
    #[serde(skip)]
    pub samples: Vec<MonteCarloSample>,
}

/// One trial: the population is drawn first and the failed domains after,
/// so the same trial with `f = 0` sees the same rates.
fn run_trial(config: &McConfig, sizes: &[usize], trial: u64) -> Result<MonteCarloSample, McError> {
    let mut rng = seed::rng_for(config.seed, &[trial]);
    let population = HashRatePopulation::sample(&mut rng, sizes, config.alpha)?;
    let failed = index::sample(&mut rng, config.m, config.failed_domains).into_vec();
    compute_sample(&population, config.top_x_percent, &failed, config.failure_mode)
}

/// Runs `config.trials` independent trials. `workers` picks the thread
/// count (`None` uses the global pool); output does not depend on it.
pub fn run_monte_carlo(config: &McConfig, workers: Option<usize>) -> Result<McOutcome, McError> {
    config.validate()?;
    let sizes = config.domain_sizes();
    let trials = config.trials as u64;
    let run = || (0..trials).into_par_iter().map(|t| run_trial(config, &sizes, t)).collect::<Result<Vec<_>, _>>();
    let samples = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool").install(run)?,
        None => run()?,
    };
    let r: Vec<f64> = samples.iter().map(|s| s.r).collect();
    let rp: Vec<f64> = samples.iter().map(|s| s.r_prime).collect();
    let n = samples.len() as f64;
    Ok(McOutcome {
        config: config.clone(),
        r_at_least_one_fraction: r.iter().filter(|&&v| v >= 1.0).count() as f64 / n,
        r_prime_at_most_one_fraction: rp.iter().filter(|&&v| v <= 1.0).count() as f64 / n,
        r: DistributionSummary::from_values(&r, config.bin_width),
        r_prime: DistributionSummary::from_values(&rp, config.bin_width),
        samples,
    })
}

/// One run per failure count, each with freshly drawn failed domains per trial.
pub fn run_failure_sweep(
    config: &McConfig,
    f_values: &[usize],
    workers: Option<usize>,
) -> Result<Vec<(usize, McOutcome)>, McError> {
    if let Some(&f) = f_values.iter().find(|&&f| f >= config.m) {
        return Err(McError::InvalidConfig(vec![format!("f = {f} must be below m = {}", config.m)]));
    }
    f_values
        .iter()
        .map(|&f| {
            let cfg = McConfig { failed_domains: f, ..config.clone() };
            run_monte_carlo(&cfg, workers).map(|o| (f, o))
        })
        .collect()
}

/// Kolmogorov-Smirnov distance between `samples` and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand() -> HashRatePopulation {
        HashRatePopulation::from_domains(&[vec![5.0, 3.0], vec![4.0, 2.0]], 2.0).unwrap()
    }

    #[test]
    fn hand_instance() {
        let s = compute_sample(&hand(), 50.0, &[], FailureMode::ExcludeFromBoth).unwrap();
        assert_eq!((s.a, s.b, s.r), (5.0, 9.0, 1.8));
        assert_eq!((s.a_prime, s.b_prime, s.r_prime), (9.0, 9.0, 1.0));
    }

    #[test]
    fn hand_instance_with_failure() {
        let s = compute_sample(&hand(), 50.0, &[0], FailureMode::ExcludeFromBoth).unwrap();
        assert_eq!((s.a, s.b, s.r), (4.0, 4.0, 1.0));
        let s = compute_sample(&hand(), 50.0, &[0], FailureMode::ExcludeFromBOnly).unwrap();
        assert_eq!((s.a, s.b, s.r), (5.0, 4.0, 0.8));
        assert_eq!(compute_sample(&hand(), 50.0, &[0, 1], FailureMode::ExcludeFromBoth), Err(McError::EmptySystem));
        assert_eq!(McError::EmptySystem.to_string(), "empty system");
        assert!(compute_sample(&hand(), 50.0, &[2], FailureMode::ExcludeFromBoth).is_err());
    }

    #[test]
    fn single_domain_is_neutral() {
        let rates = sample_pareto(2.0, 100, 3).unwrap();
        let pop = HashRatePopulation::from_domains(&[rates], 2.0).unwrap();
        let s = compute_sample(&pop, 10.0, &[], FailureMode::ExcludeFromBoth).unwrap();
        assert_eq!(s.r, 1.0);
        assert_eq!(s.r_prime, 1.0);
    }

    #[test]
    fn selection_counts_round_up() {
        assert_eq!(selection_count(10.0, 1000), 100);
        assert_eq!(selection_count(30.0, 10), 3);
        assert_eq!(selection_count(10.0, 5), 1);
        assert_eq!(selection_count(0.01, 10), 1);
        assert_eq!(selection_count(100.0, 7), 7);
        assert_eq!(selection_count(33.4, 3), 2);
    }

    #[test]
    fn pareto_rejects_bad_alpha() {
        assert_eq!(sample_pareto(0.0, 1, 0), Err(McError::InvalidAlpha(0.0)));
        assert!(sample_pareto(-1.0, 1, 0).is_err());
        assert!(sample_pareto(f64::NAN, 1, 0).is_err());
    }

    #[test]
    fn pareto_matches_analytic_distribution() {
        for (alpha, tol) in [(2.0, 0.02), (3.0, 0.01)] {
            let xs = sample_pareto(alpha, 1_000_000, 17).unwrap();
            assert!(xs.iter().all(|&h| h > 1.0));
            let ks = ks_distance(&xs, |h| pareto_cdf(alpha, h));
            assert!(ks <= 0.005, "alpha {alpha}: ks {ks}");
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let expect = alpha / (alpha - 1.0);
            assert!((mean - expect).abs() / expect <= tol, "alpha {alpha}: mean {mean}");
        }
    }

    #[test]
    fn ks_distance_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn histogram_density_integrates_to_one() {
        let h = Histogram::from_values(&[1.05, 1.15, 1.17, 1.45], 0.1);
        assert_eq!(h.bins.len(), 5);
        assert_eq!(h.bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2, 0, 0, 1]);
        let area: f64 = h.bins.iter().map(|b| b.density * h.bin_width).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!((h.mode_bin_left().unwrap() - 1.1).abs() < 1e-12);
        assert!(h.to_csv().starts_with("bin_left,density\n1.000000,2.5"));
    }

    #[test]
    fn summary_statistics() {
        let s = DistributionSummary::from_values(&[1.0, 2.0, 3.0, 4.0], 1.0);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!((s.min, s.max), (1.0, 4.0));
    }

    #[test]
    fn config_validation_lists_problems() {
        let mut c = McConfig::new(10, 3, 0.0);
        c.top_x_percent = 0.0;
        c.failed_domains = 3;
        match c.validate() {
            Err(McError::InvalidConfig(p)) => assert_eq!(p.len(), 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
        assert!(McConfig::new(100, 10, 2.0).validate().is_ok());
        let err = serde_json::from_str::<McConfig>(r#"{"n_nodes":10,"m":2,"alpha":2,"bogus":1}"#);
        assert!(err.is_err());
        let mode: FailureMode = serde_json::from_str(r#""exclude_from_B_only""#).unwrap();
        assert_eq!(mode, FailureMode::ExcludeFromBOnly);
    }

    fn small(m: usize) -> McConfig {
        let mut c = McConfig::new(1000, m, 2.0);
        c.trials = 200;
        c.seed = 42;
        c
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = small(10);
        let a = run_monte_carlo(&c, Some(1)).unwrap();
        let b = run_monte_carlo(&c, Some(4)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_failures_reproduce_plain_run() {
        let c = small(10);
        let plain = run_monte_carlo(&c, None).unwrap();
        let sweep = run_failure_sweep(&c, &[0, 3], None).unwrap();
        assert_eq!(sweep[0].1.samples, plain.samples);
        assert!(sweep[1].1.samples.iter().all(|s| s.r >= 1.0));
        assert!(run_failure_sweep(&c, &[10], None).is_err());
    }

    #[test]
    fn ratios_respect_bounds_in_runs() {
        for m in [1, 10, 100] {
            let out = run_monte_carlo(&small(m), None).unwrap();
            assert_eq!(out.r_at_least_one_fraction, 1.0);
            assert_eq!(out.r_prime_at_most_one_fraction, 1.0);
        }
    }

    fn population(max_m: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(1.0001f64..1e6, 1..=max_d), 1..=max_m)
    }

    proptest! {
        #[test]
        fn r_at_least_one(domains in population(12, 12), x in 0.5f64..100.0, fail_mask in any::<u16>()) {
            let pop = HashRatePopulation::from_domains(&domains, 2.0).unwrap();
            let mut failed: Vec<usize> = (0..pop.m()).filter(|i| fail_mask >> i & 1 == 1).collect();
            if failed.len() == pop.m() {
                failed.pop();
            }
            let s = compute_sample(&pop, x, &failed, FailureMode::ExcludeFromBoth).unwrap();
            prop_assert!(s.r >= 1.0);
        }

        #[test]
        fn r_prime_at_most_one_for_uniform_integer_selections(
            m in 1usize..12, d_tenths in 1usize..5, x_tenths in 1usize..10, seed in any::<u64>(),
        ) {
            let d = d_tenths * 10;
            let x = x_tenths as f64 * 10.0;
            let sizes = vec![d; m];
            let pop = HashRatePopulation::sample(&mut seed::rng_for(seed, &[]), &sizes, 1.1).unwrap();
            let s = compute_sample(&pop, x, &[], FailureMode::ExcludeFromBoth).unwrap();
            prop_assert!(s.r_prime <= 1.0, "{s:?}");
        }

        #[test]
        fn adding_a_domain_never_decreases_b(domains in population(8, 8), extra in prop::collection::vec(1.0001f64..1e6, 1..8)) {
            let before = compute_sample(&HashRatePopulation::from_domains(&domains, 2.0).unwrap(), 10.0, &[], FailureMode::ExcludeFromBoth).unwrap();
            let mut more = domains.clone();
            more.push(extra);
            let after = compute_sample(&HashRatePopulation::from_domains(&more, 2.0).unwrap(), 10.0, &[], FailureMode::ExcludeFromBoth).unwrap();
            prop_assert!(after.b >= before.b);
        }
    }
}
