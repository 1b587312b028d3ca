//! Analytic throughput model for a proof-of-work chain.
//!
//! With exponentially distributed block intervals of mean `tau` and a block
//! propagation latency `tau_fork`, a block forks with probability
//! `1 - exp(-tau_fork / tau)`, and useful throughput is
//! `G(tau) = C / tau * exp(-tau_fork / tau)`, which peaks at `tau = tau_fork`.

// Negated comparisons below also reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("block interval tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("propagation latency tau_fork must be non-negative, got {0}")]
    NegativeTauFork(f64),
    #[error("transactions per block must be positive, got {0}")]
    NonPositiveTxs(f64),
    #[error("no interior optimum: tau_fork is zero")]
    NoInteriorOptimum,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("numeric optimum {numeric} disagrees with closed form {analytic}")]
    OptimumMismatch { numeric: f64, analytic: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityParams {
    /// Mean block-generation interval in seconds.
    pub tau: f64,
    /// Block propagation latency in seconds.
    pub tau_fork: f64,
    /// Mean transactions per block.
    pub c_txs: f64,
    /// Block size in megabytes. Informational; the model does not use it.
    #[serde(default = "default_block_size")]
    pub block_size_mb: f64,
}

fn default_block_size() -> f64 {
    1.0
}

impl CapacityParams {
    pub fn new(tau: f64, tau_fork: f64, c_txs: f64) -> Self {
        Self { tau, tau_fork, c_txs, block_size_mb: 1.0 }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        if !(self.tau > 0.0) {
            return Err(CapacityError::NonPositiveTau(self.tau));
        }
        if !(self.tau_fork >= 0.0) {
            return Err(CapacityError::NegativeTauFork(self.tau_fork));
        }
        if !(self.c_txs > 0.0) {
            return Err(CapacityError::NonPositiveTxs(self.c_txs));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForkProbability {
    pub exact: f64,
    /// First-order approximation `tau_fork / tau`.
    pub approximation: f64,
}

pub fn fork_probability(params: &CapacityParams) -> Result<ForkProbability, CapacityError> {
    params.validate()?;
    let x = params.tau_fork / params.tau;
    Ok(ForkProbability { exact: -(-x).exp_m1(), approximation: x })
}

pub fn unfork_probability(params: &CapacityParams) -> Result<f64, CapacityError> {
    params.validate()?;
    Ok((-params.tau_fork / params.tau).exp())
}

/// `G(tau)` in transactions per second.
pub fn capacity_tps(params: &CapacityParams) -> Result<f64, CapacityError> {
    params.validate()?;
    Ok(params.c_txs / params.tau * (-params.tau_fork / params.tau).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalInterval {
    /// Closed form: equals `tau_fork`.
    pub tau_opt: f64,
    /// Maximizer found by golden-section search.
    pub tau_numeric: f64,
    /// `G(tau_opt) = C / (e * tau_fork)`.
    pub max_capacity_tps: f64,
}

/// Relative tolerance between the numeric and closed-form optimum.
pub const OPTIMUM_AGREEMENT: f64 = 1e-6;

/// Interval maximizing `G`. The numeric search runs over `ln tau` in
/// `[tau_fork / 1e3, tau_fork * 1e3]` and must agree with the closed form.
pub fn optimal_tau(params: &CapacityParams) -> Result<OptimalInterval, CapacityError> {
    params.with_tau(1.0).validate()?;
    if params.tau_fork == 0.0 {
        return Err(CapacityError::NoInteriorOptimum);
    }
    let tau_fork = params.tau_fork;
    // ln G(e^x) up to the constant ln C.
    let objective = |x: f64| -x - tau_fork * (-x).exp();
    let (lo, hi) = ((tau_fork / 1e3).ln(), (tau_fork * 1e3).ln());
    let tau_numeric = golden_section_max(objective, lo, hi, 1e-12).exp();
    let tau_opt = tau_fork;
    if ((tau_numeric - tau_opt) / tau_opt).abs() > OPTIMUM_AGREEMENT {
        return Err(CapacityError::OptimumMismatch { numeric: tau_numeric, analytic: tau_opt });
    }
    let max_capacity_tps = capacity_tps(&params.with_tau(tau_opt))?;
    Ok(OptimalInterval { tau_opt, tau_numeric, max_capacity_tps })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Transactions per block implied by an observed throughput: `C = tps * tau * exp(tau_fork / tau)`.
pub fn infer_c_from_tps(tps: f64, tau: f64, tau_fork: f64) -> Result<f64, CapacityError> {
    for (name, value) in [("tps", tps), ("tau", tau), ("tau_fork", tau_fork)] {
        if !(value > 0.0) {
            return Err(CapacityError::NonPositive { name, value });
        }
    }
    Ok(tps * tau * (tau_fork / tau).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactors {
    pub base_tps: f64,
    pub block_size_ratio: f64,
    pub interval_ratio: f64,
    pub domain_count: u32,
}

impl ScalingFactors {
    pub fn validate(&self) -> Result<(), CapacityError> {
        for (name, value) in [
            ("base_tps", self.base_tps),
            ("block_size_ratio", self.block_size_ratio),
            ("interval_ratio", self.interval_ratio),
            ("domain_count", f64::from(self.domain_count)),
        ] {
            if !(value > 0.0) {
                return Err(CapacityError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Throughput scaled multiplicatively by block size, interval and domain count.
/// Fork losses are ignored; see [`fork_adjusted_capacity`].
pub fn scaled_capacity(factors: &ScalingFactors) -> f64 {
    factors.base_tps * factors.block_size_ratio * factors.interval_ratio * f64::from(factors.domain_count)
}

/// Extension: `m * G(tau)` with the propagation latency supplied as a
/// function of block size, so larger blocks can pay a larger fork penalty.
pub fn fork_adjusted_capacity(
    c_txs: f64,
    tau: f64,
    block_size_mb: f64,
    domain_count: u32,
    tau_fork_of_size: impl Fn(f64) -> f64,
) -> Result<f64, CapacityError> {
    let params = CapacityParams { tau, tau_fork: tau_fork_of_size(block_size_mb), c_txs, block_size_mb };
    Ok(f64::from(domain_count) * capacity_tps(&params)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub fork_probability: f64,
    pub fork_probability_approx: f64,
    pub capacity_tps: f64,
}

/// Evaluates the model at `lo, lo + step, ...` up to and including `hi`.
pub fn sweep(params: &CapacityParams, lo: f64, hi: f64, step: f64) -> Result<Vec<SweepRow>, CapacityError> {
    if !(step > 0.0) {
        return Err(CapacityError::NonPositive { name: "step", value: step });
    }
    let n = ((hi - lo) / step + 1e-9).floor();
    if !(n >= 0.0) {
        return Ok(Vec::new());
    }
    (0..=n as u64)
        .map(|i| {
            let p = params.with_tau(lo + i as f64 * step);
            let fp = fork_probability(&p)?;
            Ok(SweepRow {
                tau: p.tau,
                fork_probability: fp.exact,
                fork_probability_approx: fp.approximation,
                capacity_tps: capacity_tps(&p)?,
            })
        })
        .collect()
}
