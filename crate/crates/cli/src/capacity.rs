//! `capacity`: throughput over a block-interval sweep.

use anyhow::{anyhow, bail};
use serde::Serialize;
use xref_core::capacity::{self, CapacityParams, OptimalInterval, ScalingFactors, SweepRow};

use crate::config::{self, CapacitySection};
use crate::output::to_json_pretty;
use crate::{CapacityArgs, CliResult, Format};

/// Sweeps longer than this are almost certainly a typo.
const MAX_ROWS: f64 = 1e6;

pub fn parse_sweep(spec: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("malformed sweep {spec:?}: expected lo:hi:step");
    };
    let parse =
        |s: &str| s.trim().parse::<f64>().map_err(|_| anyhow!("malformed sweep {spec:?}: {s:?} is not a number"));
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    if !(lo > 0.0 && hi >= lo && step > 0.0 && hi.is_finite()) {
        bail!("malformed sweep {spec:?}: need 0 < lo <= hi and step > 0");
    }
    if (hi - lo) / step > MAX_ROWS {
        bail!("malformed sweep {spec:?}: more than {MAX_ROWS} rows");
    }
    Ok((lo, hi, step))
}

#[derive(Debug, Serialize)]
struct Report {
    schema_version: u32,
    c_txs: f64,
    tau_fork: f64,
    rows: Vec<SweepRow>,
    optimum: OptimalInterval,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaled_capacity: Option<f64>,
}

fn scaling(values: &[f64]) -> anyhow::Result<ScalingFactors> {
    let [base_tps, block_size_ratio, interval_ratio, m] = values else {
        bail!("--scale takes four values");
    };
    if !(m.fract() == 0.0 && *m >= 1.0 && *m <= f64::from(u32::MAX)) {
        bail!("--scale domain count must be a positive integer, got {m}");
    }
    let f = ScalingFactors {
        base_tps: *base_tps,
        block_size_ratio: *block_size_ratio,
        interval_ratio: *interval_ratio,
        domain_count: *m as u32,
    };
    f.validate()?;
    Ok(f)
}

pub fn capacity(args: &CapacityArgs) -> CliResult {
    let section = config::load_optional(args.config.as_deref())?.and_then(|c| c.capacity).unwrap_or_default();
    let CapacitySection { c_txs, tau_fork, tau_sweep } = section;
    let c_txs = args.c.unwrap_or(c_txs);
    let tau_fork = args.tau_fork.unwrap_or(tau_fork);
    let (lo, hi, step) = parse_sweep(args.tau_sweep.as_deref().unwrap_or(&tau_sweep))?;

    let params = CapacityParams::new(lo, tau_fork, c_txs);
    let rows = capacity::sweep(&params, lo, hi, step)?;
    let optimum = capacity::optimal_tau(&params)?;
    let scaled = args.scale.as_deref().map(scaling).transpose()?.map(|f| capacity::scaled_capacity(&f));

    let text = match args.format {
        Format::Json => to_json_pretty(&Report {
            schema_version: config::SCHEMA_VERSION,
            c_txs,
            tau_fork,
            rows,
            optimum,
            scaled_capacity: scaled,
        })?,
        Format::Csv => {
            let mut s = String::from("tau,fork_probability,fork_probability_approx,capacity_tps\n");
            for r in &rows {
                s.push_str(&format!(
                    "{:.6},{:.9},{:.9},{:.6}\n",
                    r.tau, r.fork_probability, r.fork_probability_approx, r.capacity_tps
                ));
            }
            s.push_str("\ntau_opt,max_capacity_tps\n");
            s.push_str(&format!("{:.6},{:.6}\n", optimum.tau_opt, optimum.max_capacity_tps));
            if let Some(v) = scaled {
                s.push_str(&format!("\nscaled_capacity\n{v}\n"));
            }
            s
        }
    };
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_specs() {
        assert_eq!(parse_sweep("12:1200:12").unwrap(), (12.0, 1200.0, 12.0));
        for bad in ["", "1:2", "a:2:1", "5:1:1", "1:2:0", "0:2:1", "1:2:3:4", "1:1e12:1e-3"] {
            assert!(parse_sweep(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scaling_needs_integer_domain_count() {
        assert_eq!(capacity::scaled_capacity(&scaling(&[5.0, 10.0, 5.0, 200.0]).unwrap()), 50_000.0);
        assert!(scaling(&[5.0, 10.0, 5.0, 2.5]).is_err());
        assert!(scaling(&[0.0, 10.0, 5.0, 2.0]).is_err());
    }
}
