//! Constant-`C` scans of the average accepted step.

use rayon::prelude::*;

use super::{run, SimulationConfig, StopReason};
use crate::gauge::GaugeStrategy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub c: f64,
    pub h_av: f64,
    pub n_loops: usize,
}

/// One full run per value with `C_n` held fixed. Runs execute in parallel.
/// A run that fails or stops early leaves no row; row order follows
/// `c_values`.
pub fn scan_constant_c(config: &SimulationConfig, c_values: &[f64]) -> Vec<ScanRow> {
    c_values
        .par_iter()
        .map(|&c| {
            if !c.is_finite() {
                log::warn!("skipping non-finite scan value {c}");
                return None;
            }
            match run(&config.with_gauge(GaugeStrategy::Constant(c))) {
                Ok(out) if out.summary.stop_reason == StopReason::Completed => Some(ScanRow {
                    c,
                    h_av: out.average_step(),
                    n_loops: out.summary.n_loops,
                }),
                Ok(out) => {
                    log::warn!("scan C = {c}: stopped early ({:?})", out.summary.stop_reason);
                    None
                }
                Err(e) => {
                    log::warn!("scan C = {c}: {e}");
                    None
                }
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soliton() -> SimulationConfig {
        SimulationConfig::parse(
            "equation = nls\ng = -1\ndim = 1\npoints_per_axis = 128\nbox_length = 40\nt_final = 0.5\ntol = 1e-6\ninitial_condition = soliton\n",
        )
        .unwrap()
    }

    #[test]
    fn empty_scan() {
        assert!(scan_constant_c(&soliton(), &[]).is_empty());
    }

    #[test]
    fn rows_follow_input_order() {
        let rows = scan_constant_c(&soliton(), &[1.0, 0.0, 2.0]);
        let cs: Vec<f64> = rows.iter().map(|r| r.c).collect();
        assert_eq!(cs, [1.0, 0.0, 2.0]);
        assert!(rows.iter().all(|r| r.h_av > 0.0 && r.n_loops > 0));
    }

    #[test]
    fn failed_runs_are_missing_rows() {
        let mut cfg = soliton();
        cfg.accept_threshold = Some(1e-30);
        assert!(scan_constant_c(&cfg, &[0.0, 1.0]).is_empty());
        assert_eq!(scan_constant_c(&soliton(), &[f64::NAN, 0.0]).len(), 1);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-2.0, 4.0, 13);
        assert_eq!(v.len(), 13);
        assert_eq!(v[0], -2.0);
        assert_eq!(v[12], 4.0);
        assert!((v[7] - 1.5).abs() < 1e-15);
        assert!(linspace(0.0, 1.0, 0).is_empty());
        assert_eq!(linspace(3.0, 5.0, 1), [3.0]);
    }
}
