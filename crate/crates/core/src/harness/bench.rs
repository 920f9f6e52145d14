//! Side-by-side comparison of gauge strategies on one physical problem.

use super::{run, RunOutput, SimulationConfig, StopReason};
use crate::error::{Error, Result};
use crate::spectral::WaveField;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub gauge: String,
    pub n_loops: usize,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub wall_seconds: f64,
    /// Baseline loops divided by this row's loops.
    pub loop_ratio: f64,
    /// Baseline wall time divided by this row's wall time.
    pub time_ratio: f64,
    /// `max_x ||ψ| − |ψ_base||` at the final time.
    pub max_modulus_dev: f64,
    /// `max_x |ψ − ψ_base|` after unwinding the gauge phase.
    pub max_unwound_dev: f64,
    pub final_mass: f64,
    pub initial_mass: f64,
    pub stop_reason: StopReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub tol: f64,
    /// Allowed final-state deviation, `50 · Tol`.
    pub bound: f64,
    /// Every row completed and stayed within `bound` of the baseline.
    pub equivalent: bool,
}

impl BenchTable {
    pub fn max_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.max_modulus_dev.max(r.max_unwound_dev))
            .fold(0.0, f64::max)
    }
}

fn deviations(a: &WaveField, b: &WaveField) -> (f64, f64) {
    a.values()
        .iter()
        .zip(b.values())
        .fold((0.0, 0.0), |(m, u), (x, y)| {
            (f64::max(m, (x.norm() - y.norm()).abs()), f64::max(u, (x - y).norm()))
        })
}

/// Run every config (sequentially, so wall times are comparable) and compare
/// against the `Zero` row, or the first row if none uses `Zero`.
pub fn benchmark(configs: &[SimulationConfig]) -> Result<BenchTable> {
    let first = configs
        .first()
        .ok_or_else(|| Error::MismatchedBenchmark("no configurations given".into()))?;
    if configs.len() < 2 {
        return Err(Error::MismatchedBenchmark(
            "at least two configurations are needed".into(),
        ));
    }
    for c in configs {
        c.validate()?;
        if !first.same_problem(c) {
            return Err(Error::MismatchedBenchmark(format!(
                "`{}` and `{}` describe different problems",
                first.gauge.name(),
                c.gauge.name()
            )));
        }
    }
    let outputs: Vec<RunOutput> = configs.iter().map(run).collect::<Result<_>>()?;
    let base_idx = configs
        .iter()
        .position(|c| c.gauge == crate::gauge::GaugeStrategy::Zero)
        .unwrap_or(0);
    let base = &outputs[base_idx];
    let tol = first.tol;
    let bound = 50.0 * tol;
    let rows: Vec<BenchRow> = configs
        .iter()
        .zip(&outputs)
        .map(|(c, o)| {
            let (m, u) = deviations(&o.final_psi, &base.final_psi);
            BenchRow {
                gauge: c.gauge.name(),
                n_loops: o.summary.n_loops,
                n_accepted: o.summary.n_accepted,
                n_rejected: o.summary.n_rejected,
                wall_seconds: o.summary.wall_seconds,
                loop_ratio: base.summary.n_loops as f64 / o.summary.n_loops as f64,
                time_ratio: base.summary.wall_seconds / o.summary.wall_seconds,
                max_modulus_dev: m,
                max_unwound_dev: u,
                final_mass: o.summary.final_mass,
                initial_mass: o.summary.initial_mass,
                stop_reason: o.summary.stop_reason,
            }
        })
        .collect();
    let equivalent = rows.iter().all(|r| {
        r.stop_reason == StopReason::Completed && r.max_modulus_dev <= bound && r.max_unwound_dev <= bound
    });
    if !equivalent {
        log::warn!("gauge equivalence check failed (bound {bound:e})");
    }
    Ok(BenchTable {
        rows,
        tol,
        bound,
        equivalent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeStrategy;

    fn soliton() -> SimulationConfig {
        SimulationConfig::parse(
            "equation = nls\ng = -1\ndim = 1\npoints_per_axis = 256\nbox_length = 40\nt_final = 1\ntol = 1e-7\ninitial_condition = soliton\n",
        )
        .unwrap()
    }

    #[test]
    fn identical_strategies_give_unit_ratio() {
        let c = soliton().with_gauge(GaugeStrategy::NearOptimal);
        let t = benchmark(&[c.clone(), c]).unwrap();
        assert_eq!(t.rows[1].loop_ratio, 1.0);
        assert_eq!(t.rows[1].max_modulus_dev, 0.0);
        assert_eq!(t.rows[1].max_unwound_dev, 0.0);
        assert!(t.equivalent);
    }

    #[test]
    fn zero_row_is_baseline() {
        let c = soliton();
        let t = benchmark(&[
            c.with_gauge(GaugeStrategy::NearOptimal),
            c.with_gauge(GaugeStrategy::Zero),
        ])
        .unwrap();
        assert_eq!(t.rows[1].loop_ratio, 1.0);
        assert_eq!(t.bound, 50.0 * 1e-7);
        assert!(t.equivalent, "{t:?}");
    }

    #[test]
    fn refuses_mismatched_problems() {
        let a = soliton();
        let mut b = soliton();
        b.points_per_axis = 512;
        assert!(benchmark(&[a.clone(), b]).unwrap_err().is_config());
        assert!(benchmark(&[a]).unwrap_err().is_config());
        assert!(benchmark(&[]).unwrap_err().is_config());
    }
}
