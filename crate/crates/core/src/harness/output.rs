//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::bench::BenchTable;
use super::scan::ScanRow;
use super::{RunOutput, RunSummary, StopReason};
use crate::error::Result;
use crate::integrator::StepRecord;

pub const STEPS_FILE: &str = "steps.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCAN_FILE: &str = "scan.csv";
pub const BENCH_FILE: &str = "bench.csv";

/// 17 significant digits.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per attempted step, thinned to every `record_every`-th row.
pub fn write_steps_csv<W: Write>(mut w: W, records: &[StepRecord], record_every: usize) -> Result<()> {
    writeln!(w, "t,h,C,delta,accepted")?;
    for r in records.iter().step_by(record_every.max(1)) {
        writeln!(
            w,
            "{},{},{},{},{}",
            float(r.t),
            float(r.h),
            float(r.c),
            float(r.delta),
            u8::from(r.accepted)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryJson {
    n_loops: usize,
    n_accepted: usize,
    n_rejected: usize,
    wall_seconds: f64,
    final_mass: f64,
    final_energy: f64,
    ledger_phase: f64,
    stop_reason: StopReason,
}

pub fn write_summary_json<W: Write>(mut w: W, s: &RunSummary) -> Result<()> {
    let json = SummaryJson {
        n_loops: s.n_loops,
        n_accepted: s.n_accepted,
        n_rejected: s.n_rejected,
        wall_seconds: s.wall_seconds,
        final_mass: s.final_mass,
        final_energy: s.final_energy,
        ledger_phase: s.ledger_phase,
        stop_reason: s.stop_reason,
    };
    serde_json::to_writer_pretty(&mut w, &json)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(mut w: W, rows: &[ScanRow]) -> Result<()> {
    writeln!(w, "C,h_av,n_loops")?;
    for r in rows {
        writeln!(w, "{},{},{}", float(r.c), float(r.h_av), r.n_loops)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv<W: Write>(mut w: W, table: &BenchTable) -> Result<()> {
    writeln!(
        w,
        "gauge,n_loops,n_accepted,n_rejected,wall_seconds,loop_ratio,time_ratio,max_modulus_dev,max_unwound_dev,stop_reason"
    )?;
    for r in &table.rows {
        let stop = serde_json::to_value(r.stop_reason)?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.gauge,
            r.n_loops,
            r.n_accepted,
            r.n_rejected,
            float(r.wall_seconds),
            float(r.loop_ratio),
            float(r.time_ratio),
            float(r.max_modulus_dev),
            float(r.max_unwound_dev),
            stop.as_str().unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Write `steps.csv` and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput, record_every: usize) -> Result<Vec<PathBuf>> {
    write_steps_csv(create(dir, STEPS_FILE)?, &out.records, record_every)?;
    write_summary_json(create(dir, SUMMARY_FILE)?, &out.summary)?;
    Ok(vec![dir.join(STEPS_FILE), dir.join(SUMMARY_FILE)])
}

pub fn write_scan(dir: &Path, rows: &[ScanRow]) -> Result<PathBuf> {
    write_scan_csv(create(dir, SCAN_FILE)?, rows)?;
    Ok(dir.join(SCAN_FILE))
}

pub fn write_bench(dir: &Path, table: &BenchTable) -> Result<PathBuf> {
    write_bench_csv(create(dir, BENCH_FILE)?, table)?;
    Ok(dir.join(BENCH_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, accepted: bool) -> StepRecord {
        StepRecord {
            t,
            h: 0.1,
            c: 4.0 / 3.0,
            delta: 0.5,
            accepted,
            wall_time: None,
        }
    }

    #[test]
    fn steps_csv_schema() {
        let mut buf = Vec::new();
        write_steps_csv(&mut buf, &[rec(0.0, true), rec(0.1, false)], 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,h,C,delta,accepted");
        assert_eq!(lines.len(), 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 4.0 / 3.0);
        assert_eq!(fields[4], "1");
        assert!(lines[2].ends_with(",0"));
    }

    #[test]
    fn record_every_thins_rows() {
        let recs: Vec<_> = (0..10).map(|i| rec(i as f64, true)).collect();
        let mut buf = Vec::new();
        write_steps_csv(&mut buf, &recs, 3).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn summary_json_keys() {
        let s = RunSummary {
            n_loops: 3,
            n_accepted: 2,
            n_rejected: 1,
            rhs_evaluations: 21,
            wall_seconds: 0.5,
            initial_mass: 1.0,
            final_mass: 1.0,
            final_energy: -0.1,
            ledger_phase: 0.2,
            t_reached: 1.0,
            stop_reason: StopReason::BlowUp,
        };
        let mut buf = Vec::new();
        write_summary_json(&mut buf, &s).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "final_energy",
                "final_mass",
                "ledger_phase",
                "n_accepted",
                "n_loops",
                "n_rejected",
                "stop_reason",
                "wall_seconds"
            ]
        );
        assert_eq!(v["stop_reason"], "blow_up");
    }

    #[test]
    fn scan_csv_schema() {
        let mut buf = Vec::new();
        write_scan_csv(
            &mut buf,
            &[ScanRow {
                c: 1.5,
                h_av: 0.01,
                n_loops: 100,
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("C,h_av,n_loops"));
        assert!(text.lines().nth(1).unwrap().ends_with(",100"));
    }
}
