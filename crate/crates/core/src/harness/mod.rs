//! Simulation driver, experiment drivers and file output.

pub mod bench;
pub mod cli;
pub mod config;
pub mod output;
pub mod scan;

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{ButcherTableau, StepRecord, Stepper, StepperState};
use crate::potential::Potential;
use crate::spectral::{Grid, WaveField};

pub use bench::{benchmark, BenchRow, BenchTable};
pub use config::{Equation, InitialCondition, SimulationConfig, TableauKind};
pub use scan::{scan_constant_c, ScanRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    BlowUp,
    StepUnderflow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Attempted steps, accepted plus rejected.
    pub n_loops: usize,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub rhs_evaluations: usize,
    pub wall_seconds: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub final_energy: f64,
    pub ledger_phase: f64,
    pub t_reached: f64,
    pub stop_reason: StopReason,
}

impl RunSummary {
    pub fn relative_mass_drift(&self) -> f64 {
        ((self.final_mass - self.initial_mass) / self.initial_mass).abs()
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<StepRecord>,
    pub initial: WaveField,
    /// Final state with the gauge rotation removed.
    pub final_psi: WaveField,
    pub grid: Grid,
}

impl RunOutput {
    /// Mean accepted step size.
    pub fn average_step(&self) -> f64 {
        let (sum, n) = self
            .records
            .iter()
            .filter(|r| r.accepted)
            .fold((0.0, 0usize), |(s, n), r| (s + r.h, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub fn build_grid(config: &SimulationConfig) -> Result<Grid> {
    Grid::new(config.dim, config.points_per_axis, config.box_length)
}

pub fn build_initial_condition(config: &SimulationConfig, grid: &Grid) -> Result<WaveField> {
    config.validate()?;
    let r2 = |x: &[f64]| x.iter().map(|xi| xi * xi).sum::<f64>();
    match config.initial_condition {
        InitialCondition::Soliton => {
            let s2 = 2f64.sqrt();
            Ok(grid.sample(|x| Complex64::new(s2 / (s2 * x[0]).cosh(), 0.0)))
        }
        InitialCondition::Gaussian { normalized } => {
            let shape = grid.sample(|x| Complex64::new((-0.5 * r2(x)).exp(), 0.0));
            let scale = if normalized {
                1.0 / grid.mass(&shape).sqrt()
            } else {
                std::f64::consts::PI.powf(-(config.dim as f64) / 4.0)
            };
            Ok(WaveField::new(
                shape.values().iter().map(|z| z * scale).collect(),
            ))
        }
    }
}

pub fn build_stepper(config: &SimulationConfig) -> Result<Stepper> {
    config.validate()?;
    let grid = build_grid(config)?;
    let potential = Potential::new(config.potential_kind(), &grid);
    let tableau = match config.tableau {
        TableauKind::Heun => ButcherTableau::heun(),
        TableauKind::Dp54 => ButcherTableau::dormand_prince54(),
    };
    let mut stepper = Stepper::new(grid, potential, tableau, config.gauge, config.tol, config.t_final)?;
    if let Some(a) = config.accept_threshold {
        stepper.params.accept_threshold = a;
    }
    stepper.blowup_threshold = config.blowup_threshold;
    Ok(stepper)
}

/// `h₀ = Tol^{1/p} · t_final / 1000` unless the config sets one.
pub fn initial_step(config: &SimulationConfig, order: u32) -> f64 {
    config
        .h0
        .unwrap_or_else(|| config.tol.powf(1.0 / order as f64) * config.t_final / 1000.0)
}

/// Integrate from `t = 0` to `t_final`. Step underflow and blow-up end the
/// run early and are reported through [`RunSummary::stop_reason`].
pub fn run(config: &SimulationConfig) -> Result<RunOutput> {
    let stepper = build_stepper(config)?;
    let initial = build_initial_condition(config, &stepper.grid)?;
    run_with(&stepper, config, initial)
}

/// [`run`] with a prebuilt stepper and initial state.
pub fn run_with(stepper: &Stepper, config: &SimulationConfig, initial: WaveField) -> Result<RunOutput> {
    let started = Instant::now();
    let grid = &stepper.grid;
    let initial_mass = grid.mass(&initial);
    let mut state = StepperState::new(initial.clone(), initial_step(config, stepper.tableau.order));
    let mut records = Vec::new();
    let mut stop_reason = StopReason::Completed;
    while state.t < stepper.t_final {
        match stepper.advance(&mut state) {
            Ok(rec) => {
                records.push(rec);
                if state.blown_up {
                    log::warn!("blow-up guard triggered at t = {}", state.t);
                    stop_reason = StopReason::BlowUp;
                    break;
                }
            }
            Err(Error::StepUnderflow { t, h }) => {
                log::warn!("step size underflow at t = {t} (h = {h})");
                stop_reason = StopReason::StepUnderflow;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let final_psi = state.ledger.unwind(&state.psi);
    let final_energy = stepper.potential.energy(grid, &final_psi)?;
    let summary = RunSummary {
        n_loops: state.attempted(),
        n_accepted: state.accepted,
        n_rejected: state.rejected,
        rhs_evaluations: state.rhs_evaluations,
        wall_seconds: started.elapsed().as_secs_f64(),
        initial_mass,
        final_mass: grid.mass(&final_psi),
        final_energy,
        ledger_phase: state.ledger.phase(),
        t_reached: state.t,
        stop_reason,
    };
    Ok(RunOutput {
        summary,
        records,
        initial,
        final_psi,
        grid: grid.clone(),
    })
}
