//! Integrating-factor time stepping with embedded Runge–Kutta pairs.
//!
//! Within step `n` the solver advances
//!
//! ```text
//! φ(k, t) = e^{(i/2)k²(t − t_n)} ψ̂(k, t),
//! ∂_t φ = f(t, φ) = −i e^{(i/2)k²(t − t_n)} F{(V + C_n) ψ},
//! ψ = F⁻¹{e^{−(i/2)k²(t − t_n)} φ},
//! ```
//!
//! re-anchoring at `t_n` every step so the exponential arguments stay
//! `O(k² h)`. The kinetic term is integrated exactly; only the potential
//! term is seen by the Runge–Kutta pair.

use std::time::Instant;

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::{self, GaugeLedger, GaugeStrategy};
use crate::potential::{blowup_guard, Potential, PotentialField};
use crate::spectral::{Grid, SpectralField, WaveField};

/// Explicit embedded Runge–Kutta pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    /// Strictly lower-triangular stage matrix, row `ℓ` has `ℓ` entries.
    pub a: Vec<Vec<f64>>,
    /// Weights of the order-`p` solution.
    pub b: Vec<f64>,
    /// Weights of the embedded order-`p − 1` solution.
    pub b_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub order: u32,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Heun 2(1): explicit trapezoid with an embedded Euler step.
    pub fn heun() -> Self {
        Self {
            name: "heun",
            a: vec![vec![], vec![1.0]],
            b: vec![0.5, 0.5],
            b_tilde: vec![1.0, 0.0],
            c: vec![0.0, 1.0],
            order: 2,
        }
    }

    /// Dormand–Prince 5(4).
    pub fn dormand_prince54() -> Self {
        Self {
            name: "dp54",
            a: vec![
                vec![],
                vec![1.0 / 5.0],
                vec![3.0 / 40.0, 9.0 / 40.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
                vec![
                    19372.0 / 6561.0,
                    -25360.0 / 2187.0,
                    64448.0 / 6561.0,
                    -212.0 / 729.0,
                ],
                vec![
                    9017.0 / 3168.0,
                    -355.0 / 33.0,
                    46732.0 / 5247.0,
                    49.0 / 176.0,
                    -5103.0 / 18656.0,
                ],
                vec![
                    35.0 / 384.0,
                    0.0,
                    500.0 / 1113.0,
                    125.0 / 192.0,
                    -2187.0 / 6784.0,
                    11.0 / 84.0,
                ],
            ],
            b: vec![
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
                0.0,
            ],
            b_tilde: vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ],
            c: vec![0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
            order: 5,
        }
    }

    pub fn is_heun(&self) -> bool {
        self.name == "heun"
    }
}

pub fn heun_tableau() -> ButcherTableau {
    ButcherTableau::heun()
}

pub fn dp54_tableau() -> ButcherTableau {
    ButcherTableau::dormand_prince54()
}

fn axpy(acc: &mut [Complex64], a: f64, x: &[Complex64]) {
    if a == 0.0 {
        return;
    }
    for (y, xi) in acc.iter_mut().zip(x) {
        *y += a * xi;
    }
}

/// One explicit embedded step. `rhs(τ, φ)` receives the offset `τ = c_ℓ h`
/// from the anchor time. Returns `(high, low)`.
pub fn embedded_step<F>(
    phi_n: &SpectralField,
    h: f64,
    tableau: &ButcherTableau,
    rhs: F,
) -> Result<(SpectralField, SpectralField)>
where
    F: FnMut(f64, &SpectralField) -> Result<SpectralField>,
{
    embedded_step_seeded(phi_n, h, tableau, None, rhs)
}

/// [`embedded_step`] where the first-stage slope `f(0, φ_n)` may already be
/// known.
fn embedded_step_seeded<F>(
    phi_n: &SpectralField,
    h: f64,
    tableau: &ButcherTableau,
    first_slope: Option<SpectralField>,
    mut rhs: F,
) -> Result<(SpectralField, SpectralField)>
where
    F: FnMut(f64, &SpectralField) -> Result<SpectralField>,
{
    let s = tableau.stages();
    let mut stages: Vec<Vec<Complex64>> = Vec::with_capacity(s);
    let mut first_slope = first_slope;
    for l in 0..s {
        let slope = match (l, first_slope.take()) {
            (0, Some(k)) => k,
            _ => {
                let mut arg = phi_n.values().to_vec();
                for (r, w) in stages.iter().enumerate() {
                    axpy(&mut arg, tableau.a[l][r], w);
                }
                rhs(tableau.c[l] * h, &SpectralField::new(arg))?
            }
        };
        let w: Vec<Complex64> = slope.values().iter().map(|z| z * h).collect();
        if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("Runge–Kutta stage"));
        }
        stages.push(w);
    }
    let mut high = phi_n.values().to_vec();
    let mut low = phi_n.values().to_vec();
    for (l, w) in stages.iter().enumerate() {
        axpy(&mut high, tableau.b[l], w);
        axpy(&mut low, tableau.b_tilde[l], w);
    }
    Ok((SpectralField::new(high), SpectralField::new(low)))
}

/// Scaled error norm between the two embedded solutions:
/// `sqrt((1/M) Σ_m (|φ_m − φ̃_m| / (Tol + max(|φ_m|, |φ̃_m|) Tol))²)`.
pub fn error_norm(high: &SpectralField, low: &SpectralField, tol: f64) -> f64 {
    let m = high.len().max(1) as f64;
    let sum: f64 = high
        .values()
        .iter()
        .zip(low.values())
        .map(|(a, b)| {
            let scale = tol + a.norm().max(b.norm()) * tol;
            ((a - b).norm() / scale).powi(2)
        })
        .sum();
    (sum / m).sqrt()
}

/// Step-size control parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerParams {
    pub safety: f64,
    pub max_growth: f64,
    pub max_shrink: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// A step is accepted when `Δ_n ≤ accept_threshold`.
    pub accept_threshold: f64,
    /// Lower bound applied to `Δ_n` and `Δ_{n−1}` before exponentiation.
    pub delta_floor: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            safety: 0.9,
            max_growth: 5.0,
            max_shrink: 0.1,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            accept_threshold: 1.0,
            delta_floor: 1e-10,
        }
    }
}

/// PI update `h_{n+1} = safety · h_n · Δ_n^{−0.7/p} · Δ_{n−1}^{0.4/p}`, with the
/// change factor clamped to `[max_shrink, max_growth]` and the result to
/// `[h_min, h_max]`.
pub fn pi_controller(h: f64, delta: f64, delta_prev: f64, order: u32, params: &ControllerParams) -> f64 {
    let p = order as f64;
    let d = delta.max(params.delta_floor);
    let dp = delta_prev.max(params.delta_floor);
    let factor = (params.safety * d.powf(-0.7 / p) * dp.powf(0.4 / p))
        .clamp(params.max_shrink, params.max_growth);
    (h * factor).clamp(params.h_min, params.h_max)
}

/// Integrating-factor right-hand side for one anchored step.
pub struct IfRhs<'a> {
    pub grid: &'a Grid,
    pub potential: &'a Potential,
    pub gauge_c: f64,
}

impl IfRhs<'_> {
    /// `f(t_n + τ, φ)`.
    pub fn eval(&self, tau: f64, phi: &SpectralField) -> Result<SpectralField> {
        self.grid.check_len(phi.len())?;
        let k2 = self.grid.k_squared();
        let mut buf = phi.values().to_vec();
        if tau != 0.0 {
            for (z, k) in buf.iter_mut().zip(k2) {
                *z *= Complex64::from_polar(1.0, -0.5 * k * tau);
            }
        }
        self.grid.inverse_in_place(&mut buf);
        let psi = WaveField::new(buf);
        let v = self.potential.eval(self.grid, &psi)?;
        let mut buf = psi.into_values();
        for (z, vv) in buf.iter_mut().zip(v.values()) {
            *z *= vv + self.gauge_c;
        }
        self.grid.forward_in_place(&mut buf);
        for (z, k) in buf.iter_mut().zip(k2) {
            *z *= Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, 0.5 * k * tau);
        }
        Ok(SpectralField::new(buf))
    }

    /// `f(t_n, φ_n)` from the position-space state and its potential.
    pub fn first_slope(&self, psi: &WaveField, v: &PotentialField) -> SpectralField {
        let mut buf: Vec<Complex64> = psi
            .values()
            .iter()
            .zip(v.values())
            .map(|(p, vv)| p * (vv + self.gauge_c))
            .collect();
        self.grid.forward_in_place(&mut buf);
        for z in buf.iter_mut() {
            *z *= Complex64::new(0.0, -1.0);
        }
        SpectralField::new(buf)
    }
}

/// Free-function form of [`IfRhs::eval`] at absolute time `t` with anchor
/// `t_anchor`.
pub fn if_rhs(
    grid: &Grid,
    potential: &Potential,
    phi: &SpectralField,
    t: f64,
    t_anchor: f64,
    gauge_c: f64,
) -> Result<SpectralField> {
    IfRhs {
        grid,
        potential,
        gauge_c,
    }
    .eval(t - t_anchor, phi)
}

/// Apply the kinetic propagator `e^{−(i/2)k² τ}` in mode space.
fn propagate(grid: &Grid, phi: &mut [Complex64], tau: f64) {
    for (z, k) in phi.iter_mut().zip(grid.k_squared()) {
        *z *= Complex64::from_polar(1.0, -0.5 * k * tau);
    }
}

#[derive(Clone, Debug)]
pub struct StepperState {
    pub t: f64,
    /// Step size to attempt next.
    pub h: f64,
    /// Position-space solution at `t`, in the rotated gauge.
    pub psi: WaveField,
    pub delta_prev: f64,
    pub ledger: GaugeLedger,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Set when an accepted step trips the blow-up guard; the run must stop.
    pub blown_up: bool,
}

impl StepperState {
    pub fn new(psi: WaveField, h0: f64) -> Self {
        Self {
            t: 0.0,
            h: h0,
            psi,
            delta_prev: 1.0,
            ledger: GaugeLedger::new(),
            accepted: 0,
            rejected: 0,
            rhs_evaluations: 0,
            blown_up: false,
        }
    }

    pub fn attempted(&self) -> usize {
        self.accepted + self.rejected
    }
}

/// Diagnostics of one attempted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub c: f64,
    pub delta: f64,
    pub accepted: bool,
    pub wall_time: Option<f64>,
}

/// Outcome of a trial step that is not yet committed.
#[derive(Clone, Debug)]
pub struct TrialStep {
    pub high: SpectralField,
    pub low: SpectralField,
    pub delta: f64,
}

/// Owns everything needed to advance one simulation.
#[derive(Clone)]
pub struct Stepper {
    pub grid: Grid,
    pub potential: Potential,
    pub tableau: ButcherTableau,
    pub strategy: GaugeStrategy,
    pub tol: f64,
    pub params: ControllerParams,
    pub t_final: f64,
    pub blowup_threshold: f64,
}

impl Stepper {
    pub fn new(
        grid: Grid,
        potential: Potential,
        tableau: ButcherTableau,
        strategy: GaugeStrategy,
        tol: f64,
        t_final: f64,
    ) -> Result<Self> {
        if strategy == GaugeStrategy::HeunOptimal && !tableau.is_heun() {
            return Err(Error::Config(
                "heun_optimal gauge requires the heun tableau".into(),
            ));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {tol}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {t_final}")));
        }
        Ok(Self {
            grid,
            potential,
            tableau,
            strategy,
            tol,
            params: ControllerParams {
                h_max: t_final,
                ..ControllerParams::default()
            },
            t_final,
            blowup_threshold: crate::potential::DEFAULT_BLOWUP_THRESHOLD,
        })
    }

    /// Number of right-hand-side evaluations in one embedded step.
    fn evals_per_step(&self) -> usize {
        self.tableau.stages()
    }

    /// Run one embedded step from `ψ_n` (with potential `V_n`) using gauge
    /// `c` without committing it.
    pub fn trial(&self, psi: &WaveField, v: &PotentialField, c: f64, h: f64) -> Result<TrialStep> {
        let rhs = IfRhs {
            grid: &self.grid,
            potential: &self.potential,
            gauge_c: c,
        };
        let phi_n = self.grid.forward(psi)?;
        let first = rhs.first_slope(psi, v);
        let (high, low) =
            embedded_step_seeded(&phi_n, h, &self.tableau, Some(first), |tau, phi| rhs.eval(tau, phi))?;
        let delta = error_norm(&high, &low, self.tol);
        Ok(TrialStep { high, low, delta })
    }

    /// Pick `C_n`; returns the constant and the number of extra RHS
    /// evaluations spent choosing it.
    pub fn select_gauge(&self, psi: &WaveField, v: &PotentialField, h: f64) -> (f64, usize) {
        let near = || match gauge::near_optimal_c(psi, v) {
            Ok(c) => c,
            Err(e) => {
                warn!("near-optimal gauge unavailable ({e}); using C = 0");
                0.0
            }
        };
        match self.strategy {
            GaugeStrategy::Zero => (0.0, 0),
            GaugeStrategy::Constant(c) => (c, 0),
            GaugeStrategy::NearOptimal => (near(), 0),
            GaugeStrategy::HeunOptimal => match self.heun_optimal(psi, v) {
                Ok(c) => (c, 0),
                Err(e) => {
                    warn!("heun-optimal gauge failed ({e}); using C = 0");
                    (0.0, 0)
                }
            },
            GaugeStrategy::NumericOptimal(search) => {
                let bracket = match gauge::numeric_bracket(psi, v) {
                    Ok(b) => b,
                    Err(_) => return (near(), 0),
                };
                let mut evals = 0;
                let res = gauge::numeric_optimal_c(
                    |c| {
                        evals += self.evals_per_step();
                        self.trial(psi, v, c, h).map(|t| t.delta).unwrap_or(f64::NAN)
                    },
                    bracket,
                    search,
                );
                match res {
                    Ok(c) => (c, evals),
                    Err(e) => {
                        warn!("numeric gauge search failed ({e}); falling back to near-optimal");
                        (near(), evals)
                    }
                }
            }
        }
    }

    /// `Ĉ` for the Heun pair at the current state.
    pub fn heun_optimal(&self, psi: &WaveField, v: &PotentialField) -> Result<f64> {
        let beta = self.heun_beta(psi, v)?;
        gauge::heun_optimal_c(psi, v, &beta)
    }

    /// `β` with the potential's own derivative routes.
    pub fn heun_beta(&self, psi: &WaveField, v: &PotentialField) -> Result<WaveField> {
        let grid = &self.grid;
        let dt_v = self.potential.time_derivative(grid, psi, v)?;
        let grad_v = self.potential.gradient(grid, psi, v)?;
        let lap_v = self.potential.laplacian(grid, psi, v)?;
        let grad_psi = (0..grid.dim())
            .map(|axis| grid.gradient(psi, axis))
            .collect::<Result<Vec<_>>>()?;
        Ok(gauge::heun_beta_from_parts(psi, &grad_psi, &grad_v, &lap_v, &dt_v))
    }

    /// Attempt one adaptive step. The attempted size is `state.h` clipped to
    /// land on `t_final`. On acceptance the state moves forward; either way
    /// `state.h` becomes the controller's next proposal.
    pub fn advance(&self, state: &mut StepperState) -> Result<StepRecord> {
        let started = Instant::now();
        let t_n = state.t;
        let remaining = self.t_final - t_n;
        let clipped = state.h >= remaining;
        let h = if clipped { remaining } else { state.h };

        let v = self.potential.eval(&self.grid, &state.psi)?;
        let (c, gauge_evals) = self.select_gauge(&state.psi, &v, h);
        state.rhs_evaluations += gauge_evals + self.evals_per_step();

        let trial = match self.trial(&state.psi, &v, c, h) {
            Ok(t) if t.delta.is_finite() => Some(t),
            Ok(_) | Err(Error::NonFinite(_)) => None,
            Err(e) => return Err(e),
        };

        let mut record = StepRecord {
            t: t_n,
            h,
            c,
            delta: f64::INFINITY,
            accepted: false,
            wall_time: None,
        };

        match trial {
            Some(trial) if trial.delta <= self.params.accept_threshold => {
                let mut phi = trial.high.into_values();
                propagate(&self.grid, &mut phi, h);
                self.grid.inverse_in_place(&mut phi);
                state.psi = WaveField::new(phi);
                state.t = if clipped { self.t_final } else { t_n + h };
                state.ledger.accumulate(c, h);
                state.accepted += 1;
                state.h = pi_controller(h, trial.delta, state.delta_prev, self.tableau.order, &self.params);
                state.delta_prev = trial.delta.max(self.params.delta_floor);
                record.delta = trial.delta;
                record.accepted = true;
                state.blown_up = blowup_guard(&state.psi, self.blowup_threshold);
            }
            other => {
                state.rejected += 1;
                if h <= self.params.h_min {
                    return Err(Error::StepUnderflow { t: t_n, h });
                }
                state.h = match other {
                    Some(trial) => {
                        record.delta = trial.delta;
                        pi_controller(h, trial.delta, state.delta_prev, self.tableau.order, &self.params)
                            .min(self.params.safety * h)
                    }
                    None => (0.5 * h).max(self.params.h_min),
                };
            }
        }
        record.wall_time = Some(started.elapsed().as_secs_f64());
        Ok(record)
    }

    /// Take one step of exactly `h` and accept it regardless of `Δ_n`
    /// (fixed-step mode, used for convergence studies).
    pub fn step_fixed(&self, state: &mut StepperState, h: f64) -> Result<StepRecord> {
        let v = self.potential.eval(&self.grid, &state.psi)?;
        let (c, gauge_evals) = self.select_gauge(&state.psi, &v, h);
        state.rhs_evaluations += gauge_evals + self.evals_per_step();
        let trial = self.trial(&state.psi, &v, c, h)?;
        let mut phi = trial.high.into_values();
        propagate(&self.grid, &mut phi, h);
        self.grid.inverse_in_place(&mut phi);
        let record = StepRecord {
            t: state.t,
            h,
            c,
            delta: trial.delta,
            accepted: true,
            wall_time: None,
        };
        state.psi = WaveField::new(phi);
        state.t += h;
        state.ledger.accumulate(c, h);
        state.accepted += 1;
        Ok(record)
    }
}
