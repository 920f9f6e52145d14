//! Gauge-constant selection and the phase ledger.
//!
//! Adding a real constant `C_n` to the potential during step `n` multiplies
//! the solution by `e^{-i C_n h_n}` and leaves `|ψ|` untouched. The
//! strategies here choose `C_n` to make the integrated right-hand side (and
//! hence the embedded error estimate) small:
//!
//! - [`near_optimal_c`]: minimizer of `Σ (V_ℓ + C)² |ψ_ℓ|²`, i.e. the
//!   density-weighted mean of `−V`. Scheme independent and cheap.
//! - [`heun_optimal_c`]: minimizer of the leading-order Heun error
//!   `Σ |(V_ℓ + C)² ψ_ℓ + β_ℓ|²`, a quartic in `C`.
//! - [`numeric_optimal_c`]: golden-section search on the actual scaled
//!   error of one trial step, for tableaus without a closed form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::PotentialField;
use crate::spectral::{Grid, WaveField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericSearch {
    /// Absolute tolerance on the returned constant.
    pub tol: f64,
    /// Maximum number of trial-step evaluations.
    pub max_evals: usize,
}

impl Default for NumericSearch {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_evals: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GaugeStrategy {
    Zero,
    NearOptimal,
    /// Only meaningful with the Heun 2(1) pair.
    HeunOptimal,
    NumericOptimal(NumericSearch),
    /// Fixed for the whole run.
    Constant(f64),
}

impl GaugeStrategy {
    /// Short machine-readable name, also the config-file spelling.
    pub fn name(&self) -> String {
        match self {
            GaugeStrategy::Zero => "zero".into(),
            GaugeStrategy::NearOptimal => "near_optimal".into(),
            GaugeStrategy::HeunOptimal => "heun_optimal".into(),
            GaugeStrategy::NumericOptimal(_) => "numeric_optimal".into(),
            GaugeStrategy::Constant(c) => format!("constant:{c}"),
        }
    }
}

/// Accumulated gauge phase `φ = Σ C_j h_j` over accepted steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaugeLedger {
    phase: f64,
    history: Option<Vec<(f64, f64)>>,
}

impl GaugeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ledger that also keeps every `(C_j, h_j)` pair.
    pub fn with_history() -> Self {
        Self {
            phase: 0.0,
            history: Some(Vec::new()),
        }
    }

    /// Record an accepted step.
    pub fn accumulate(&mut self, c: f64, h: f64) {
        self.phase += c * h;
        if let Some(hist) = &mut self.history {
            hist.push((c, h));
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn history(&self) -> Option<&[(f64, f64)]> {
        self.history.as_deref()
    }

    /// Phase recomputed from scratch out of the history, if kept.
    pub fn recomputed_phase(&self) -> Option<f64> {
        self.history
            .as_ref()
            .map(|h| h.iter().fold(0.0, |acc, (c, dt)| acc + c * dt))
    }

    /// Remove the accumulated rotation: returns `ψ e^{+iφ}`.
    pub fn unwind(&self, psi: &WaveField) -> WaveField {
        let rot = Complex64::from_polar(1.0, self.phase);
        WaveField::new(psi.values().iter().map(|z| z * rot).collect())
    }
}

fn check_len(psi: &WaveField, v: &PotentialField) -> Result<()> {
    if psi.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: psi.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Density-weighted mean and standard deviation of `V`.
pub fn weighted_moments(psi: &WaveField, v: &PotentialField) -> Result<(f64, f64)> {
    check_len(psi, v)?;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for (p, vv) in psi.values().iter().zip(v.values()) {
        let rho = p.norm_sqr();
        s0 += rho;
        s1 += rho * vv;
    }
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::ZeroMass);
    }
    let mean = s1 / s0;
    let var = psi
        .values()
        .iter()
        .zip(v.values())
        .map(|(p, vv)| p.norm_sqr() * (vv - mean).powi(2))
        .sum::<f64>()
        / s0;
    Ok((mean, var.sqrt()))
}

/// `C̃ = −Σ V_ℓ|ψ_ℓ|² / Σ |ψ_ℓ|²`.
pub fn near_optimal_c(psi: &WaveField, v: &PotentialField) -> Result<f64> {
    let (mean, _) = weighted_moments(psi, v)?;
    if !mean.is_finite() {
        return Err(Error::NonFinite("weighted mean of V"));
    }
    Ok(-mean)
}

/// `β = i ∂_tV ψ + ∇V·∇ψ + ½ (∇²V) ψ` from precomputed derivative fields.
pub fn heun_beta_from_parts(
    psi: &WaveField,
    grad_psi: &[WaveField],
    grad_v: &[PotentialField],
    lap_v: &PotentialField,
    dt_v: &PotentialField,
) -> WaveField {
    let i = Complex64::new(0.0, 1.0);
    let beta = (0..psi.len())
        .map(|l| {
            let p = psi.values()[l];
            let mut b = i * dt_v.values()[l] * p + 0.5 * lap_v.values()[l] * p;
            for (gp, gv) in grad_psi.iter().zip(grad_v) {
                b += gv.values()[l] * gp.values()[l];
            }
            b
        })
        .collect();
    WaveField::new(beta)
}

/// [`heun_beta_from_parts`] with every spatial derivative taken spectrally.
pub fn heun_beta(
    grid: &Grid,
    psi: &WaveField,
    v: &PotentialField,
    dt_v: &PotentialField,
) -> Result<WaveField> {
    let grad_psi = (0..grid.dim())
        .map(|axis| grid.gradient(psi, axis))
        .collect::<Result<Vec<_>>>()?;
    let grad_v = (0..grid.dim())
        .map(|axis| grid.gradient_real(v.values(), axis).map(PotentialField::new))
        .collect::<Result<Vec<_>>>()?;
    let lap_v = PotentialField::new(grid.laplacian_real(v.values())?);
    Ok(heun_beta_from_parts(psi, &grad_psi, &grad_v, &lap_v, dt_v))
}

/// `E(C) = Σ |(V_ℓ + C)² ψ_ℓ + β_ℓ|²`, the leading-order Heun error without
/// the `h⁴/4` prefactor.
pub fn heun_error_polynomial(psi: &WaveField, v: &PotentialField, beta: &WaveField, c: f64) -> f64 {
    psi.values()
        .iter()
        .zip(v.values())
        .zip(beta.values())
        .map(|((p, vv), b)| {
            let u = vv + c;
            (u * u * p + b).norm_sqr()
        })
        .sum()
}

/// Real roots of `y³ + p y + q = 0`.
pub fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut roots = if p == 0.0 {
        vec![(-q).cbrt()]
    } else {
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if disc > 0.0 {
            // One real root; pick the Cardano branch without cancellation.
            let s = disc.sqrt();
            let u = (-q / 2.0 - q.signum() * s).cbrt();
            let y = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
            vec![y]
        } else {
            let r = 2.0 * (-p / 3.0).sqrt();
            let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| r * (theta - 2.0 * PI * k as f64 / 3.0).cos())
                .collect()
        }
    };
    for y in roots.iter_mut() {
        for _ in 0..3 {
            let f = *y * *y * *y + p * *y + q;
            let df = 3.0 * *y * *y + p;
            if df == 0.0 {
                break;
            }
            let next = *y - f / df;
            let fn_ = next * next * next + p * next + q;
            if fn_.abs() < f.abs() {
                *y = next;
            } else {
                break;
            }
        }
    }
    roots
}

/// Global minimizer `Ĉ` of [`heun_error_polynomial`].
///
/// Shifting `C = y − V̄` by the weighted mean `V̄` removes the quadratic term
/// of `dE/dC`, leaving the depressed cubic
/// `y³ + (3 m₂ + ΣR)/S₀ · y + (m₃ + ΣR W)/S₀ = 0` with `W = V − V̄`,
/// `R = Re(ψ β*)`, `m_k = Σ|ψ|² W^k`. Each real root is scored by `E` and
/// ties go to the smallest `|C|`.
pub fn heun_optimal_c(psi: &WaveField, v: &PotentialField, beta: &WaveField) -> Result<f64> {
    let (mean, _) = weighted_moments(psi, v)?;
    if beta.len() != psi.len() {
        return Err(Error::ShapeMismatch {
            expected: psi.len(),
            got: beta.len(),
        });
    }
    let (mut s0, mut m2, mut m3, mut r0, mut rw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((p, vv), b) in psi.values().iter().zip(v.values()).zip(beta.values()) {
        let rho = p.norm_sqr();
        let w = vv - mean;
        let r = (p * b.conj()).re;
        s0 += rho;
        m2 += rho * w * w;
        m3 += rho * w * w * w;
        r0 += r;
        rw += r * w;
    }
    let p = (3.0 * m2 + r0) / s0;
    let q = (m3 + rw) / s0;
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::NonFinite("Heun cubic coefficients"));
    }
    let mut best: Option<(f64, f64)> = None;
    for y in depressed_cubic_roots(p, q) {
        let c = y - mean;
        let e = heun_error_polynomial(psi, v, beta, c);
        best = match best {
            None => Some((c, e)),
            Some((bc, be)) => {
                let tie = (e - be).abs() <= 1e-12 * be.abs().max(e.abs());
                if (tie && c.abs() < bc.abs()) || (!tie && e < be) {
                    Some((c, e))
                } else {
                    Some((bc, be))
                }
            }
        };
    }
    let (c, _) = best.ok_or(Error::NonFinite("Heun cubic has no real root"))?;
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::NonFinite("Heun-optimal constant"))
    }
}

/// Default search bracket `[C̃ − 10σ, C̃ + 10σ]`, with `σ` the
/// density-weighted spread of `V` (at least 1 so the bracket never
/// collapses).
pub fn numeric_bracket(psi: &WaveField, v: &PotentialField) -> Result<(f64, f64)> {
    let (mean, sigma) = weighted_moments(psi, v)?;
    let half = 10.0 * sigma.max(1e-6 * mean.abs()).max(0.1);
    Ok((-mean - half, -mean + half))
}

/// Golden-section minimization of `error(C)` on `bracket`.
///
/// When both interior probes tie the bracket shrinks symmetrically to them,
/// so a flat objective returns the bracket midpoint.
pub fn numeric_optimal_c<F>(mut error: F, bracket: (f64, f64), search: NumericSearch) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let mut eval = |c: f64| -> Result<f64> {
        let e = error(c);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFinite("numeric gauge objective"))
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut evals = 2;
    while b - a > 2.0 * search.tol && evals < search.max_evals {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
            evals += 1;
        } else if fd < fc {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
            evals += 1;
        } else {
            a = c;
            b = d;
            c = b - inv_phi * (b - a);
            d = a + inv_phi * (b - a);
            fc = eval(c)?;
            fd = eval(d)?;
            evals += 2;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn wf(v: &[f64]) -> WaveField {
        WaveField::new(v.iter().map(|&x| c(x)).collect())
    }

    #[test]
    fn near_optimal_examples() {
        let psi = wf(&[0.3, 1.0, 2.0]);
        let v = PotentialField::new(vec![4.5; 3]);
        assert!((near_optimal_c(&psi, &v).unwrap() + 4.5).abs() < 1e-14);

        let psi = wf(&[1.0, 3f64.sqrt()]);
        let v = PotentialField::new(vec![0.0, 2.0]);
        assert!((near_optimal_c(&psi, &v).unwrap() + 1.5).abs() < 1e-14);

        assert!(matches!(
            near_optimal_c(&WaveField::zeros(3), &v_of(3)),
            Err(Error::ZeroMass)
        ));
    }

    fn v_of(n: usize) -> PotentialField {
        PotentialField::new(vec![1.0; n])
    }

    #[test]
    fn near_optimal_on_soliton_is_four_thirds() {
        let grid = Grid::new(1, 2048, 80.0).unwrap();
        let s2 = 2f64.sqrt();
        let psi = grid.sample(|x| c(s2 / (s2 * x[0]).cosh()));
        let v = PotentialField::new(grid.sample_real(|x| -2.0 / (s2 * x[0]).cosh().powi(2)));
        // Quadrature oracle: ∫4 sech⁴ / ∫2 sech² on a fine independent grid.
        let k = 200_000;
        let h = 80.0 / k as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..k {
            let s = 1.0 / (s2 * (-40.0 + i as f64 * h)).cosh();
            num += 4.0 * s.powi(4) * h;
            den += 2.0 * s * s * h;
        }
        let oracle = num / den;
        assert!((oracle - 4.0 / 3.0).abs() < 1e-9);
        assert!((near_optimal_c(&psi, &v).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn ledger_examples() {
        let mut l = GaugeLedger::new();
        l.accumulate(2.0, 0.5);
        assert_eq!(l.phase(), 1.0);

        let mut l = GaugeLedger::with_history();
        for (cc, h) in [(1.0, 0.1), (-1.0, 0.1), (0.0, 5.0)] {
            l.accumulate(cc, h);
        }
        assert_eq!(l.phase(), 0.0);
        assert_eq!(l.history().unwrap().len(), 3);

        let mut l = GaugeLedger::new();
        for _ in 0..40 {
            l.accumulate(0.75, 0.25);
        }
        assert!((l.phase() - 0.75 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn unwind_examples() {
        let psi = wf(&[1.0, -0.5]);
        assert_eq!(GaugeLedger::new().unwind(&psi), psi);
        let mut l = GaugeLedger::new();
        l.accumulate(std::f64::consts::PI, 1.0);
        let out = l.unwind(&wf(&[1.0]));
        assert!((out.values()[0] - c(-1.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn ledger_history_matches_running_phase(steps in prop::collection::vec((-50.0f64..50.0, 1e-6f64..1.0), 0..200)) {
            let mut l = GaugeLedger::with_history();
            for (cc, h) in &steps {
                l.accumulate(*cc, *h);
            }
            prop_assert!((l.recomputed_phase().unwrap() - l.phase()).abs() <= 1e-14 * l.phase().abs().max(1.0));
        }
    }

    #[test]
    fn heun_beta_vanishes_for_constant_potential() {
        let grid = Grid::new(1, 64, 10.0).unwrap();
        let psi = grid.sample(|x| c((-x[0] * x[0]).exp()));
        let v = PotentialField::new(vec![3.0; 64]);
        let dt_v = PotentialField::zeros(64);
        let beta = heun_beta(&grid, &psi, &v, &dt_v).unwrap();
        assert!(beta.max_abs() < 1e-12);
    }

    #[test]
    fn heun_beta_with_locally_linear_potential() {
        // V = x inside the support of ψ, smoothly windowed to stay periodic.
        let grid = Grid::new(1, 512, 40.0).unwrap();
        let window = |x: f64| (-(x / 10.0).powi(12)).exp();
        let psi = grid.sample(|x| c((-2.0 * x[0] * x[0]).exp()));
        let v = PotentialField::new(grid.sample_real(|x| x[0] * window(x[0])));
        let beta = heun_beta(&grid, &psi, &v, &PotentialField::zeros(512)).unwrap();
        let expect = grid.sample(|x| c(-4.0 * x[0] * (-2.0 * x[0] * x[0]).exp()));
        for (b, e) in beta.values().iter().zip(expect.values()) {
            assert!((b - e).norm() < 1e-8);
        }
    }

    #[test]
    fn heun_beta_term_by_term_on_soliton() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let s2 = 2f64.sqrt();
        let psi = grid.sample(|x| c(s2 / (s2 * x[0]).cosh()));
        let v: Vec<f64> = psi.values().iter().map(|z| -z.norm_sqr()).collect();
        let v = PotentialField::new(v);
        let beta = heun_beta(&grid, &psi, &v, &PotentialField::zeros(1024)).unwrap();
        let dpsi = grid.gradient(&psi, 0).unwrap();
        let dv = grid.gradient_real(v.values(), 0).unwrap();
        let d2v = grid.laplacian_real(v.values()).unwrap();
        for l in 0..1024 {
            let e = dv[l] * dpsi.values()[l] + 0.5 * d2v[l] * psi.values()[l];
            assert!((beta.values()[l] - e).norm() < 1e-10);
        }
    }

    #[test]
    fn heun_optimal_trivial_cases() {
        let psi = wf(&[0.5, 1.0, 0.2]);
        let v = PotentialField::new(vec![-2.5; 3]);
        let c0 = heun_optimal_c(&psi, &v, &WaveField::zeros(3)).unwrap();
        assert!((c0 - 2.5).abs() < 1e-5, "{c0}");

        // (1 + C)((1 + C)² + 1) = 0 has the single real root C = −1.
        let c1 = heun_optimal_c(&wf(&[1.0]), &PotentialField::new(vec![1.0]), &wf(&[1.0])).unwrap();
        assert!((c1 + 1.0).abs() < 1e-12);

        assert!(heun_optimal_c(&WaveField::zeros(2), &v_of(2), &WaveField::zeros(2)).is_err());
    }

    #[test]
    fn heun_optimal_matches_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let psi = WaveField::new(
                (0..8)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            );
            let v = PotentialField::new((0..8).map(|_| rng.gen_range(-5.0..5.0)).collect());
            let beta = WaveField::new(
                (0..8)
                    .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                    .collect(),
            );
            let fast = heun_optimal_c(&psi, &v, &beta).unwrap();
            let mut best = (f64::NAN, f64::INFINITY);
            for i in 0..=1_000_000 {
                let cc = -50.0 + i as f64 * 1e-4;
                let e = heun_error_polynomial(&psi, &v, &beta, cc);
                if e < best.1 {
                    best = (cc, e);
                }
            }
            assert!((fast - best.0).abs() <= 2e-4, "{fast} vs {}", best.0);
        }
    }

    #[test]
    fn cubic_roots_three_real() {
        // (y − 1)(y − 2)(y + 3) = y³ − 7y + 6
        let mut r = depressed_cubic_roots(-7.0, 6.0);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // Double root: y³ − 3y + 2 = (y − 1)²(y + 2)
        let r = depressed_cubic_roots(-3.0, 2.0);
        assert!(r.iter().any(|y| (y + 2.0).abs() < 1e-9));
        assert!(r.iter().any(|y| (y - 1.0).abs() < 1e-6));
        assert_eq!(depressed_cubic_roots(0.0, 0.0), vec![0.0]);
        assert!((depressed_cubic_roots(0.0, -8.0)[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn golden_section_examples() {
        let cmin = numeric_optimal_c(|x| (x + 2.0).powi(2) + 1.0, (-10.0, 10.0), NumericSearch::default()).unwrap();
        assert!((cmin + 2.0).abs() < 1e-3);

        let flat = numeric_optimal_c(|_| 4.0, (-3.0, 7.0), NumericSearch::default()).unwrap();
        assert!((flat - 2.0).abs() < 1e-9);

        let bad = numeric_optimal_c(|x| if x > 0.0 { f64::NAN } else { 1.0 }, (-1.0, 1.0), NumericSearch::default());
        assert!(bad.is_err());
    }

    #[test]
    fn golden_section_respects_budget() {
        let mut calls = 0;
        let search = NumericSearch { tol: 1e-12, max_evals: 10 };
        numeric_optimal_c(
            |x| {
                calls += 1;
                (x - 0.3).abs()
            },
            (-1.0, 1.0),
            search,
        )
        .unwrap();
        assert!(calls <= 11);
    }

    #[test]
    fn bracket_contains_near_optimal() {
        let psi = wf(&[1.0, 2.0, 0.5]);
        let v = PotentialField::new(vec![1.0, -3.0, 4.0]);
        let (lo, hi) = numeric_bracket(&psi, &v).unwrap();
        let ct = near_optimal_c(&psi, &v).unwrap();
        assert!(lo < ct && ct < hi);
        assert!(((lo + hi) / 2.0 - ct).abs() < 1e-12);
    }
}
