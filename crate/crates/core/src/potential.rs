//! Potentials for the nonlinear Schrödinger (NLS) and Schrödinger–Newton (SN)
//! equations.
//!
//! NLS is local, `V = g|ψ|²`. SN solves `∇²V = g|ψ|²` with open boundaries:
//! the density is convolved with the free-space Green's function on a
//! zero-padded grid of twice the size per axis, so the periodic wrap of the
//! FFT never couples two physical nodes. Kernels:
//!
//! - 1D: `G(x) = |x|/2`, cell average `Δx/8` at the origin.
//! - 2D: `G(r) = ln(r)/(2π)`, cell average over the square `Δx × Δx` at the
//!   origin.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::Result;
use crate::spectral::{FftNd, Grid, WaveField};

/// Default `max|ψ|` above which a run is considered to have blown up.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialKind {
    /// `V = g|ψ|²`; `g < 0` is attractive.
    Nls { g: f64 },
    /// `∇²V = g|ψ|²`; `g > 0` is attractive.
    Sn { g: f64 },
}

impl PotentialKind {
    pub fn coupling(&self) -> f64 {
        match *self {
            PotentialKind::Nls { g } | PotentialKind::Sn { g } => g,
        }
    }
}

/// Real potential sampled on grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField(Vec<f64>);

impl PotentialField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for PotentialField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Discrete free-space Green's function of the Laplacian at offset `r`
/// (node units times spacing), with the origin replaced by the cell average.
fn green(dim: usize, spacing: f64, offset: [f64; 2]) -> f64 {
    let r = offset[0].hypot(offset[1]);
    match dim {
        1 => {
            if r == 0.0 {
                spacing / 8.0
            } else {
                0.5 * r
            }
        }
        _ => {
            if r == 0.0 {
                let a = 0.5 * spacing;
                (a.ln() + 0.5 * 2f64.ln() - 1.5 + 0.25 * PI) / (2.0 * PI)
            } else {
                r.ln() / (2.0 * PI)
            }
        }
    }
}

/// Component `axis` of `∇G` at `offset`; zero at the origin by symmetry.
fn green_gradient(dim: usize, offset: [f64; 2], axis: usize) -> f64 {
    let r2 = offset[0] * offset[0] + offset[1] * offset[1];
    if r2 == 0.0 {
        return 0.0;
    }
    match dim {
        1 => 0.5 * offset[0].signum(),
        _ => offset[axis] / (2.0 * PI * r2),
    }
}

/// Free-space Poisson solver via zero-padded FFT convolution.
#[derive(Clone)]
pub struct FreeSpacePoisson {
    dim: usize,
    n: usize,
    cell_volume: f64,
    fft: FftNd,
    kernel_hat: Vec<Complex64>,
    gradient_hat: Vec<Vec<Complex64>>,
}

impl FreeSpacePoisson {
    pub fn new(grid: &Grid) -> Self {
        let dim = grid.dim();
        let n = grid.points_per_axis();
        let padded = 2 * n;
        let fft = FftNd::new(dim, padded);
        let spacing = grid.spacing();

        let offset_of = |flat: usize| -> [f64; 2] {
            let mut o = [0.0; 2];
            let idx = match dim {
                1 => [flat, 0],
                _ => [flat / padded, flat % padded],
            };
            for axis in 0..dim {
                let j = idx[axis] as i64;
                let s = if j <= n as i64 { j } else { j - padded as i64 };
                o[axis] = s as f64 * spacing;
            }
            o
        };

        let build = |f: &dyn Fn([f64; 2]) -> f64| -> Vec<Complex64> {
            let mut k: Vec<Complex64> = (0..fft.len())
                .map(|i| Complex64::new(f(offset_of(i)), 0.0))
                .collect();
            fft.forward_in_place(&mut k);
            k
        };

        let kernel_hat = build(&|o| green(dim, spacing, o));
        let gradient_hat = (0..dim)
            .map(|axis| build(&|o| green_gradient(dim, o, axis)))
            .collect();

        Self {
            dim,
            n,
            cell_volume: grid.cell_volume(),
            fft,
            kernel_hat,
            gradient_hat,
        }
    }

    /// `Σ_j G(x_i − x_j) ρ_j Δx^dim` for every node `i`.
    pub fn solve(&self, density: &[f64]) -> Vec<f64> {
        self.convolve(density, &self.kernel_hat)
    }

    /// Component `axis` of `Σ_j ∇G(x_i − x_j) ρ_j Δx^dim`.
    pub fn gradient(&self, density: &[f64], axis: usize) -> Vec<f64> {
        self.convolve(density, &self.gradient_hat[axis])
    }

    fn convolve(&self, density: &[f64], kernel_hat: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        let padded = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        match self.dim {
            1 => {
                for (b, &r) in buf.iter_mut().zip(density) {
                    b.re = r;
                }
            }
            _ => {
                for (i0, row) in density.chunks(n).enumerate() {
                    for (i1, &r) in row.iter().enumerate() {
                        buf[i0 * padded + i1].re = r;
                    }
                }
            }
        }
        self.fft.forward_in_place(&mut buf);
        for (b, k) in buf.iter_mut().zip(kernel_hat) {
            *b *= k;
        }
        self.fft.inverse_in_place(&mut buf);
        let w = self.cell_volume;
        match self.dim {
            1 => buf[..n].iter().map(|z| z.re * w).collect(),
            _ => (0..n * n)
                .map(|i| buf[(i / n) * padded + i % n].re * w)
                .collect(),
        }
    }
}

/// Potential evaluator bound to one grid.
#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    poisson: Option<FreeSpacePoisson>,
}

impl Potential {
    pub fn new(kind: PotentialKind, grid: &Grid) -> Self {
        let poisson = match kind {
            PotentialKind::Sn { .. } => Some(FreeSpacePoisson::new(grid)),
            PotentialKind::Nls { .. } => None,
        };
        Self { kind, poisson }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    /// Response of the potential to a density (or density rate) `source`.
    fn respond(&self, source: &[f64]) -> Vec<f64> {
        let g = self.kind.coupling();
        match &self.poisson {
            None => source.iter().map(|s| g * s).collect(),
            Some(p) => p.solve(source).into_iter().map(|v| g * v).collect(),
        }
    }

    pub fn eval(&self, grid: &Grid, psi: &WaveField) -> Result<PotentialField> {
        grid.check_len(psi.len())?;
        let density: Vec<f64> = psi.values().iter().map(|z| z.norm_sqr()).collect();
        Ok(PotentialField(self.respond(&density)))
    }

    /// `∂V/∂t` through the chain rule, with `∂ψ/∂t = i(½∇²ψ − Vψ)`.
    pub fn time_derivative(
        &self,
        grid: &Grid,
        psi: &WaveField,
        v: &PotentialField,
    ) -> Result<PotentialField> {
        grid.check_len(v.len())?;
        let lap = grid.laplacian(psi)?;
        let i = Complex64::new(0.0, 1.0);
        let rate: Vec<f64> = psi
            .values()
            .iter()
            .zip(lap.values())
            .zip(v.values())
            .map(|((p, l), &vv)| {
                let dpsi = i * (0.5 * l - vv * p);
                2.0 * (p.conj() * dpsi).re
            })
            .collect();
        Ok(PotentialField(self.respond(&rate)))
    }

    /// `∇V`, one field per axis. NLS differentiates `V` spectrally; SN
    /// convolves the density with `∇G` so the non-periodic far field of the
    /// open-boundary potential does not alias.
    pub fn gradient(
        &self,
        grid: &Grid,
        psi: &WaveField,
        v: &PotentialField,
    ) -> Result<Vec<PotentialField>> {
        grid.check_len(v.len())?;
        match &self.poisson {
            None => (0..grid.dim())
                .map(|axis| grid.gradient_real(v.values(), axis).map(PotentialField))
                .collect(),
            Some(p) => {
                let g = self.kind.coupling();
                let density: Vec<f64> = psi.values().iter().map(|z| z.norm_sqr()).collect();
                Ok((0..grid.dim())
                    .map(|axis| {
                        PotentialField(p.gradient(&density, axis).into_iter().map(|x| g * x).collect())
                    })
                    .collect())
            }
        }
    }

    /// `∇²V`; exact (`g|ψ|²`) for SN.
    pub fn laplacian(
        &self,
        grid: &Grid,
        psi: &WaveField,
        v: &PotentialField,
    ) -> Result<PotentialField> {
        grid.check_len(v.len())?;
        match self.kind {
            PotentialKind::Nls { .. } => grid.laplacian_real(v.values()).map(PotentialField),
            PotentialKind::Sn { g } => Ok(PotentialField(
                psi.values().iter().map(|z| g * z.norm_sqr()).collect(),
            )),
        }
    }

    /// `½∫|∇ψ|² + ½∫V|ψ|²`. For NLS the interaction is `(g/2)∫|ψ|⁴`, which
    /// is the same expression with `V = g|ψ|²`.
    pub fn energy(&self, grid: &Grid, psi: &WaveField) -> Result<f64> {
        let kinetic = grid.kinetic_energy(psi)?;
        let v = self.eval(grid, psi)?;
        let interaction: f64 = psi
            .values()
            .iter()
            .zip(v.values())
            .map(|(p, vv)| vv * p.norm_sqr())
            .sum::<f64>()
            * 0.5
            * grid.cell_volume();
        Ok(kinetic + interaction)
    }
}

/// True when `ψ` holds a non-finite value or `max|ψ| > threshold`.
pub fn blowup_guard(psi: &WaveField, threshold: f64) -> bool {
    psi.values()
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()) || z.norm() > threshold)
}
