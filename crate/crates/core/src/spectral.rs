//! Uniform periodic grids in one and two dimensions with spectral operators.
//!
//! Transform convention: the forward DFT carries no normalization and the
//! inverse carries `1/M`, so `inverse(forward(f)) == f` and
//!
//! ```text
//! (1/M) Σ_m |f̂_m|² = Σ_ℓ |f_ℓ|²
//! ```
//!
//! All mode-space quantities (including the scaled error norm used by the
//! step controller) are expressed in this convention.
//!
//! Two-dimensional fields are square, stored row-major: the flat index of
//! node `(i0, i1)` is `i0 * n + i1`, so axis 1 is contiguous.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex field sampled on grid nodes (position space).
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField(Vec<Complex64>);

/// Complex Fourier coefficients in standard DFT ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField(Vec<Complex64>);

macro_rules! complex_field {
    ($name:ident) => {
        impl $name {
            pub fn new(values: Vec<Complex64>) -> Self {
                Self(values)
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![Complex64::new(0.0, 0.0); len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn values(&self) -> &[Complex64] {
                &self.0
            }

            pub fn values_mut(&mut self) -> &mut [Complex64] {
                &mut self.0
            }

            pub fn into_values(self) -> Vec<Complex64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }

        impl From<Vec<Complex64>> for $name {
            fn from(values: Vec<Complex64>) -> Self {
                Self(values)
            }
        }
    };
}

complex_field!(WaveField);
complex_field!(SpectralField);

/// Multi-dimensional complex FFT over a square (or 1D) power-of-two box.
#[derive(Clone)]
pub(crate) struct FftNd {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Below this row length 2D transforms run serially.
const PARALLEL_ROW_THRESHOLD: usize = 128;

impl FftNd {
    pub(crate) fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub(crate) fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/M` factor.
    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        match self.dim {
            1 => plan.process(data),
            _ => {
                self.rows(data, plan);
                let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
                transpose(data, &mut t, self.n);
                self.rows(&mut t, plan);
                transpose(&t, data, self.n);
            }
        }
    }

    fn rows(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let scratch_len = plan.get_inplace_scratch_len();
        let zero = Complex64::new(0.0, 0.0);
        if self.n >= PARALLEL_ROW_THRESHOLD {
            data.par_chunks_mut(self.n).for_each_init(
                || vec![zero; scratch_len],
                |scratch, row| plan.process_with_scratch(row, scratch),
            );
        } else {
            let mut scratch = vec![zero; scratch_len];
            for row in data.chunks_mut(self.n) {
                plan.process_with_scratch(row, &mut scratch);
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    let body = |(j, row): (usize, &mut [Complex64])| {
        for (i, out) in row.iter_mut().enumerate() {
            *out = src[i * n + j];
        }
    };
    if n >= PARALLEL_ROW_THRESHOLD {
        dst.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        dst.chunks_mut(n).enumerate().for_each(body);
    }
}

/// Uniform periodic grid on `[-L/2, L/2)^dim` with `n` points per axis.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    box_length: f64,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    k_squared: Vec<f64>,
    fft: FftNd,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("points_per_axis", &self.n)
            .field("box_length", &self.box_length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.box_length == other.box_length
    }
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 4 || !points_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "points_per_axis must be a power of two >= 4, got {points_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Config(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        let n = points_per_axis;
        let spacing = box_length / n as f64;
        let coords = (0..n)
            .map(|l| -0.5 * box_length + l as f64 * spacing)
            .collect();
        let wavenumbers: Vec<f64> = (0..n)
            .map(|m| {
                let signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                2.0 * std::f64::consts::PI * signed as f64 / box_length
            })
            .collect();
        let k_squared = match dim {
            1 => wavenumbers.iter().map(|k| k * k).collect(),
            _ => {
                let mut k2 = Vec::with_capacity(n * n);
                for k0 in &wavenumbers {
                    for k1 in &wavenumbers {
                        k2.push(k0 * k0 + k1 * k1);
                    }
                }
                k2
            }
        };
        Ok(Self {
            dim,
            n,
            box_length,
            spacing,
            coords,
            wavenumbers,
            k_squared,
            fft: FftNd::new(dim, n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Total number of nodes (and Fourier modes), `M`.
    pub fn len(&self) -> usize {
        self.k_squared.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `Δx^dim`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Node coordinates along any axis.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers along any axis, in DFT ordering.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|k|²` for every flattened mode.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// Per-axis index of a flattened node or mode.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, _) => flat,
            (_, 0) => flat / self.n,
            _ => flat % self.n,
        }
    }

    /// Position of node `flat`; unused trailing components are zero.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (axis, xi) in x.iter_mut().enumerate().take(self.dim) {
            *xi = self.coords[self.axis_index(flat, axis)];
        }
        x
    }

    /// Sample `f(x)` at every node.
    pub fn sample<F>(&self, mut f: F) -> WaveField
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        WaveField(
            (0..self.len())
                .map(|i| f(&self.position(i)[..self.dim]))
                .collect(),
        )
    }

    /// Real-valued variant of [`Grid::sample`].
    pub fn sample_real<F>(&self, mut f: F) -> Vec<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        (0..self.len())
            .map(|i| f(&self.position(i)[..self.dim]))
            .collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.len(),
                got: len,
            })
        }
    }

    pub fn forward(&self, field: &WaveField) -> Result<SpectralField> {
        self.check_len(field.len())?;
        let mut data = field.0.clone();
        self.fft.forward_in_place(&mut data);
        Ok(SpectralField(data))
    }

    pub fn inverse(&self, field: &SpectralField) -> Result<WaveField> {
        self.check_len(field.len())?;
        let mut data = field.0.clone();
        self.fft.inverse_in_place(&mut data);
        Ok(WaveField(data))
    }

    pub(crate) fn forward_in_place(&self, data: &mut [Complex64]) {
        self.fft.forward_in_place(data);
    }

    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.fft.inverse_in_place(data);
    }

    /// `∂f/∂x_axis` computed as `inverse(i k_axis · forward(f))`.
    pub fn gradient(&self, field: &WaveField, axis: usize) -> Result<WaveField> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            });
        }
        let mut spec = self.forward(field)?.0;
        for (m, z) in spec.iter_mut().enumerate() {
            let k = self.wavenumbers[self.axis_index(m, axis)];
            *z *= Complex64::new(0.0, k);
        }
        self.fft.inverse_in_place(&mut spec);
        Ok(WaveField(spec))
    }

    /// `∇²f` computed as `inverse(-k² · forward(f))`.
    pub fn laplacian(&self, field: &WaveField) -> Result<WaveField> {
        let mut spec = self.forward(field)?.0;
        for (z, k2) in spec.iter_mut().zip(&self.k_squared) {
            *z *= -k2;
        }
        self.fft.inverse_in_place(&mut spec);
        Ok(WaveField(spec))
    }

    /// Spectral gradient of a real field; the imaginary residue is dropped.
    pub fn gradient_real(&self, values: &[f64], axis: usize) -> Result<Vec<f64>> {
        let g = self.gradient(&complexify(values), axis)?;
        Ok(g.0.iter().map(|z| z.re).collect())
    }

    /// Spectral Laplacian of a real field; the imaginary residue is dropped.
    pub fn laplacian_real(&self, values: &[f64]) -> Result<Vec<f64>> {
        let l = self.laplacian(&complexify(values))?;
        Ok(l.0.iter().map(|z| z.re).collect())
    }

    /// `Σ_ℓ |f_ℓ|² Δx^dim`.
    pub fn mass(&self, field: &WaveField) -> f64 {
        field.0.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// Kinetic energy `½ ∫ |∇ψ|²`, evaluated in mode space.
    pub fn kinetic_energy(&self, field: &WaveField) -> Result<f64> {
        let spec = self.forward(field)?;
        let s: f64 = spec
            .0
            .iter()
            .zip(&self.k_squared)
            .map(|(z, k2)| k2 * z.norm_sqr())
            .sum();
        Ok(0.5 * s / self.len() as f64 * self.cell_volume())
    }
}

fn complexify(values: &[f64]) -> WaveField {
    WaveField(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
}
