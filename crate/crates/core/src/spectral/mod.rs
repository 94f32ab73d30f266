//! Periodic grids, sampled fields and the Fourier-multiplier operators acting
//! on them.
//!
//! The torus is `[-L, L)` sampled at `n` equispaced points. Spectra are stored
//! in FFT order and normalized so that entry `k` is the Fourier coefficient of
//! `e^{i pi k x / L}`; a real field therefore satisfies `f^_{-k} = conj(f^_k)`.
//! The Nyquist mode `k = n/2` is dropped by every operator.

mod kernel;
mod norms;
mod ops;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub use kernel::lambda_kernel_quadrature;
pub use norms::{homogeneous_norm, l2_norm, norms, sup_norm, NormSet};
pub(crate) use ops::check_exponent;
pub use ops::{derivative, fractional_laplacian, hilbert, solve_poisson_zero_mean};

/// Relative tolerance used for "this field has zero mean" checks.
pub const ZERO_MEAN_RTOL: f64 = 1e-10;

pub struct Grid {
    n: usize,
    half_length: f64,
    points: Vec<f64>,
    modes: Vec<i64>,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .finish()
    }
}

/// Builds the shared discretization context for `n` samples on `[-L, L)`.
pub fn make_grid(n: usize, half_length: f64) -> Result<Arc<Grid>> {
    Grid::new(n, half_length).map(Arc::new)
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::GridSize(n));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::OutOfRange {
                name: "half_length",
                value: half_length,
                expected: "a positive finite real",
            });
        }
        let dx = 2.0 * half_length / n as f64;
        let points = (0..n).map(|j| -half_length + dx * j as f64).collect();
        let modes: Vec<i64> = (0..n)
            .map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        let wavenumbers = modes
            .iter()
            .map(|&k| std::f64::consts::PI * k as f64 / half_length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Grid {
            n,
            half_length,
            points,
            modes,
            wavenumbers,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn dx(&self) -> f64 {
        self.period() / self.n as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Integer mode index of each FFT slot, `-n/2+1 ..= n/2`.
    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    /// `xi_k = pi k / L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Largest |k| kept by the two-thirds rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }

    /// Normalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse of [`Grid::forward`], projected onto real samples.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        let scale = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    /// Applies a per-slot multiplier `symbol(j)` and returns the real result.
    /// The Nyquist slot is zeroed regardless of the symbol.
    pub fn apply_symbol(&self, values: &[f64], symbol: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(values);
        let nyq = self.nyquist_index();
        for (j, c) in spec.iter_mut().enumerate() {
            *c = if j == nyq { Complex64::new(0.0, 0.0) } else { *c * symbol(j) };
        }
        self.inverse(&spec)
    }

    /// Samples of the band-limited interpolant of `values` at `x_j + shift`,
    /// on a grid refined to `m >= n` points. Used by the kernel quadrature.
    pub(crate) fn resample(&self, values: &[f64], m: usize, shift_fraction: f64) -> Vec<f64> {
        assert!(m >= self.n);
        let spec = self.forward(values);
        let mut fine = vec![Complex64::new(0.0, 0.0); m];
        let h = self.period() / m as f64;
        let nyq = self.nyquist_index();
        for (j, &c) in spec.iter().enumerate() {
            if j == nyq {
                continue;
            }
            let k = self.modes[j];
            let slot = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
            let phase = self.wavenumbers[j] * shift_fraction * h;
            fine[slot] = c * Complex64::from_polar(1.0, phase);
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut fine);
        fine.iter().map(|c| c.re).collect()
    }
}

/// A real periodic function sampled on a [`Grid`].
#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("n", &self.grid.n)
            .field("mean", &self.mean())
            .field("sup", &sup_norm(self))
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_vec(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points.iter().map(|&x| f(x)).collect();
        Field::from_vec(grid, values)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Field::from_vec(grid, vec![c; grid.n])
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field::constant(grid, 0.0)
    }

    /// Builds the field from normalized spectral coefficients (FFT order).
    pub fn from_spectrum(grid: &Arc<Grid>, spectrum: &[Complex64]) -> Self {
        Field::from_vec(grid, grid.inverse(spectrum))
    }

    /// `offset + sum_k a_k cos(xi_k x) + b_k sin(xi_k x)` for `(k, a_k, b_k)`.
    pub fn from_modes(grid: &Arc<Grid>, offset: f64, modes: &[(u32, f64, f64)]) -> Self {
        let l = grid.half_length;
        Field::from_fn(grid, |x| {
            modes.iter().fold(offset, |acc, &(k, a, b)| {
                let arg = std::f64::consts::PI * k as f64 * x / l;
                acc + a * arg.cos() + b * arg.sin()
            })
        })
    }

    /// Random real trigonometric polynomial with modes `1..=kmax` and
    /// coefficients decaying like `1/k`, plus the constant `offset`.
    pub fn random_band_limited(
        grid: &Arc<Grid>,
        kmax: u32,
        offset: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let modes: Vec<(u32, f64, f64)> = (1..=kmax)
            .map(|k| {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                (k, a / k as f64, b / k as f64)
            })
            .collect();
        Field::from_modes(grid, offset, &modes)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }

    /// Compensated (Neumaier) sum, so large-amplitude fields still report
    /// their mean to a few ulps.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        for &v in &self.values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                carry += (sum - t) + v;
            } else {
                carry += (v - t) + sum;
            }
            sum = t;
        }
        (sum + carry) / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `|mean| <= rtol * (1 + sup)`.
    pub fn has_zero_mean(&self, rtol: f64) -> bool {
        self.mean().abs() <= rtol * (1.0 + sup_norm(self))
    }

    pub(crate) fn require_zero_mean(&self) -> Result<()> {
        if self.has_zero_mean(ZERO_MEAN_RTOL) {
            Ok(())
        } else {
            Err(Error::NonZeroMean { mean: self.mean() })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert!(self.grid.same_as(&other.grid), "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::from_vec(&self.grid, values)
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn shifted(&self, c: f64) -> Field {
        self.map(|v| v + c)
    }

    pub fn plus(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn minus(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn times(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    /// Largest pointwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
