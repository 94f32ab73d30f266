//! Right-hand sides of the three evolution models.
//!
//! * Keller-Segel: `u_t = -Lambda^a u - chi d_x(u d_x v)`, `-v'' = u - m`.
//! * modified Burgers: `Z_t = -Lambda^a Z + f(t) Z Z_x`, `f(t) = chi e^{chi m t}`.
//! * W-equation: `W_t = -Lambda^a W + chi W W_x + chi m W`.
//!
//! Quadratic terms are written as exact derivatives and dealiased with the
//! two-thirds rule, so mode 0 of every right-hand side is exactly zero.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

/// Relative tolerance on `mean(u) = m` accepted by the Keller-Segel evaluator.
pub const MASS_RTOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    KellerSegel,
    Burgers,
    WEquation,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::KellerSegel => "keller_segel",
            Model::Burgers => "burgers",
            Model::WEquation => "w_equation",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "keller_segel" | "ks" => Ok(Model::KellerSegel),
            "burgers" => Ok(Model::Burgers),
            "w_equation" | "w" => Ok(Model::WEquation),
            other => Err(format!("unknown model '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha_diff: f64,
    pub chi: f64,
    pub mass: f64,
    pub model: Model,
    /// Replaces `chi e^{chi m t}` by a constant in the Burgers model.
    pub f_override: Option<f64>,
}

impl ModelParams {
    pub fn new(model: Model, alpha_diff: f64, chi: f64, mass: f64) -> Result<Self> {
        let p = ModelParams {
            alpha_diff,
            chi,
            mass,
            model,
            f_override: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_model(&self, model: Model) -> Self {
        ModelParams {
            model,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::spectral::check_exponent(self.alpha_diff)?;
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::OutOfRange {
                name: "chi",
                value: self.chi,
                expected: ">= 0",
            });
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mass",
                value: self.mass,
                expected: ">= 0",
            });
        }
        Ok(())
    }

    /// Coefficient of the Burgers nonlinearity at time `t`.
    pub fn f(&self, t: f64) -> f64 {
        self.f_override
            .unwrap_or_else(|| f_of_t(t, self.chi, self.mass))
    }

    /// Mean that the evolved field must carry.
    pub fn field_mean(&self) -> f64 {
        match self.model {
            Model::KellerSegel => self.mass,
            Model::Burgers | Model::WEquation => 0.0,
        }
    }
}

/// `f(t) = chi e^{chi m t}`.
pub fn f_of_t(t: f64, chi: f64, mass: f64) -> f64 {
    chi * (chi * mass * t).exp()
}

/// The evolved unknown: `u`, `Z` or `W` depending on the model.
#[derive(Clone, Debug)]
pub struct State {
    pub field: Field,
    pub time: f64,
}

impl State {
    pub fn new(field: Field, time: f64) -> Self {
        State { field, time }
    }

    /// Checks the mean invariant of the model.
    pub fn check_mean(&self, p: &ModelParams) -> Result<()> {
        check_mean(&self.field, p)
    }
}

pub(crate) fn check_mean(field: &Field, p: &ModelParams) -> Result<()> {
    match p.model {
        Model::KellerSegel => {
            let mean = field.mean();
            if (mean - p.mass).abs() <= MASS_RTOL * (1.0 + p.mass.abs()) {
                Ok(())
            } else {
                Err(Error::MeanMismatch {
                    expected: p.mass,
                    found: mean,
                })
            }
        }
        Model::Burgers | Model::WEquation => field.require_zero_mean(),
    }
}

/// Zeroes every mode with `|k| > n/3`.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid();
    let cut = grid.dealias_cutoff();
    let modes = grid.modes();
    let values = grid.apply_symbol(f.values(), |j| {
        if modes[j].abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    Field::from_vec(grid, values)
}

pub fn ks_rhs(u: &Field, p: &ModelParams) -> Result<Field> {
    check_mean(u, &p.with_model(Model::KellerSegel))?;
    let p = p.with_model(Model::KellerSegel);
    evaluate(u, 0.0, &p)
}

pub fn burgers_rhs(z: &Field, t: f64, p: &ModelParams) -> Result<Field> {
    z.require_zero_mean()?;
    evaluate(z, t, &p.with_model(Model::Burgers))
}

pub fn w_rhs(w: &Field, p: &ModelParams) -> Result<Field> {
    w.require_zero_mean()?;
    evaluate(w, 0.0, &p.with_model(Model::WEquation))
}

fn evaluate(field: &Field, t: f64, p: &ModelParams) -> Result<Field> {
    let grid = field.grid();
    let mut ev = Evaluator::new(grid, p)?;
    let spec = ev.project(field);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n()];
    ev.nonlinear(&spec, t, &mut out);
    for ((o, s), l) in out.iter_mut().zip(&spec).zip(ev.linear_symbol()) {
        *o += *s * *l;
    }
    Ok(Field::from_spectrum(grid, &out))
}

/// Spectral-space evaluator shared by the public right-hand sides and the
/// time integrator. Spectra are normalized, FFT-ordered, Nyquist-free.
pub(crate) struct Evaluator {
    grid: Arc<Grid>,
    params: ModelParams,
    linear: Vec<f64>,
    keep: Vec<bool>,
    buf_a: Vec<Complex64>,
    buf_b: Vec<Complex64>,
}

impl Evaluator {
    pub(crate) fn new(grid: &Arc<Grid>, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let n = grid.n();
        let nyq = grid.nyquist_index();
        let cut = grid.dealias_cutoff();
        let growth = match params.model {
            Model::WEquation => params.chi * params.mass,
            _ => 0.0,
        };
        let linear = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(j, xi)| {
                if j == nyq {
                    0.0
                } else {
                    -xi.abs().powf(params.alpha_diff) + growth
                }
            })
            .collect();
        let keep = grid
            .modes()
            .iter()
            .enumerate()
            .map(|(j, k)| j != nyq && k.abs() <= cut)
            .collect();
        Ok(Evaluator {
            grid: Arc::clone(grid),
            params: params.clone(),
            linear,
            keep,
            buf_a: vec![Complex64::new(0.0, 0.0); n],
            buf_b: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub(crate) fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Per-mode linear symbol: `-|xi|^a`, plus `chi m` for the W-equation.
    pub(crate) fn linear_symbol(&self) -> &[f64] {
        &self.linear
    }

    /// Spectrum of `field` with the Nyquist mode removed.
    pub(crate) fn project(&self, field: &Field) -> Vec<Complex64> {
        let mut spec = field.spectrum();
        spec[self.grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        spec
    }

    /// Writes the nonlinear part of the right-hand side at time `t` into `out`.
    pub(crate) fn nonlinear(&mut self, spec: &[Complex64], t: f64, out: &mut [Complex64]) {
        let xi = self.grid.wavenumbers();
        let zero = Complex64::new(0.0, 0.0);
        match self.params.model {
            Model::KellerSegel => {
                // u
                self.buf_a.copy_from_slice(spec);
                self.grid.inverse_in_place(&mut self.buf_a);
                // v_x = i xi v^ = (i / xi) (u - m)^
                for (j, b) in self.buf_b.iter_mut().enumerate() {
                    *b = if xi[j] == 0.0 {
                        zero
                    } else {
                        spec[j] * Complex64::new(0.0, 1.0 / xi[j])
                    };
                }
                self.buf_b[self.grid.nyquist_index()] = zero;
                self.grid.inverse_in_place(&mut self.buf_b);
                for (a, b) in self.buf_a.iter_mut().zip(&self.buf_b) {
                    *a = Complex64::new(a.re * b.re, 0.0);
                }
                self.grid.forward_in_place(&mut self.buf_a);
                let chi = self.params.chi;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = if self.keep[j] {
                        self.buf_a[j] * Complex64::new(0.0, -chi * xi[j])
                    } else {
                        zero
                    };
                }
            }
            Model::Burgers | Model::WEquation => {
                let coef = match self.params.model {
                    Model::Burgers => self.params.f(t),
                    _ => self.params.chi,
                };
                self.buf_a.copy_from_slice(spec);
                self.grid.inverse_in_place(&mut self.buf_a);
                for a in self.buf_a.iter_mut() {
                    *a = Complex64::new(a.re * a.re, 0.0);
                }
                self.grid.forward_in_place(&mut self.buf_a);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = if self.keep[j] {
                        self.buf_a[j] * Complex64::new(0.0, 0.5 * coef * xi[j])
                    } else {
                        zero
                    };
                }
            }
        }
    }

    /// Transport speed used by the CFL control.
    pub(crate) fn transport_speed(&mut self, spec: &[Complex64], t: f64) -> f64 {
        let xi = self.grid.wavenumbers();
        let zero = Complex64::new(0.0, 0.0);
        match self.params.model {
            Model::KellerSegel => {
                for (j, b) in self.buf_b.iter_mut().enumerate() {
                    *b = if xi[j] == 0.0 {
                        zero
                    } else {
                        spec[j] * Complex64::new(0.0, 1.0 / xi[j])
                    };
                }
                self.grid.inverse_in_place(&mut self.buf_b);
                self.params.chi * sup_re(&self.buf_b)
            }
            Model::Burgers | Model::WEquation => {
                self.buf_b.copy_from_slice(spec);
                self.grid.inverse_in_place(&mut self.buf_b);
                let coef = match self.params.model {
                    Model::Burgers => self.params.f(t).abs(),
                    _ => self.params.chi,
                };
                coef * sup_re(&self.buf_b)
            }
        }
    }

    /// `|d_x field|_inf` of the state with spectrum `spec`.
    pub(crate) fn gradient_sup(&mut self, spec: &[Complex64]) -> f64 {
        let xi = self.grid.wavenumbers();
        for (j, b) in self.buf_b.iter_mut().enumerate() {
            *b = spec[j] * Complex64::new(0.0, xi[j]);
        }
        self.buf_b[self.grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        self.grid.inverse_in_place(&mut self.buf_b);
        sup_re(&self.buf_b)
    }
}

fn sup_re(buf: &[Complex64]) -> f64 {
    buf.iter().fold(0.0, |m: f64, c| {
        if c.re.is_nan() {
            f64::NAN
        } else {
            m.max(c.re.abs())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{derivative, fractional_laplacian, make_grid, sup_norm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(model: Model, alpha: f64, chi: f64, m: f64) -> ModelParams {
        ModelParams::new(model, alpha, chi, m).unwrap()
    }

    #[test]
    fn f_of_t_values() {
        assert_eq!(f_of_t(0.0, 2.0, 1.0), 2.0);
        for t in [0.0, 1.0, 17.5] {
            assert_eq!(f_of_t(t, 1.3, 0.0), 1.3);
        }
        assert!((f_of_t(1.0, 1.0, 2f64.ln()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(Model::KellerSegel, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(Model::KellerSegel, 2.5, 1.0, 1.0).is_err());
        assert!(ModelParams::new(Model::KellerSegel, 1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(Model::KellerSegel, 1.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(Model::Burgers, 2.0, 0.0, 0.0).is_ok());
        assert_eq!("keller-segel".parse::<Model>().unwrap(), Model::KellerSegel);
        assert!("heat".parse::<Model>().is_err());
    }

    #[test]
    fn ks_steady_state() {
        let g = make_grid(64, PI).unwrap();
        let p = params(Model::KellerSegel, 1.0, 1.5, 0.8);
        let r = ks_rhs(&Field::constant(&g, 0.8), &p).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ks_rejects_wrong_mass() {
        let g = make_grid(32, PI).unwrap();
        let p = params(Model::KellerSegel, 1.0, 1.0, 1.0);
        assert!(matches!(
            ks_rhs(&Field::constant(&g, 2.0), &p),
            Err(Error::MeanMismatch { .. })
        ));
    }

    #[test]
    fn ks_linear_part_on_cosine() {
        let g = make_grid(64, PI).unwrap();
        let m = 0.7;
        let p = params(Model::KellerSegel, 1.0, 0.0, m);
        let u = Field::from_fn(&g, |x| m + x.cos());
        let r = ks_rhs(&u, &p).unwrap();
        let expect = Field::from_fn(&g, |x| -x.cos());
        assert!(r.max_abs_diff(&expect) < 1e-13);
    }

    /// Hand expansion for `u = m + cos x` on `L = pi`: `v = cos x`,
    /// `v_x = -sin x`, `u v_x = -m sin x - sin(2x)/2`,
    /// `-chi d_x(u v_x) = chi (m cos x + cos 2x)`.
    #[test]
    fn ks_full_rhs_matches_trig_expansion() {
        let g = make_grid(32, PI).unwrap();
        let (chi, m) = (1.3, 0.6);
        for alpha in [0.5, 1.0, 1.7] {
            let p = params(Model::KellerSegel, alpha, chi, m);
            let u = Field::from_fn(&g, |x| m + x.cos());
            let r = ks_rhs(&u, &p).unwrap();
            let expect =
                Field::from_fn(&g, |x| -x.cos() + chi * (m * x.cos() + (2.0 * x).cos()));
            assert!(r.max_abs_diff(&expect) < 1e-13, "alpha {alpha}");
        }
    }

    /// `u = m + cos x + cos 2x`: brute-force expansion of the flux by
    /// summing the product-to-sum terms mode by mode.
    #[test]
    fn ks_three_mode_expansion() {
        let g = make_grid(48, PI).unwrap();
        let (chi, m) = (0.9, 1.1);
        let p = params(Model::KellerSegel, 1.0, chi, m);
        let u = Field::from_fn(&g, |x| m + x.cos() + (2.0 * x).cos());
        // v = cos x + cos(2x)/4, v_x = -sin x - sin(2x)/2
        // u v_x = -m sin x - m sin(2x)/2 - cos x sin x - cos x sin(2x)/2
        //         - cos 2x sin x - cos 2x sin 2x / 2
        //       = -m sin x - (m/2) sin 2x - sin(2x)/2 - (sin 3x + sin x)/4
        //         - (sin 3x - sin x)/2 - sin(4x)/4
        let flux_x = |x: f64| {
            -m * x.cos() - m * (2.0 * x).cos() - (2.0 * x).cos()
                - 0.75 * (3.0 * x).cos()
                - 0.25 * x.cos()
                - 1.5 * (3.0 * x).cos()
                + 0.5 * x.cos()
                - (4.0 * x).cos()
        };
        let expect = Field::from_fn(&g, |x| {
            -(x.cos() + 2.0 * (2.0 * x).cos()) - chi * flux_x(x)
        });
        let r = ks_rhs(&u, &p).unwrap();
        assert!(r.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn burgers_examples() {
        let g = make_grid(32, PI).unwrap();
        let mut p = params(Model::Burgers, 1.0, 1.0, 0.0);
        assert!(sup_norm(&burgers_rhs(&Field::zeros(&g), 0.3, &p).unwrap()) == 0.0);

        p.f_override = Some(1.0);
        let z = Field::from_fn(&g, f64::sin);
        let r = burgers_rhs(&z, 2.0, &p).unwrap();
        let expect = Field::from_fn(&g, |x| -x.sin() + 0.5 * (2.0 * x).sin());
        assert!(r.max_abs_diff(&expect) < 1e-14);

        assert!(burgers_rhs(&Field::constant(&g, 1.0), 0.0, &p).is_err());
    }

    #[test]
    fn burgers_uses_time_dependent_coefficient() {
        let g = make_grid(32, PI).unwrap();
        let (chi, m, t) = (1.0, 0.5, 2.0f64);
        let p = params(Model::Burgers, 1.0, chi, m);
        let z = Field::from_fn(&g, f64::sin);
        let f = chi * (chi * m * t).exp();
        let expect = Field::from_fn(&g, |x| -x.sin() + 0.5 * f * (2.0 * x).sin());
        assert!(burgers_rhs(&z, t, &p).unwrap().max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn w_rhs_growth_term() {
        let g = make_grid(32, PI).unwrap();
        let w = Field::from_fn(&g, f64::sin);
        let p = params(Model::WEquation, 1.0, 1.0, 1.0);
        // -sin x + (1/2) d_x sin^2 x + sin x
        let expect = Field::from_fn(&g, |x| 0.5 * (2.0 * x).sin());
        assert!(w_rhs(&w, &p).unwrap().max_abs_diff(&expect) < 1e-14);
        assert!(sup_norm(&w_rhs(&Field::zeros(&g), &p).unwrap()) == 0.0);
    }

    #[test]
    fn w_rhs_is_rescaled_burgers() {
        let g = make_grid(96, PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (chi, m, t) = (1.2, 0.4, 0.9);
        let p = params(Model::WEquation, 1.0, chi, m);
        let scale = (chi * m * t).exp();
        for _ in 0..10 {
            let w = Field::random_band_limited(&g, 31, 0.0, &mut rng);
            let z = w.scaled(1.0 / scale);
            let lhs = w_rhs(&w, &p).unwrap();
            let rhs = burgers_rhs(&z, t, &p).unwrap().scaled(scale).plus(&w.scaled(chi * m));
            assert!(lhs.max_abs_diff(&rhs) < 1e-12 * (1.0 + sup_norm(&lhs)));
        }
    }

    #[test]
    fn dealias_examples() {
        let g = make_grid(48, PI).unwrap();
        let band = Field::from_fn(&g, |x| (16.0 * x).cos() + (5.0 * x).sin());
        assert!(dealias(&band).max_abs_diff(&band) < 1e-13);
        let high = Field::from_fn(&g, |x| (23.0 * x).cos());
        assert!(sup_norm(&dealias(&high)) < 1e-13);

        // cos(k1 x) cos(k2 x) = (cos((k1-k2)x) + cos((k1+k2)x)) / 2
        let (k1, k2) = (9.0, 7.0);
        let prod = Field::from_fn(&g, |x| (k1 * x).cos() * (k2 * x).cos());
        let expect = Field::from_fn(&g, |x| 0.5 * (((k1 - k2) * x).cos() + ((k1 + k2) * x).cos()));
        assert!(dealias(&prod).max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn rhs_mode_zero_vanishes() {
        let g = make_grid(64, PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let z = Field::random_band_limited(&g, 21, 0.0, &mut rng).scaled(5.0);
            let m = 0.75;
            let u = z.shifted(m);
            let p = params(Model::KellerSegel, 0.8, 1.4, m);
            let outs = [
                ks_rhs(&u, &p).unwrap(),
                burgers_rhs(&z, 0.7, &p).unwrap(),
                w_rhs(&z, &p).unwrap(),
            ];
            for o in outs {
                assert!(o.spectrum()[0].norm() < 1e-13 * (1.0 + sup_norm(&o)));
            }
        }
    }

    /// `d_x w_rhs(W) = ks_rhs(W_x + m)`: the Burgers-to-Keller-Segel dictionary
    /// applied to vector fields.
    #[test]
    fn vector_fields_correspond() {
        let g = make_grid(96, PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (chi, m, t) = (1.0, 0.6, 0.8);
        let p = params(Model::KellerSegel, 1.0, chi, m);
        let scale = (chi * m * t).exp();
        for _ in 0..10 {
            let z = Field::random_band_limited(&g, 31, 0.0, &mut rng);
            let w = z.scaled(scale);
            let u = derivative(&w).shifted(m);
            let lhs = derivative(
                &burgers_rhs(&z, t, &p)
                    .unwrap()
                    .scaled(scale)
                    .plus(&w.scaled(chi * m)),
            );
            let rhs = ks_rhs(&u, &p).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-8 * (1.0 + sup_norm(&rhs)));
        }
    }

    #[test]
    fn chi_zero_is_pure_heat_flow() {
        let g = make_grid(32, PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Field::random_band_limited(&g, 10, 0.0, &mut rng);
        let p = params(Model::Burgers, 1.3, 0.0, 0.0);
        let heat = fractional_laplacian(&z, 1.3).unwrap().scaled(-1.0);
        for r in [
            burgers_rhs(&z, 0.0, &p).unwrap(),
            w_rhs(&z, &p).unwrap(),
            ks_rhs(&z, &p).unwrap(),
        ] {
            assert!(r.max_abs_diff(&heat) < 1e-13);
        }
    }
}
