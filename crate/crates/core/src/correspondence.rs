//! The dictionary between the Keller-Segel unknowns `(u, v)` and the Burgers
//! reduction: `W = e^{chi m t} Z`, `u = d_x W + m`, `d_x v = -W`.

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{check_mean, Model, ModelParams, State};
use crate::error::{Error, Result};
use crate::spectral::{derivative, solve_poisson_zero_mean, sup_norm, Field};
use crate::timestepper::{integrate_to_state, RunStatus, StepperConfig};

/// Zero-mean spectral antiderivative: divides every nonzero mode by `i xi`.
/// The mean of `f` itself is ignored.
pub fn antiderivative(f: &Field) -> Field {
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let nyq = grid.nyquist_index();
    let mut spec = f.spectrum();
    for (j, c) in spec.iter_mut().enumerate() {
        *c = if j == 0 || j == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            *c / Complex64::new(0.0, xi[j])
        };
    }
    Field::from_spectrum(grid, &spec)
}

/// The zero-mean primitive `Z0` of `u0 - m`.
pub fn primitive_datum(u0: &Field, p: &ModelParams) -> Result<Field> {
    check_mean(u0, &p.with_model(Model::KellerSegel))?;
    Ok(antiderivative(u0))
}

pub fn z_to_w(z: &Field, t: f64, p: &ModelParams) -> Field {
    z.scaled((p.chi * p.mass * t).exp())
}

pub fn w_to_u(w: &Field, p: &ModelParams) -> Field {
    derivative(w).shifted(p.mass)
}

/// `v = d_x V` with `-V'' = W`, re-centred to zero mean.
pub fn recover_v(w: &Field) -> Result<Field> {
    let v = derivative(&solve_poisson_zero_mean(w)?);
    let mean = v.mean();
    Ok(v.shifted(-mean))
}

/// Integrates `u0` directly as Keller-Segel and, independently, its
/// primitive as Burgers, then returns `|u_A - u_B|_inf` at `cfg.t_end`.
pub fn roundtrip_error(u0: &Field, p: &ModelParams, cfg: &StepperConfig) -> Result<f64> {
    if p.alpha_diff != 1.0 {
        return Err(Error::OutOfRange {
            name: "alpha_diff",
            value: p.alpha_diff,
            expected: "1 for the correspondence",
        });
    }
    let ks = p.with_model(Model::KellerSegel);
    let bu = p.with_model(Model::Burgers);
    let z0 = primitive_datum(u0, &ks)?;

    let (a, b) = rayon::join(
        || integrate_to_state(&State::new(u0.clone(), 0.0), &ks, cfg, &mut []),
        || integrate_to_state(&State::new(z0, 0.0), &bu, cfg, &mut []),
    );
    let (ra, ua) = a?;
    let (rb, zb) = b?;
    for r in [&ra, &rb] {
        if r.status != RunStatus::Ok {
            return Err(Error::RunFailed {
                status: r.status.as_str(),
                t: r.final_time(),
            });
        }
    }
    let ub = w_to_u(&z_to_w(&zb.field, zb.time, p), p);
    Ok(ua.field.max_abs_diff(&ub))
}

/// All four unknowns at one time.
#[derive(Clone, Debug)]
pub struct CorrespondencePack {
    pub u: Field,
    pub v: Field,
    pub z: Field,
    pub w: Field,
    pub t: f64,
    pub params: ModelParams,
}

/// Worst violation of each identity of a [`CorrespondencePack`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackResiduals {
    pub mean_z: f64,
    pub mean_w: f64,
    pub mean_v: f64,
    pub mean_u: f64,
    /// `|d_x W - (u - m)|_inf / (1 + |u - m|_inf)`
    pub u_identity: f64,
    /// `|d_x v + W|_inf / (1 + |W|_inf)`
    pub v_identity: f64,
    /// `|W - e^{chi m t} Z|_inf / (1 + |W|_inf)`
    pub w_identity: f64,
}

impl PackResiduals {
    pub fn within(&self, mean_tol: f64, derivative_tol: f64, scaling_tol: f64) -> bool {
        [self.mean_z, self.mean_w, self.mean_v, self.mean_u]
            .iter()
            .all(|m| *m <= mean_tol)
            && self.u_identity <= derivative_tol
            && self.v_identity <= derivative_tol
            && self.w_identity <= scaling_tol
    }
}

impl CorrespondencePack {
    pub fn from_z(z: &Field, t: f64, p: &ModelParams) -> Result<Self> {
        z.require_zero_mean()?;
        let w = z_to_w(z, t, p);
        Ok(CorrespondencePack {
            u: w_to_u(&w, p),
            v: recover_v(&w)?,
            z: z.clone(),
            w,
            t,
            params: p.clone(),
        })
    }

    pub fn from_u(u: &Field, t: f64, p: &ModelParams) -> Result<Self> {
        let w = primitive_datum(u, p)?;
        let z = w.scaled((-p.chi * p.mass * t).exp());
        Ok(CorrespondencePack {
            u: u.clone(),
            v: recover_v(&w)?,
            z,
            w,
            t,
            params: p.clone(),
        })
    }

    pub fn residuals(&self) -> PackResiduals {
        let m = self.params.mass;
        let dev = self.u.shifted(-m);
        let sw = sup_norm(&self.w);
        PackResiduals {
            mean_z: self.z.mean().abs(),
            mean_w: self.w.mean().abs(),
            mean_v: self.v.mean().abs(),
            mean_u: (self.u.mean() - m).abs(),
            u_identity: derivative(&self.w).max_abs_diff(&dev) / (1.0 + sup_norm(&dev)),
            v_identity: sup_norm(&derivative(&self.v).plus(&self.w)) / (1.0 + sw),
            w_identity: self.w.max_abs_diff(&z_to_w(&self.z, self.t, &self.params)) / (1.0 + sw),
        }
    }
}
