use serde::{Deserialize, Serialize};

use super::{w_of_state, ReportRow};
use crate::dynamics::{Model, ModelParams, State};
use crate::error::{Error, Result};
use crate::spectral::{homogeneous_norm, l2_norm, sup_norm, Field};
use crate::timestepper::{integrate, Monitor, RunStatus, StepperConfig};

pub const MIN_FIT_POINTS: usize = 10;

/// Allowed excess of a fitted rate over the theoretical one.
pub const RATE_SLACK: f64 = 0.05;

pub const MIN_R_SQUARED: f64 = 0.99;

/// Least-squares slope of `ln(value)` against `t` over the samples with
/// `t` in `[window.0, window.1]`, with its coefficient of determination.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_POINTS,
            found: pts.len(),
        });
    }
    if let Some(&(_, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::OutOfRange {
            name: "decay sample",
            value: v,
            expected: "> 0 (shrink the fit window)",
        });
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, v) in &pts {
        let dt = t - t_mean;
        let dy = v.ln() - y_mean;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: 1,
        });
    }
    let rate = sty / stt;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sty * sty / (stt * syy)).clamp(0.0, 1.0)
    };
    Ok((rate, r2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `|u - m|_0`
    pub fitted_rate_l2: f64,
    /// `|u - m|_inf`
    pub fitted_rate_sup: f64,
    /// `|W|_0`
    pub fitted_rate_w: f64,
    /// `|Lambda^{1/2}(u - m)|_0`
    pub fitted_rate_h_half: f64,
    pub fit_window: (f64, f64),
    /// Of the `|u - m|_0` fit.
    pub r_squared: f64,
    pub r_squared_w: f64,
    pub r_squared_h_half: f64,
    pub chi: f64,
    pub mass: f64,
    pub status: RunStatus,
    pub t_reached: f64,
    /// The datum sits at the homogeneous state; nothing to fit.
    pub trivial: bool,
}

impl DecayReport {
    /// `(1 - idx)(-1 + chi m)` for the Sobolev index `idx`.
    pub fn theoretical_rate(&self, idx: f64) -> f64 {
        (1.0 - idx) * (-1.0 + self.chi * self.mass)
    }

    pub fn l2_ok(&self) -> bool {
        self.fitted_rate_l2 <= self.theoretical_rate(0.0) + RATE_SLACK
            && self.r_squared >= MIN_R_SQUARED
    }

    pub fn w_ok(&self) -> bool {
        self.fitted_rate_w <= self.theoretical_rate(0.0) + RATE_SLACK
            && self.r_squared_w >= MIN_R_SQUARED
    }

    pub fn h_half_ok(&self) -> bool {
        self.fitted_rate_h_half <= self.theoretical_rate(0.5) + RATE_SLACK
            && self.r_squared_h_half >= MIN_R_SQUARED
    }

    pub fn passed(&self) -> bool {
        if self.trivial {
            return self.status == RunStatus::Ok;
        }
        self.status == RunStatus::Ok && self.l2_ok() && self.w_ok() && self.h_half_ok()
    }
}

#[derive(Default)]
struct DecaySeries {
    l2: Vec<(f64, f64)>,
    sup: Vec<(f64, f64)>,
    w: Vec<(f64, f64)>,
    h_half: Vec<(f64, f64)>,
    params: Option<ModelParams>,
}

impl Monitor for DecaySeries {
    fn observe(&mut self, state: &State, row: &mut ReportRow) {
        let p = self.params.as_ref().expect("params set");
        let t = state.time;
        let dev = state.field.shifted(-p.mass);
        self.l2.push((t, l2_norm(&dev)));
        self.sup.push((t, sup_norm(&dev)));
        self.h_half.push((t, homogeneous_norm(&dev, 0.5)));
        self.w.push((t, l2_norm(&w_of_state(state, p))));
        debug_assert_eq!(row.t, t);
    }
}

/// Integrates the Keller-Segel datum `u0` over `[0, cfg.t_end]` and fits the
/// decay rates over `[t_end / 2, t_end]`.
pub fn run_decay_experiment(u0: &Field, p: &ModelParams, cfg: &StepperConfig) -> Result<DecayReport> {
    if p.chi * p.mass >= 1.0 {
        return Err(Error::DecayHypothesis(p.chi * p.mass));
    }
    if p.alpha_diff != 1.0 {
        return Err(Error::OutOfRange {
            name: "alpha_diff",
            value: p.alpha_diff,
            expected: "1 for the decay experiment",
        });
    }
    let p = p.with_model(Model::KellerSegel);
    let mut series = DecaySeries {
        params: Some(p.clone()),
        ..Default::default()
    };
    let report = integrate(&State::new(u0.clone(), 0.0), &p, cfg, &mut [&mut series])?;
    let window = (0.5 * cfg.t_end, cfg.t_end);
    let t_reached = report.final_time();
    let trivial = series.l2.first().is_some_and(|&(_, v)| v == 0.0);

    let mut out = DecayReport {
        fitted_rate_l2: f64::NAN,
        fitted_rate_sup: f64::NAN,
        fitted_rate_w: f64::NAN,
        fitted_rate_h_half: f64::NAN,
        fit_window: window,
        r_squared: f64::NAN,
        r_squared_w: f64::NAN,
        r_squared_h_half: f64::NAN,
        chi: p.chi,
        mass: p.mass,
        status: report.status,
        t_reached,
        trivial,
    };
    if trivial || report.status != RunStatus::Ok {
        return Ok(out);
    }
    (out.fitted_rate_l2, out.r_squared) = fit_decay_rate(&series.l2, window)?;
    (out.fitted_rate_sup, _) = fit_decay_rate(&series.sup, window)?;
    (out.fitted_rate_w, out.r_squared_w) = fit_decay_rate(&series.w, window)?;
    (out.fitted_rate_h_half, out.r_squared_h_half) = fit_decay_rate(&series.h_half, window)?;
    Ok(out)
}
