//! Run reports, the inequality monitors, decay-rate fitting and the
//! (alpha, amplitude) phase sweep.

mod certify;
mod decay;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::correspondence::antiderivative;
use crate::dynamics::{Model, ModelParams, State};
use crate::spectral::{homogeneous_norm, l2_norm, sup_norm, Field};
use crate::timestepper::{Monitor, RunStatus, StepperConfig};

pub use certify::{gamma_for_horizon, run_certified, z_of_state, CertifiedRun};
pub use decay::{fit_decay_rate, run_decay_experiment, DecayReport, MIN_FIT_POINTS};
pub use sweep::{cosine_family, run_phase_sweep, run_phase_sweep_with, Classification, SweepCell};

/// Relative slack for the Poincare comparison, which pits a quadrature norm
/// against a spectral one.
pub const POINCARE_RTOL: f64 = 1e-12;

/// One monitored time. Deviations are taken from the model's mean, so the
/// norm columns are `|u - m|` for Keller-Segel and `|Z|`, `|W|` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    pub mean: f64,
    pub l2_dev: f64,
    pub sup_dev: f64,
    pub h_half: f64,
    pub grad_sup: f64,
    pub dt: f64,
    /// `NaN` unless a certificate monitor is attached.
    pub cert_margin: f64,
    pub poincare_ok: bool,
    pub agmon_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub status: RunStatus,
    pub config_echo: Vec<(String, String)>,
    pub steps: u64,
    pub final_dt: f64,
}

impl RunReport {
    pub fn new(p: &ModelParams, cfg: &StepperConfig) -> Self {
        let mut echo = vec![
            ("model".to_string(), p.model.to_string()),
            ("alpha_diff".to_string(), format!("{:?}", p.alpha_diff)),
            ("chi".to_string(), format!("{:?}", p.chi)),
            ("mass".to_string(), format!("{:?}", p.mass)),
        ];
        if let Some(f) = p.f_override {
            echo.push(("f_override".to_string(), format!("{f:?}")));
        }
        for (k, v) in [
            ("t_end", cfg.t_end),
            ("dt_init", cfg.dt_init),
            ("dt_min", cfg.dt_min),
            ("cfl", cfg.cfl),
            ("blowup_grad_threshold", cfg.blowup_grad_threshold),
            ("monitor_cadence", cfg.monitor_cadence),
        ] {
            echo.push((k.to_string(), format!("{v:?}")));
        }
        RunReport {
            rows: Vec::new(),
            status: RunStatus::Ok,
            config_echo: echo,
            steps: 0,
            final_dt: 0.0,
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.t < row.t));
        self.rows.push(row);
    }

    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.t)
    }

    pub fn max_grad(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| {
            if r.grad_sup.is_nan() {
                f64::INFINITY
            } else {
                m.max(r.grad_sup)
            }
        })
    }

    /// Smallest certificate margin over the rows that carry one.
    pub fn min_cert_margin(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.cert_margin)
            .filter(|m| !m.is_nan())
            .reduce(f64::min)
    }

    pub fn series(&self, pick: impl Fn(&ReportRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, pick(r))).collect()
    }
}

/// Builds the standard row for `state`; `grad_sup` comes from the stepper,
/// which already holds the spectrum.
pub fn observe_row(state: &State, p: &ModelParams, dt: f64, grad_sup: f64) -> ReportRow {
    let dev = state.field.shifted(-p.field_mean());
    let ineq = inequality_terms(&dev);
    ReportRow {
        t: state.time,
        mean: state.field.mean(),
        l2_dev: ineq.l2,
        sup_dev: ineq.sup,
        h_half: ineq.h_half,
        grad_sup,
        dt,
        cert_margin: f64::NAN,
        poincare_ok: ineq.poincare_ok(),
        agmon_ratio: ineq.agmon_ratio(),
    }
}

struct Terms {
    l2: f64,
    sup: f64,
    h_half: f64,
    h_one: f64,
    half_length: f64,
}

impl Terms {
    // |xi| >= pi / L on zero-mean fields, so |f|_0^2 <= (L/pi) |Lambda^{1/2} f|_0^2.
    fn poincare_slack(&self) -> f64 {
        self.half_length / std::f64::consts::PI * self.h_half * self.h_half - self.l2 * self.l2
    }

    fn poincare_ok(&self) -> bool {
        self.poincare_slack() >= -POINCARE_RTOL * self.l2 * self.l2
    }

    fn agmon_ratio(&self) -> f64 {
        self.sup * self.sup / (2.0 * self.l2 * self.h_one)
    }
}

fn inequality_terms(dev: &Field) -> Terms {
    Terms {
        l2: l2_norm(dev),
        sup: sup_norm(dev),
        h_half: homogeneous_norm(dev, 0.5),
        h_one: homogeneous_norm(dev, 1.0),
        half_length: dev.grid().half_length(),
    }
}

/// The monitored inequalities at one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub t: f64,
    /// `(L/pi) |Lambda^{1/2} f|_0^2 - |f|_0^2` for the zero-mean deviation.
    pub poincare_margin: f64,
    pub poincare_ok: bool,
    /// `|f|_inf^2 / (2 |f|_0 |Lambda f|_0)`; logged only.
    pub agmon_ratio: f64,
    /// `chi (|W|_0 + |W|_inf)`
    pub gate_value: f64,
    /// `(1 - chi m) / 2`
    pub gate_bound: f64,
    pub gate_ok: bool,
}

/// `W` at the state's time: the zero-mean primitive of `u - m` for
/// Keller-Segel, `e^{chi m t} Z` for Burgers, the field itself for the
/// W-equation.
pub fn w_of_state(state: &State, p: &ModelParams) -> Field {
    match p.model {
        Model::KellerSegel => antiderivative(&state.field.shifted(-p.mass)),
        Model::Burgers => state.field.scaled((p.chi * p.mass * state.time).exp()),
        Model::WEquation => state.field.clone(),
    }
}

pub fn monitor_inequalities(state: &State, p: &ModelParams) -> InequalityRecord {
    let dev = state.field.shifted(-p.field_mean());
    let terms = inequality_terms(&dev);
    let w = w_of_state(state, p);
    let gate_value = p.chi * (l2_norm(&w) + sup_norm(&w));
    let gate_bound = 0.5 * (1.0 - p.chi * p.mass);
    InequalityRecord {
        t: state.time,
        poincare_margin: terms.poincare_slack(),
        poincare_ok: terms.poincare_ok(),
        agmon_ratio: terms.agmon_ratio(),
        gate_value,
        gate_bound,
        gate_ok: gate_value <= gate_bound,
    }
}

/// Collects [`InequalityRecord`]s and the first time `T*` at which the
/// smallness gate holds.
#[derive(Clone, Debug)]
pub struct InequalityMonitor {
    params: ModelParams,
    pub records: Vec<InequalityRecord>,
    pub gate_time: Option<f64>,
}

impl InequalityMonitor {
    pub fn new(p: &ModelParams) -> Self {
        InequalityMonitor {
            params: p.clone(),
            records: Vec::new(),
            gate_time: None,
        }
    }

    pub fn all_poincare_ok(&self) -> bool {
        self.records.iter().all(|r| r.poincare_ok)
    }
}

impl Monitor for InequalityMonitor {
    fn observe(&mut self, state: &State, _row: &mut ReportRow) {
        let rec = monitor_inequalities(state, &self.params);
        if rec.gate_ok && self.gate_time.is_none() {
            self.gate_time = Some(rec.t);
        }
        self.records.push(rec);
    }
}
