use serde::Serialize;

use super::{ReportRow, RunReport};
use crate::certificate::{
    build_certificate, check_conditions, derivative_bound_check, scan_violation, ConditionReport,
    ModulusCertificate, ScanResult,
};
use crate::correspondence::antiderivative;
use crate::dynamics::{Model, ModelParams, State};
use crate::error::{Error, Result};
use crate::spectral::{derivative, sup_norm, Field};
use crate::timestepper::{integrate_to_state, Monitor, RunStatus, StepperConfig};

/// The Burgers unknown `Z` carried by a state of any model.
pub fn z_of_state(state: &State, p: &ModelParams) -> Field {
    let back = (-p.chi * p.mass * state.time).exp();
    match p.model {
        Model::KellerSegel => antiderivative(&state.field.shifted(-p.mass)).scaled(back),
        Model::Burgers => state.field.clone(),
        Model::WEquation => state.field.scaled(back),
    }
}

/// `Gamma = sup f = chi e^{chi m T}` on `[0, T]` for `m >= 0`.
pub fn gamma_for_horizon(p: &ModelParams, t_end: f64) -> f64 {
    p.chi * (p.chi * p.mass * t_end).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifiedRun {
    pub certificate: ModulusCertificate,
    pub conditions: ConditionReport,
    /// `|d_x Z(t0)|_inf < B`
    pub derivative_ok: bool,
    pub gamma: f64,
    pub t0: f64,
    /// Worst pair over all monitored times from `t0` on.
    pub worst: Option<ScanResult>,
    pub worst_time: f64,
    #[serde(skip)]
    pub report: RunReport,
}

impl CertifiedRun {
    pub fn min_margin(&self) -> f64 {
        self.worst.map_or(f64::NAN, |w| w.min_margin)
    }

    pub fn passed(&self) -> bool {
        self.report.status == RunStatus::Ok
            && self.conditions.all_ok()
            && self.derivative_ok
            && self.min_margin() > 0.0
    }
}

struct ScanMonitor<'a> {
    cert: &'a ModulusCertificate,
    params: &'a ModelParams,
    worst: Option<ScanResult>,
    worst_time: f64,
}

impl Monitor for ScanMonitor<'_> {
    fn observe(&mut self, state: &State, row: &mut ReportRow) {
        let scan = scan_violation(&z_of_state(state, self.params), self.cert);
        row.cert_margin = scan.min_margin;
        let worse = match self.worst {
            None => true,
            Some(w) => scan.min_margin < w.min_margin || scan.min_margin.is_nan(),
        };
        if worse {
            self.worst = Some(scan);
            self.worst_time = state.time;
        }
    }
}

/// Runs `state0` to `t0`, builds the recipe certificate for `Z(t0)` with
/// `Gamma` taken over the whole horizon, then continues to `cfg.t_end`
/// scanning for violations at every monitored time.
pub fn run_certified(
    state0: &State,
    p: &ModelParams,
    cfg: &StepperConfig,
    t0: f64,
) -> Result<CertifiedRun> {
    if !(t0 >= 0.0 && t0 < cfg.t_end) {
        return Err(Error::OutOfRange {
            name: "cert_t0",
            value: t0,
            expected: "in [0, t_end)",
        });
    }
    let mut rows = Vec::new();
    let mut steps = 0;
    let start = if t0 > 0.0 {
        let mut head = cfg.clone();
        head.t_end = t0;
        let (report, state) = integrate_to_state(state0, p, &head, &mut [])?;
        if report.status != RunStatus::Ok {
            return Err(Error::RunFailed {
                status: report.status.as_str(),
                t: report.final_time(),
            });
        }
        steps = report.steps;
        rows = report.rows;
        rows.pop();
        state
    } else {
        state0.clone()
    };

    let gamma = gamma_for_horizon(p, state0.time + cfg.t_end);
    let z = z_of_state(&start, p);
    let certificate = build_certificate(&z, gamma)?;
    let conditions = check_conditions(&certificate, gamma, sup_norm(&z), sup_norm(&derivative(&z)));
    let derivative_ok = derivative_bound_check(&z, &certificate);

    let mut tail = cfg.clone();
    tail.t_end = cfg.t_end - (start.time - state0.time);
    let mut scan = ScanMonitor {
        cert: &certificate,
        params: p,
        worst: None,
        worst_time: f64::NAN,
    };
    let (mut report, _) = integrate_to_state(&start, p, &tail, &mut [&mut scan])?;
    let (worst, worst_time) = (scan.worst, scan.worst_time);
    rows.append(&mut report.rows);
    report.rows = rows;
    report.steps += steps;
    report.config_echo = super::RunReport::new(p, cfg).config_echo;
    report
        .config_echo
        .push(("cert_t0".to_string(), format!("{t0:?}")));

    Ok(CertifiedRun {
        certificate,
        conditions,
        derivative_ok,
        gamma,
        t0,
        worst,
        worst_time,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn z_agrees_across_models() {
        let g = make_grid(64, PI).unwrap();
        let p = ModelParams::new(Model::KellerSegel, 1.0, 1.0, 0.5).unwrap();
        let t = 0.7;
        let u = State::new(Field::from_fn(&g, |x| 0.5 + x.cos()), t);
        let z = z_of_state(&u, &p);
        let expect = Field::from_fn(&g, |x| x.sin() * (-0.5 * t).exp());
        assert!(z.max_abs_diff(&expect) < 1e-14);
        let w = State::new(Field::from_fn(&g, f64::sin), t);
        let zw = z_of_state(&w, &p.with_model(Model::WEquation));
        assert!(zw.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn moderate_burgers_run_keeps_its_modulus() {
        let g = make_grid(128, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.5).unwrap();
        let z0 = Field::from_fn(&g, |x| 2.0 * x.sin());
        let cfg = StepperConfig::new(1.0);
        let run = run_certified(&State::new(z0, 0.0), &p, &cfg, 0.01).unwrap();
        assert!(run.passed(), "{:?}", run.conditions);
        assert!((run.gamma - 0.5f64.exp()).abs() < 1e-15);
        let r = &run.report;
        assert!(r.rows.windows(2).all(|w| w[0].t < w[1].t));
        assert!(r.rows[0].cert_margin.is_nan());
        assert!(r.rows.last().unwrap().cert_margin > 0.0);
        assert!((r.final_time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_t0() {
        let g = make_grid(32, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.5).unwrap();
        let s = State::new(Field::from_fn(&g, f64::sin), 0.0);
        assert!(run_certified(&s, &p, &StepperConfig::new(1.0), 1.0).is_err());
    }
}
