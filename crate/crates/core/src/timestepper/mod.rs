//! Fourth-order exponential time differencing (Cox-Matthews ETDRK4) with the
//! linear multiplier integrated exactly per mode, CFL-type step control and
//! heuristic blowup detection.

mod phi;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_mean, Evaluator, ModelParams, State};
use crate::error::{Error, Result};
use crate::experiments::{observe_row, ReportRow, RunReport};
use crate::spectral::Field;

pub use phi::{phi_functions, TAYLOR_RADIUS};

/// Guard against a vanishing transport speed in [`adapt_dt`].
pub const SPEED_FLOOR: f64 = 1e-12;

/// Consecutive steps pinned at `dt_min` before a run is declared stalled.
pub const UNDERFLOW_STREAK: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub blowup_grad_threshold: f64,
    pub monitor_cadence: f64,
}

impl StepperConfig {
    pub fn new(t_end: f64) -> Self {
        StepperConfig {
            dt_init: 1e-2,
            dt_min: 1e-9,
            cfl: 0.4,
            t_end,
            blowup_grad_threshold: 1e6,
            monitor_cadence: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "> 0",
                })
            }
        };
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("t_end", self.t_end)?;
        positive("blowup_grad_threshold", self.blowup_grad_threshold)?;
        positive("monitor_cadence", self.monitor_cadence)?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::OutOfRange {
                name: "cfl",
                value: self.cfl,
                expected: "(0, 1]",
            });
        }
        if self.dt_min > self.dt_init {
            return Err(Error::OutOfRange {
                name: "dt_min",
                value: self.dt_min,
                expected: "<= dt_init",
            });
        }
        Ok(())
    }

    /// Hard cap on the number of steps of one run.
    pub fn max_steps(&self) -> u64 {
        (self.t_end / self.dt_min).ceil() as u64 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Ok,
    BlowupDetected,
    DtUnderflow,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "OK",
            RunStatus::BlowupDetected => "BLOWUP_DETECTED",
            RunStatus::DtUnderflow => "DT_UNDERFLOW",
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub status: RunStatus,
    pub state: State,
    pub dt_used: f64,
}

/// Called at every monitored time with the current state and the row that
/// will be appended to the report; implementations may fill extra columns.
pub trait Monitor {
    fn observe(&mut self, state: &State, row: &mut ReportRow);
}

impl<F: FnMut(&State, &mut ReportRow)> Monitor for F {
    fn observe(&mut self, state: &State, row: &mut ReportRow) {
        self(state, row)
    }
}

/// Per-mode ETDRK4 weights for a fixed step `h`.
struct EtdCoeffs {
    h: f64,
    e: Vec<f64>,
    e_half: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl EtdCoeffs {
    fn new(linear: &[f64], h: f64) -> Self {
        let n = linear.len();
        let mut c = EtdCoeffs {
            h,
            e: Vec::with_capacity(n),
            e_half: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &l in linear {
            let [e, p1, p2, p3] = phi_functions(l * h);
            let [e_half, p1_half, _, _] = phi_functions(0.5 * l * h);
            c.e.push(e);
            c.e_half.push(e_half);
            c.q.push(0.5 * h * p1_half);
            c.f1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
            c.f2.push(h * (p2 - 2.0 * p3));
            c.f3.push(h * (-p2 + 4.0 * p3));
        }
        c
    }
}

/// Owns one evolving spectrum. Mode 0 is pinned to the model's mean and
/// the Nyquist mode to zero.
pub(crate) struct Stepper {
    ev: Evaluator,
    spec: Vec<Complex64>,
    time: f64,
    coeffs: Option<EtdCoeffs>,
    n_u: Vec<Complex64>,
    n_a: Vec<Complex64>,
    n_b: Vec<Complex64>,
    n_c: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl Stepper {
    pub(crate) fn new(state: &State, p: &ModelParams) -> Result<Self> {
        check_mean(&state.field, p)?;
        let ev = Evaluator::new(state.field.grid(), p)?;
        let mut spec = ev.project(&state.field);
        spec[0] = Complex64::new(p.field_mean(), 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); spec.len()];
        Ok(Stepper {
            ev,
            spec,
            time: state.time,
            coeffs: None,
            n_u: zero.clone(),
            n_a: zero.clone(),
            n_b: zero.clone(),
            n_c: zero.clone(),
            a: zero.clone(),
            b: zero.clone(),
            c: zero,
        })
    }

    pub(crate) fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn state(&self) -> State {
        State::new(Field::from_spectrum(self.ev.grid(), &self.spec), self.time)
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.spec.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn transport_speed(&mut self) -> f64 {
        self.ev.transport_speed(&self.spec, self.time)
    }

    pub(crate) fn gradient_sup(&mut self) -> f64 {
        self.ev.gradient_sup(&self.spec)
    }

    pub(crate) fn advance(&mut self, h: f64) {
        if self.coeffs.as_ref().is_none_or(|c| c.h != h) {
            self.coeffs = Some(EtdCoeffs::new(self.ev.linear_symbol(), h));
        }
        let k = self.coeffs.as_ref().expect("coefficients set above");
        let t = self.time;

        self.ev.nonlinear(&self.spec, t, &mut self.n_u);
        for j in 0..self.spec.len() {
            self.a[j] = self.spec[j] * k.e_half[j] + self.n_u[j] * k.q[j];
        }
        self.ev.nonlinear(&self.a, t + 0.5 * h, &mut self.n_a);
        for j in 0..self.spec.len() {
            self.b[j] = self.spec[j] * k.e_half[j] + self.n_a[j] * k.q[j];
        }
        self.ev.nonlinear(&self.b, t + 0.5 * h, &mut self.n_b);
        for j in 0..self.spec.len() {
            self.c[j] = self.a[j] * k.e_half[j] + (self.n_b[j] * 2.0 - self.n_u[j]) * k.q[j];
        }
        self.ev.nonlinear(&self.c, t + h, &mut self.n_c);
        for j in 0..self.spec.len() {
            self.spec[j] = self.spec[j] * k.e[j]
                + self.n_u[j] * k.f1[j]
                + (self.n_a[j] + self.n_b[j]) * (2.0 * k.f2[j])
                + self.n_c[j] * k.f3[j];
        }
        self.time = t + h;
    }
}

/// One ETDRK4 step of size `dt`.
pub fn step(state: &State, dt: f64, p: &ModelParams) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::OutOfRange {
            name: "dt",
            value: dt,
            expected: "> 0",
        });
    }
    let mut stepper = Stepper::new(state, p)?;
    stepper.advance(dt);
    let status = if stepper.is_finite() {
        RunStatus::Ok
    } else {
        RunStatus::BlowupDetected
    };
    Ok(StepOutcome {
        status,
        state: stepper.state(),
        dt_used: dt,
    })
}

/// `cfl * dx / max(eps, V)` clamped to `[dt_min, dt_init]`, with `V` the
/// transport speed of the model: `chi |v_x|` for Keller-Segel, `|f(t) Z|`
/// for Burgers and `chi |W|` for the W-equation.
pub fn adapt_dt(state: &State, p: &ModelParams, cfg: &StepperConfig) -> Result<f64> {
    let mut ev = Evaluator::new(state.field.grid(), p)?;
    let spec = ev.project(&state.field);
    let speed = ev.transport_speed(&spec, state.time);
    Ok(clamp_dt(raw_dt(state.field.grid().dx(), speed, cfg), cfg))
}

fn raw_dt(dx: f64, speed: f64, cfg: &StepperConfig) -> f64 {
    let speed = if speed.is_nan() { f64::INFINITY } else { speed };
    cfg.cfl * dx / speed.max(SPEED_FLOOR)
}

fn clamp_dt(dt: f64, cfg: &StepperConfig) -> f64 {
    dt.clamp(cfg.dt_min, cfg.dt_init)
}

/// Runs `state` to `cfg.t_end`, calling every monitor at multiples of
/// `cfg.monitor_cadence` (and at the final time). Runtime failures end the run
/// with a non-OK status; only inconsistent inputs are reported as errors.
pub fn integrate(
    state: &State,
    p: &ModelParams,
    cfg: &StepperConfig,
    monitors: &mut [&mut dyn Monitor],
) -> Result<RunReport> {
    cfg.validate()?;
    let mut stepper = Stepper::new(state, p)?;
    let dx = state.field.grid().dx();
    let t0 = state.time;
    let mut report = RunReport::new(p, cfg);

    let mut record = |stepper: &mut Stepper, dt: f64, report: &mut RunReport| {
        let current = stepper.state();
        let grad = stepper.gradient_sup();
        let mut row = observe_row(&current, p, dt, grad);
        for m in monitors.iter_mut() {
            m.observe(&current, &mut row);
        }
        report.push(row);
    };

    record(&mut stepper, 0.0, &mut report);

    let mut next_k: u64 = 1;
    let mut streak = 0usize;
    let mut steps: u64 = 0;
    let max_steps = cfg.max_steps();
    let mut status = RunStatus::Ok;
    let mut last_dt = 0.0;

    while stepper.time() < t0 + cfg.t_end {
        let monitor_t = t0 + next_k as f64 * cfg.monitor_cadence;
        let target = monitor_t.min(t0 + cfg.t_end);
        let raw = raw_dt(dx, stepper.transport_speed(), cfg);
        if raw <= cfg.dt_min {
            streak += 1;
        } else {
            streak = 0;
        }
        let mut h = clamp_dt(raw, cfg);
        let remaining = target - stepper.time();
        let landing = h >= remaining;
        if landing {
            h = remaining;
        } else if h > 0.5 * remaining {
            h = 0.5 * remaining;
        }

        stepper.advance(h);
        if landing {
            stepper.time = target;
        }
        steps += 1;
        last_dt = h;

        let grad = stepper.gradient_sup();
        if !stepper.is_finite() || !grad.is_finite() || grad > cfg.blowup_grad_threshold {
            status = RunStatus::BlowupDetected;
        } else if streak >= UNDERFLOW_STREAK || steps >= max_steps {
            status = RunStatus::DtUnderflow;
        }

        if status != RunStatus::Ok {
            record(&mut stepper, h, &mut report);
            break;
        }
        if landing {
            record(&mut stepper, h, &mut report);
            if target >= monitor_t {
                next_k += 1;
            }
        }
    }
    report.status = status;
    report.steps = steps;
    report.final_dt = last_dt;
    Ok(report)
}

/// Like [`integrate`] but also returns the final state.
pub fn integrate_to_state(
    state: &State,
    p: &ModelParams,
    cfg: &StepperConfig,
    monitors: &mut [&mut dyn Monitor],
) -> Result<(RunReport, State)> {
    let mut last: Option<State> = None;
    let mut keep_last = |s: &State, _row: &mut ReportRow| last = Some(s.clone());
    let mut all: Vec<&mut dyn Monitor> = Vec::with_capacity(monitors.len() + 1);
    for m in monitors.iter_mut() {
        all.push(&mut **m);
    }
    all.push(&mut keep_last);
    let report = integrate(state, p, cfg, &mut all)?;
    drop(all);
    let last = last.expect("integrate records at least one row");
    Ok((report, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Model;
    use crate::spectral::{make_grid, sup_norm};
    use std::f64::consts::PI;

    fn ks(alpha: f64, chi: f64, m: f64) -> ModelParams {
        ModelParams::new(Model::KellerSegel, alpha, chi, m).unwrap()
    }

    #[test]
    fn linear_step_is_exact() {
        let g = make_grid(64, PI).unwrap();
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let p = ModelParams::new(Model::Burgers, alpha, 0.0, 0.0).unwrap();
            let k = 5.0f64;
            let z = Field::from_fn(&g, |x| (k * x).cos());
            let dt = 0.37;
            let out = step(&State::new(z.clone(), 0.0), dt, &p).unwrap();
            let expect = z.scaled((-k.powf(alpha) * dt).exp());
            assert_eq!(out.status, RunStatus::Ok);
            assert!(out.state.field.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn homogeneous_state_is_fixed() {
        let g = make_grid(32, PI).unwrap();
        let p = ks(1.0, 2.0, 0.8);
        let u = Field::constant(&g, 0.8);
        for dt in [1e-4, 0.1, 5.0] {
            let out = step(&State::new(u.clone(), 0.0), dt, &p).unwrap();
            assert!(out.state.field.max_abs_diff(&u) < 1e-15);
        }
    }

    #[test]
    fn step_rejects_bad_dt_and_mass() {
        let g = make_grid(32, PI).unwrap();
        let p = ks(1.0, 1.0, 1.0);
        let s = State::new(Field::constant(&g, 1.0), 0.0);
        assert!(step(&s, 0.0, &p).is_err());
        let wrong = State::new(Field::constant(&g, 3.0), 0.0);
        assert!(step(&wrong, 0.1, &p).is_err());
    }

    #[test]
    fn adapt_dt_clamps_and_scales() {
        let g = make_grid(64, PI).unwrap();
        let mut cfg = StepperConfig::new(1.0);
        cfg.dt_init = 1.0;
        cfg.dt_min = 1e-12;
        let p = ModelParams::new(Model::WEquation, 1.0, 1.0, 0.5).unwrap();
        let quiet = State::new(Field::zeros(&g), 0.0);
        assert_eq!(adapt_dt(&quiet, &p, &cfg).unwrap(), cfg.dt_init);

        let w = Field::from_fn(&g, f64::sin);
        let dt1 = adapt_dt(&State::new(w.clone(), 0.0), &p, &cfg).unwrap();
        let dt2 = adapt_dt(&State::new(w.scaled(2.0), 0.0), &p, &cfg).unwrap();
        assert!((dt1 / dt2 - 2.0).abs() < 1e-12);
        let expected = cfg.cfl * g.dx() / sup_norm(&w);
        assert!((dt1 - expected).abs() < 1e-15);
    }

    #[test]
    fn heat_decay_of_one_mode() {
        let g = make_grid(64, PI).unwrap();
        let m = 0.3;
        let p = ks(1.0, 0.0, m);
        let u0 = Field::from_fn(&g, |x| m + x.cos());
        let cfg = StepperConfig::new(1.0);
        let report = integrate(&State::new(u0, 0.0), &p, &cfg, &mut []).unwrap();
        assert_eq!(report.status, RunStatus::Ok);
        let last = report.rows.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-14);
        assert!((last.l2_dev - (-1.0f64).exp() * PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn steady_run_reports_constant_norms() {
        let g = make_grid(32, PI).unwrap();
        let p = ks(1.0, 1.0, 2.0);
        let cfg = StepperConfig::new(0.5);
        let report =
            integrate(&State::new(Field::constant(&g, 2.0), 0.0), &p, &cfg, &mut []).unwrap();
        assert_eq!(report.status, RunStatus::Ok);
        assert_eq!(report.rows.len(), 6);
        for r in &report.rows {
            assert_eq!(r.l2_dev, 0.0);
            assert!((r.mean - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn monitors_fire_on_cadence() {
        let g = make_grid(32, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.0).unwrap();
        let mut cfg = StepperConfig::new(1.0);
        cfg.monitor_cadence = 0.25;
        let mut seen = Vec::new();
        let mut mon = |s: &State, _r: &mut ReportRow| seen.push(s.time);
        let z = Field::from_fn(&g, f64::sin);
        integrate(&State::new(z, 0.0), &p, &cfg, &mut [&mut mon]).unwrap();
        assert_eq!(seen, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn nan_state_is_blowup() {
        let g = make_grid(16, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.0).unwrap();
        // NaN poisons the mean, so inject it past the mean check.
        let mut stepper = Stepper::new(&State::new(Field::from_fn(&g, f64::sin), 0.0), &p).unwrap();
        stepper.spec[1] = Complex64::new(f64::NAN, 0.0);
        stepper.advance(0.01);
        assert!(!stepper.is_finite());
    }

    #[test]
    fn large_gradient_triggers_blowup_status() {
        let g = make_grid(64, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.0).unwrap();
        let mut cfg = StepperConfig::new(1.0);
        cfg.blowup_grad_threshold = 10.0;
        let z = Field::from_fn(&g, |x| 20.0 * x.sin());
        let r = integrate(&State::new(z, 0.0), &p, &cfg, &mut []).unwrap();
        assert_eq!(r.status, RunStatus::BlowupDetected);
        assert!(r.rows.last().unwrap().t < 1.0);
    }

    #[test]
    fn pinned_step_underflows() {
        let g = make_grid(64, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.0).unwrap();
        let mut cfg = StepperConfig::new(1.0);
        cfg.dt_min = 1e-3;
        cfg.dt_init = 1e-2;
        cfg.cfl = 1e-3;
        let z = Field::from_fn(&g, |x| 5.0 * x.sin());
        let r = integrate(&State::new(z, 0.0), &p, &cfg, &mut []).unwrap();
        assert_eq!(r.status, RunStatus::DtUnderflow);
        assert!(r.steps <= cfg.max_steps());
        assert_eq!(r.steps, UNDERFLOW_STREAK as u64);
    }

    fn run_fixed(z0: &Field, p: &ModelParams, dt: f64, steps: usize) -> Field {
        let mut st = Stepper::new(&State::new(z0.clone(), 0.0), p).unwrap();
        for _ in 0..steps {
            st.advance(dt);
        }
        st.state().field
    }

    #[test]
    fn fourth_order_self_convergence() {
        let g = make_grid(64, PI).unwrap();
        let p = ModelParams::new(Model::Burgers, 1.0, 1.0, 0.5).unwrap();
        let z0 = Field::from_fn(&g, |x| x.sin() + 0.5 * (2.0 * x).cos());
        let t_end = 0.5;
        let base = 10;
        let finest = base * 8 * 16;
        let reference = run_fixed(&z0, &p, t_end / finest as f64, finest);
        let errors: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&r| {
                let steps = base * r;
                run_fixed(&z0, &p, t_end / steps as f64, steps).max_abs_diff(&reference)
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 3.5, "errors {errors:?}");
        }
    }

    #[test]
    fn mean_is_invariant_per_step() {
        use rand::SeedableRng;
        let g = make_grid(64, PI).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for (model, offset) in [
            (Model::KellerSegel, 1.3),
            (Model::Burgers, 0.0),
            (Model::WEquation, 0.0),
        ] {
            let p = ModelParams::new(model, 0.8, 2.0, 1.3).unwrap();
            let f0 = Field::random_band_limited(&g, 10, offset, &mut rng).scaled(3.0);
            let f0 = f0.shifted(offset - f0.mean());
            let mut st = Stepper::new(&State::new(f0, 0.0), &p).unwrap();
            for _ in 0..50 {
                st.advance(2e-3);
                assert!((st.state().field.mean() - offset).abs() <= 1e-12);
            }
        }
    }
}
