use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, State};
use crate::spectral::{Field, Grid};
use crate::timestepper::{integrate, RunStatus, StepperConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Regular,
    Blowup,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Regular => "REGULAR",
            Classification::Blowup => "BLOWUP",
            Classification::Inconclusive => "INCONCLUSIVE",
        }
    }

    /// Both singular indicators count as blowup.
    pub fn from_status(status: RunStatus) -> Self {
        match status {
            RunStatus::Ok => Classification::Regular,
            RunStatus::BlowupDetected | RunStatus::DtUnderflow => Classification::Blowup,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha_diff: f64,
    pub amplitude: f64,
    pub classification: Classification,
    pub status: Option<RunStatus>,
    pub max_grad: f64,
    pub t_terminal: f64,
    /// Set when a regular cell sits above a blowup cell of the same
    /// `alpha < 1`; the amplitude ordering is expected but not proven.
    pub review: bool,
}

/// `m + A cos x`
pub fn cosine_family(grid: &Arc<Grid>, mass: f64, amplitude: f64) -> Field {
    Field::from_fn(grid, |x| mass + amplitude * x.cos())
}

/// [`run_phase_sweep_with`] on the cosine family.
pub fn run_phase_sweep(
    grid: &Arc<Grid>,
    alphas: &[f64],
    amplitudes: &[f64],
    p_base: &ModelParams,
    cfg: &StepperConfig,
) -> Vec<SweepCell> {
    run_phase_sweep_with(grid, alphas, amplitudes, p_base, cfg, cosine_family)
}

/// Runs every `(alpha, amplitude)` cell in parallel. Output is ordered by
/// `alpha`, then amplitude, whatever the order of completion.
pub fn run_phase_sweep_with<F>(
    grid: &Arc<Grid>,
    alphas: &[f64],
    amplitudes: &[f64],
    p_base: &ModelParams,
    cfg: &StepperConfig,
    family: F,
) -> Vec<SweepCell>
where
    F: Fn(&Arc<Grid>, f64, f64) -> Field + Sync,
{
    let mut alphas = alphas.to_vec();
    let mut amplitudes = amplitudes.to_vec();
    alphas.sort_by(f64::total_cmp);
    amplitudes.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| amplitudes.iter().map(move |&amp| (a, amp)))
        .collect();

    let mut cells: Vec<SweepCell> = pairs
        .par_iter()
        .map(|&(alpha, amp)| run_cell(grid, alpha, amp, p_base, cfg, &family))
        .collect();
    flag_non_monotone(&mut cells);
    cells
}

fn run_cell<F>(
    grid: &Arc<Grid>,
    alpha: f64,
    amp: f64,
    p_base: &ModelParams,
    cfg: &StepperConfig,
    family: &F,
) -> SweepCell
where
    F: Fn(&Arc<Grid>, f64, f64) -> Field,
{
    let inconclusive = SweepCell {
        alpha_diff: alpha,
        amplitude: amp,
        classification: Classification::Inconclusive,
        status: None,
        max_grad: f64::NAN,
        t_terminal: f64::NAN,
        review: false,
    };
    let mut p = p_base.clone();
    p.alpha_diff = alpha;
    if p.validate().is_err() {
        return inconclusive;
    }
    let u0 = family(grid, p.field_mean(), amp);
    match integrate(&State::new(u0, 0.0), &p, cfg, &mut []) {
        Ok(report) => SweepCell {
            classification: Classification::from_status(report.status),
            status: Some(report.status),
            max_grad: report.max_grad(),
            t_terminal: report.final_time(),
            ..inconclusive
        },
        Err(_) => inconclusive,
    }
}

fn flag_non_monotone(cells: &mut [SweepCell]) {
    let mut start = 0;
    while start < cells.len() {
        let alpha = cells[start].alpha_diff;
        let end = start + cells[start..].iter().take_while(|c| c.alpha_diff == alpha).count();
        if alpha < 1.0 {
            let mut seen_blowup = false;
            for c in &mut cells[start..end] {
                match c.classification {
                    Classification::Blowup => seen_blowup = true,
                    Classification::Regular if seen_blowup => c.review = true,
                    _ => {}
                }
            }
        }
        start = end;
    }
}
