//! `fks` subcommands and their exit codes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::correspondence::{primitive_datum, roundtrip_error};
use crate::dynamics::{Model, State};
use crate::error::{Error, Result};
use crate::experiments::{run_certified, run_decay_experiment, run_phase_sweep, RunReport};
use crate::io::{
    parse_config, sweep_csv, write_json, write_plot, write_series, write_snapshot, write_sweep,
    RunConfig,
};
use crate::selftest::run_self_test;
use crate::timestepper::{integrate_to_state, RunStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_DT_UNDERFLOW: i32 = 3;
pub const EXIT_CERT_VIOLATION: i32 = 4;
pub const EXIT_CORRESPONDENCE: i32 = 5;
pub const EXIT_DECAY: i32 = 6;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "fks", version, about = "Fractional Keller-Segel / Burgers simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the configured model (exit 2 on blowup, 3 on step underflow)
    Simulate { config: PathBuf },
    /// Build the modulus certificate and scan it along a Burgers run (exit 4 on violation)
    Certify { config: PathBuf },
    /// Compare direct and Burgers-route integrations (exit 5 above tolerance)
    Correspond { config: PathBuf },
    /// Fit decay rates against the theoretical ones (exit 6 on failure)
    Decay { config: PathBuf },
    /// Run the (alpha, amplitude) sweep
    Sweep { config: PathBuf },
    /// Operator self-test (exit 1 on failure)
    Validate,
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let outcome = match cli.command {
        Command::Validate => Ok(validate()),
        Command::Simulate { config } => load(&config).and_then(|c| simulate(&c)),
        Command::Certify { config } => load(&config).and_then(|c| certify(&c)),
        Command::Correspond { config } => load(&config).and_then(|c| correspond(&c)),
        Command::Decay { config } => load(&config).and_then(|c| decay(&c)),
        Command::Sweep { config } => load(&config).and_then(|c| sweep(&c)),
    };
    match outcome {
        Ok(code) => code,
        Err(e @ (Error::Config { .. } | Error::DecayHypothesis(_) | Error::InsufficientSamples { .. })) => {
            eprintln!("fks: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("fks: {e}");
            EXIT_FAILURE
        }
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn validate() -> i32 {
    let start = Instant::now();
    let checks = run_self_test();
    let mut ok = true;
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        ok &= c.passed();
        println!("{verdict} {:<44} err {:.3e} tol {:.1e}", c.name, c.error, c.tolerance);
    }
    println!("{} checks in {:.2?}", checks.len(), start.elapsed());
    if ok {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn status_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Ok => EXIT_OK,
        RunStatus::BlowupDetected => EXIT_BLOWUP,
        RunStatus::DtUnderflow => EXIT_DT_UNDERFLOW,
    }
}

fn write_run(cfg: &RunConfig, report: &RunReport, last: Option<&State>) -> Result<()> {
    let o = &cfg.outputs;
    if let Some(p) = &o.series_csv {
        write_series(report, p)?;
    }
    if let (Some(p), Some(s)) = (&o.snapshot_json, last) {
        write_snapshot(s, p)?;
    }
    if let Some(p) = &o.plot_svg {
        write_plot(report, p)?;
    }
    if let Some(p) = &o.report_json {
        write_json(report, p)?;
    }
    Ok(())
}

fn summary(report: &RunReport) {
    println!(
        "status {} t {:?} steps {} max |d_x|_inf {:.6e}",
        report.status,
        report.final_time(),
        report.steps,
        report.max_grad()
    );
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let state = State::new(cfg.datum(&grid)?, 0.0);
    let stepper = cfg.stepper();
    let (mut report, last) = if cfg.certify {
        let run = run_certified(&state, &p, &stepper, cfg.cert_t0)?;
        if let Some(path) = &cfg.outputs.certificate_json {
            write_json(&run, path)?;
        }
        (run.report, None)
    } else {
        let (r, s) = integrate_to_state(&state, &p, &stepper, &mut [])?;
        (r, Some(s))
    };
    report.config_echo = cfg.to_pairs();
    write_run(cfg, &report, last.as_ref())?;
    summary(&report);
    if cfg.decay && report.status == RunStatus::Ok && p.model == Model::KellerSegel {
        let d = run_decay_experiment(&state.field, &p, &stepper)?;
        println!(
            "decay |u-m|_0 rate {:.4} (bound {:.4}) r2 {:.5}",
            d.fitted_rate_l2,
            d.theoretical_rate(0.0),
            d.r_squared
        );
    }
    Ok(status_code(report.status))
}

fn certify(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let datum = cfg.datum(&grid)?;
    let z0 = match p.model {
        Model::KellerSegel => primitive_datum(&datum, &p)?,
        Model::Burgers | Model::WEquation => datum,
    };
    let burgers = p.with_model(Model::Burgers);
    let run = match run_certified(&State::new(z0, 0.0), &burgers, &cfg.stepper(), cfg.cert_t0) {
        Ok(r) => r,
        Err(e @ Error::RunFailed { .. }) => {
            eprintln!("fks: no certificate: {e}");
            return Ok(EXIT_CERT_VIOLATION);
        }
        Err(e) => return Err(e),
    };
    let mut report = run.report.clone();
    report.config_echo = cfg.to_pairs();
    write_run(cfg, &report, None)?;
    if let Some(path) = &cfg.outputs.certificate_json {
        write_json(&run, path)?;
    }
    summary(&report);
    println!(
        "certificate log B {:.6e} log N {:.6e} K {:.6} Gamma {:.6} conditions {} min margin {:.6e} at t {:?}",
        run.certificate.log_b(),
        run.certificate.log_n(),
        run.certificate.k(),
        run.gamma,
        if run.conditions.all_ok() { "ok" } else { "FAILED" },
        run.min_margin(),
        run.worst_time
    );
    Ok(if run.passed() { EXIT_OK } else { EXIT_CERT_VIOLATION })
}

fn correspond(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?.with_model(Model::KellerSegel);
    let grid = cfg.grid()?;
    let u0 = cfg.datum(&grid)?;
    let u0 = if cfg.model == Model::KellerSegel {
        u0
    } else {
        cfg.initial.sample(&grid, p.mass)
    };
    let err = match roundtrip_error(&u0, &p, &cfg.stepper()) {
        Ok(e) => e,
        Err(e @ Error::RunFailed { .. }) => {
            eprintln!("fks: {e}");
            return Ok(EXIT_CORRESPONDENCE);
        }
        Err(e) => return Err(e),
    };
    println!(
        "|u_A - u_B|_inf = {err:.6e} at t = {:?} (tolerance {:.1e})",
        cfg.t_end, cfg.correspond_tolerance
    );
    if let Some(path) = &cfg.outputs.report_json {
        write_json(
            &json!({ "discrepancy": err, "tolerance": cfg.correspond_tolerance, "config": cfg.to_pairs() }),
            path,
        )?;
    }
    Ok(if err <= cfg.correspond_tolerance {
        EXIT_OK
    } else {
        EXIT_CORRESPONDENCE
    })
}

fn decay(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?.with_model(Model::KellerSegel);
    let grid = cfg.grid()?;
    let u0 = cfg.initial.sample(&grid, p.mass);
    let d = run_decay_experiment(&u0, &p, &cfg.stepper())?;
    let bound = d.theoretical_rate(0.0);
    println!("fit window [{:?}, {:?}], status {}", d.fit_window.0, d.fit_window.1, d.status);
    println!("|u-m|_0     rate {:.5} bound {:.5} r2 {:.6}", d.fitted_rate_l2, bound, d.r_squared);
    println!("|W|_0       rate {:.5} bound {:.5} r2 {:.6}", d.fitted_rate_w, bound, d.r_squared_w);
    println!(
        "|u-m|_H1/2  rate {:.5} bound {:.5} r2 {:.6}",
        d.fitted_rate_h_half,
        d.theoretical_rate(0.5),
        d.r_squared_h_half
    );
    println!("|u-m|_inf   rate {:.5}", d.fitted_rate_sup);
    if let Some(path) = &cfg.outputs.report_json {
        write_json(&json!({ "decay": d, "config": cfg.to_pairs() }), path)?;
    }
    Ok(if d.passed() { EXIT_OK } else { EXIT_DECAY })
}

fn sweep(cfg: &RunConfig) -> Result<i32> {
    if cfg.sweep_alphas.is_empty() || cfg.sweep_amplitudes.is_empty() {
        return Err(Error::config(0, "sweep_alphas", "sweep needs sweep_alphas and sweep_amplitudes"));
    }
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let cells = run_phase_sweep(&grid, &cfg.sweep_alphas, &cfg.sweep_amplitudes, &p, &cfg.stepper());
    match &cfg.outputs.sweep_csv {
        Some(path) => write_sweep(&cells, path)?,
        None => print!("{}", sweep_csv(&cells)),
    }
    if let Some(path) = &cfg.outputs.report_json {
        write_json(&json!({ "cells": cells, "config": cfg.to_pairs() }), path)?;
    }
    for c in &cells {
        println!(
            "alpha {:<6} A {:<8} {:<12} max |d_x|_inf {:.4e} t {:?}{}",
            c.alpha_diff,
            c.amplitude,
            c.classification.as_str(),
            c.max_grad,
            c.t_terminal,
            if c.review { " REVIEW" } else { "" }
        );
    }
    Ok(EXIT_OK)
}
