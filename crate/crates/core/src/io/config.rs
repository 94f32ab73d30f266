//! `key = value` run configuration. One pair per line, `#` starts a comment.

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::spectral::{make_grid, Field, Grid};
use crate::timestepper::StepperConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// `offset + amplitude cos(mode x)` in units of the fundamental `pi/L`.
    Cosine { amplitude: f64, mode: u32 },
    /// `offset + sum a_k cos(k x) + b_k sin(k x)`, entries `k:a_k:b_k`.
    Coefficients(Vec<(u32, f64, f64)>),
    Random { seed: u64, band: u32 },
}

impl InitialDatum {
    fn kind(&self) -> &'static str {
        match self {
            InitialDatum::Cosine { .. } => "cosine",
            InitialDatum::Coefficients(_) => "coefficients",
            InitialDatum::Random { .. } => "random",
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>, offset: f64) -> Field {
        match self {
            InitialDatum::Cosine { amplitude, mode } => {
                Field::from_modes(grid, offset, &[(*mode, *amplitude, 0.0)])
            }
            InitialDatum::Coefficients(c) => Field::from_modes(grid, offset, c),
            InitialDatum::Random { seed, band } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Field::random_band_limited(grid, *band, offset, &mut rng)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    pub series_csv: Option<PathBuf>,
    pub snapshot_json: Option<PathBuf>,
    pub certificate_json: Option<PathBuf>,
    pub plot_svg: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub alpha_diff: f64,
    pub chi: f64,
    pub mass: f64,
    pub half_length: f64,
    pub n: usize,
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub monitor_cadence: f64,
    pub blowup_grad_threshold: f64,
    pub initial: InitialDatum,
    pub outputs: Outputs,
    pub certify: bool,
    pub decay: bool,
    pub cert_t0: f64,
    pub correspond_tolerance: f64,
    pub sweep_alphas: Vec<f64>,
    pub sweep_amplitudes: Vec<f64>,
}

const KEYS: &[&str] = &[
    "model",
    "alpha_diff",
    "chi",
    "mass",
    "half_length",
    "n",
    "t_end",
    "dt_init",
    "dt_min",
    "cfl",
    "monitor_cadence",
    "blowup_grad_threshold",
    "initial",
    "amplitude",
    "mode",
    "coefficients",
    "seed",
    "band",
    "series_csv",
    "snapshot_json",
    "certificate_json",
    "plot_svg",
    "report_json",
    "sweep_csv",
    "certify",
    "decay",
    "cert_t0",
    "correspond_tolerance",
    "sweep_alphas",
    "sweep_amplitudes",
];

struct Entry {
    line: usize,
    value: String,
}

struct Table(Vec<(String, Entry)>);

impl Table {
    fn take(&mut self, key: &str) -> Option<Entry> {
        let i = self.0.iter().position(|(k, _)| k == key)?;
        Some(self.0.remove(i).1)
    }

    fn parsed<T>(&mut self, key: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<(T, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(|v| Some((v, e.line)))
                .ok_or_else(|| Error::config(e.line, key, format!("expected {what}, got {:?}", e.value))),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<(f64, usize)>> {
        self.parsed(key, |s| s.parse::<f64>().ok(), "a real number")
    }

    fn real_or(&mut self, key: &str, default: f64) -> Result<(f64, usize)> {
        Ok(self.real(key)?.unwrap_or((default, 0)))
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().ok()).collect()
}

fn parse_coefficients(s: &str) -> Option<Vec<(u32, f64, f64)>> {
    s.split(',')
        .map(|item| {
            let mut parts = item.trim().split(':');
            let k = parts.next()?.trim().parse().ok()?;
            let a = parts.next()?.trim().parse().ok()?;
            let b = parts.next()?.trim().parse().ok()?;
            parts.next().is_none().then_some((k, a, b))
        })
        .collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn positive(key: &str, (v, line): (f64, usize)) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(line, key, format!("must be positive and finite, got {v}")))
    }
}

fn require<T>(key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::config(0, key, "required key is missing"))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(String, Entry)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::config(line, content, "expected `key = value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::config(line, key, "unknown key"));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(Error::config(line, key, "duplicate key"));
        }
        entries.push((
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        ));
    }
    let mut t = Table(entries);

    let (model, _) = require("model", t.parsed("model", |s| s.parse::<Model>().ok(), "a model name")?)?;
    let (alpha_diff, alpha_line) = require("alpha_diff", t.real("alpha_diff")?)?;
    let t_end = positive("t_end", require("t_end", t.real("t_end")?)?)?;
    let (chi, chi_line) = t.real_or("chi", 1.0)?;
    let (mass, mass_line) = t.real_or("mass", 1.0)?;
    let half_length = positive("half_length", t.real_or("half_length", std::f64::consts::PI)?)?;
    let (n, n_line) = t
        .parsed("n", |s| s.parse::<usize>().ok(), "a positive integer")?
        .unwrap_or((256, 0));
    let dt_init = positive("dt_init", t.real_or("dt_init", 1e-2)?)?;
    let (dt_min, dt_min_line) = t.real_or("dt_min", 1e-9)?;
    let dt_min = positive("dt_min", (dt_min, dt_min_line))?;
    let (cfl, cfl_line) = t.real_or("cfl", 0.4)?;
    let monitor_cadence = positive("monitor_cadence", t.real_or("monitor_cadence", 0.1)?)?;
    let blowup_grad_threshold =
        positive("blowup_grad_threshold", t.real_or("blowup_grad_threshold", 1e6)?)?;

    let kind = t.take("initial");
    let (kind_name, kind_line) = kind
        .as_ref()
        .map_or(("cosine", 0), |e| (e.value.as_str(), e.line));
    let initial = match kind_name {
        "cosine" => {
            let (amplitude, _) = t.real_or("amplitude", 1.0)?;
            let (mode, _) = t
                .parsed("mode", |s| s.parse::<u32>().ok(), "a nonnegative integer")?
                .unwrap_or((1, 0));
            InitialDatum::Cosine { amplitude, mode }
        }
        "coefficients" => {
            let (c, _) = require(
                "coefficients",
                t.parsed("coefficients", parse_coefficients, "a list of k:a_k:b_k")?,
            )?;
            InitialDatum::Coefficients(c)
        }
        "random" => {
            let (seed, _) = t
                .parsed("seed", |s| s.parse::<u64>().ok(), "an unsigned integer")?
                .unwrap_or((0, 0));
            let (band, _) = t
                .parsed("band", |s| s.parse::<u32>().ok(), "a nonnegative integer")?
                .unwrap_or((8, 0));
            InitialDatum::Random { seed, band }
        }
        other => {
            return Err(Error::config(
                kind_line,
                "initial",
                format!("expected cosine, coefficients or random, got {other:?}"),
            ))
        }
    };

    let path = |t: &mut Table, key: &str| t.take(key).map(|e| PathBuf::from(e.value));
    let outputs = Outputs {
        series_csv: path(&mut t, "series_csv"),
        snapshot_json: path(&mut t, "snapshot_json"),
        certificate_json: path(&mut t, "certificate_json"),
        plot_svg: path(&mut t, "plot_svg"),
        report_json: path(&mut t, "report_json"),
        sweep_csv: path(&mut t, "sweep_csv"),
    };
    let certify = t.parsed("certify", parse_bool, "true or false")?.is_some_and(|v| v.0);
    let decay = t.parsed("decay", parse_bool, "true or false")?.is_some_and(|v| v.0);
    let (cert_t0, cert_line) = t.real_or("cert_t0", 0.01)?;
    let correspond_tolerance =
        positive("correspond_tolerance", t.real_or("correspond_tolerance", 1e-8)?)?;
    let list = |t: &mut Table, key: &str| -> Result<Vec<f64>> {
        Ok(t.parsed(key, parse_list, "a comma-separated list of reals")?
            .map_or_else(Vec::new, |v| v.0))
    };
    let sweep_alphas = list(&mut t, "sweep_alphas")?;
    let sweep_amplitudes = list(&mut t, "sweep_amplitudes")?;

    // Keys valid in general but not for the chosen datum.
    if let Some((key, e)) = t.0.first() {
        return Err(Error::config(
            e.line,
            key.as_str(),
            format!("not used with initial = {}", initial.kind()),
        ));
    }

    let cfg = RunConfig {
        model,
        alpha_diff,
        chi,
        mass,
        half_length,
        n,
        t_end,
        dt_init,
        dt_min,
        cfl,
        monitor_cadence,
        blowup_grad_threshold,
        initial,
        outputs,
        certify,
        decay,
        cert_t0,
        correspond_tolerance,
        sweep_alphas,
        sweep_amplitudes,
    };

    // Re-validate through the consuming modules, attributing failures to keys.
    let blame = |key: &str, line: usize, e: Error| Error::config(line, key, e.to_string());
    if let Err(e) = cfg.params() {
        let (key, line) = match &e {
            Error::OutOfRange { name: "chi", .. } => ("chi", chi_line),
            Error::OutOfRange { name: "mass", .. } => ("mass", mass_line),
            _ => ("alpha_diff", alpha_line),
        };
        return Err(blame(key, line, e));
    }
    if let Err(e) = make_grid(n, half_length) {
        return Err(blame("n", n_line, e));
    }
    if let Err(e) = cfg.stepper().validate() {
        let (key, line) = match &e {
            Error::OutOfRange { name: "cfl", .. } => ("cfl", cfl_line),
            _ => ("dt_min", dt_min_line),
        };
        return Err(blame(key, line, e));
    }
    if !(cert_t0 >= 0.0 && cert_t0 < t_end) {
        return Err(Error::config(cert_line, "cert_t0", "must lie in [0, t_end)"));
    }
    if let InitialDatum::Cosine { mode, .. } | InitialDatum::Random { band: mode, .. } = cfg.initial {
        if mode as usize >= n / 2 {
            return Err(Error::config(0, "mode", format!("{mode} is not below n/2")));
        }
    }
    Ok(cfg)
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| real(*x)).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model, self.alpha_diff, self.chi, self.mass)
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            cfl: self.cfl,
            t_end: self.t_end,
            blowup_grad_threshold: self.blowup_grad_threshold,
            monitor_cadence: self.monitor_cadence,
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        make_grid(self.n, self.half_length)
    }

    /// The initial datum with the mean its model requires.
    pub fn datum(&self, grid: &Arc<Grid>) -> Result<Field> {
        Ok(self.initial.sample(grid, self.params()?.field_mean()))
    }

    /// Every recognised key with its value; feeding the pairs back through
    /// [`parse_config`] reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = vec![
            ("model", self.model.to_string()),
            ("alpha_diff", real(self.alpha_diff)),
            ("chi", real(self.chi)),
            ("mass", real(self.mass)),
            ("half_length", real(self.half_length)),
            ("n", self.n.to_string()),
            ("t_end", real(self.t_end)),
            ("dt_init", real(self.dt_init)),
            ("dt_min", real(self.dt_min)),
            ("cfl", real(self.cfl)),
            ("monitor_cadence", real(self.monitor_cadence)),
            ("blowup_grad_threshold", real(self.blowup_grad_threshold)),
            ("initial", self.initial.kind().to_string()),
        ];
        match &self.initial {
            InitialDatum::Cosine { amplitude, mode } => {
                out.push(("amplitude", real(*amplitude)));
                out.push(("mode", mode.to_string()));
            }
            InitialDatum::Coefficients(c) => {
                let s = c
                    .iter()
                    .map(|(k, a, b)| format!("{k}:{}:{}", real(*a), real(*b)))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push(("coefficients", s));
            }
            InitialDatum::Random { seed, band } => {
                out.push(("seed", seed.to_string()));
                out.push(("band", band.to_string()));
            }
        }
        let o = &self.outputs;
        for (key, p) in [
            ("series_csv", &o.series_csv),
            ("snapshot_json", &o.snapshot_json),
            ("certificate_json", &o.certificate_json),
            ("plot_svg", &o.plot_svg),
            ("report_json", &o.report_json),
            ("sweep_csv", &o.sweep_csv),
        ] {
            if let Some(p) = p {
                out.push((key, p.display().to_string()));
            }
        }
        out.push(("certify", self.certify.to_string()));
        out.push(("decay", self.decay.to_string()));
        out.push(("cert_t0", real(self.cert_t0)));
        out.push(("correspond_tolerance", real(self.correspond_tolerance)));
        out.push(("sweep_alphas", list(&self.sweep_alphas)));
        out.push(("sweep_amplitudes", list(&self.sweep_amplitudes)));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
