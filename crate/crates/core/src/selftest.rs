//! Operator self-checks run by `fks validate`. Each compares an operator
//! against a closed form on a fixed grid.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificate::{build_certificate, check_conditions, radial_stationary_jet};
use crate::dynamics::{Model, ModelParams, State};
use crate::spectral::{
    derivative, fractional_laplacian, hilbert, lambda_kernel_quadrature, make_grid,
    solve_poisson_zero_mean, sup_norm, Field, Grid,
};
use crate::timestepper::{phi_functions, step};

pub const OPERATOR_RTOL: f64 = 1e-12;
pub const KERNEL_RTOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    /// Worst relative error (or residual) seen.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.max_abs_diff(b) / sup_norm(b).max(f64::MIN_POSITIVE)
}

/// `|Lambda^a cos(kx) - k^a cos(kx)|_inf / k^a` over `a in {1/2, 1, 2}` and
/// every `1 <= k <= n/3`.
pub fn lambda_on_cosines(n: usize) -> f64 {
    let g = make_grid(n, PI).expect("valid grid");
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for k in 1..=g.dealias_cutoff() {
            let kf = k as f64;
            let f = Field::from_fn(&g, |x| (kf * x).cos());
            let lf = fractional_laplacian(&f, a).expect("valid exponent");
            worst = worst.max(rel(&lf, &f.scaled(kf.powf(a))));
        }
    }
    worst
}

/// Worst relative gap on the `k`-th Fourier coefficient alone, which
/// isolates the symbol from rounding noise in the other modes.
pub fn lambda_symbol_on_cosines(n: usize) -> f64 {
    let g = make_grid(n, PI).expect("valid grid");
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for k in 1..=g.dealias_cutoff() {
            let kf = k as f64;
            let f = Field::from_fn(&g, |x| (kf * x).cos());
            let lf = fractional_laplacian(&f, a).expect("valid exponent");
            let i = k as usize;
            let expect = f.spectrum()[i] * kf.powf(a);
            worst = worst.max((lf.spectrum()[i] - expect).norm() / expect.norm());
        }
    }
    worst
}

/// `cos(k x_j)` with `k x_j` reduced mod `2 pi` in integer arithmetic, so the
/// sample has no phase error growing with `k`. Needs `L = pi`.
fn grid_cosine(g: &Arc<Grid>, k: usize) -> Field {
    let n = g.n();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut f = Field::zeros(g);
    for (j, v) in f.values_mut().iter_mut().enumerate() {
        *v = sign * (2.0 * PI * ((k * j) % n) as f64 / n as f64).cos();
    }
    f
}

/// Worst relative gap between the kernel quadrature and the multiplier over
/// `fields` random band-limited fields.
pub fn kernel_vs_multiplier(n: usize, fields: usize, seed: u64) -> f64 {
    let g = make_grid(n, PI).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..fields)
        .map(|_| {
            let f = Field::random_band_limited(&g, (n / 3) as u32, 0.3, &mut rng);
            let q = lambda_kernel_quadrature(&f, 4 * n).expect("period is 2 pi");
            rel(&q, &fractional_laplacian(&f, 1.0).expect("valid exponent"))
        })
        .fold(0.0, f64::max)
}

pub fn run_self_test() -> Vec<Check> {
    let n = 256;
    let g = make_grid(n, PI).expect("valid grid");
    let mut checks = vec![
        Check {
            name: "Lambda^a cos(kx) = k^a cos(kx)",
            error: lambda_on_cosines(n),
            tolerance: OPERATOR_RTOL,
        },
        Check {
            name: "Lambda^a symbol on the k-th coefficient",
            error: lambda_symbol_on_cosines(n),
            tolerance: OPERATOR_RTOL,
        },
    ];

    let mut hil: f64 = 0.0;
    let mut der: f64 = 0.0;
    let mut poi: f64 = 0.0;
    for k in 1..=g.dealias_cutoff() {
        let kf = k as f64;
        let c = Field::from_fn(&g, |x| (kf * x).cos());
        let s = Field::from_fn(&g, |x| (kf * x).sin());
        hil = hil.max(rel(&hilbert(&c), &s));
        der = der.max(rel(&derivative(&s), &c.scaled(kf)) / kf.max(1.0));
        let c = grid_cosine(&g, k as usize);
        let p = solve_poisson_zero_mean(&c).expect("zero mean");
        poi = poi.max(rel(&p, &c.scaled(1.0 / (kf * kf))));
    }
    checks.push(Check {
        name: "H cos(kx) = sin(kx)",
        error: hil,
        tolerance: OPERATOR_RTOL,
    });
    checks.push(Check {
        name: "d/dx sin(kx) = k cos(kx)",
        error: der,
        tolerance: OPERATOR_RTOL,
    });
    checks.push(Check {
        name: "(-d^2/dx^2)^{-1} cos(kx) = cos(kx)/k^2",
        error: poi,
        tolerance: OPERATOR_RTOL,
    });
    checks.push(Check {
        name: "sin^2 kernel quadrature = multiplier",
        error: kernel_vs_multiplier(64, 5, 1),
        tolerance: KERNEL_RTOL,
    });

    let phi = phi_functions(0.0);
    checks.push(Check {
        name: "phi_k(0) = 1/k!",
        error: [1.0, 1.0, 0.5, 1.0 / 6.0]
            .iter()
            .zip(phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        tolerance: 1e-15,
    });

    let p = ModelParams::new(Model::Burgers, 1.0, 0.0, 0.0).expect("valid params");
    let f = Field::from_fn(&g, |x| (3.0 * x).cos());
    let out = step(&State::new(f.clone(), 0.0), 0.25, &p).expect("valid step");
    checks.push(Check {
        name: "exact linear step",
        error: rel(&out.state.field, &f.scaled((-0.75f64).exp())),
        tolerance: OPERATOR_RTOL,
    });

    let z = Field::from_fn(&g, |x| x.sin() + 0.3 * (4.0 * x).cos());
    let gamma = E;
    let cert = build_certificate(&z, gamma).expect("non-constant field");
    let report = check_conditions(&cert, gamma, sup_norm(&z), sup_norm(&derivative(&z)));
    checks.push(Check {
        name: "certificate recipe conditions",
        error: if report.all_ok() { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });

    let residual = (1..=1000)
        .map(|i| {
            let r = i as f64 / 1000.0;
            let [s, d1, d2] = radial_stationary_jet(r, 1.0, 2.0).expect("subcritical");
            (r * d2 + 0.5 * s * d1).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "radial stationary residual",
        error: residual,
        tolerance: 1e-10,
    });
    checks
}
