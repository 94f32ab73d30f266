//! Moduli of continuity of the form
//!
//! ```text
//! omega(xi) = B xi / (1 + K sqrt(B xi))   for xi < xi0
//!           = C ln(B xi)                  for xi >= xi0
//! ```
//!
//! with the explicit parameter recipe, the sufficient conditions, a two-point
//! violation scanner and the radial stationary profile.
//!
//! For large data `N` and `B` overflow `f64` (`ln N` grows linearly in
//! `|Z|_inf` with a slope above a thousand), so the certificate stores
//! `ln B`, `ln N` and the product `B xi0`, from which everything else follows.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::{derivative, sup_norm, Field};

/// Rows per parallel task in [`scan_violation`].
const SCAN_BLOCK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusCertificate {
    k: f64,
    log_b: f64,
    b_xi0: f64,
    log_n: f64,
    a: f64,
    gamma: f64,
}

impl ModulusCertificate {
    /// From plain values; `n >= 1`.
    pub fn new(k: f64, b: f64, xi0: f64, n: f64, gamma: f64) -> Result<Self> {
        Self::from_logs(k, b.ln(), b * xi0, n.ln(), gamma)
    }

    pub fn from_logs(k: f64, log_b: f64, b_xi0: f64, log_n: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("K", k), ("B xi0", b_xi0), ("Gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "> 0",
                });
            }
        }
        if b_xi0 <= 1.0 {
            // ln(B xi0) must be positive for C to exist.
            return Err(Error::OutOfRange {
                name: "B xi0",
                value: b_xi0,
                expected: "> 1",
            });
        }
        if !log_b.is_finite() {
            return Err(Error::OutOfRange {
                name: "ln B",
                value: log_b,
                expected: "finite",
            });
        }
        if !(log_n >= 0.0 && log_n.is_finite()) {
            return Err(Error::OutOfRange {
                name: "ln N",
                value: log_n,
                expected: ">= 0",
            });
        }
        Ok(ModulusCertificate {
            k,
            log_b,
            b_xi0,
            log_n,
            a: 0.5,
            gamma,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `omega'(0)`; may be `inf` when only `ln B` is representable.
    pub fn b(&self) -> f64 {
        self.log_b.exp()
    }

    pub fn log_b(&self) -> f64 {
        self.log_b
    }

    pub fn xi0(&self) -> f64 {
        (self.b_xi0.ln() - self.log_b).exp()
    }

    pub fn b_xi0(&self) -> f64 {
        self.b_xi0
    }

    pub fn n(&self) -> f64 {
        self.log_n.exp()
    }

    pub fn log_n(&self) -> f64 {
        self.log_n
    }

    /// `B xi0 / (ln(B xi0) (1 + K sqrt(B xi0)))`, which makes `omega`
    /// continuous at `xi0`. It does not depend on `B` alone.
    pub fn c(&self) -> f64 {
        self.b_xi0 / (self.b_xi0.ln() * self.denom())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn denom(&self) -> f64 {
        1.0 + self.k * self.b_xi0.sqrt()
    }

    /// `omega'(xi)` for `xi > 0`.
    pub fn slope(&self, xi: f64) -> f64 {
        let lb = self.log_b + xi.ln();
        if lb < self.b_xi0.ln() {
            let s = lb.exp().sqrt();
            let d = 1.0 + self.k * s;
            self.b() * (1.0 + 0.5 * self.k * s) / (d * d)
        } else {
            self.c() / xi
        }
    }
}

impl Serialize for ModulusCertificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let finite = |v: f64| v.is_finite().then_some(v);
        let mut map = s.serialize_map(Some(9))?;
        map.serialize_entry("K", &self.k)?;
        map.serialize_entry("B", &finite(self.b()))?;
        map.serialize_entry("xi0", &finite(self.xi0()))?;
        map.serialize_entry("N", &finite(self.n()))?;
        map.serialize_entry("C", &self.c())?;
        map.serialize_entry("a", &self.a)?;
        map.serialize_entry("Gamma", &self.gamma)?;
        map.serialize_entry("log_B", &self.log_b)?;
        map.serialize_entry("log_N", &self.log_n)?;
        map.end()
    }
}

pub fn modulus_eval(cert: &ModulusCertificate, xi: f64) -> Result<f64> {
    if xi.is_nan() || xi < 0.0 {
        return Err(Error::OutOfRange {
            name: "xi",
            value: xi,
            expected: ">= 0",
        });
    }
    Ok(eval(cert, xi))
}

fn eval(cert: &ModulusCertificate, xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let lb = cert.log_b + xi.ln();
    if lb < cert.b_xi0.ln() {
        let bx = lb.exp();
        bx / (1.0 + cert.k * bx.sqrt())
    } else {
        cert.c() * lb
    }
}

pub fn modulus_slope_at_zero(cert: &ModulusCertificate) -> f64 {
    cert.b()
}

/// The recipe: `B xi0 = e^2`, `K = 4 pi Gamma e`,
/// `N = max(1, exp((1 + 4 pi Gamma e^2) |Z|_inf - 2))`,
/// `B = 2 N |d_x Z|_inf (1 + 4 pi Gamma e^2)`.
pub fn build_certificate(z: &Field, gamma: f64) -> Result<ModulusCertificate> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::OutOfRange {
            name: "Gamma",
            value: gamma,
            expected: "> 0",
        });
    }
    z.require_zero_mean()?;
    let sup_z = sup_norm(z);
    let sup_dz = sup_norm(&derivative(z));
    if sup_dz == 0.0 || sup_z == 0.0 {
        return Err(Error::ConstantField);
    }
    let s = 1.0 + 4.0 * PI * gamma * E * E;
    let log_n = (s * sup_z - 2.0).max(0.0);
    let log_b = 2f64.ln() + log_n + sup_dz.ln() + s.ln();
    ModulusCertificate::from_logs(4.0 * PI * gamma * E, log_b, E * E, log_n, gamma)
}

/// Signed slack of every sufficient condition; positive means satisfied
/// (zero is enough for the two non-strict ones). Slope and middle margins
/// are differences of logarithms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionMargins {
    pub concavity: f64,
    pub small_scale: f64,
    pub log_scale: f64,
    pub slope_datum: f64,
    pub middle_datum: f64,
    pub far_datum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub concavity_ok: bool,
    pub small_scale_ok: bool,
    pub log_scale_ok: bool,
    pub slope_datum_ok: bool,
    pub middle_datum_ok: bool,
    pub far_datum_ok: bool,
    pub margins: ConditionMargins,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.concavity_ok
            && self.small_scale_ok
            && self.log_scale_ok
            && self.slope_datum_ok
            && self.middle_datum_ok
            && self.far_datum_ok
    }
}

pub fn check_conditions(
    cert: &ModulusCertificate,
    gamma: f64,
    sup_z: f64,
    sup_dz: f64,
) -> ConditionReport {
    let bx = cert.b_xi0;
    let sq = bx.sqrt();
    let denom = 1.0 + cert.k * sq;
    let log_lead = cert.log_b - denom.ln();
    let margins = ConditionMargins {
        concavity: bx - E * E,
        small_scale: cert.k - 2.0 * PI * gamma * sq,
        log_scale: bx.ln() * denom - gamma * PI * bx,
        slope_datum: log_lead - sup_dz.ln(),
        middle_datum: log_lead - cert.log_n - sup_dz.ln(),
        // omega(N xi0) against the largest possible increment.
        far_datum: bx / denom * (cert.log_n + bx.ln()) / bx.ln() - 2.0 * sup_z,
    };
    ConditionReport {
        concavity_ok: margins.concavity >= 0.0,
        small_scale_ok: margins.small_scale > 0.0,
        log_scale_ok: margins.log_scale > 0.0,
        slope_datum_ok: margins.slope_datum >= 0.0,
        middle_datum_ok: margins.middle_datum > 0.0,
        far_datum_ok: margins.far_datum > 0.0,
        margins,
    }
}

/// `(1 + K (1 - a) xi^a)(pi Gamma xi^{1-a} - K a) < K a^2`, literally.
pub fn generic_small_scale_condition(k: f64, gamma: f64, a: f64, xi: f64) -> bool {
    (1.0 + k * (1.0 - a) * xi.powf(a)) * (PI * gamma * xi.powf(1.0 - a) - k * a) < k * a * a
}

/// Worst pair of a [`scan_violation`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    /// `min over pairs of omega(d(x_i, x_j)) - |f(x_i) - f(x_j)|`
    pub min_margin: f64,
    pub pair: (usize, usize),
    /// Geodesic distance of the worst pair.
    pub distance: f64,
}

/// Checks `|f(x) - f(y)| <= omega(d(x, y))` over every pair of distinct grid
/// points, with `d` the geodesic distance on the circle.
pub fn scan_violation(field: &Field, cert: &ModulusCertificate) -> ScanResult {
    let n = field.len();
    let dx = field.grid().dx();
    // omega at every possible index offset 0..=n/2
    let table: Vec<f64> = (0..=n / 2).map(|s| eval(cert, s as f64 * dx)).collect();
    let f = field.values();

    let best_in_rows = |rows: std::ops::Range<usize>| {
        let mut best = (f64::INFINITY, (0, 1));
        for i in rows {
            let fi = f[i];
            for (j, &fj) in f.iter().enumerate().skip(i + 1) {
                let s = (j - i).min(n - (j - i));
                let m = table[s] - (fi - fj).abs();
                if m < best.0 || m.is_nan() {
                    best = (m, (i, j));
                    if m.is_nan() {
                        return best;
                    }
                }
            }
        }
        best
    };
    let blocks: Vec<usize> = (0..n).step_by(SCAN_BLOCK).collect();
    let (min_margin, pair) = blocks
        .par_iter()
        .map(|&start| best_in_rows(start..(start + SCAN_BLOCK).min(n)))
        .reduce(
            || (f64::INFINITY, (0, 1)),
            |a, b| {
                // NaN first, then the smaller margin, ties to the earlier pair.
                match (a.0.is_nan(), b.0.is_nan()) {
                    (true, false) => a,
                    (false, true) => b,
                    _ if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) => b,
                    _ => a,
                }
            },
        );
    let s = (pair.1 - pair.0).min(n - (pair.1 - pair.0));
    ScanResult {
        min_margin,
        pair,
        distance: s as f64 * dx,
    }
}

/// `|d_x f|_inf < omega'(0) = B`.
pub fn derivative_bound_check(field: &Field, cert: &ModulusCertificate) -> bool {
    let d = sup_norm(&derivative(field));
    d == 0.0 || d.ln() < cert.log_b
}

/// `S(r) = (4/chi) r / (4/(chi S1) - 1 + r)` on `r in [0, 1]`.
pub fn radial_stationary(r: f64, chi: f64, s1: f64) -> Result<f64> {
    Ok(radial_stationary_jet(r, chi, s1)?[0])
}

/// `[S, S', S'']` in closed form.
pub fn radial_stationary_jet(r: f64, chi: f64, s1: f64) -> Result<[f64; 3]> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::OutOfRange {
            name: "chi",
            value: chi,
            expected: "> 0",
        });
    }
    if !(s1 > 0.0 && s1 < 4.0 / chi) {
        return Err(Error::OutOfRange {
            name: "S1",
            value: s1,
            expected: "in (0, 4/chi): subcritical mass",
        });
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            expected: "in [0, 1]",
        });
    }
    let c = 4.0 / (chi * s1) - 1.0;
    let q = c + r;
    let lead = 4.0 / chi;
    Ok([
        lead * r / q,
        lead * c / (q * q),
        -2.0 * lead * c / (q * q * q),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_cert() -> ModulusCertificate {
        // Gamma = 1, B = e^2, xi0 = 1, K = 4 pi e
        ModulusCertificate::new(4.0 * PI * E, E * E, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn vanishes_at_zero() {
        assert_eq!(modulus_eval(&unit_cert(), 0.0).unwrap(), 0.0);
        assert!(modulus_eval(&unit_cert(), -1e-3).is_err());
    }

    #[test]
    fn closed_form_c() {
        let c = unit_cert().c();
        let expect = E * E / (2.0 * (1.0 + 4.0 * PI * E * E));
        assert!((c - expect).abs() < 1e-15 * expect);
    }

    #[test]
    fn continuous_at_spline_point() {
        let cert = unit_cert();
        let xi0 = cert.xi0();
        let left = cert.b_xi0 / cert.denom();
        let right = cert.c() * cert.b_xi0.ln();
        assert!((left - right).abs() < 1e-12);
        let below = eval(&cert, xi0 * (1.0 - 1e-13));
        let above = eval(&cert, xi0);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn slope_at_zero_by_finite_difference() {
        for b in [1.0, E * E, 40.0] {
            let cert = ModulusCertificate::new(3.0, b, 9.0 / b, 1.0, 0.1).unwrap();
            assert!((modulus_slope_at_zero(&cert) - b).abs() < 1e-15 * b);
            // omega(h)/h = B (1 - K sqrt(B h) + ...)
            let h = 1e-17;
            let fd = eval(&cert, h) / h;
            assert!((fd - b).abs() < 1e-6 * b, "{fd} vs {b}");
        }
    }

    #[test]
    fn concave_and_increasing() {
        let cert = unit_cert();
        let xs: Vec<f64> = (1..4000).map(|i| i as f64 * 1e-3).collect();
        let slopes: Vec<f64> = xs.iter().map(|&x| cert.slope(x)).collect();
        assert!(slopes.iter().all(|&s| s > 0.0));
        assert!(slopes.windows(2).all(|w| w[1] <= w[0]));
        // left slope >= right slope at the spline point
        let left = cert.slope(cert.xi0() * (1.0 - 1e-12));
        let right = cert.c() / cert.xi0();
        assert!(left >= right);
    }

    #[test]
    fn slope_matches_difference_quotient() {
        let cert = unit_cert();
        for x in [0.01, 0.3, 0.9, 1.5, 4.0] {
            let h = 1e-6;
            let fd = (eval(&cert, x + h) - eval(&cert, x - h)) / (2.0 * h);
            assert!((fd - cert.slope(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn doubling_at_log_scale() {
        let cert = unit_cert();
        for i in 0..200 {
            let xi = cert.xi0() * (1.0 + i as f64 * 0.37);
            assert!(eval(&cert, 2.0 * xi) <= 1.5 * eval(&cert, xi) + 1e-15);
        }
    }

    #[test]
    fn recipe_constants() {
        let g = make_grid(64, PI).unwrap();
        let z = Field::from_fn(&g, |x| 0.001 * x.sin());
        let cert = build_certificate(&z, 1.0).unwrap();
        assert!((cert.k() - 4.0 * PI * E).abs() < 1e-12);
        assert!((cert.k() - 34.158_936_890_694_26).abs() < 1e-12);
        // (1 + 4 pi e^2) 0.001 < 2, so N clamps to 1
        assert_eq!(cert.n(), 1.0);
        assert_eq!(cert.b_xi0(), E * E);
    }

    #[test]
    fn recipe_rejects_flat_and_biased_fields() {
        let g = make_grid(32, PI).unwrap();
        assert!(matches!(
            build_certificate(&Field::zeros(&g), 1.0),
            Err(Error::ConstantField)
        ));
        assert!(build_certificate(&Field::from_fn(&g, |x| 1.0 + x.sin()), 1.0).is_err());
        assert!(build_certificate(&Field::from_fn(&g, f64::sin), 0.0).is_err());
    }

    #[test]
    fn large_data_stays_finite_in_log_space() {
        let g = make_grid(64, PI).unwrap();
        let z = Field::from_fn(&g, |x| 50.0 * x.sin());
        let gamma = (2.5f64).exp();
        let cert = build_certificate(&z, gamma).unwrap();
        assert!(cert.b().is_infinite());
        assert!(cert.log_n() > 5e4);
        let r = check_conditions(&cert, gamma, 50.0, 50.0);
        assert!(r.all_ok(), "{r:?}");
        let scan = scan_violation(&z, &cert);
        assert!(scan.min_margin > 0.0);
        let json = serde_json::to_value(&cert).unwrap();
        assert!(json["B"].is_null());
        assert!(json["log_B"].as_f64().unwrap() > 5e4);
    }

    #[test]
    fn strict_small_scale_violation() {
        let gamma = 0.7;
        let bx = E * E;
        let k = PI * gamma * bx.sqrt();
        let cert = ModulusCertificate::from_logs(k, 3.0, bx, 0.0, gamma).unwrap();
        let r = check_conditions(&cert, gamma, 0.1, 0.1);
        assert!(!r.small_scale_ok);
        assert!(!r.all_ok());
    }

    #[test]
    fn log_scale_automatic_at_e_squared() {
        for gamma in [1e-3, 0.5, 1.0, 20.0, 1e4] {
            let k = 4.0 * PI * gamma * E;
            let cert = ModulusCertificate::from_logs(k, 0.0, E * E, 0.0, gamma).unwrap();
            assert!(check_conditions(&cert, gamma, 1.0, 1.0).log_scale_ok);
        }
    }

    #[test]
    fn generic_condition_limits() {
        let (k, gamma, a) = (4.0 * PI * E, 1.0, 0.5);
        assert!(generic_small_scale_condition(k, gamma, a, 1e-12));
        assert!(generic_small_scale_condition(k, gamma, a, E * E));
        let b = 1e3;
        assert!(generic_small_scale_condition(k, gamma, a, E * E / b));
        assert!(!generic_small_scale_condition(k, gamma, a, 1e8));
    }

    #[test]
    fn scan_of_constant_field() {
        let g = make_grid(32, PI).unwrap();
        let cert = unit_cert();
        let r = scan_violation(&Field::constant(&g, 2.0), &cert);
        assert_eq!(r.min_margin, eval(&cert, g.dx()));
        assert_eq!(r.pair, (0, 1));
    }

    #[test]
    fn scan_of_shrinking_field() {
        let g = make_grid(32, PI).unwrap();
        let cert = unit_cert();
        let f = Field::from_fn(&g, |x| (3.0 * x).sin());
        let tiny = scan_violation(&f.scaled(1e-9), &cert);
        assert!((tiny.min_margin - eval(&cert, tiny.distance)).abs() < 1e-8);
    }

    #[test]
    fn scan_matches_brute_force() {
        let g = make_grid(40, PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f = Field::random_band_limited(&g, 10, 0.0, &mut rng).scaled(40.0);
        let cert = ModulusCertificate::new(2.0, 30.0, 0.3, 1.0, 1.0).unwrap();
        let r = scan_violation(&f, &cert);
        let x = g.points();
        let mut best = f64::INFINITY;
        for i in 0..40 {
            for j in 0..40 {
                if i == j {
                    continue;
                }
                let d = (x[i] - x[j]).abs();
                let d = d.min(2.0 * PI - d);
                best = best.min(eval(&cert, d) - (f.values()[i] - f.values()[j]).abs());
            }
        }
        assert!((r.min_margin - best).abs() < 1e-12);
        assert!(r.min_margin < 0.0);
    }

    #[test]
    fn derivative_bound() {
        let g = make_grid(64, PI).unwrap();
        let cert = ModulusCertificate::new(1.0, 3.0, 3.0, 1.0, 1.0).unwrap();
        assert!(derivative_bound_check(&Field::constant(&g, 1.0), &cert));
        // |d_x (6 sin x)|_inf = 2B
        assert!(!derivative_bound_check(&Field::from_fn(&g, |x| 6.0 * x.sin()), &cert));
        assert!(derivative_bound_check(&Field::from_fn(&g, |x| 2.9 * x.sin()), &cert));
    }

    #[test]
    fn radial_profile() {
        assert_eq!(radial_stationary(1.0, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(radial_stationary(0.0, 1.0, 2.0).unwrap(), 0.0);
        for r in [0.1, 0.5, 0.9] {
            let s = radial_stationary(r, 1.0, 2.0).unwrap();
            assert!((s - 4.0 * r / (1.0 + r)).abs() < 1e-15);
        }
        assert!(radial_stationary(0.5, 1.0, 4.0).is_err());
        assert!(radial_stationary(0.5, 1.0, 5.0).is_err());
        assert!(radial_stationary(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn radial_jet_matches_differences() {
        let (chi, s1) = (1.7, 1.1);
        for r in [0.2, 0.5, 0.8] {
            let h = 1e-5;
            let [_, d1, d2] = radial_stationary_jet(r, chi, s1).unwrap();
            let sp = radial_stationary(r + h, chi, s1).unwrap();
            let s0 = radial_stationary(r, chi, s1).unwrap();
            let sm = radial_stationary(r - h, chi, s1).unwrap();
            assert!(((sp - sm) / (2.0 * h) - d1).abs() < 1e-8);
            assert!(((sp - 2.0 * s0 + sm) / (h * h) - d2).abs() < 1e-4);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn recipe_satisfies_its_conditions(
            seed in any::<u64>(),
            scale in 1e-3f64..30.0,
            gamma in 0.05f64..20.0,
            kmax in 1u32..20,
        ) {
            let g = make_grid(64, PI).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Field::random_band_limited(&g, kmax, 0.0, &mut rng).scaled(scale);
            let cert = build_certificate(&z, gamma).unwrap();
            let r = check_conditions(&cert, gamma, sup_norm(&z), sup_norm(&derivative(&z)));
            prop_assert!(r.all_ok(), "{:?}", r);
            prop_assert!(derivative_bound_check(&z, &cert));
            prop_assert!(scan_violation(&z, &cert).min_margin > 0.0);
        }

        #[test]
        fn modulus_is_monotone(x in 0.0f64..10.0, dx in 0.0f64..10.0) {
            let cert = unit_cert();
            prop_assert!(eval(&cert, x + dx) >= eval(&cert, x));
        }
    }
}
