use serde::{Deserialize, Serialize};

use super::Field;

/// Norms of a field, all with plain (not averaged) integrals over `[-L, L]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    pub l2: f64,
    pub sup: f64,
    pub l4: f64,
    /// `|Lambda^{1/2} f|_0`
    pub h_half_homog: f64,
    /// `(s, (|f|_0^2 + |Lambda^s f|_0^2)^{1/2})` for each requested `s`.
    pub h_s: Vec<(f64, f64)>,
}

impl NormSet {
    pub fn h(&self, s: f64) -> Option<f64> {
        self.h_s.iter().find(|(t, _)| *t == s).map(|(_, v)| *v)
    }
}

pub fn norms(f: &Field, s_list: &[f64]) -> NormSet {
    let dx = f.grid().dx();
    let l2 = l2_norm(f);
    let l4 = (dx * f.values().iter().map(|v| v.powi(4)).sum::<f64>()).powf(0.25);
    let spec = f.spectrum();
    let h_s = s_list
        .iter()
        .map(|&s| {
            let hom = homogeneous_from_spectrum(f, &spec, s);
            (s, (l2 * l2 + hom * hom).sqrt())
        })
        .collect();
    NormSet {
        l2,
        sup: sup_norm(f),
        l4,
        h_half_homog: homogeneous_from_spectrum(f, &spec, 0.5),
        h_s,
    }
}

pub fn l2_norm(f: &Field) -> f64 {
    let dx = f.grid().dx();
    (dx * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn sup_norm(f: &Field) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `|Lambda^s f|_0` by Parseval. The Nyquist mode is included here so that
/// the spectral and quadrature norms see the same content.
pub fn homogeneous_norm(f: &Field, s: f64) -> f64 {
    homogeneous_from_spectrum(f, &f.spectrum(), s)
}

fn homogeneous_from_spectrum(f: &Field, spec: &[num_complex::Complex64], s: f64) -> f64 {
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let sum: f64 = spec
        .iter()
        .zip(xi)
        .filter(|(_, &x)| x != 0.0)
        .map(|(c, &x)| x.abs().powf(2.0 * s) * c.norm_sqr())
        .sum();
    (grid.period() * sum).sqrt()
}
