use num_complex::Complex64;

use super::Field;
use crate::error::{Error, Result};

/// `Lambda^a f`, the multiplier `|xi|^a`, for `a` in `(0, 2]`.
pub fn fractional_laplacian(f: &Field, a: f64) -> Result<Field> {
    check_exponent(a)?;
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let values = grid.apply_symbol(f.values(), |j| Complex64::new(xi[j].abs().powf(a), 0.0));
    Ok(Field::from_vec(grid, values))
}

pub(crate) fn check_exponent(a: f64) -> Result<()> {
    if a > 0.0 && a <= 2.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "alpha",
            value: a,
            expected: "(0, 2]",
        })
    }
}

/// Periodic Hilbert transform, multiplier `-i sgn(xi)`, so that
/// `d/dx H = Lambda`.
pub fn hilbert(f: &Field) -> Field {
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let values = grid.apply_symbol(f.values(), |j| Complex64::new(0.0, -sgn(xi[j])));
    Field::from_vec(grid, values)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn derivative(f: &Field) -> Field {
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let values = grid.apply_symbol(f.values(), |j| Complex64::new(0.0, xi[j]));
    Field::from_vec(grid, values)
}

/// Zero-mean solution `v` of `-v'' = g`. The right side must itself have
/// zero mean, otherwise the problem has no periodic solution.
pub fn solve_poisson_zero_mean(g: &Field) -> Result<Field> {
    g.require_zero_mean()?;
    let grid = g.grid();
    let xi = grid.wavenumbers();
    let values = grid.apply_symbol(g.values(), |j| {
        if xi[j] == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / (xi[j] * xi[j]), 0.0)
        }
    });
    Ok(Field::from_vec(grid, values))
}
