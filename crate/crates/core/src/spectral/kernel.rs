use std::f64::consts::PI;

use super::Field;
use crate::error::{Error, Result};

/// `Lambda f` evaluated from the singular-integral form on the `2 pi` torus,
///
/// ```text
/// Lambda f(x) = 1/(4 pi) P.V. int_{-pi}^{pi} (f(x) - f(x - y)) / sin^2(y/2) dy.
/// ```
///
/// The integrand is folded onto `2 f(x) - f(x + y) - f(x - y)`, which vanishes
/// like `y^2`, and integrated with the periodic midpoint rule so that `y = 0`
/// is never sampled. Off-grid samples come from the band-limited interpolant.
/// `n_quad` is rounded up to a multiple of the grid size.
pub fn lambda_kernel_quadrature(f: &Field, n_quad: usize) -> Result<Field> {
    let grid = f.grid();
    if (grid.half_length() - PI).abs() > 1e-14 * PI {
        return Err(Error::PeriodMismatch(grid.half_length()));
    }
    let n = grid.n();
    let ratio = n_quad.div_ceil(n).max(1);
    let m = ratio * n;
    let h = 2.0 * PI / m as f64;
    // fine[i] = f(-pi + (i + 1/2) h)
    let fine = grid.resample(f.values(), m, 0.5);
    let weights: Vec<f64> = (0..m)
        .map(|j| {
            let s = (0.5 * (j as f64 + 0.5) * h).sin();
            1.0 / (s * s)
        })
        .collect();

    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &fx)| {
            let base = i * ratio;
            let mut acc = 0.0;
            for (j, w) in weights.iter().enumerate() {
                let plus = fine[(base + j) % m];
                let minus = fine[(base + m - j - 1) % m];
                acc += (2.0 * fx - plus - minus) * w;
            }
            acc * h / (8.0 * PI)
        })
        .collect();
    Ok(Field::from_vec(grid, values))
}
