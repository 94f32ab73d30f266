//! The exponential-integrator coefficient functions
//! `phi_0(z) = e^z`, `phi_{k+1}(z) = (phi_k(z) - 1/k!) / z`, for real `z`.
//!
//! The recurrence cancels catastrophically for small `|z|`, so below
//! [`TAYLOR_RADIUS`] the Taylor series `phi_k(z) = sum_j z^j / (j + k)!` is
//! summed instead.

pub const TAYLOR_RADIUS: f64 = 1.0;

const TAYLOR_TERMS: usize = 24;

/// `[phi_0, phi_1, phi_2, phi_3]` at `z`.
pub fn phi_functions(z: f64) -> [f64; 4] {
    if z.abs() < TAYLOR_RADIUS {
        taylor(z)
    } else {
        recurrence(z)
    }
}

fn recurrence(z: f64) -> [f64; 4] {
    let e = z.exp();
    let p1 = (e - 1.0) / z;
    let p2 = (p1 - 1.0) / z;
    let p3 = (p2 - 0.5) / z;
    [e, p1, p2, p3]
}

fn taylor(z: f64) -> [f64; 4] {
    // Horner on sum_j z^j / (j + k)! for k = 1, 2, 3.
    let mut out = [z.exp(), 0.0, 0.0, 0.0];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for j in (0..TAYLOR_TERMS).rev() {
            acc = acc * z / (j + k + 1) as f64 + 1.0;
        }
        *slot = acc / factorial(k);
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
