//! Scalar special functions used by the fractional operators.

use crate::error::{domain, Result};

/// Euler gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("gamma_fn", format!("x must be positive and finite, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Beta function `Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain("beta_fn", format!("arguments must be positive, got ({a}, {b})")));
    }
    // Direct ratio keeps full precision while nothing overflows.
    if a + b < 100.0 {
        let g = statrs::function::gamma::gamma;
        return Ok(g(a) * g(b) / g(a + b));
    }
    let lg = statrs::function::gamma::ln_gamma;
    Ok((lg(a) + lg(b) - lg(a + b)).exp())
}

pub(crate) fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `k^a - (k-1)^a` for `k >= 1` without cancellation.
pub(crate) fn pow_diff(k: f64, a: f64) -> f64 {
    if k <= 1.0 {
        return k.powf(a) - (k - 1.0).max(0.0).powf(a);
    }
    -k.powf(a) * (a * (-1.0 / k).ln_1p()).exp_m1()
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub(crate) fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}
