//! Unit-grid product-integration weights for the kernels `(x-y)^e`.
//!
//! On the cell `[k-1, k]` (measured as distance from the evaluation node) a
//! linear interpolant splits into the moments
//! `P_k = ∫0^1 w (k-1+w)^e dw` (far node) and `Q_k = ∫0^1 (1-w)(k-1+w)^e dw`
//! (near node). Scaling to a grid of spacing `h` multiplies by `h^{e+1}`.

use crate::special::{gamma, gauss_legendre_unit, pow_diff};

const GL_SWITCH: usize = 6;

pub(crate) struct CellMoments {
    rule: Vec<(f64, f64)>,
}

impl CellMoments {
    pub(crate) fn new() -> Self {
        Self {
            rule: gauss_legendre_unit(14),
        }
    }

    /// `(P_k, Q_k)` for kernel exponent `e`; `k >= 2` unless `e > -1`.
    pub(crate) fn moments(&self, k: usize, e: f64) -> (f64, f64) {
        debug_assert!(k >= 1);
        if k == 1 {
            let p = 1.0 / (e + 2.0);
            let q = if e > -1.0 {
                1.0 / (e + 1.0) - 1.0 / (e + 2.0)
            } else {
                f64::INFINITY
            };
            return (p, q);
        }
        let kf = k as f64;
        if k < GL_SWITCH {
            let d1 = pow_diff(kf, e + 1.0) / (e + 1.0);
            let d2 = pow_diff(kf, e + 2.0) / (e + 2.0);
            let p = d2 - (kf - 1.0) * d1;
            let q = kf * d1 - d2;
            return (p, q);
        }
        let (mut p, mut q) = (0.0, 0.0);
        for &(w, wt) in &self.rule {
            let v = (kf - 1.0 + w).powf(e);
            p += wt * w * v;
            q += wt * (1.0 - w) * v;
        }
        (p, q)
    }
}

/// Weights for `I^α` on `len` nodes (unit grid).
pub(crate) struct IntegralWeights {
    /// `kernel[0] = Q_1`, `kernel[m] = P_m + Q_{m+1}`.
    pub kernel: Vec<f64>,
    /// `far[m] = P_m` (node-0 weight at distance m).
    pub far: Vec<f64>,
    /// `near[m] = Q_m`.
    pub near: Vec<f64>,
}

impl IntegralWeights {
    pub(crate) fn new(alpha: f64, len: usize) -> Self {
        let e = alpha - 1.0;
        let cm = CellMoments::new();
        let mut far = vec![0.0; len + 1];
        let mut near = vec![0.0; len + 1];
        for k in 1..=len {
            let (p, q) = cm.moments(k, e);
            far[k] = p;
            near[k] = q;
        }
        let mut kernel = vec![0.0; len];
        if len > 0 {
            kernel[0] = near[1];
        }
        for m in 1..len {
            kernel[m] = far[m] + near[m + 1];
        }
        Self { kernel, far, near }
    }
}

/// Weights for the Weyl difference integral `∫ (f(x)-f(y)) (x-y)^{-1-α} dy`.
pub(crate) struct DifferenceWeights {
    /// `kernel[0] = 0`, `kernel[m] = P_m + Q_{m+1}`.
    pub kernel: Vec<f64>,
    pub far: Vec<f64>,
    pub near: Vec<f64>,
    /// `cum[m] = Σ_{i=1..m} kernel[i]`.
    pub cum: Vec<f64>,
}

impl DifferenceWeights {
    pub(crate) fn new(alpha: f64, len: usize) -> Self {
        let e = -1.0 - alpha;
        let cm = CellMoments::new();
        let mut far = vec![0.0; len + 1];
        let mut near = vec![0.0; len + 1];
        for k in 1..=len {
            let (p, q) = cm.moments(k, e);
            far[k] = p;
            near[k] = if k >= 2 { q } else { 0.0 };
        }
        let mut kernel = vec![0.0; len];
        for m in 1..len {
            kernel[m] = far[m] + near[m + 1];
        }
        let mut cum = vec![0.0; len];
        for m in 1..len {
            cum[m] = cum[m - 1] + kernel[m];
        }
        Self {
            kernel,
            far,
            near,
            cum,
        }
    }
}

/// `∫0^1 v^q (n - v)^e dv` for `n >= 2` by binomial series in `v/n`.
pub(crate) fn origin_moment(q: f64, e: f64, n: usize) -> f64 {
    debug_assert!(n >= 2);
    let nf = n as f64;
    let inv = 1.0 / nf;
    let mut coef = 1.0;
    let mut scale = 1.0;
    let mut sum = 0.0;
    for k in 0..400 {
        let kf = k as f64;
        let term = coef * scale / (q + kf + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k > 2 {
            break;
        }
        coef *= (kf - e) / (kf + 1.0);
        scale *= inv;
    }
    nf.powf(e) * sum
}

/// `∫0^1 (1 - v^q)(1 - v)^{-1-α} dv = (Γ(q+1)Γ(1-α)/Γ(q+1-α) - 1)/α`.
pub(crate) fn gap_integral(q: f64, alpha: f64) -> f64 {
    (gamma(q + 1.0) * gamma(1.0 - alpha) / gamma(q + 1.0 - alpha) - 1.0) / alpha
}
