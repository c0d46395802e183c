//! Step-size conditions of the weak-order theorem, evaluated term by term.

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::fractional::c0_constant;
use crate::special::{beta_fn, gamma_fn};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiConstants {
    pub k1bar: f64,
    pub k2bar: f64,
    pub phi: f64,
}

/// `K̄1`, `K̄2` and `Φ = sqrt(K̄2 (e^{K̄1 T} - 1)/K̄1)`.
pub fn phi_constants(k1: f64, horizon: f64) -> PhiConstants {
    let (k1bar, k2bar) = if k1 >= 0.0 {
        (2.0 * k1 + 1.0, 1.0)
    } else {
        (2.0 * k1 + 0.5 * k1.abs(), 2.0 / k1.abs())
    };
    let x = k1bar * horizon;
    let ratio = if x.abs() < 1e-8 {
        horizon * (1.0 + 0.5 * x)
    } else {
        x.exp_m1() / k1bar
    };
    PhiConstants {
        k1bar,
        k2bar,
        phi: (k2bar * ratio).sqrt(),
    }
}

/// `α(β ∧ θ) + 1/2 - H`.
pub fn theoretical_order(alpha: f64, beta: f64, theta: f64, hurst: f64) -> f64 {
    alpha * beta.min(theta) + 0.5 - hurst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub hurst: f64,
    pub horizon: f64,
    pub delta: f64,
    pub beta: f64,
    pub c0: f64,
    pub phi: PhiConstants,
    pub sigma_norm: f64,
    pub pinv_norm: f64,
    /// `Γ(3/2 - H)`.
    pub gamma: f64,
    pub lhs_weight: f64,
    pub rhs_weight: f64,
    /// Lipschitz-drift part of the second condition.
    pub step_drift: f64,
    /// Segment-drift part, gated by `α = 1`.
    pub step_segment: f64,
    pub lhs_step: f64,
    pub rhs_step: f64,
    pub pass_weight: bool,
    pub pass_step: bool,
    /// Largest `q` with `2q² - q <= rhs/lhs` of the first condition.
    pub moment_exponent: f64,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.pass_weight && self.pass_step
    }
}

pub fn check_stepsize_conditions(
    model: &ModelSpec,
    hurst: f64,
    horizon: f64,
    delta: f64,
    beta: f64,
) -> Result<ConditionReport> {
    model.validate_for_hurst(hurst)?;
    let c = model.constants();
    let (al, th) = (c.alpha, c.theta);
    let lo = (2.0 * hurst - 1.0) / (2.0 * al);
    if !(beta > lo && beta < hurst) {
        return Err(Error::OutOfRange(format!(
            "beta = {beta} outside the admissible window ({lo}, {hurst})"
        )));
    }
    if !(horizon > 0.0 && delta > 0.0 && delta <= horizon) {
        return Err(Error::OutOfRange(format!(
            "need 0 < delta <= T, got delta = {delta}, T = {horizon}"
        )));
    }
    let h = hurst;
    let t = horizon;
    let d = delta;
    let c0 = c0_constant(h)?;
    let phi = phi_constants(c.k1, t);
    let ph = phi.phi;
    let sig = model.structure().sigma_norm();
    let sinv = model.structure().pinv_norm();
    let g = gamma_fn(1.5 - h)?;
    let g2 = g * g;
    let ind = if al == 1.0 { 1.0 } else { 0.0 };
    let (l1, l2) = (c.l1, c.l2);

    let lhs_weight = 2.0 * l2 * l2 * t.powf(2.0 - 2.0 * h) * (1.0 + (h - 0.5).powi(2) * c0 * c0)
        / ((1.0 - h) * g2)
        * sig
        * sig
        * ind;
    let rhs_weight = (c.c1 * ph + 1.0).powi(-2) / (2.0 * t);

    let lead = 1.0 + c0 * (h - 0.5);
    let bt = beta.min(th);
    let tail = 16f64.powf(h) / (3.0 - 2.0 * h).powi(2) + 2f64.powf(2.0 * h + 1.0) / (2.0 * h - 1.0).powi(2);
    let brace = lead * lead * t.powf(2.0 - 2.0 * h) * d.powf(2.0 * beta)
        + 8.0
            * d.powf(2.0 * beta + 1.0 - 2.0 * h)
            * (t - d).powf(2.0 - 2.0 * h)
            * t.powf(2.0 * h - 1.0)
            * (1.0 / (1.0 + 2.0 * beta - 2.0 * h).powi(2) + tail)
        + 4.0 * (1.0 - h) * d.powf(2.0 * beta + 4.0 - 4.0 * h) / (beta + 2.0 - 2.0 * h).powi(2);
    let step_drift = 16.0 * l1 * l1 * sig * sig * sinv * sinv * t.powf(2.0 * beta) / (g2 * (1.0 - h))
        * (l1 * ph + 1.0).powi(2)
        * brace;
    let step_segment = if ind == 0.0 {
        0.0
    } else {
        let s2a = sig.powf(2.0 * al);
        let first = 8.0 * l2 * l2 * s2a * lead * lead * t.powf(2.0 * (al * beta + 1.0 - h)) / (g2 * (1.0 - h))
            * (l1 * ph + 1.0).powf(2.0 * al);
        let e = al * bt + 0.5 - h;
        let bb = beta_fn(1.5 - h, e)?;
        let bracket = bb * bb * t.powf(2.0 * al * beta + 3.0 - 4.0 * h) / (2.0 * al * bt + 3.0 - 4.0 * h)
            + d.powf(2.0 * al * bt + 1.0 - 2.0 * h) * t.powf(2.0 - 2.0 * h) / (1.0 - h) * tail;
        let second = 48.0 * l2 * l2 * s2a / g2 * (t * l1 * (l1 * ph + 1.0) + 1.0).powf(2.0 * al) * bracket;
        first + second
    };
    let lhs_step = step_drift + step_segment;
    let rhs_step = 1.0 / (128.0 * (2.0 * t).powf(2.0 * (h - beta)));
    let margin = rhs_weight / lhs_weight;
    let moment_exponent = if margin.is_finite() {
        (1.0 + (1.0 + 8.0 * margin).sqrt()) / 4.0
    } else {
        f64::INFINITY
    };
    Ok(ConditionReport {
        hurst,
        horizon,
        delta,
        beta,
        c0,
        phi,
        sigma_norm: sig,
        pinv_norm: sinv,
        gamma: g,
        lhs_weight,
        rhs_weight,
        step_drift,
        step_segment,
        lhs_step,
        rhs_step,
        pass_weight: lhs_weight < rhs_weight,
        pass_step: lhs_step < rhs_step,
        moment_exponent,
    })
}
