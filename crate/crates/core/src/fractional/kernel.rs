//! The fBm Volterra kernel `K_H` and the operators `K_H`, `K_H^{-1}`.
//!
//! With `a = H - 1/2` the kernel is `K_H(t,s) = ∫_s^t c_H (r/s)^a (r-s)^{a-1} dr`
//! and `∫0^t K_H(t,s) f(s) ds = d_H I^1[x^a I^a[x^{-a} f]]` with
//! `d_H = c_H Γ(a)`. Both directions carry `d_H` so that `K_H` applied to
//! white noise is fBm with covariance `R_H`.

use std::sync::Arc;

use super::weights::{origin_moment, CellMoments, DifferenceWeights};
use super::{Endpoint, Origin, RlIntegral, SampledFunction, UniformGrid, WeylDerivative};
use crate::conv::CausalConvolver;
use crate::error::{domain, Error, Result};
use crate::quad::integrate;
use crate::special::{beta_fn, gamma};

fn check_hurst(func: &'static str, h: f64) -> Result<f64> {
    if h > 0.5 && h < 1.0 {
        Ok(h - 0.5)
    } else {
        Err(domain(func, format!("H must lie in (1/2, 1), got {h}")))
    }
}

/// `c_H = sqrt(H(2H-1)/B(2-2H, H-1/2))`.
pub fn kh_normalization(h: f64) -> Result<f64> {
    let a = check_hurst("kh_normalization", h)?;
    Ok((h * (2.0 * h - 1.0) / beta_fn(2.0 - 2.0 * h, a)?).sqrt())
}

/// `C_0 = ∫0^1 (u^{1/2-H} - 1)(1-u)^{-1/2-H} du`.
///
/// Computed with `u = (1 - cos πθ)/2`, which leaves a bounded integrand at
/// both ends.
pub fn c0_constant(h: f64) -> Result<f64> {
    c0_constant_tol(h, 1e-10)
}

pub fn c0_constant_tol(h: f64, tol: f64) -> Result<f64> {
    let a = check_hurst("c0_constant", h)?;
    let pi = std::f64::consts::PI;
    let f = |theta: f64| {
        let (s, c) = (pi * theta).sin_cos();
        let u = 0.5 * (1.0 - c);
        let v = 0.5 * (1.0 + c);
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        // u^{-a} - 1 without cancellation as u -> 1.
        let num = if u < 0.5 {
            u.powf(-a) - 1.0
        } else {
            (-a * (-v).ln_1p()).exp_m1()
        };
        num * v.powf(-1.0 - a) * 0.5 * pi * s
    };
    Ok(integrate(f, 0.0, 1.0, tol * 1e-2, tol)?.value)
}

/// `∂K_H/∂r (r, s) = c_H (r/s)^{H-1/2} (r-s)^{H-3/2}` for `0 < s < r`.
pub fn kh_kernel_deriv(h: f64, r: f64, s: f64) -> Result<f64> {
    let a = check_hurst("kh_kernel_deriv", h)?;
    if !(s > 0.0 && s < r) {
        return Err(domain("kh_kernel_deriv", format!("need 0 < s < r, got r={r}, s={s}")));
    }
    Ok(kh_normalization(h)? * (r / s).powf(a) * (r - s).powf(a - 1.0))
}

/// `K_H(t, s)` for `0 < s <= t`.
pub fn kh_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    let a = check_hurst("kh_kernel", h)?;
    if !(s > 0.0 && s <= t) {
        return Err(domain("kh_kernel", format!("need 0 < s <= t, got t={t}, s={s}")));
    }
    Ok(kh_normalization(h)? * kernel_unit(a, t, s)?)
}

/// `K_H(t,s)/c_H` via `r - s = (t-s) w^{1/a}`, which removes the singularity.
fn kernel_unit(a: f64, t: f64, s: f64) -> Result<f64> {
    if s >= t {
        return Ok(0.0);
    }
    let d = t - s;
    let inner = integrate(|w: f64| (s + d * w.powf(1.0 / a)).powf(a), 0.0, 1.0, 1e-15, 1e-13)?;
    Ok(s.powf(-a) * d.powf(a) / a * inner.value)
}

/// `∫0^{t∧s} K_H(t,u) K_H(s,u) du` by nested adaptive quadrature.
pub fn reconstruct_covariance(h: f64, t: f64, s: f64) -> Result<f64> {
    reconstruct_covariance_scaled(h, t, s, 1.0)
}

/// As [`reconstruct_covariance`] with `c_H` multiplied by `scale`
/// (fault-injection hook for the operator self-check).
pub fn reconstruct_covariance_scaled(h: f64, t: f64, s: f64, scale: f64) -> Result<f64> {
    let a = check_hurst("reconstruct_covariance", h)?;
    if t < 0.0 || s < 0.0 {
        return Err(domain("reconstruct_covariance", "times must be non-negative"));
    }
    let m = t.min(s);
    if m == 0.0 {
        return Ok(0.0);
    }
    let c = kh_normalization(h)? * scale;
    // u = m v^{1/(1-2a)} absorbs the u^{-2a} factor of the product.
    let p = 1.0 / (1.0 - 2.0 * a);
    let err = std::cell::Cell::new(None);
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let u = m * v.powf(p);
        let kt = kernel_unit(a, t, u);
        let ks = kernel_unit(a, s, u);
        match (kt, ks) {
            (Ok(x), Ok(y)) => x * y * u.powf(2.0 * a) * m.powf(1.0 - 2.0 * a) * p,
            (Err(e), _) | (_, Err(e)) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    let r = integrate(f, 0.0, 1.0, 1e-14, 1e-10)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(c * c * r.value)
}

/// An absolutely continuous function given by its sampled derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsolutelyContinuous {
    derivative: SampledFunction,
    values: SampledFunction,
}

impl AbsolutelyContinuous {
    /// `h(t) = h0 + ∫0^t h'(s) ds`, values by the trapezoid rule.
    pub fn from_derivative(derivative: SampledFunction, h0: &[f64]) -> Result<Self> {
        let d = derivative.dim();
        if h0.len() != d {
            return Err(Error::GridMismatch(format!(
                "initial value has dimension {}, derivative {d}",
                h0.len()
            )));
        }
        let grid = derivative.grid();
        let mut values = h0.to_vec();
        for i in 1..grid.len {
            for c in 0..d {
                let prev = values[(i - 1) * d + c];
                let inc = 0.5 * grid.step * (derivative.at(i - 1)[c] + derivative.at(i)[c]);
                values.push(prev + inc);
            }
        }
        let values = SampledFunction::new(grid, d, values)?;
        Ok(Self { derivative, values })
    }

    /// Pairs caller-supplied values with their derivative.
    pub fn new(values: SampledFunction, derivative: SampledFunction) -> Result<Self> {
        values.check_compatible(&derivative)?;
        Ok(Self { derivative, values })
    }

    pub fn derivative(&self) -> &SampledFunction {
        &self.derivative
    }

    pub fn values(&self) -> &SampledFunction {
        &self.values
    }
}

/// `(K_H f)(t) = ∫0^t K_H(t,s) f(s) ds = d_H I^1[x^a I^a[x^{-a} f]]`.
pub fn apply_kh(f: &SampledFunction, h: f64) -> Result<SampledFunction> {
    Ok(kh_image(f, h)?.values)
}

/// `K_H f` together with its derivative `d_H x^a I^a[x^{-a} f]`, the
/// form [`apply_kh_inverse`] consumes.
pub fn kh_image(f: &SampledFunction, h: f64) -> Result<AbsolutelyContinuous> {
    let a = check_hurst("apply_KH", h)?;
    let grid = f.grid();
    let d_h = kh_normalization(h)? * gamma(a);
    let inner = RlIntegral::new(a, grid);
    // Outer I^1 against x^a is product-integrated too: cell i contributes
    // h^{a+1}(Q_i m_{i-1} + P_i m_i) for the linear interpolant m.
    let cm = CellMoments::new();
    let cell: Vec<(f64, f64)> = (1..grid.len).map(|i| cm.moments(i, a)).collect();
    let scale = d_h * grid.step.powf(a + 1.0);
    let step = grid.step;
    // Inputs flagged FirstCellMean behave like c x^{-a} near 0 (the output
    // of the inverse operators); node 0 then stores c h^{-a}/(1-a).
    let singular = f.endpoint() == Endpoint::FirstCellMean;
    let mut values = Vec::with_capacity(f.dim());
    let mut derivs = Vec::with_capacity(f.dim());
    for c in 0..f.dim() {
        let fc = f.channel(c);
        let weighted: Vec<f64> = grid
            .nodes()
            .zip(&fc)
            .map(|(x, v)| if x > 0.0 { x.powf(-a) * v } else { 0.0 })
            .collect();
        let (origin, u0) = if singular {
            let lead = fc[0] * (1.0 - a) * step.powf(a);
            let f1 = step.powf(a) * fc[1];
            let origin = Origin::Power {
                p: -2.0 * a,
                a: lead,
                b: f1 - lead,
            };
            (origin, lead * gamma(1.0 - 2.0 * a) / gamma(1.0 - a))
        } else {
            let origin = Origin::Power {
                p: -a,
                a: fc[0],
                b: fc[1] - fc[0],
            };
            (origin, 0.0)
        };
        let mid = inner.apply(&weighted, origin);
        // u = x^a I^a[x^{-a} f], finite at 0 in both cases.
        let mut u: Vec<f64> = grid.nodes().zip(&mid).map(|(x, m)| x.powf(a) * m).collect();
        u[0] = u0;
        let mut acc = 0.0;
        let mut out = vec![0.0; grid.len];
        for i in 1..grid.len {
            if singular && i == 1 {
                acc += 0.5 * (u[0] + u[1]) * step / step.powf(a + 1.0);
            } else {
                let (p, q) = cell[i - 1];
                acc += q * mid[i - 1] + p * mid[i];
            }
            out[i] = scale * acc;
        }
        values.push(out);
        derivs.push(u.iter().map(|v| d_h * v).collect());
    }
    AbsolutelyContinuous::new(
        SampledFunction::from_channels(grid, values, Endpoint::Point)?,
        SampledFunction::from_channels(grid, derivs, Endpoint::Point)?,
    )
}

/// `(K_H^{-1} h)(s) = s^a D^a[x^{-a} h'](s) / d_H`, built on the Weyl
/// derivative. Node 0 holds the first-cell mean of the leading term.
pub fn apply_kh_inverse(h: &AbsolutelyContinuous, hurst: f64) -> Result<SampledFunction> {
    let a = check_hurst("apply_KH_inverse", hurst)?;
    let dh = h.derivative();
    let grid = dh.grid();
    let d_h = kh_normalization(hurst)? * gamma(a);
    let op = WeylDerivative::new(a, grid);
    let lead = gamma(1.0 - a) / gamma(1.0 - 2.0 * a) * grid.step.powf(-a) / (1.0 - a);
    let channels = (0..dh.dim())
        .map(|c| {
            let fc = dh.channel(c);
            let weighted: Vec<f64> = grid
                .nodes()
                .zip(&fc)
                .map(|(x, v)| if x > 0.0 { x.powf(-a) * v } else { 0.0 })
                .collect();
            let origin = Origin::Power {
                p: -a,
                a: fc[0],
                b: fc[1] - fc[0],
            };
            let mut out = op.apply(&weighted, origin);
            out[0] = fc[0] * lead;
            for (i, v) in out.iter_mut().enumerate() {
                if i > 0 {
                    *v *= grid.node(i).powf(a);
                }
                *v /= d_h;
            }
            out
        })
        .collect();
    SampledFunction::from_channels(grid, channels, Endpoint::FirstCellMean)
}

/// `K_H^{-1}(∫0^· h ds)` evaluated from its two-term expansion
/// `κ[(1 - a C_0) r^{-a} h(r) + a r^a ∫0^r s^{-a}(h(r)-h(s))(r-s)^{-1-a} ds]`,
/// `κ = 1/(d_H Γ(1-a))`. The weights depend only on the grid and `H`, so
/// one operator serves every path of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct KhInverseOperator {
    grid: UniformGrid,
    hurst: f64,
    a: f64,
    kappa: f64,
    lead: f64,
    conv: Arc<CausalConvolver>,
    // Per node: x_n^{-a}, x_n^a, Σ_{j=1}^{n-1} A_{n-j} x_j^{-a}, Q_n,
    // and the two first-cell moments J(-a,-1-a,n), J(1-a,-1-a,n).
    neg_pow: Vec<f64>,
    pos_pow: Vec<f64>,
    w_hat: Vec<f64>,
    near: Vec<f64>,
    j0: Vec<f64>,
    j1: Vec<f64>,
    b11: f64,
}

impl KhInverseOperator {
    pub fn new(grid: UniformGrid, hurst: f64) -> Result<Self> {
        let a = check_hurst("KhInverseOperator", hurst)?;
        let n = grid.len;
        let weights = DifferenceWeights::new(a, n);
        let conv = CausalConvolver::new(weights.kernel.clone());
        let d_h = kh_normalization(hurst)? * gamma(a);
        let kappa = 1.0 / (d_h * gamma(1.0 - a));
        let lead = 1.0 - a * c0_constant(hurst)?;
        let mut neg_pow = vec![0.0; n];
        let mut pos_pow = vec![0.0; n];
        for i in 1..n {
            let x = grid.node(i);
            neg_pow[i] = x.powf(-a);
            pos_pow[i] = x.powf(a);
        }
        let w_hat = conv.apply(&neg_pow);
        let mut j0 = vec![0.0; n];
        let mut j1 = vec![0.0; n];
        for i in 2..n {
            j0[i] = origin_moment(-a, -1.0 - a, i);
            j1[i] = origin_moment(1.0 - a, -1.0 - a, i);
        }
        Ok(Self {
            grid,
            hurst,
            a,
            kappa,
            lead,
            conv: Arc::new(conv),
            neg_pow,
            pos_pow,
            w_hat,
            near: weights.near,
            j0,
            j1,
            b11: beta_fn(1.0 - a, 1.0 - a)?,
        })
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Scalar channel: `h` sampled at every node.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        assert_eq!(h.len(), self.grid.len, "driver length must match the grid");
        let wh: Vec<f64> = h.iter().zip(&self.neg_pow).map(|(x, w)| x * w).collect();
        let c = self.conv.apply(&wh);
        self.finish(h, &c)
    }

    /// Two scalar channels sharing one FFT pass.
    pub fn apply_pair(&self, h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(h.len(), self.grid.len, "driver length must match the grid");
        assert_eq!(g.len(), self.grid.len, "driver length must match the grid");
        let wh: Vec<f64> = h.iter().zip(&self.neg_pow).map(|(x, w)| x * w).collect();
        let wg: Vec<f64> = g.iter().zip(&self.neg_pow).map(|(x, w)| x * w).collect();
        let (ch, cg) = self.conv.apply_pair(&wh, &wg);
        (self.finish(h, &ch), self.finish(g, &cg))
    }

    fn finish(&self, h: &[f64], c: &[f64]) -> Vec<f64> {
        let a = self.a;
        let step = self.grid.step;
        let ka = step.powf(-a);
        let k2a = step.powf(-2.0 * a);
        let mut out = vec![0.0; h.len()];
        out[0] = self.kappa * self.lead * h[0] * ka / (1.0 - a);
        for n in 1..h.len() {
            let t = if n == 1 {
                k2a * (h[1] - h[0]) * self.b11
            } else {
                let interior = ka
                    * (h[n] * self.w_hat[n] - c[n] - self.near[n] * self.neg_pow[1] * (h[n] - h[1]));
                let cell = k2a * ((h[n] - h[0]) * self.j0[n] - (h[1] - h[0]) * self.j1[n]);
                interior + cell
            };
            out[n] = self.kappa * (self.lead * self.neg_pow[n] * h[n] + a * self.pos_pow[n] * t);
        }
        out
    }

    /// Vector-valued driver, channel by channel.
    pub fn apply_fn(&self, h: &SampledFunction) -> Result<SampledFunction> {
        if h.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "operator built for {:?}, driver on {:?}",
                self.grid,
                h.grid()
            )));
        }
        let channels = (0..h.dim()).map(|c| self.apply(&h.channel(c))).collect();
        SampledFunction::from_channels(self.grid, channels, Endpoint::FirstCellMean)
    }
}

/// `K_H^{-1}(∫0^· h ds)`; see [`KhInverseOperator`].
pub fn kh_inverse_of_running_integral(h: &SampledFunction, hurst: f64) -> Result<SampledFunction> {
    KhInverseOperator::new(h.grid(), hurst)?.apply_fn(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::UniformGrid;

    // Closed form (1 - Γ(1-a)^2/Γ(1-2a))/a evaluated in 50-digit arithmetic.
    const C0_GOLDEN: [(f64, f64); 6] = [
        (0.55, 0.088_576_260_275_424_444),
        (0.6, 0.191_220_087_149_700_99),
        (0.65, 0.310_388_759_517_002_21),
        (0.75, 0.611_147_660_824_083_65),
        (0.85, 1.025_655_307_117_988_9),
        (0.9, 1.292_327_895_998_764_1),
    ];

    #[test]
    fn c0_matches_golden_values() {
        for (h, want) in C0_GOLDEN {
            let got = c0_constant(h).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "H={h}: {got} vs {want}");
        }
    }

    #[test]
    fn c0_vanishes_at_brownian_limit() {
        let v = c0_constant(0.5 + 1e-7).unwrap();
        assert!(v.abs() < 1e-6);
        assert!(c0_constant(0.5).is_err());
        assert!(c0_constant(1.0).is_err());
    }

    #[test]
    fn kernel_integrates_its_derivative() {
        let h = 0.7;
        let (t, s): (f64, f64) = (0.9, 0.3);
        // r - s = z^{1/a} with a = H - 1/2 removes the singularity at r = s.
        let a: f64 = h - 0.5;
        let q = integrate(
            |z: f64| {
                let d = z.powf(1.0 / a);
                if d > 1e-9 {
                    kh_kernel_deriv(h, s + d, s).unwrap() * z.powf(1.0 / a - 1.0) / a
                } else {
                    kh_normalization(h).unwrap() * (1.0 + d / s).powf(a) / a
                }
            },
            1e-300,
            (t - s).powf(a),
            1e-13,
            1e-11,
        )
            .unwrap()
            .value;
        let k = kh_kernel(h, t, s).unwrap();
        assert!((q - k).abs() < 1e-9 * k);
    }

    #[test]
    fn kernel_deriv_domain() {
        assert!(kh_kernel_deriv(0.75, 1.0, 1.0).is_err());
        assert!(kh_kernel_deriv(0.75, 1.0, 0.0).is_err());
        assert!(kh_kernel_deriv(0.4, 1.0, 0.5).is_err());
        assert!(kh_kernel_deriv(0.75, 1.0, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn covariance_reconstructed() {
        for h in [0.6, 0.75, 0.9] {
            let want = 0.5 * (1.0 + 0.5f64.powf(2.0 * h) - 0.5f64.powf(2.0 * h));
            let got = reconstruct_covariance(h, 1.0, 0.5).unwrap();
            assert!((got - want).abs() < 1e-6 * want, "H={h}: {got} vs {want}");
        }
    }

    #[test]
    fn kh_of_constant_matches_kernel_integral() {
        // ∫0^1 K_H(1,s) ds = d_H Γ(1-a)/(a+1).
        for (h, want) in [
            (0.6, 0.994_464_277_259_847_8),
            (0.75, 0.950_461_179_775_252_5),
            (0.9, 0.765_622_167_101_759_0),
        ] {
            let g = UniformGrid::covering(1.0, 1024).unwrap();
            let f = SampledFunction::from_fn(g, |_| 1.0).unwrap();
            let out = apply_kh(&f, h).unwrap();
            let got = out.at(1024)[0];
            assert!((got - want).abs() < 5e-4 * want, "H={h}: {got}");
        }
    }

    #[test]
    fn eqh1_for_constant_driver() {
        for h in [0.6, 0.75, 0.9] {
            let a = h - 0.5;
            let g = UniformGrid::covering(1.0, 256).unwrap();
            let c = 1.3;
            let d = SampledFunction::from_fn(g, |_| c).unwrap();
            let out = kh_inverse_of_running_integral(&d, h).unwrap();
            let d_h = kh_normalization(h).unwrap() * gamma(a);
            let coef = c * gamma(1.0 - a) / gamma(1.0 - 2.0 * a) / d_h;
            for i in 1..=256 {
                let want = coef * g.node(i).powf(-a);
                assert!((out.at(i)[0] - want).abs() < 1e-9 * want);
            }
        }
    }
}
