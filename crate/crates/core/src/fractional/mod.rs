//! Riemann-Liouville fractional integrals and derivatives on a uniform grid,
//! and the Volterra operator `K_H` linking Wiener and fBm paths.
//!
//! All operators use product integration: the sampled function is replaced
//! by its piecewise-linear interpolant and every singular kernel is
//! integrated exactly cell by cell. Functions carrying a power factor `y^p`
//! at the origin (for instance `s^{1/2-H} f(s)`) keep that factor exact on
//! the first cell instead of interpolating through the singularity.

mod kernel;
pub(crate) mod weights;

pub use kernel::{
    apply_kh, apply_kh_inverse, c0_constant, c0_constant_tol, kh_image,
    kh_inverse_of_running_integral, kh_kernel, kh_kernel_deriv, kh_normalization,
    reconstruct_covariance, reconstruct_covariance_scaled, AbsolutelyContinuous,
    KhInverseOperator,
};

use crate::conv::CausalConvolver;
use crate::error::{domain, Error, Result};
use crate::special::{beta_fn, gamma};
use weights::{gap_integral, origin_moment, DifferenceWeights, IntegralWeights};

/// Uniform nodes `x_i = i * step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {len}")));
        }
        Ok(Self { step, len })
    }

    /// `intervals` equal cells covering `[0, end]`.
    pub fn covering(end: f64, intervals: usize) -> Result<Self> {
        Self::new(end / intervals as f64, intervals + 1)
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.node(i))
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }
}

/// Meaning of the value stored at node 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Ordinary point value.
    Point,
    /// The operator is singular at 0; the stored value is the mean of the
    /// leading singular term over the first cell. It is excluded from
    /// norms and node-wise comparisons but usable as a left-point
    /// integrand on `[0, step)`.
    FirstCellMean,
}

/// A function sampled on a [`UniformGrid`], possibly vector valued.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: UniformGrid,
    dim: usize,
    values: Vec<f64>,
    endpoint: Endpoint,
}

impl SampledFunction {
    /// `values` is node-major: `values[i * dim + c]`.
    pub fn new(grid: UniformGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_endpoint(grid, dim, values, Endpoint::Point)
    }

    pub fn with_endpoint(
        grid: UniformGrid,
        dim: usize,
        values: Vec<f64>,
        endpoint: Endpoint,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if values.len() != grid.len * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes of dimension {dim}",
                values.len(),
                grid.len
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(
                "SampledFunction",
                format!("non-finite value at node {}", i / dim),
            ));
        }
        Ok(Self {
            grid,
            dim,
            values,
            endpoint,
        })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, 1, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: UniformGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.len * dim],
            endpoint: Endpoint::Point,
        }
    }

    pub(crate) fn from_channels(
        grid: UniformGrid,
        channels: Vec<Vec<f64>>,
        endpoint: Endpoint,
    ) -> Result<Self> {
        let dim = channels.len();
        let mut values = vec![0.0; grid.len * dim];
        for (c, ch) in channels.iter().enumerate() {
            for (i, v) in ch.iter().enumerate() {
                values[i * dim + c] = *v;
            }
        }
        Self::with_endpoint(grid, dim, values, endpoint)
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn endpoint(&self) -> Endpoint {
        self.endpoint
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// First node carrying a genuine point value.
    pub fn first_defined(&self) -> usize {
        match self.endpoint {
            Endpoint::Point => 0,
            Endpoint::FirstCellMean => 1,
        }
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// `a * self + b * other`, node by node.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let endpoint = if self.endpoint == Endpoint::Point && other.endpoint == Endpoint::Point {
            Endpoint::Point
        } else {
            Endpoint::FirstCellMean
        };
        Self::with_endpoint(self.grid, self.dim, values, endpoint)
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "({:?}, dim {}) vs ({:?}, dim {})",
                self.grid, self.dim, other.grid, other.dim
            )));
        }
        Ok(())
    }

    /// Largest node-wise Euclidean distance, over nodes carrying point values
    /// in both functions.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let start = self.first_defined().max(other.first_defined());
        Ok((start..self.len())
            .map(|i| {
                self.at(i)
                    .iter()
                    .zip(other.at(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }
}

/// Fractional order in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(domain("FracOrder", format!("order must lie in (0, 1], got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Behaviour of a sampled channel on the first cell `[0, h]`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Origin {
    /// Linear interpolation between nodes 0 and 1.
    Linear,
    /// `g(y) = y^p (a + b y/h)` exactly; node-0 sample ignored.
    Power { p: f64, a: f64, b: f64 },
}

/// Left-sided Riemann-Liouville integral of order α.
pub(crate) struct RlIntegral {
    alpha: f64,
    step: f64,
    len: usize,
    scale: f64,
    weights: IntegralWeights,
    conv: CausalConvolver,
}

impl RlIntegral {
    pub(crate) fn new(alpha: f64, grid: UniformGrid) -> Self {
        let weights = IntegralWeights::new(alpha, grid.len);
        let scale = grid.step.powf(alpha) / gamma(alpha);
        let conv = CausalConvolver::new(weights.kernel.iter().map(|w| w * scale).collect());
        Self {
            alpha,
            step: grid.step,
            len: grid.len,
            scale,
            weights,
            conv,
        }
    }

    pub(crate) fn apply(&self, g: &[f64], origin: Origin) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.len);
        let mut shifted = g.to_vec();
        shifted[0] = 0.0;
        let mut out = self.conv.apply(&shifted);
        let a = self.alpha;
        match origin {
            Origin::Linear => {
                out[0] = 0.0;
                for n in 1..self.len {
                    out[n] += self.scale * self.weights.far[n] * g[0];
                }
            }
            Origin::Power { p, a: c0, b: c1 } => {
                let h = self.step;
                let cell_scale = h.powf(p + a) / gamma(a);
                out[0] = if (p + a).abs() < 1e-12 {
                    c0 * gamma(p + 1.0)
                } else {
                    0.0
                };
                if self.len > 1 {
                    let b1 = beta_fn(p + 1.0, a).expect("p > -1");
                    let b2 = beta_fn(p + 2.0, a).expect("p > -1");
                    out[1] = cell_scale * (c0 * b1 + c1 * b2);
                }
                for n in 2..self.len {
                    let cell = c0 * origin_moment(p, a - 1.0, n) + c1 * origin_moment(p + 1.0, a - 1.0, n);
                    out[n] += cell_scale * cell - self.scale * self.weights.near[n] * g[1];
                }
            }
        }
        out
    }
}

/// Weyl form of the left-sided Riemann-Liouville derivative of order α < 1.
pub(crate) struct WeylDerivative {
    alpha: f64,
    step: f64,
    len: usize,
    weights: DifferenceWeights,
    conv: CausalConvolver,
}

impl WeylDerivative {
    pub(crate) fn new(alpha: f64, grid: UniformGrid) -> Self {
        let weights = DifferenceWeights::new(alpha, grid.len);
        let conv = CausalConvolver::new(weights.kernel.clone());
        Self {
            alpha,
            step: grid.step,
            len: grid.len,
            weights,
            conv,
        }
    }

    /// Returns `D^α g` at nodes `1..len`; node 0 holds the first-cell mean
    /// of the leading singular term.
    pub(crate) fn apply(&self, g: &[f64], origin: Origin) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.len);
        let a = self.alpha;
        let h = self.step;
        let ha = h.powf(-a);
        let w = &self.weights;
        let mut shifted = g.to_vec();
        shifted[0] = 0.0;
        let c = self.conv.apply(&shifted);
        let norm = 1.0 / gamma(1.0 - a);
        let mut out = vec![0.0; self.len];
        match origin {
            Origin::Linear => {
                out[0] = g[0] * ha / gamma(2.0 - a);
                for n in 1..self.len {
                    let s = ha * (g[n] * (w.cum[n - 1] + w.far[n]) - c[n] - w.far[n] * g[0]);
                    let xn = n as f64 * h;
                    out[n] = norm * (g[n] * xn.powf(-a) + a * s);
                }
            }
            Origin::Power { p, a: c0, b: c1 } => {
                out[0] = c0 * gamma(p + 1.0) / gamma(p + 1.0 - a) * h.powf(p - a) / (p - a + 1.0);
                let hp = h.powf(p - a);
                for n in 1..self.len {
                    let nf = n as f64;
                    let s = if n == 1 {
                        hp * (c0 * gap_integral(p, a) + c1 * gap_integral(p + 1.0, a))
                    } else {
                        let interior = ha
                            * (g[n] * w.cum[n - 1] - c[n] - w.near[n] * (g[n] - g[1]));
                        let e_n = ha * pow_neg_diff(nf, a) / a;
                        let cell = g[n] * e_n
                            - hp * (c0 * origin_moment(p, -1.0 - a, n)
                                + c1 * origin_moment(p + 1.0, -1.0 - a, n));
                        interior + cell
                    };
                    let xn = nf * h;
                    out[n] = norm * (g[n] * xn.powf(-a) + a * s);
                }
            }
        }
        out
    }
}

/// `(n-1)^{-a} - n^{-a}` for `n >= 2`.
fn pow_neg_diff(n: f64, a: f64) -> f64 {
    -crate::special::pow_diff(n, -a)
}

/// Discrete `I^α_{0+} f`; node 0 maps to 0.
pub fn frac_integral(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let op = RlIntegral::new(alpha.value(), f.grid());
    let channels = (0..f.dim())
        .map(|c| op.apply(&f.channel(c), Origin::Linear))
        .collect();
    SampledFunction::from_channels(f.grid(), channels, Endpoint::Point)
}

/// Discrete `D^α_{0+} f` (Weyl form), for `0 < α < 1`. Node 0 is singular
/// and comes back flagged [`Endpoint::FirstCellMean`].
pub fn frac_derivative(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let a = alpha.value();
    if a >= 1.0 {
        return Err(domain("frac_derivative", "order must be below 1"));
    }
    let op = WeylDerivative::new(a, f.grid());
    let channels = (0..f.dim())
        .map(|c| op.apply(&f.channel(c), Origin::Linear))
        .collect();
    SampledFunction::from_channels(f.grid(), channels, Endpoint::FirstCellMean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn grid(n: usize) -> UniformGrid {
        UniformGrid::covering(1.0, n).unwrap()
    }

    fn max_rel_err(got: &SampledFunction, want: impl Fn(f64) -> f64, from: f64) -> f64 {
        let g = got.grid();
        (got.first_defined()..g.len)
            .filter(|&i| g.node(i) >= from)
            .map(|i| {
                let w = want(g.node(i));
                (got.at(i)[0] - w).abs() / w.abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn integral_of_order_one_is_trapezoid() {
        let f = SampledFunction::from_fn(grid(64), |_| 1.0).unwrap();
        let out = frac_integral(&f, FracOrder::new(1.0).unwrap()).unwrap();
        for (i, x) in out.grid().nodes().enumerate() {
            assert!((out.at(i)[0] - x).abs() < 1e-13);
        }
    }

    #[test]
    fn integral_of_constant_quarter_order() {
        // Closed form checked against quadrature of (x-y)^{α-1}/Γ(α)
        // after x - y = z^{1/α}.
        let a: f64 = 0.25;
        let x: f64 = 0.7;
        let q = integrate(|z: f64| z.powf(1.0 / a - 1.0) * z.powf((a - 1.0) / a) / a, 0.0, x.powf(a), 1e-14, 1e-13)
            .unwrap()
            .value
            / gamma(a);
        let closed = x.powf(a) / gamma(a + 1.0);
        assert!((q - closed).abs() < 1e-9);

        let f = SampledFunction::from_fn(grid(200), |_| 1.0).unwrap();
        let out = frac_integral(&f, FracOrder::new(a).unwrap()).unwrap();
        // Product integration is exact on linear data.
        assert!(max_rel_err(&out, |x| x.powf(a) / gamma(a + 1.0), 1e-9) < 1e-11);
    }

    #[test]
    fn derivative_of_power_law() {
        let f = SampledFunction::from_fn(grid(2048), |x| x.powf(0.8)).unwrap();
        let d = frac_derivative(&f, FracOrder::new(0.5).unwrap()).unwrap();
        let want = |x: f64| gamma(1.8) / gamma(1.3) * x.powf(0.3);
        assert!(max_rel_err(&d, want, 0.1) < 5e-3);
    }

    #[test]
    fn derivative_of_constant() {
        let c = 1.7;
        let a = 0.4;
        let f = SampledFunction::from_fn(grid(128), |_| c).unwrap();
        let d = frac_derivative(&f, FracOrder::new(a).unwrap()).unwrap();
        assert_eq!(d.endpoint(), Endpoint::FirstCellMean);
        let want = |x: f64| c * x.powf(-a) / gamma(1.0 - a);
        assert!(max_rel_err(&d, want, 0.0) < 1e-12);
    }

    #[test]
    fn derivative_rejects_order_one() {
        let f = SampledFunction::from_fn(grid(8), |x| x).unwrap();
        assert!(frac_derivative(&f, FracOrder::new(1.0).unwrap()).is_err());
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.2).is_err());
    }

    #[test]
    fn power_origin_integral_matches_closed_form() {
        // I^α[y^{-α}] = Γ(1-α), constant.
        let a = 0.3;
        let g = grid(300);
        let vals: Vec<f64> = g.nodes().map(|x| if x > 0.0 { x.powf(-a) } else { 0.0 }).collect();
        let op = RlIntegral::new(a, g);
        let out = op.apply(&vals, Origin::Power { p: -a, a: 1.0, b: 0.0 });
        let want = gamma(1.0 - a);
        // Nodes 0 and 1 see only the exact first cell.
        for (i, v) in out.iter().enumerate() {
            let tol = if i < 2 { 1e-12 } else { 1e-2 };
            assert!((v - want).abs() < tol * want, "node {i}: {v} vs {want}");
        }
        assert!((out[299] - want).abs() < 1e-3 * want);
    }

    #[test]
    fn sampled_function_rejects_bad_input() {
        let g = grid(4);
        assert!(SampledFunction::new(g, 1, vec![0.0; 3]).is_err());
        assert!(SampledFunction::new(g, 1, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(SampledFunction::new(g, 0, vec![]).is_err());
    }
}
