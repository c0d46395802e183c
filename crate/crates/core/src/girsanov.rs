//! Drift discrepancies, `K_H^{-1}` of their running integrals, and the
//! exponential weights that change the law of the reference solution into
//! that of the path-dependent equation (plus sign) or of the truncated
//! scheme (minus sign).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fbm::WienerPath;
use crate::fractional::{kh_inverse_of_running_integral, KhInverseOperator, SampledFunction, UniformGrid};
use crate::model::{ModelSpec, SegmentView};
use crate::solver::{delta_steps, SolutionPath};

/// `h(t) = σ̂⁻¹ {b(Y(t)) - b(Y(t_δ))} - Z(Ŷ_t)` on the nodes of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftDiscrepancy {
    values: SampledFunction,
}

impl DriftDiscrepancy {
    pub fn function(&self) -> &SampledFunction {
        &self.values
    }

    pub fn grid(&self) -> UniformGrid {
        self.values.grid()
    }

    pub fn into_function(self) -> SampledFunction {
        self.values
    }
}

fn view<'a>(y: &'a [f64], d: usize, hist: usize, step: f64, end: usize, cap: usize) -> SegmentView<'a> {
    SegmentView::new(y, d, -(hist as isize), hist, step, end as isize, cap as isize)
}

/// Scalar channels of `h` for fine steps per `δ` equal to `k`; `y` covers
/// `[-τ, T]`.
pub(crate) fn discrepancy_channels(
    model: &ModelSpec,
    pinv: &DMatrix<f64>,
    y: &[f64],
    hist: usize,
    step: f64,
    k: usize,
) -> Vec<Vec<f64>> {
    let (d, m) = (model.d(), model.m());
    let n = y.len() / d - hist;
    let mut out = vec![vec![0.0; n]; m];
    let mut bt = vec![0.0; d];
    let mut bd = vec![0.0; d];
    let mut z = vec![0.0; m];
    for i in 0..n {
        let cap = i / k * k;
        let yi = &y[(hist + i) * d..(hist + i + 1) * d];
        let yd = &y[(hist + cap) * d..(hist + cap + 1) * d];
        model.segment_drift(&view(y, d, hist, step, i, cap), &mut z);
        if cap == i {
            for c in 0..m {
                out[c][i] = -z[c];
            }
            continue;
        }
        model.drift(yi, &mut bt);
        model.drift(yd, &mut bd);
        for c in 0..m {
            let mut s = -z[c];
            for r in 0..d {
                s += pinv[(c, r)] * (bt[r] - bd[r]);
            }
            out[c][i] = s;
        }
    }
    out
}

/// Scalar channels of `Z(Y_t)` on the nodes of `[0, T]`.
pub(crate) fn segment_channels(model: &ModelSpec, y: &[f64], hist: usize, step: f64) -> Vec<Vec<f64>> {
    let (d, m) = (model.d(), model.m());
    let n = y.len() / d - hist;
    let mut out = vec![vec![0.0; n]; m];
    let mut z = vec![0.0; m];
    for i in 0..n {
        model.segment_drift(&view(y, d, hist, step, i, i), &mut z);
        for c in 0..m {
            out[c][i] = z[c];
        }
    }
    out
}

fn as_function(grid: UniformGrid, channels: &[Vec<f64>]) -> Result<SampledFunction> {
    let m = channels.len();
    let n = grid.len;
    let values = (0..n).flat_map(|i| channels.iter().map(move |ch| ch[i])).collect::<Vec<_>>();
    debug_assert_eq!(values.len(), n * m);
    SampledFunction::new(grid, m, values)
}

pub fn compute_h(model: &ModelSpec, y: &SolutionPath, delta: f64) -> Result<DriftDiscrepancy> {
    model.check_grid(&y.grid())?;
    let grid = y.grid();
    let k = delta_steps(&grid, delta)?;
    let ch = discrepancy_channels(
        model,
        model.structure().sigma_pinv(),
        y.values(),
        grid.history_steps(),
        grid.step(),
        k,
    );
    Ok(DriftDiscrepancy {
        values: as_function(grid.positive_part(), &ch)?,
    })
}

/// `Z(Y_t)` as a sampled function on `[0, T]`.
pub fn segment_driver(model: &ModelSpec, y: &SolutionPath) -> Result<SampledFunction> {
    model.check_grid(&y.grid())?;
    let grid = y.grid();
    let ch = segment_channels(model, y.values(), grid.history_steps(), grid.step());
    as_function(grid.positive_part(), &ch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Log-weights on the nodes of `[0, T]`, `log_weight[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPath {
    grid: UniformGrid,
    log_weight: Vec<f64>,
}

impl WeightPath {
    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weight
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weight[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_weight[i].exp()
    }

    pub fn log_terminal(&self) -> f64 {
        *self.log_weight.last().expect("at least one node")
    }

    pub fn terminal(&self) -> f64 {
        self.log_terminal().exp()
    }
}

/// Running `sign Σ ⟨k_i, ΔW_i⟩ - ½ Σ |k_i|² Δ` with left-point values.
pub(crate) fn log_weight_path(channels: &[Vec<f64>], wiener: &WienerPath, sign: Sign) -> Result<Vec<f64>> {
    let m = channels.len();
    let n = wiener.grid().n_steps();
    let dt = wiener.grid().step();
    let s = sign.value();
    let mut out = vec![0.0; n + 1];
    let mut acc = 0.0;
    for i in 0..n {
        let dw = wiener.increment(i);
        let mut lin = 0.0;
        let mut sq = 0.0;
        for c in 0..m {
            let k = channels[c][i];
            lin += k * dw[c];
            sq += k * k;
        }
        acc += s * lin - 0.5 * dt * sq;
        if !acc.is_finite() {
            let max_driver = channels
                .iter()
                .flat_map(|ch| ch.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            return Err(Error::WeightOverflow { node: i + 1, max_driver });
        }
        out[i + 1] = acc;
    }
    Ok(out)
}

pub fn girsanov_weight(kinv: &SampledFunction, wiener: &WienerPath, sign: Sign) -> Result<WeightPath> {
    let grid = wiener.grid().positive_part();
    if kinv.grid() != grid || kinv.dim() != wiener.dim() {
        return Err(Error::GridMismatch(format!(
            "driver on {:?} with {} components, Wiener path on {:?} with {}",
            kinv.grid(),
            kinv.dim(),
            grid,
            wiener.dim()
        )));
    }
    let channels: Vec<Vec<f64>> = (0..kinv.dim()).map(|c| kinv.channel(c)).collect();
    Ok(WeightPath {
        grid,
        log_weight: log_weight_path(&channels, wiener, sign)?,
    })
}

fn driving_wiener(y: &SolutionPath) -> Result<&WienerPath> {
    y.fbm()
        .wiener()
        .ok_or_else(|| Error::Validation("the driving fBm carries no Wiener increments".into()))
}

/// `R^ξ`: plus sign, driver `K_H^{-1}(∫0^· Z(Y_r) dr)`.
pub fn weight_r_xi(model: &ModelSpec, y: &SolutionPath, hurst: f64) -> Result<WeightPath> {
    let kinv = kh_inverse_of_running_integral(&segment_driver(model, y)?, hurst)?;
    girsanov_weight(&kinv, driving_wiener(y)?, Sign::Plus)
}

/// `R^{ξ,δ}`: minus sign, driver `K_H^{-1}(∫0^· h ds)`.
pub fn weight_r_xi_delta(model: &ModelSpec, y: &SolutionPath, hurst: f64, delta: f64) -> Result<WeightPath> {
    let h = compute_h(model, y, delta)?;
    let kinv = kh_inverse_of_running_integral(h.function(), hurst)?;
    girsanov_weight(&kinv, driving_wiener(y)?, Sign::Minus)
}

/// `K_H^{-1}` applied to several scalar drivers, two per FFT pass.
pub(crate) fn apply_inverse_all(op: &KhInverseOperator, drivers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(drivers.len());
    for pair in drivers.chunks(2) {
        if let [a, b] = pair {
            let (x, y) = op.apply_pair(a, b);
            out.push(x);
            out.push(y);
        } else {
            out.push(op.apply(&pair[0]));
        }
    }
    out
}
