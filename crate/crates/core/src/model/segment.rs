//! Segments `η(u), u ∈ [-τ, 0]`, read off a node-major path by index
//! arithmetic. A view never copies; [`Segment`] is the owned form.

use crate::error::{Error, Result};
use crate::solver::SolutionPath;

/// `u ↦ path(min(t + u, cap))` on the fine nodes of `[-τ, 0]`.
///
/// `data` holds whole nodes starting at signed index `origin`; `end` is the
/// signed index of `t` and `cap` that of the truncation time (`cap <= end`).
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a> {
    data: &'a [f64],
    dim: usize,
    origin: isize,
    hist: usize,
    step: f64,
    end: isize,
    cap: isize,
}

impl<'a> SegmentView<'a> {
    pub(crate) fn new(
        data: &'a [f64],
        dim: usize,
        origin: isize,
        hist: usize,
        step: f64,
        end: isize,
        cap: isize,
    ) -> Self {
        debug_assert!(cap <= end && end - hist as isize >= origin);
        Self {
            data,
            dim,
            origin,
            hist,
            step,
            end,
            cap,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes, `τ/Δ + 1`.
    pub fn len(&self) -> usize {
        self.hist + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn tau(&self) -> f64 {
        self.hist as f64 * self.step
    }

    /// Node `k`, i.e. `u = -τ + kΔ`.
    pub fn node(&self, k: usize) -> &'a [f64] {
        debug_assert!(k <= self.hist);
        let s = (self.end - self.hist as isize + k as isize).min(self.cap);
        let j = (s - self.origin) as usize * self.dim;
        &self.data[j..j + self.dim]
    }

    /// Nearest node to `u ∈ [-τ, 0]`.
    pub fn at(&self, u: f64) -> &'a [f64] {
        let k = ((u / self.step).round() as isize + self.hist as isize).clamp(0, self.hist as isize);
        self.node(k as usize)
    }

    /// `η(0)`.
    pub fn current(&self) -> &'a [f64] {
        self.node(self.hist)
    }

    /// `η(-τ)`.
    pub fn oldest(&self) -> &'a [f64] {
        self.node(0)
    }

    pub fn sup_norm(&self) -> f64 {
        (0..=self.hist)
            .map(|k| self.node(k).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn to_segment(&self) -> Segment {
        let values = (0..=self.hist).flat_map(|k| self.node(k).iter().copied()).collect();
        Segment {
            dim: self.dim,
            step: self.step,
            values,
        }
    }
}

/// An owned segment on the fine nodes of `[-τ, 0]`, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    dim: usize,
    step: f64,
    values: Vec<f64>,
}

impl Segment {
    pub fn new(dim: usize, step: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::Validation(format!(
                "segment needs whole nodes of dimension {dim}, got {} values",
                values.len()
            )));
        }
        if !(step > 0.0) {
            return Err(Error::Validation(format!("segment step must be positive, got {step}")));
        }
        Ok(Self { dim, step, values })
    }

    /// Constant segment `c` with `nodes` nodes.
    pub fn constant(c: &[f64], step: f64, nodes: usize) -> Result<Self> {
        Self::new(c.len(), step, c.repeat(nodes))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self) -> f64 {
        (self.len() - 1) as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn view(&self) -> SegmentView<'_> {
        let hist = self.len() - 1;
        SegmentView::new(&self.values, self.dim, 0, hist, self.step, hist as isize, hist as isize)
    }

    pub fn sup_norm(&self) -> f64 {
        self.view().sup_norm()
    }
}

fn delta_steps(path: &SolutionPath, delta: f64) -> Result<usize> {
    let step = path.grid().step();
    let k = (delta / step).round();
    if k < 1.0 || (k * step - delta).abs() > 1e-9 * delta {
        return Err(Error::OutOfRange(format!(
            "delta = {delta} is not a multiple of the fine step {step}"
        )));
    }
    Ok(k as usize)
}

fn node_index(path: &SolutionPath, t: f64) -> Result<usize> {
    if t < 0.0 {
        return Err(Error::OutOfRange(format!("segment time must be >= 0, got {t}")));
    }
    let i = path.grid().index_of(t)?;
    Ok(i as usize)
}

/// `X_t(u) = X(t + u)`.
pub fn segment_at(path: &SolutionPath, t: f64) -> Result<Segment> {
    let i = node_index(path, t)?;
    Ok(path.view(i, i).to_segment())
}

/// `X̂_t(u) = X((t + u) ∧ t_δ)` with `t_δ = ⌊t/δ⌋δ` on grid indices.
pub fn truncated_segment(path: &SolutionPath, t: f64, delta: f64) -> Result<Segment> {
    let i = node_index(path, t)?;
    let k = delta_steps(path, delta)?;
    Ok(path.view(i, i / k * k).to_segment())
}
