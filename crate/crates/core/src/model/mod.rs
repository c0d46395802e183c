//! Path-dependent SDE models `dX = {b(X(t)) + σ Z(X_t)} dt + σ dB^H(t)`,
//! `X_0 = ξ`, with their declared regularity constants.

mod builtin;
mod conditions;
mod probe;
mod segment;
mod structure;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use builtin::{builtin_model, hamiltonian_example, HamiltonianParts, BUILTIN_MODELS, DEFAULT_TAU};
pub use conditions::{check_stepsize_conditions, phi_constants, theoretical_order, ConditionReport, PhiConstants};
pub use probe::{assumption_probe, AssumptionCheck, AssumptionReport};
pub use segment::{segment_at, truncated_segment, Segment, SegmentView};
pub use structure::{build_degenerate_structure, DegenerateStructure, ShearDecomposition};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// `ℝ^p → ℝ^q`, writing into the output slice.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Segment functional `𝒞 → ℝ^m`.
pub type SegmentFn = Arc<dyn Fn(&SegmentView<'_>, &mut [f64]) + Send + Sync>;
/// Initial segment `ξ(u)`, `u ∈ [-τ, 0]`.
pub type InitialFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Constants of the growth, monotonicity and Hölder assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    /// One-sided Lipschitz `⟨b(x)-b(y), x-y⟩ <= K1 |x-y|²`.
    pub k1: f64,
    /// Growth `|b(x)| <= C1 (1 + |x|^q0)`.
    pub c1: f64,
    pub q0: f64,
    /// Lipschitz constant of `b`.
    pub l1: f64,
    /// `|Z(η) - Z(ζ)| <= L2 ‖η - ζ‖^α`.
    pub l2: f64,
    pub alpha: f64,
    /// `|ξ(t) - ξ(s)| <= L3 |t-s|^θ`.
    pub l3: f64,
    pub theta: f64,
    /// Optional constants of the segment-drift growth assumption.
    pub segment_growth: Option<SegmentGrowth>,
}

/// `|Z(η) - Z(ζ)| <= C2 ‖η-ζ‖^α (1 + ‖η‖^p + ‖ζ‖^p)` and
/// `⟨σ Z(η + ζ), η(0)⟩ <= C3 (1 + ‖ζ‖^q1 + ‖η‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGrowth {
    pub c2: f64,
    pub p: f64,
    pub c3: f64,
    pub q1: f64,
}

pub struct ModelParts {
    pub name: String,
    pub sigma: DMatrix<f64>,
    pub tau: f64,
    pub b: VectorFn,
    pub z: SegmentFn,
    pub xi: InitialFn,
    pub constants: ModelConstants,
    pub shear: Option<ShearDecomposition>,
}

/// A validated model. Immutable; all function fields are evaluated
/// concurrently from many paths.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    d: usize,
    m: usize,
    sigma: DMatrix<f64>,
    tau: f64,
    b: VectorFn,
    z: SegmentFn,
    xi: InitialFn,
    constants: ModelConstants,
    structure: DegenerateStructure,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("sigma", &self.sigma)
            .field("tau", &self.tau)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

const PROBE_BUDGET: usize = 64;

impl ModelSpec {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let (d, m) = parts.sigma.shape();
        if m == 0 || d < m {
            return Err(Error::Validation(format!("need d >= m >= 1, got d = {d}, m = {m}")));
        }
        if !(parts.tau > 0.0 && parts.tau.is_finite()) {
            return Err(Error::Validation(format!("tau must be positive, got {}", parts.tau)));
        }
        let c = parts.constants;
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            return Err(Error::Validation(format!("alpha must lie in (0, 1], got {}", c.alpha)));
        }
        if !(c.theta > 0.0 && c.theta <= 1.0) {
            return Err(Error::Validation(format!("theta must lie in (0, 1], got {}", c.theta)));
        }
        for (name, v) in [("L1", c.l1), ("L2", c.l2), ("L3", c.l3), ("C1", c.c1), ("q0", c.q0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !c.k1.is_finite() {
            return Err(Error::Validation("K1 must be finite".into()));
        }
        let mut x = vec![0.0; d];
        for k in 0..=16 {
            let u = -parts.tau * k as f64 / 16.0;
            (parts.xi)(u, &mut x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("xi is not finite at u = {u}")));
            }
        }
        let structure = build_degenerate_structure(&parts.sigma, &parts.b, parts.shear, PROBE_BUDGET)?;
        Ok(Self {
            name: parts.name,
            d,
            m,
            sigma: parts.sigma,
            tau: parts.tau,
            b: parts.b,
            z: parts.z,
            xi: parts.xi,
            constants: c,
            structure,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn structure(&self) -> &DegenerateStructure {
        &self.structure
    }

    pub fn drift_fn(&self) -> &VectorFn {
        &self.b
    }

    /// `b(x)`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.b)(x, out)
    }

    /// `Z(η)`.
    pub fn segment_drift(&self, eta: &SegmentView<'_>, out: &mut [f64]) {
        (self.z)(eta, out)
    }

    /// `ξ(u)`.
    pub fn initial(&self, u: f64, out: &mut [f64]) {
        (self.xi)(u, out)
    }

    /// `ξ` on the fine nodes of `[-τ, 0]`, node-major.
    pub fn history(&self, grid: &TimeGrid) -> Vec<f64> {
        let hist = grid.history_steps();
        let mut out = vec![0.0; (hist + 1) * self.d];
        for k in 0..=hist {
            let u = grid.time(k as isize - hist as isize);
            (self.xi)(u, &mut out[k * self.d..(k + 1) * self.d]);
        }
        out
    }

    /// `ξ` on the nodes of `[-τ, 0]` as an owned segment.
    pub fn initial_segment(&self, grid: &TimeGrid) -> Segment {
        Segment::new(self.d, grid.step(), self.history(grid)).expect("d >= 1")
    }

    /// Checks the Hurst-dependent windows `α ∈ (1 - 1/(2H), 1]` and
    /// `θ ∈ ((2H-1)/(2α), 1]`.
    pub fn validate_for_hurst(&self, hurst: f64) -> Result<()> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::OutOfRange(format!("H must lie in (1/2, 1), got {hurst}")));
        }
        let c = self.constants;
        let lo = 1.0 - 1.0 / (2.0 * hurst);
        if c.alpha <= lo {
            return Err(Error::OutOfRange(format!(
                "alpha = {} outside ({lo}, 1] for H = {hurst}",
                c.alpha
            )));
        }
        let lo = (2.0 * hurst - 1.0) / (2.0 * c.alpha);
        if c.theta <= lo {
            return Err(Error::OutOfRange(format!(
                "theta = {} outside ({lo}, 1] for H = {hurst}",
                c.theta
            )));
        }
        Ok(())
    }

    /// Grid-compatibility: the grid's `τ` must be the model's.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if (grid.tau() - self.tau).abs() > 1e-12 * self.tau {
            return Err(Error::GridMismatch(format!(
                "grid tau {} differs from model tau {}",
                grid.tau(),
                self.tau
            )));
        }
        Ok(())
    }
}
