//! Uniform time grid on `[-τ, T]` with EM step `δ = τ/M` and fine step
//! `Δ = δ/substeps`. Nodes are addressed by signed integer index `i`, with
//! `t_i = i Δ`; every segment and truncation is index arithmetic.

use crate::error::{Error, Result};
use crate::fractional::UniformGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    horizon: f64,
    m: usize,
    substeps: usize,
    n_steps: usize,
}

impl TimeGrid {
    /// Fails unless `T` is an integer multiple of `Δ` (to 1e-9 relative).
    pub fn new(tau: f64, horizon: f64, m: usize, substeps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidGrid(format!("tau must be positive, got {tau}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("T must be positive, got {horizon}")));
        }
        if m == 0 || substeps == 0 {
            return Err(Error::InvalidGrid("M and substeps must be positive".into()));
        }
        let fine = tau / (m * substeps) as f64;
        let n = (horizon / fine).round();
        if n < 1.0 || (n * fine - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidGrid(format!(
                "T = {horizon} is not a multiple of the fine step {fine}"
            )));
        }
        Ok(Self {
            tau,
            horizon,
            m,
            substeps,
            n_steps: n as usize,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// `δ = τ/M`.
    pub fn delta(&self) -> f64 {
        self.tau / self.m as f64
    }

    /// `Δ = δ/substeps`.
    pub fn step(&self) -> f64 {
        self.tau / (self.m * self.substeps) as f64
    }

    /// Fine steps on `[0, T]`.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Fine steps on `[-τ, 0]`.
    pub fn history_steps(&self) -> usize {
        self.m * self.substeps
    }

    /// Time of signed node index `i`, `-history_steps() <= i <= n_steps()`.
    pub fn time(&self, i: isize) -> f64 {
        if i == self.n_steps as isize {
            return self.horizon;
        }
        i as f64 * self.tau / (self.m * self.substeps) as f64
    }

    /// Index of `t_δ = ⌊t_i/δ⌋δ` for a non-negative fine index.
    pub fn floor_delta(&self, i: usize) -> usize {
        i / self.substeps * self.substeps
    }

    /// Nearest fine index to `t`, provided `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<isize> {
        let x = t / self.step();
        let i = x.round();
        if (x - i).abs() > 1e-6 {
            return Err(Error::OutOfRange(format!("t = {t} is not a grid node")));
        }
        let i = i as isize;
        if i < -(self.history_steps() as isize) || i > self.n_steps as isize {
            return Err(Error::OutOfRange(format!("t = {t} outside [-tau, T]")));
        }
        Ok(i)
    }

    /// The `[0, T]` part as a grid for the fractional operators.
    pub fn positive_part(&self) -> UniformGrid {
        UniformGrid {
            step: self.step(),
            len: self.n_steps + 1,
        }
    }

    /// Same `δ`, fine step multiplied by `factor` (which must divide
    /// `substeps`).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.substeps % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "factor {factor} does not divide substeps = {}",
                self.substeps
            )));
        }
        Self::new(self.tau, self.horizon, self.m, self.substeps / factor)
    }

    /// A grid with EM step `τ/m_new` sharing this grid's fine step.
    pub fn with_delta(&self, m_new: usize) -> Result<Self> {
        let total = self.m * self.substeps;
        if m_new == 0 || total % m_new != 0 {
            return Err(Error::InvalidGrid(format!(
                "M = {m_new} does not divide {total} fine history steps"
            )));
        }
        Self::new(self.tau, self.horizon, m_new, total / m_new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_layout() {
        let g = TimeGrid::new(0.5, 1.0, 8, 8).unwrap();
        assert_eq!(g.delta(), 0.0625);
        assert_eq!(g.step(), 0.5 / 64.0);
        assert_eq!(g.n_steps(), 128);
        assert_eq!(g.history_steps(), 64);
        assert_eq!(g.time(-64), -0.5);
        assert_eq!(g.time(128), 1.0);
        assert_eq!(g.floor_delta(15), 8);
        assert_eq!(g.floor_delta(16), 16);
        assert_eq!(g.index_of(0.25).unwrap(), 32);
        assert!(g.index_of(0.251).is_err());
        assert!(g.index_of(2.0).is_err());
    }

    #[test]
    fn rejects_misaligned_horizon() {
        assert!(TimeGrid::new(0.5, 1.003, 8, 8).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 8, 8).is_err());
        assert!(TimeGrid::new(0.5, 1.0, 0, 8).is_err());
    }

    #[test]
    fn with_delta_keeps_fine_step() {
        let g = TimeGrid::new(0.5, 1.0, 64, 8).unwrap();
        let c = g.with_delta(8).unwrap();
        assert_eq!(c.step(), g.step());
        assert_eq!(c.substeps(), 64);
        assert!(g.with_delta(7).is_err());
    }

    #[test]
    fn coarsen_by_substep_factor() {
        let g = TimeGrid::new(0.5, 1.0, 8, 64).unwrap();
        let c = g.coarsen(8).unwrap();
        assert_eq!(c.substeps(), 8);
        assert_eq!(c.n_steps(), g.n_steps() / 8);
    }
}
