//! Orthogonal splitting `ℝ^d = Ran(σ) ⊕ Ran(σ)^⊥` and the affine form of
//! the drift on the second summand.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::VectorFn;
use crate::error::{Error, Result};
use crate::rng::{generator, Purpose};

/// Author-supplied `(I - π*) b(x) = A (I - π*) x + b*(π* x)`.
#[derive(Clone)]
pub struct ShearDecomposition {
    pub a: DMatrix<f64>,
    pub b_star: VectorFn,
}

impl fmt::Debug for ShearDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShearDecomposition").field("a", &self.a).finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct DegenerateStructure {
    pi_star: DMatrix<f64>,
    sigma_pinv: DMatrix<f64>,
    rank: usize,
    sigma_norm: f64,
    pinv_norm: f64,
    shear: Option<ShearDecomposition>,
}

impl fmt::Debug for DegenerateStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DegenerateStructure")
            .field("pi_star", &self.pi_star)
            .field("sigma_pinv", &self.sigma_pinv)
            .field("rank", &self.rank)
            .finish_non_exhaustive()
    }
}

const RESIDUAL_TOL: f64 = 1e-8;
const PROBE_SEED: u64 = 0x5eed;

/// SVD of `σ`: `π* = U_r U_rᵀ`, `σ̂⁻¹ = V_r Σ_r⁻¹ U_rᵀ`. With `Ran(σ) ≠ ℝ^d`
/// the shear decomposition is required and checked at `probe_budget`
/// Gaussian points.
pub fn build_degenerate_structure(
    sigma: &DMatrix<f64>,
    b: &VectorFn,
    shear: Option<ShearDecomposition>,
    probe_budget: usize,
) -> Result<DegenerateStructure> {
    let (d, m) = sigma.shape();
    if d == 0 || m == 0 {
        return Err(Error::Validation("sigma must be non-empty".into()));
    }
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("sigma has non-finite entries".into()));
    }
    let svd = sigma.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    if s_max == 0.0 {
        return Err(Error::ZeroNoise);
    }
    let tol = s_max * (d.max(m) as f64) * f64::EPSILON;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    let mut pi_star = DMatrix::zeros(d, d);
    let mut sigma_pinv = DMatrix::zeros(m, d);
    let mut s_min = f64::INFINITY;
    for &i in &keep {
        let ui = u.column(i);
        let vi = v_t.row(i).transpose();
        let s = svd.singular_values[i];
        s_min = s_min.min(s);
        pi_star += &ui * ui.transpose();
        sigma_pinv += (&vi * ui.transpose()) / s;
    }
    let rank = keep.len();
    let structure = DegenerateStructure {
        pi_star,
        sigma_pinv,
        rank,
        sigma_norm: s_max,
        pinv_norm: 1.0 / s_min,
        shear: if rank < d { shear } else { None },
    };
    if rank < d {
        let Some(sh) = &structure.shear else {
            return Err(Error::Validation(format!(
                "Ran(sigma) has dimension {rank} < d = {d}; A and b* must be supplied"
            )));
        };
        if sh.a.shape() != (d, d) {
            return Err(Error::Validation(format!(
                "A must be {d}x{d}, got {:?}",
                sh.a.shape()
            )));
        }
        structure.validate(b, probe_budget)?;
    }
    Ok(structure)
}

impl DegenerateStructure {
    pub fn pi_star(&self) -> &DMatrix<f64> {
        &self.pi_star
    }

    pub fn sigma_pinv(&self) -> &DMatrix<f64> {
        &self.sigma_pinv
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Ran(σ) = ℝ^d`.
    pub fn full_rank(&self) -> bool {
        self.rank == self.pi_star.nrows()
    }

    /// Spectral norm `‖σ‖`.
    pub fn sigma_norm(&self) -> f64 {
        self.sigma_norm
    }

    /// Spectral norm `‖σ̂⁻¹‖`, the reciprocal of the smallest nonzero
    /// singular value.
    pub fn pinv_norm(&self) -> f64 {
        self.pinv_norm
    }

    pub fn shear(&self) -> Option<&ShearDecomposition> {
        self.shear.as_ref()
    }

    /// `I - π*`.
    pub fn complement(&self) -> DMatrix<f64> {
        DMatrix::identity(self.pi_star.nrows(), self.pi_star.ncols()) - &self.pi_star
    }

    /// Largest `|(I-π*)b(x) - A(I-π*)x - b*(π*x)| / (1 + |b(x)|)` seen.
    pub fn decomposition_residual(&self, b: &VectorFn, probe_budget: usize) -> f64 {
        let Some(sh) = &self.shear else { return 0.0 };
        let d = self.pi_star.nrows();
        let q = self.complement();
        let mut rng = generator(PROBE_SEED, Purpose::Probe, 0, 0);
        let mut bx = vec![0.0; d];
        let mut bs = vec![0.0; d];
        let mut worst: f64 = 0.0;
        for _ in 0..probe_budget.max(1) {
            let x = DVector::from_fn(d, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            b(x.as_slice(), &mut bx);
            let px = &self.pi_star * &x;
            b_star_eval(&sh.b_star, px.as_slice(), &mut bs);
            let lhs = &q * DVector::from_column_slice(&bx);
            let rhs = &sh.a * (&q * &x) + DVector::from_column_slice(&bs);
            let scale = 1.0 + DVector::from_column_slice(&bx).norm();
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        worst
    }

    fn validate(&self, b: &VectorFn, probe_budget: usize) -> Result<()> {
        let r = self.decomposition_residual(b, probe_budget);
        if !(r < RESIDUAL_TOL) {
            return Err(Error::Validation(format!(
                "(I - pi*) b(x) = A (I - pi*) x + b*(pi* x) fails: residual {r:e}"
            )));
        }
        Ok(())
    }
}

fn b_star_eval(f: &VectorFn, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    f(x, out);
}
