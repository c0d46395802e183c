//! Wiener and fractional Brownian paths.
//!
//! The primary generator is the Volterra sum `B^H(t_n) = Σ_j K̄(t_n, j) ΔB_j`
//! over fine cells, which keeps the Wiener increments for the Girsanov
//! integrals. The cell average of `K_H(t_n, ·)` is taken after replacing the
//! smooth factors `r^a` and `s^{-a}` by their cell means, which leaves the
//! singular `(r-s)^{a-1}` factor integrated exactly and makes the weights a
//! product of a Toeplitz kernel and two diagonals:
//! `B^H(t_n) = c_H Σ_{i<n} ρ_i Σ_{j<=i} W_{i-j} ω_j ΔB_j`.
//! A dense Cholesky factorization of `[R_H(t_i, t_j)]` serves as exact-law
//! oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::conv::CausalConvolver;
use crate::error::{domain, Error, Result};
use crate::fractional::kh_normalization;
use crate::fractional::weights::IntegralWeights;
use crate::grid::TimeGrid;
use crate::rng::{normals, Purpose};
use crate::special::pow_diff;

/// `R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H})/2`, any `H` in `(0, 1)`.
pub fn covariance(h: f64, t: f64, s: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(domain("covariance", format!("H must lie in (0, 1), got {h}")));
    }
    if t < 0.0 || s < 0.0 {
        return Err(domain("covariance", format!("negative time ({t}, {s})")));
    }
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// Brownian increments on the fine cells of `[0, T]`, node-major
/// (`increments[i * dim + c]` is the increment of coordinate `c` over
/// `[t_i, t_{i+1}]`).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: TimeGrid,
    dim: usize,
    seed: u64,
    path: u64,
    increments: Vec<f64>,
}

impl WienerPath {
    /// Path number `path` of the stream family `seed`.
    pub fn sample(grid: TimeGrid, seed: u64, path: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        let n = grid.n_steps();
        let sd = grid.step().sqrt();
        let mut increments = vec![0.0; n * dim];
        for c in 0..dim {
            let z = normals(seed, Purpose::Wiener, path, c as u64, n);
            for (i, v) in z.into_iter().enumerate() {
                increments[i * dim + c] = sd * v;
            }
        }
        Ok(Self {
            grid,
            dim,
            seed,
            path,
            increments,
        })
    }

    pub fn from_increments(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 || increments.len() != grid.n_steps() * dim {
            return Err(Error::GridMismatch(format!(
                "{} increments for {} steps of dimension {dim}",
                increments.len(),
                grid.n_steps()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(domain("WienerPath", "non-finite increment"));
        }
        Ok(Self {
            grid,
            dim,
            seed: 0,
            path: 0,
            increments,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// `B(t_i)` for `i = 0..=n_steps`, starting at 0.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.grid.n_steps() + 1) * self.dim];
        for i in 0..self.grid.n_steps() {
            for c in 0..self.dim {
                out[(i + 1) * self.dim + c] = out[i * self.dim + c] + self.increments[i * self.dim + c];
            }
        }
        out
    }

    /// Sums of `factor` consecutive increments, on `target`.
    pub fn coarsen_to(&self, target: TimeGrid) -> Result<Self> {
        let factor = step_ratio(&self.grid, &target)?;
        let d = self.dim;
        let mut increments = vec![0.0; target.n_steps() * d];
        for k in 0..target.n_steps() {
            for j in 0..factor {
                for c in 0..d {
                    increments[k * d + c] += self.increments[(k * factor + j) * d + c];
                }
            }
        }
        Ok(Self {
            grid: target,
            dim: d,
            seed: self.seed,
            path: self.path,
            increments,
        })
    }
}

fn step_ratio(fine: &TimeGrid, coarse: &TimeGrid) -> Result<usize> {
    let r = coarse.step() / fine.step();
    let k = r.round();
    if k < 1.0
        || (r - k).abs() > 1e-9 * r
        || (fine.tau() - coarse.tau()).abs() > 1e-12
        || (fine.horizon() - coarse.horizon()).abs() > 1e-12 * fine.horizon()
    {
        return Err(Error::GridMismatch(format!(
            "cannot coarsen step {} to {}",
            fine.step(),
            coarse.step()
        )));
    }
    Ok(k as usize)
}

/// Sampled fBm on the nodes of `[0, T]`, node-major like [`WienerPath`].
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    grid: TimeGrid,
    hurst: f64,
    dim: usize,
    values: Vec<f64>,
    wiener: Option<WienerPath>,
}

impl FbmPath {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar coordinate `c` at every node.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// The generating increments; `None` for Cholesky samples.
    pub fn wiener(&self) -> Option<&WienerPath> {
        self.wiener.as_ref()
    }

    /// Subsample at the nodes of a coarser grid with the same span.
    pub fn coarsen_to(&self, target: TimeGrid) -> Result<Self> {
        let factor = step_ratio(&self.grid, &target)?;
        let d = self.dim;
        let values = (0..=target.n_steps())
            .flat_map(|k| self.values[k * factor * d..(k * factor + 1) * d].iter().copied())
            .collect();
        let wiener = match &self.wiener {
            Some(w) => Some(w.coarsen_to(target)?),
            None => None,
        };
        Ok(Self {
            grid: target,
            hurst: self.hurst,
            dim: d,
            values,
            wiener,
        })
    }

    /// Writes `t, v_0, v_1, ...` per node.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_path_dump(out, self.grid, 0, self.dim, &self.values)
    }
}

/// Delimited dump shared by fBm and solution paths: one line per node,
/// starting at signed node index `first`.
pub fn write_path_dump<W: Write>(
    out: &mut W,
    grid: TimeGrid,
    first: isize,
    dim: usize,
    values: &[f64],
) -> std::io::Result<()> {
    write!(out, "t")?;
    for c in 0..dim {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    for (k, row) in values.chunks(dim).enumerate() {
        write!(out, "{}", grid.time(first + k as isize))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Precomputed Volterra weights for one `(grid, H)`.
#[derive(Debug, Clone)]
pub struct VolterraSynth {
    grid: TimeGrid,
    hurst: f64,
    scale: f64,
    rho: Vec<f64>,
    omega: Vec<f64>,
    conv: CausalConvolver,
}

impl VolterraSynth {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        let c_h = kh_normalization(hurst)?;
        let a = hurst - 0.5;
        let n = grid.n_steps();
        let step = grid.step();
        // Cell means of r^a and s^{-a} over [iΔ, (i+1)Δ].
        let rho = (1..=n)
            .map(|k| step.powf(a) * pow_diff(k as f64, 1.0 + a) / (1.0 + a))
            .collect();
        let omega = (1..=n)
            .map(|k| step.powf(-a) * pow_diff(k as f64, 1.0 - a) / (1.0 - a))
            .collect();
        // Mean over a source cell of ∫ over a target cell of (r-s)^{a-1}:
        // Δ^a (P_m + Q_{m+1}) for cells m apart, Δ^a/(a(a+1)) on the diagonal.
        let w = IntegralWeights::new(a, n.max(1));
        let kernel = w.kernel.iter().map(|v| v * step.powf(a)).collect();
        Ok(Self {
            grid,
            hurst,
            scale: c_h,
            rho,
            omega,
            conv: CausalConvolver::new(kernel),
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// One scalar channel: `n_steps` increments to `n_steps + 1` values.
    pub fn apply(&self, increments: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = increments.iter().zip(&self.omega).map(|(b, w)| b * w).collect();
        let v = self.conv.apply(&x);
        self.finish(&v)
    }

    fn finish(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for (r, x) in self.rho.iter().zip(v) {
            acc += r * x;
            out.push(self.scale * acc);
        }
        out
    }

    pub fn synthesize(&self, w: WienerPath) -> Result<FbmPath> {
        if w.grid() != self.grid {
            return Err(Error::GridMismatch("Wiener path and synthesizer grids differ".into()));
        }
        let d = w.dim();
        let n = self.grid.n_steps();
        let mut values = vec![0.0; (n + 1) * d];
        let chan = |c: usize| -> Vec<f64> { w.increments().iter().skip(c).step_by(d).copied().collect() };
        let mut c = 0;
        while c < d {
            if c + 1 < d {
                let (xa, xb): (Vec<f64>, Vec<f64>) = (chan(c), chan(c + 1));
                let xa: Vec<f64> = xa.iter().zip(&self.omega).map(|(b, o)| b * o).collect();
                let xb: Vec<f64> = xb.iter().zip(&self.omega).map(|(b, o)| b * o).collect();
                let (va, vb) = self.conv.apply_pair(&xa, &xb);
                for (i, (ya, yb)) in self.finish(&va).into_iter().zip(self.finish(&vb)).enumerate() {
                    values[i * d + c] = ya;
                    values[i * d + c + 1] = yb;
                }
                c += 2;
            } else {
                for (i, y) in self.apply(&chan(c)).into_iter().enumerate() {
                    values[i * d + c] = y;
                }
                c += 1;
            }
        }
        Ok(FbmPath {
            grid: self.grid,
            hurst: self.hurst,
            dim: d,
            values,
            wiener: Some(w),
        })
    }
}

/// `B^H = ∫0^t K_H(t,s) dB(s)` from the increments of `w`.
pub fn fbm_from_wiener(w: WienerPath, hurst: f64) -> Result<FbmPath> {
    VolterraSynth::new(w.grid(), hurst)?.synthesize(w)
}

/// Wiener path number 0 of `seed`.
pub fn sample_wiener(grid: TimeGrid, seed: u64, dim: usize) -> Result<WienerPath> {
    WienerPath::sample(grid, seed, 0, dim)
}

/// Exact-law sampler: lower Cholesky factor of `[R_H(t_i, t_j)]`,
/// `i, j = 1..=n_steps`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: TimeGrid,
    hurst: f64,
    factor: DMatrix<f64>,
}

pub const CHOLESKY_MAX_NODES: usize = 4096;

impl CholeskySampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(domain("sample_fbm_cholesky", format!("H must lie in (1/2, 1), got {hurst}")));
        }
        let n = grid.n_steps();
        if n > CHOLESKY_MAX_NODES {
            return Err(Error::InvalidGrid(format!(
                "{n} nodes exceed the dense limit {CHOLESKY_MAX_NODES}"
            )));
        }
        let t = |i: usize| grid.time(i as isize + 1);
        let cov = DMatrix::from_fn(n, n, |i, j| covariance(hurst, t(i), t(j)).expect("valid H"));
        let chol = cov.cholesky().ok_or(Error::Factorization { nodes: n })?;
        Ok(Self {
            grid,
            hurst,
            factor: chol.l(),
        })
    }

    pub fn sample(&self, seed: u64, path: u64, dim: usize) -> Result<FbmPath> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        let n = self.grid.n_steps();
        let mut values = vec![0.0; (n + 1) * dim];
        for c in 0..dim {
            let z = DVector::from_vec(normals(seed, Purpose::Cholesky, path, c as u64, n));
            let x = &self.factor * z;
            for i in 0..n {
                values[(i + 1) * dim + c] = x[i];
            }
        }
        Ok(FbmPath {
            grid: self.grid,
            hurst: self.hurst,
            dim,
            values,
            wiener: None,
        })
    }
}

/// Path number 0 of `seed` from the exact-law oracle.
pub fn sample_fbm_cholesky(grid: TimeGrid, hurst: f64, seed: u64, dim: usize) -> Result<FbmPath> {
    CholeskySampler::new(grid, hurst)?.sample(seed, 0, dim)
}
