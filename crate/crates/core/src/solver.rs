//! Euler solver for the reference equation `dY = b(Y) dt + σ dB^H` and the
//! truncated Euler-Maruyama scheme for the full path-dependent equation.
//!
//! Both run on the fine grid of a [`TimeGrid`]. In the scheme, `b` is frozen
//! at the last `δ`-node on `Ran(σ)` and `Z` is read from the truncated
//! segment at every fine step; the `(I - π*)` block is propagated with
//! `e^{AΔ}` and the trapezoid rule for `∫ e^{A(t-s)} b*(π* X(s)) ds`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fbm::{write_path_dump, FbmPath, VolterraSynth, WienerPath};
use crate::grid::TimeGrid;
use crate::mc::{batched, DEFAULT_BATCH};
use crate::model::{phi_constants, ModelSpec, SegmentView};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Reference,
    TruncatedEm { delta: f64 },
}

/// A solution on `[-τ, T]`, node-major, glued to `ξ` on `[-τ, 0]`.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    scheme: Scheme,
    fbm: Arc<FbmPath>,
}

impl SolutionPath {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn fbm(&self) -> &Arc<FbmPath> {
        &self.fbm
    }

    /// Every node of `[-τ, T]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodes of `[0, T]`.
    pub fn positive_values(&self) -> &[f64] {
        &self.values[self.grid.history_steps() * self.dim..]
    }

    /// Value at signed node index `i`.
    pub fn at(&self, i: isize) -> &[f64] {
        let j = (i + self.grid.history_steps() as isize) as usize * self.dim;
        &self.values[j..j + self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.grid.n_steps() as isize)
    }

    pub fn value_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.at(self.grid.index_of(t)?))
    }

    /// `u ↦ X(min(t_end + u, t_cap))` for non-negative node indices.
    pub fn view(&self, end: usize, cap: usize) -> SegmentView<'_> {
        assert!(cap <= end && end <= self.grid.n_steps(), "segment indices out of range");
        let hist = self.grid.history_steps();
        SegmentView::new(
            &self.values,
            self.dim,
            -(hist as isize),
            hist,
            self.grid.step(),
            end as isize,
            cap as isize,
        )
    }

    pub fn write_dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let first = -(self.grid.history_steps() as isize);
        write_path_dump(out, self.grid, first, self.dim, &self.values)
    }
}

fn check_inputs(model: &ModelSpec, fbm: &FbmPath) -> Result<()> {
    model.check_grid(&fbm.grid())?;
    if fbm.dim() != model.m() {
        return Err(Error::GridMismatch(format!(
            "fBm has {} components, model needs m = {}",
            fbm.dim(),
            model.m()
        )));
    }
    Ok(())
}

/// Fine steps per `δ`.
pub(crate) fn delta_steps(grid: &TimeGrid, delta: f64) -> Result<usize> {
    let k = (delta / grid.step()).round();
    if k < 1.0 || (k * grid.step() - delta).abs() > 1e-9 * delta {
        return Err(Error::OutOfRange(format!(
            "delta = {delta} is not a multiple of the fine step {}",
            grid.step()
        )));
    }
    let m = (grid.tau() / delta).round();
    if (m * delta - grid.tau()).abs() > 1e-9 * grid.tau() {
        return Err(Error::OutOfRange(format!("delta = {delta} does not divide tau = {}", grid.tau())));
    }
    Ok(k as usize)
}

fn mat_vec(a: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = a[r * cols..(r + 1) * cols].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = a.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| a[(i, j)])).collect()
}

/// Per-model, per-step-size constants of the two solvers.
pub(crate) struct Stepper {
    d: usize,
    m: usize,
    step: f64,
    hist: usize,
    n: usize,
    sigma: Vec<f64>,
    pi: Vec<f64>,
    q: Vec<f64>,
    expo: Vec<f64>,
    full_rank: bool,
    history: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(model: &ModelSpec, grid: &TimeGrid) -> Result<Self> {
        model.check_grid(grid)?;
        let s = model.structure();
        let expo = match s.shear() {
            Some(sh) => {
                let q = s.complement();
                row_major(&(&q * &sh.a * &q * grid.step()).exp())
            }
            None => Vec::new(),
        };
        Ok(Self {
            d: model.d(),
            m: model.m(),
            step: grid.step(),
            hist: grid.history_steps(),
            n: grid.n_steps(),
            sigma: row_major(model.sigma()),
            pi: row_major(s.pi_star()),
            q: row_major(&s.complement()),
            expo,
            full_rank: s.full_rank(),
            history: model.history(grid),
        })
    }

    fn start(&self) -> Vec<f64> {
        let mut values = vec![0.0; (self.hist + self.n + 1) * self.d];
        values[..self.history.len()].copy_from_slice(&self.history);
        values
    }

    fn diverged(&self, x: &[f64], i: usize) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Divergence {
                step: i,
                time: i as f64 * self.step,
            })
        }
    }

    /// Euler for `dY = b(Y) dt + σ dB^H`; `fbm` holds `B^H` node-major.
    pub(crate) fn reference(&self, model: &ModelSpec, fbm: &[f64]) -> Result<Vec<f64>> {
        let (d, m, dt) = (self.d, self.m, self.step);
        let mut values = self.start();
        let mut bx = vec![0.0; d];
        let mut db = vec![0.0; m];
        let mut sdb = vec![0.0; d];
        for i in 0..self.n {
            let j = (self.hist + i) * d;
            let (done, rest) = values.split_at_mut(j + d);
            let x = &done[j..];
            model.drift(x, &mut bx);
            for c in 0..m {
                db[c] = fbm[(i + 1) * m + c] - fbm[i * m + c];
            }
            mat_vec(&self.sigma, m, &db, &mut sdb);
            let next = &mut rest[..d];
            for r in 0..d {
                next[r] = x[r] + bx[r] * dt + sdb[r];
            }
            self.diverged(next, i + 1)?;
        }
        Ok(values)
    }

    /// The truncated scheme with `k` fine steps per `δ`.
    pub(crate) fn truncated_em(&self, model: &ModelSpec, fbm: &[f64], k: usize) -> Result<Vec<f64>> {
        let (d, m, dt) = (self.d, self.m, self.step);
        let mut values = self.start();
        let mut bx = vec![0.0; d];
        let mut frozen = vec![0.0; d];
        let mut z = vec![0.0; m];
        let mut noise = vec![0.0; m];
        let mut drive = vec![0.0; d];
        let mut px = vec![0.0; d];
        let mut qx = vec![0.0; d];
        let mut bs_old = vec![0.0; d];
        let mut bs_new = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let shear = model.structure().shear();
        for i in 0..self.n {
            let j = (self.hist + i) * d;
            let (done, rest) = values.split_at_mut(j + d);
            let x = &done[j..];
            if i % k == 0 {
                model.drift(x, &mut bx);
                if self.full_rank {
                    frozen.copy_from_slice(&bx);
                } else {
                    mat_vec(&self.pi, d, &bx, &mut frozen);
                }
            }
            let view = SegmentView::new(done, d, -(self.hist as isize), self.hist, dt, i as isize, (i / k * k) as isize);
            model.segment_drift(&view, &mut z);
            for c in 0..m {
                noise[c] = z[c] * dt + fbm[(i + 1) * m + c] - fbm[i * m + c];
            }
            mat_vec(&self.sigma, m, &noise, &mut drive);
            let next = &mut rest[..d];
            if self.full_rank {
                for r in 0..d {
                    next[r] = x[r] + frozen[r] * dt + drive[r];
                }
            } else {
                let sh = shear.expect("validated structure");
                mat_vec(&self.pi, d, x, &mut px);
                mat_vec(&self.q, d, x, &mut qx);
                bs_old.iter_mut().for_each(|v| *v = 0.0);
                (sh.b_star)(&px, &mut bs_old);
                for r in 0..d {
                    px[r] += frozen[r] * dt + drive[r];
                }
                bs_new.iter_mut().for_each(|v| *v = 0.0);
                (sh.b_star)(&px, &mut bs_new);
                for r in 0..d {
                    tmp[r] = qx[r] + 0.5 * dt * bs_old[r];
                }
                mat_vec(&self.expo, d, &tmp, &mut qx);
                for r in 0..d {
                    next[r] = px[r] + qx[r] + 0.5 * dt * bs_new[r];
                }
            }
            self.diverged(next, i + 1)?;
        }
        Ok(values)
    }
}

/// Explicit Euler on the fine grid of `fbm`, glued to `ξ`.
pub fn solve_reference(model: &ModelSpec, fbm: &Arc<FbmPath>) -> Result<SolutionPath> {
    check_inputs(model, fbm)?;
    let grid = fbm.grid();
    let values = Stepper::new(model, &grid)?.reference(model, fbm.values())?;
    Ok(SolutionPath {
        grid,
        dim: model.d(),
        values,
        scheme: Scheme::Reference,
        fbm: Arc::clone(fbm),
    })
}

/// The truncated scheme with step `δ`, a multiple of the fine step of `fbm`
/// dividing `τ`.
pub fn solve_em_truncated(model: &ModelSpec, fbm: &Arc<FbmPath>, delta: f64) -> Result<SolutionPath> {
    check_inputs(model, fbm)?;
    let grid = fbm.grid();
    let k = delta_steps(&grid, delta)?;
    let values = Stepper::new(model, &grid)?.truncated_em(model, fbm.values(), k)?;
    Ok(SolutionPath {
        grid,
        dim: model.d(),
        values,
        scheme: Scheme::TruncatedEm { delta },
        fbm: Arc::clone(fbm),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub n_paths: u64,
    pub slack: f64,
    /// Paths where `|Y(t)|` exceeds the pointwise growth bound at some node.
    pub pointwise_violations: u64,
    pub pointwise_max_excess: f64,
    /// Paths where `sup |Y|` exceeds the uniform bound.
    pub uniform_violations: u64,
    pub uniform_max_excess: f64,
}

impl MomentBoundReport {
    pub fn pointwise_rate(&self) -> f64 {
        self.pointwise_violations as f64 / self.n_paths.max(1) as f64
    }

    pub fn uniform_rate(&self) -> f64 {
        self.uniform_violations as f64 / self.n_paths.max(1) as f64
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Simulates reference paths and checks, node by node,
/// `|Y(t)| <= e^{K̄2 t/2}|Y(0)| + sqrt(K̄2) (∫0^t e^{K̄1(t-r)} |b(σB^H(r))|² dr)^{1/2} + |σB^H(t)|`
/// and `sup|Y| <= ‖ξ‖ + |b(0)|Φ + (L1 Φ + 1)‖σ‖ sup|B^H|`, each up to `slack`.
pub fn moment_bound_check(
    model: &ModelSpec,
    grid: TimeGrid,
    hurst: f64,
    n_paths: u64,
    seed: u64,
    slack: f64,
) -> Result<MomentBoundReport> {
    let synth = VolterraSynth::new(grid, hurst)?;
    let stepper = Stepper::new(model, &grid)?;
    let (d, m) = (model.d(), model.m());
    let c = model.constants();
    let phi = phi_constants(c.k1, grid.horizon());
    let sigma = row_major(model.sigma());
    let sigma_norm = model.structure().sigma_norm();
    let mut b0 = vec![0.0; d];
    model.drift(&vec![0.0; d], &mut b0);
    let b0 = norm(&b0);
    let xi_sup = model.initial_segment(&grid).sup_norm();
    let dt = grid.step();
    let n = grid.n_steps();
    let parts = batched(n_paths, DEFAULT_BATCH, |range| -> Result<(u64, f64, u64, f64)> {
        let mut out = (0, f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
        let mut sb = vec![0.0; d];
        let mut bsb = vec![0.0; d];
        for p in range {
            let fbm = synth.synthesize(WienerPath::sample(grid, seed, p, m)?)?;
            let y = stepper.reference(model, fbm.values())?;
            let y0 = &y[grid.history_steps() * d..];
            let start = norm(&y0[..d]);
            let mut integral = 0.0;
            let mut prev_g = 0.0;
            let mut worst = f64::NEG_INFINITY;
            let mut b_sup: f64 = 0.0;
            for i in 0..=n {
                let t = grid.time(i as isize);
                mat_vec(&sigma, m, fbm.at(i), &mut sb);
                model.drift(&sb, &mut bsb);
                let g = (-phi.k1bar * t).exp() * bsb.iter().map(|v| v * v).sum::<f64>();
                if i > 0 {
                    integral += 0.5 * dt * (prev_g + g);
                }
                prev_g = g;
                let rhs = (0.5 * phi.k2bar * t).exp() * start
                    + (phi.k2bar * (phi.k1bar * t).exp() * integral).sqrt()
                    + norm(&sb);
                worst = worst.max(norm(&y0[i * d..(i + 1) * d]) - rhs);
                b_sup = b_sup.max(norm(fbm.at(i)));
            }
            if worst > slack {
                out.0 += 1;
            }
            out.1 = out.1.max(worst);
            let sup = y.chunks(d).map(norm).fold(0.0, f64::max);
            let bound = xi_sup + b0 * phi.phi + (c.l1 * phi.phi + 1.0) * sigma_norm * b_sup;
            let excess = sup - bound;
            if excess > slack {
                out.2 += 1;
            }
            out.3 = out.3.max(excess);
        }
        Ok(out)
    });
    let mut report = MomentBoundReport {
        n_paths,
        slack,
        pointwise_violations: 0,
        pointwise_max_excess: f64::NEG_INFINITY,
        uniform_violations: 0,
        uniform_max_excess: f64::NEG_INFINITY,
    };
    for part in parts {
        let (a, b, c, e) = part?;
        report.pointwise_violations += a;
        report.pointwise_max_excess = report.pointwise_max_excess.max(b);
        report.uniform_violations += c;
        report.uniform_max_excess = report.uniform_max_excess.max(e);
    }
    Ok(report)
}
