//! Grid norms of sampled paths and the Fernique-type moment checks.
//!
//! Hölder norms are maxima over grid pairs, a lower bound for the norm of
//! the underlying continuous path.

use crate::error::{domain, Error, Result};
use crate::fbm::VolterraSynth;
use crate::fbm::WienerPath;
use crate::grid::TimeGrid;
use crate::mc::{batched, DEFAULT_BATCH};
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub value: f64,
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// `max_{s<t} |f(t) - f(s)| / (t - s)^β` over all node pairs; `values` is
/// node-major with `dim` components per node.
pub fn holder_norm(times: &[f64], values: &[f64], dim: usize, beta: f64) -> Result<HolderEstimate> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain("holder_norm", format!("beta must lie in (0, 1], got {beta}")));
    }
    check_layout("holder_norm", times, values, dim)?;
    if times.len() < 2 {
        return Err(domain("holder_norm", "need at least two nodes"));
    }
    let n = times.len();
    let mut best: f64 = 0.0;
    for j in 1..n {
        let fj = &values[j * dim..(j + 1) * dim];
        for i in 0..j {
            let fi = &values[i * dim..(i + 1) * dim];
            best = best.max(distance(fj, fi) / (times[j] - times[i]).powf(beta));
        }
    }
    Ok(HolderEstimate {
        a: times[0],
        b: times[n - 1],
        beta,
        value: best,
    })
}

/// `max_i |f(t_i)|`.
pub fn sup_norm(values: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || values.is_empty() || values.len() % dim != 0 {
        return Err(domain("sup_norm", "empty interval or ragged values"));
    }
    Ok(values
        .chunks(dim)
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

fn check_layout(func: &'static str, times: &[f64], values: &[f64], dim: usize) -> Result<()> {
    if dim == 0 || values.len() != times.len() * dim {
        return Err(domain(func, "values do not match the node count"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain(func, "times must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FerniqueVariant {
    /// `E exp(α ‖B^H‖²_{0,T,β})` against `(1 - 128α(2T)^{2(H-β)})^{-1/2}`.
    Holder,
    /// `E exp(α ‖B^H‖²_{0,T,∞})`, finite for `α < 1/(2T)`; no explicit bound.
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FerniqueReport {
    pub variant: FerniqueVariant,
    pub alpha_coef: f64,
    pub threshold: f64,
    pub empirical_mean: f64,
    pub stderr: f64,
    pub bound: Option<f64>,
    pub satisfied: bool,
    /// `E ‖B^H‖²` (Hölder or sup, matching the variant).
    pub second_moment: f64,
    pub second_moment_stderr: f64,
    /// `32 (2T)^{2(H-β)} 2` for the Hölder variant.
    pub second_moment_bound: Option<f64>,
    pub second_moment_satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FerniqueConfig {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub alpha_coef: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub variant: FerniqueVariant,
    /// Grid cells on `[0, T]`.
    pub intervals: usize,
}

/// `1/(128 (2T)^{2(H-β)})`.
pub fn holder_threshold(hurst: f64, beta: f64, horizon: f64) -> f64 {
    1.0 / (128.0 * (2.0 * horizon).powf(2.0 * (hurst - beta)))
}

/// `32^k (2T)^{2k(H-β)} (2k)!/k!`.
pub fn holder_moment_bound(hurst: f64, beta: f64, horizon: f64, k: u32) -> f64 {
    let ratio: f64 = (k + 1..=2 * k).map(f64::from).product();
    32f64.powi(k as i32) * (2.0 * horizon).powf(2.0 * f64::from(k) * (hurst - beta)) * ratio
}

pub fn fernique_check(cfg: &FerniqueConfig) -> Result<FerniqueReport> {
    let FerniqueConfig {
        hurst,
        beta,
        horizon,
        alpha_coef,
        n_samples,
        seed,
        variant,
        intervals,
    } = *cfg;
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::OutOfRange(format!("H must lie in (1/2, 1), got {hurst}")));
    }
    if !(beta > 0.5 && beta < hurst) {
        return Err(Error::OutOfRange(format!("beta must lie in (1/2, H) = (0.5, {hurst}), got {beta}")));
    }
    if n_samples < 2 {
        return Err(Error::OutOfRange("need at least two samples".into()));
    }
    let threshold = match variant {
        FerniqueVariant::Holder => holder_threshold(hurst, beta, horizon),
        FerniqueVariant::Sup => 1.0 / (2.0 * horizon),
    };
    if !(alpha_coef >= 0.0 && alpha_coef < threshold) {
        return Err(Error::OutOfRange(format!(
            "alpha_coef = {alpha_coef} must lie in [0, {threshold})"
        )));
    }
    let grid = TimeGrid::new(horizon, horizon, intervals, 1)?;
    let synth = VolterraSynth::new(grid, hurst)?;
    let times: Vec<f64> = (0..=grid.n_steps()).map(|i| grid.time(i as isize)).collect();
    let parts = batched(n_samples, DEFAULT_BATCH, |range| -> Result<(Moments, Moments)> {
        let mut e = Moments::new();
        let mut m2 = Moments::new();
        for p in range {
            let w = WienerPath::sample(grid, seed, p, 1)?;
            let b = synth.apply(w.increments());
            let norm = match variant {
                FerniqueVariant::Holder => holder_norm(&times, &b, 1, beta)?.value,
                FerniqueVariant::Sup => sup_norm(&b, 1)?,
            };
            e.push((alpha_coef * norm * norm).exp());
            m2.push(norm * norm);
        }
        Ok((e, m2))
    });
    let mut e = Moments::new();
    let mut m2 = Moments::new();
    for part in parts {
        let (a, b) = part?;
        e.merge(&a);
        m2.merge(&b);
    }
    let (bound, m2_bound) = match variant {
        FerniqueVariant::Holder => (
            Some((1.0 - 128.0 * alpha_coef * (2.0 * horizon).powf(2.0 * (hurst - beta))).powf(-0.5)),
            Some(holder_moment_bound(hurst, beta, horizon, 1)),
        ),
        FerniqueVariant::Sup => (None, None),
    };
    let satisfied = match bound {
        Some(b) => e.mean() <= b + 3.0 * e.stderr(),
        None => e.mean().is_finite(),
    };
    let second_moment_satisfied = match m2_bound {
        Some(b) => m2.mean() <= b + 3.0 * m2.stderr(),
        None => m2.mean().is_finite(),
    };
    Ok(FerniqueReport {
        variant,
        alpha_coef,
        threshold,
        empirical_mean: e.mean(),
        stderr: e.stderr(),
        bound,
        satisfied,
        second_moment: m2.mean(),
        second_moment_stderr: m2.stderr(),
        second_moment_bound: m2_bound,
        second_moment_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_of_identity_and_constant() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert!((holder_norm(&t, &t, 1, 1.0).unwrap().value - 1.0).abs() < 1e-12);
        let c = vec![3.0; 11];
        assert_eq!(holder_norm(&t, &c, 1, 0.5).unwrap().value, 0.0);
        assert!(holder_norm(&t[..1], &c[..1], 1, 0.5).is_err());
    }

    #[test]
    fn holder_of_sqrt() {
        let t: Vec<f64> = (0..128).map(|i| i as f64 / 127.0).collect();
        let v: Vec<f64> = t.iter().map(|x| x.sqrt()).collect();
        let h = holder_norm(&t, &v, 1, 0.5).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sup_norm_values() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(sup_norm(&t, 1).unwrap(), 1.0);
        assert_eq!(sup_norm(&[-2.0; 5], 1).unwrap(), 2.0);
        assert!(sup_norm(&[], 1).is_err());
    }

    #[test]
    fn moment_bound_k1() {
        let b = holder_moment_bound(0.75, 0.6, 1.0, 1);
        assert!((b - 64.0 * 2f64.powf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_gives_unit_mean() {
        let cfg = FerniqueConfig {
            hurst: 0.75,
            beta: 0.6,
            horizon: 1.0,
            alpha_coef: 0.0,
            n_samples: 50,
            seed: 1,
            variant: FerniqueVariant::Holder,
            intervals: 32,
        };
        let r = fernique_check(&cfg).unwrap();
        assert_eq!(r.empirical_mean, 1.0);
        assert_eq!(r.bound, Some(1.0));
        assert!(r.satisfied);
    }

    #[test]
    fn rejects_coefficient_above_threshold() {
        let cfg = FerniqueConfig {
            hurst: 0.75,
            beta: 0.6,
            horizon: 1.0,
            alpha_coef: 1.0,
            n_samples: 10,
            seed: 1,
            variant: FerniqueVariant::Holder,
            intervals: 8,
        };
        let err = fernique_check(&cfg).unwrap_err();
        assert!(err.to_string().contains("must lie in [0,"));
    }
}
