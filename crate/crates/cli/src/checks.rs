//! Self-check suite behind `check-operators`.

use std::io::Write;

use fbm_sfde::fbm::{covariance, CholeskySampler, VolterraSynth, WienerPath};
use fbm_sfde::fractional::{
    frac_derivative, frac_integral, reconstruct_covariance_scaled, FracOrder, SampledFunction, UniformGrid,
};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::mc;
use fbm_sfde::norms::{fernique_check, holder_threshold, FerniqueConfig, FerniqueVariant};
use fbm_sfde::special::gamma_fn;
use fbm_sfde::stats::{ks_two_sample, Moments};
use fbm_sfde::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub hurst: f64,
    pub seed: u64,
    pub quick: bool,
    /// Multiplies the covariance constant in the reconstruction check.
    pub ch_scale: f64,
}

pub fn write_checks<W: Write>(checks: &[Check], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "check,value,tolerance,pass")?;
    for c in checks {
        writeln!(out, "{},{:e},{:e},{}", c.name, c.value, c.tolerance, c.pass)?;
    }
    Ok(())
}

fn order(a: f64) -> Result<FracOrder> {
    FracOrder::new(a)
}

/// Max relative error on nodes `x >= 0.1`.
fn interior_rel(f: &SampledFunction, exact: impl Fn(f64) -> f64) -> f64 {
    let g = f.grid();
    (0..g.len)
        .filter(|&i| g.node(i) >= 0.1 - 1e-12)
        .map(|i| {
            let want = exact(g.node(i));
            (f.at(i)[0] - want).abs() / want.abs()
        })
        .fold(0.0, f64::max)
}

fn identities(n: usize, tol: f64, out: &mut Vec<Check>) -> Result<()> {
    let f = SampledFunction::from_fn(UniformGrid::covering(1.0, n)?, |x| x * x)?;
    let c = gamma_fn(3.0)? / gamma_fn(3.7)?;
    let comp = frac_integral(&frac_integral(&f, order(0.4)?)?, order(0.3)?)?;
    out.push(Check::below(
        format!("composition_I0.3_I0.4_n{n}"),
        interior_rel(&comp, |x| c * x.powf(2.7)),
        tol,
    ));
    let inv = frac_derivative(&frac_integral(&f, order(0.5)?)?, order(0.5)?)?;
    out.push(Check::below(format!("inversion_D0.5_I0.5_n{n}"), interior_rel(&inv, |x| x * x), tol));
    Ok(())
}

fn power_laws(n: usize, out: &mut Vec<Check>) -> Result<()> {
    let g = UniformGrid::covering(1.0, n)?;
    for (a, mu) in [(0.25, 1.0), (0.5, 0.8)] {
        let f = SampledFunction::from_fn(g, |x: f64| x.powf(mu))?;
        let gi = gamma_fn(mu + 1.0)? / gamma_fn(mu + 1.0 + a)?;
        let gd = gamma_fn(mu + 1.0)? / gamma_fn(mu + 1.0 - a)?;
        let ei = interior_rel(&frac_integral(&f, order(a)?)?, |x| gi * x.powf(mu + a));
        let ed = interior_rel(&frac_derivative(&f, order(a)?)?, |x| gd * x.powf(mu - a));
        out.push(Check::below(format!("power_integral_a{a}_mu{mu}"), ei, 1e-2));
        out.push(Check::below(format!("power_derivative_a{a}_mu{mu}"), ed, 1e-2));
    }
    Ok(())
}

fn reconstruction(scale: f64, out: &mut Vec<Check>) -> Result<()> {
    let pts = [0.2, 0.4, 0.6, 0.8, 1.0];
    for h in [0.6, 0.75, 0.9] {
        let mut worst: f64 = 0.0;
        for &t in &pts {
            for &s in &pts {
                let want = covariance(h, t, s)?;
                worst = worst.max((reconstruct_covariance_scaled(h, t, s, scale)? - want).abs() / want);
            }
        }
        out.push(Check::below(format!("covariance_reconstruction_H{h}"), worst, 1e-4));
    }
    Ok(())
}

/// Empirical covariance on four nodes against the closed form, and a KS
/// test of `B^H(T)` against the Cholesky sampler.
fn fbm_law(hurst: f64, seed: u64, n_paths: u64, n_ks: u64, out: &mut Vec<Check>) -> Result<()> {
    let grid = TimeGrid::new(1.0, 1.0, 256, 1)?;
    let synth = VolterraSynth::new(grid, hurst)?;
    let nodes = [64usize, 128, 192, 256];
    let batches = mc::batched(n_paths, 256, |range| -> Result<(Vec<Moments>, Vec<f64>)> {
        let mut prods = vec![Moments::new(); 16];
        let mut terminal = Vec::new();
        for p in range {
            let f = synth.synthesize(WienerPath::sample(grid, seed, p, 1)?)?;
            for (a, &i) in nodes.iter().enumerate() {
                for (b, &j) in nodes.iter().enumerate() {
                    prods[a * 4 + b].push(f.at(i)[0] * f.at(j)[0]);
                }
            }
            if p < n_ks {
                terminal.push(f.at(256)[0]);
            }
        }
        Ok((prods, terminal))
    });
    let mut prods = vec![Moments::new(); 16];
    let mut terminal = Vec::new();
    for b in batches {
        let (p, t) = b?;
        prods.iter_mut().zip(&p).for_each(|(x, y)| x.merge(y));
        terminal.extend(t);
    }
    // Worst error in units of the allowed max(3%, 3 stderr).
    let mut worst: f64 = 0.0;
    for (a, &i) in nodes.iter().enumerate() {
        for (b, &j) in nodes.iter().enumerate() {
            let m = &prods[a * 4 + b];
            let want = covariance(hurst, grid.time(i as isize), grid.time(j as isize))?;
            worst = worst.max((m.mean() - want).abs() / (0.03 * want).max(3.0 * m.stderr()));
        }
    }
    out.push(Check::below("fbm_covariance_scaled_error", worst, 1.0));
    let chol = CholeskySampler::new(grid, hurst)?;
    let oracle = (0..n_ks)
        .map(|p| chol.sample(seed ^ 0x5eed, p, 1).map(|f| f.at(256)[0]))
        .collect::<Result<Vec<_>>>()?;
    let ks = ks_two_sample(&terminal, &oracle);
    out.push(Check {
        name: "fbm_terminal_ks_p_value".into(),
        value: ks.p_value,
        tolerance: 0.01,
        pass: ks.p_value > 0.01,
    });
    Ok(())
}

fn fernique(seed: u64, n_samples: u64, out: &mut Vec<Check>) -> Result<()> {
    let (h, beta, t) = (0.75, 0.6, 1.0);
    let r = fernique_check(&FerniqueConfig {
        hurst: h,
        beta,
        horizon: t,
        alpha_coef: 0.5 * holder_threshold(h, beta, t),
        n_samples,
        seed,
        variant: FerniqueVariant::Holder,
        intervals: 128,
    })?;
    let bound = r.bound.unwrap_or(f64::INFINITY);
    out.push(Check {
        name: "fernique_exponential_moment".into(),
        value: r.empirical_mean,
        tolerance: bound + 3.0 * r.stderr,
        pass: r.satisfied,
    });
    out.push(Check {
        name: "fernique_second_moment".into(),
        value: r.second_moment,
        tolerance: r.second_moment_bound.unwrap_or(f64::INFINITY) + 3.0 * r.second_moment_stderr,
        pass: r.second_moment_satisfied,
    });
    Ok(())
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if cfg.quick {
        identities(1024, 1e-2, &mut out)?;
        power_laws(1024, &mut out)?;
    } else {
        identities(4096, 1e-2, &mut out)?;
        identities(16384, 3e-3, &mut out)?;
        power_laws(4096, &mut out)?;
    }
    reconstruction(cfg.ch_scale, &mut out)?;
    let (paths, ks, fern) = if cfg.quick {
        (2_000, 1_000, 1_000)
    } else {
        (20_000, 10_000, 10_000)
    };
    fbm_law(cfg.hurst, cfg.seed, paths, ks, &mut out)?;
    fernique(cfg.seed, fern, &mut out)?;
    Ok(out)
}
