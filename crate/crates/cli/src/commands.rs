use std::io::Write;
use std::sync::Arc;

use fbm_sfde::convergence::run_study;
use fbm_sfde::fbm::{VolterraSynth, WienerPath};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::model::{assumption_probe, check_stepsize_conditions};
use fbm_sfde::solver::{solve_em_truncated, solve_reference};

use crate::checks::{run_suite, write_checks, SuiteConfig};
use crate::{write_file, CliError, RunConfig};

/// Points sampled by the assumption probe.
const PROBE_POINTS: usize = 2_000;

/// Per path `p`: `fbm_p.csv`, `reference_p.csv` on the fine grid and
/// `em_M<m>_p.csv` for every `M`.
pub fn paths(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let m_max = *cfg.m_values.last().expect("validated non-empty");
    let grid = TimeGrid::new(cfg.tau, cfg.horizon, m_max, cfg.substeps)?;
    let synth = VolterraSynth::new(grid, cfg.hurst)?;
    let mut files = 0;
    for p in 0..cfg.n_paths {
        let fbm = Arc::new(synth.synthesize(WienerPath::sample(grid, cfg.seed, p, model.m())?)?);
        write_file(&cfg.out.join(format!("fbm_{p}.csv")), |w| fbm.write_dump(w))?;
        let y = solve_reference(&model, &fbm)?;
        write_file(&cfg.out.join(format!("reference_{p}.csv")), |w| y.write_dump(w))?;
        files += 2;
        for &m in &cfg.m_values {
            let x = solve_em_truncated(&model, &fbm, cfg.tau / m as f64)?;
            write_file(&cfg.out.join(format!("em_M{m}_{p}.csv")), |w| x.write_dump(w))?;
            files += 1;
        }
    }
    println!("wrote {files} path files to {}", cfg.out.display());
    Ok(())
}

/// Report-only: succeeds once `errors.csv` and `summary.txt` are written.
pub fn convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let report = run_study(&cfg.convergence_config())?;
    write_file(&cfg.out.join("errors.csv"), |w| report.write_csv(w))?;
    let mut summary = Vec::new();
    report
        .write_summary(&mut summary)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&cfg.out.join("summary.txt"), |w| w.write_all(&summary))?;
    print!("{}", String::from_utf8_lossy(&summary));
    Ok(())
}

pub fn check_operators(cfg: &RunConfig) -> Result<(), CliError> {
    let checks = run_suite(&SuiteConfig {
        hurst: cfg.hurst,
        seed: cfg.seed,
        quick: cfg.quick,
        ch_scale: cfg.ch_scale,
    })?;
    write_file(&cfg.out.join("checks.csv"), |w| write_checks(&checks, w))?;
    for c in &checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} = {:.3e} (tolerance {:.3e})", c.name, c.value, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

/// `conditions.csv` for every `δ = τ/M` and `assumptions.csv` from the
/// random probe; fails if either reports a violation.
pub fn check_conditions(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let reports = cfg
        .m_values
        .iter()
        .map(|&m| check_stepsize_conditions(&model, cfg.hurst, cfg.horizon, cfg.tau / m as f64, cfg.beta))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&cfg.out.join("conditions.csv"), |w| {
        writeln!(
            w,
            "delta,c0,phi,sigma_norm,pinv_norm,lhs_weight,rhs_weight,pass_weight,lhs_step,rhs_step,pass_step,moment_exponent"
        )?;
        for r in &reports {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{},{:e}",
                r.delta,
                r.c0,
                r.phi.phi,
                r.sigma_norm,
                r.pinv_norm,
                r.lhs_weight,
                r.rhs_weight,
                r.pass_weight,
                r.lhs_step,
                r.rhs_step,
                r.pass_step,
                r.moment_exponent
            )?;
        }
        Ok(())
    })?;
    let probe = assumption_probe(&model, if cfg.quick { PROBE_POINTS / 10 } else { PROBE_POINTS }, cfg.seed);
    write_file(&cfg.out.join("assumptions.csv"), |w| {
        writeln!(w, "assumption,declared,max_ratio,pass,witness")?;
        for c in &probe.checks {
            writeln!(
                w,
                "{},{:e},{:e},{},\"{}\"",
                c.name,
                c.declared,
                c.max_ratio,
                c.pass,
                c.witness.as_deref().unwrap_or("").replace('"', "'")
            )?;
        }
        Ok(())
    })?;
    let mut failed = Vec::new();
    for r in &reports {
        let tag = if r.pass() { "PASS" } else { "FAIL" };
        println!(
            "{tag} delta = {:e}: weight {:.3e} < {:.3e}, step {:.3e} < {:.3e}",
            r.delta, r.lhs_weight, r.rhs_weight, r.lhs_step, r.rhs_step
        );
        if !r.pass() {
            failed.push(format!("delta = {:e}", r.delta));
        }
    }
    for c in &probe.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} {}: max ratio {:.3e} vs declared {:.3e}", c.name, c.max_ratio, c.declared);
        if !c.pass {
            failed.push(c.name.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("violated: {}", failed.join(", "))))
    }
}
