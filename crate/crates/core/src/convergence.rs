//! Monte Carlo weak errors of the truncated scheme and log-log order fits.
//!
//! Two estimators of `E f(X(t)) - E f(X^{(δ)}(t))` share one Wiener stream
//! per path index:
//! - `direct`: `E[f(X^{ref}(t)) - f(X^{(δ)}(t))]` with `X^{ref}` the scheme at
//!   `δ_ref = δ_min / refinement`;
//! - `girsanov`: `E[(R^ξ(t) - R^{ξ,δ}(t)) f(Y(t))]` on reference paths.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fbm::{VolterraSynth, WienerPath};
use crate::fractional::KhInverseOperator;
use crate::girsanov::{apply_inverse_all, discrepancy_channels, log_weight_path, segment_channels, Sign};
use crate::grid::TimeGrid;
use crate::mc::{batched, DEFAULT_BATCH};
use crate::model::{builtin_model, check_stepsize_conditions, theoretical_order, ConditionReport, ModelSpec};
use crate::solver::Stepper;
use crate::stats::Moments;

/// Bounded test functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `cos(k Σ_j x_j)`.
    Cos { k: f64 },
    /// Logistic step `1/(1 + e^{-(x_0 - level)/width})`.
    SmoothStep { level: f64, width: f64 },
    Constant(f64),
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Cos { k } => (k * x.iter().sum::<f64>()).cos(),
            TestFunction::SmoothStep { level, width } => 1.0 / (1.0 + (-(x[0] - level) / width).exp()),
            TestFunction::Constant(c) => c,
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![
            TestFunction::Cos { k: 1.0 },
            TestFunction::Cos { k: 2.0 },
            TestFunction::SmoothStep { level: 0.0, width: 0.1 },
        ]
    }

    /// `cos1`, `cos2`, `cos:<k>`, `smooth-step`, `smooth-step:<level>:<width>`,
    /// `const:<c>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown test function '{s}'"));
        match s {
            "cos1" => Ok(TestFunction::Cos { k: 1.0 }),
            "cos2" => Ok(TestFunction::Cos { k: 2.0 }),
            "smooth-step" => Ok(TestFunction::SmoothStep { level: 0.0, width: 0.1 }),
            _ if s.starts_with("smooth-step:") => {
                let mut it = s["smooth-step:".len()..].split(':').map(str::parse::<f64>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(level)), Some(Ok(width)), None) if width > 0.0 => {
                        Ok(TestFunction::SmoothStep { level, width })
                    }
                    _ => Err(bad()),
                }
            }
            _ => {
                let (head, tail) = s.split_once(':').ok_or_else(bad)?;
                let v: f64 = tail.parse().map_err(|_| bad())?;
                match head {
                    "cos" => Ok(TestFunction::Cos { k: v }),
                    "const" => Ok(TestFunction::Constant(v)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TestFunction::Cos { k } if k == 1.0 => write!(f, "cos1"),
            TestFunction::Cos { k } if k == 2.0 => write!(f, "cos2"),
            TestFunction::Cos { k } => write!(f, "cos:{k}"),
            TestFunction::SmoothStep { level, width } if level == 0.0 && width == 0.1 => write!(f, "smooth-step"),
            TestFunction::SmoothStep { level, width } => write!(f, "smooth-step:{level}:{width}"),
            TestFunction::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Direct,
    Girsanov,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Direct => "direct",
            Estimator::Girsanov => "girsanov",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub model: String,
    pub tau: f64,
    pub hurst: f64,
    pub horizon: f64,
    pub t_eval: f64,
    /// Descending, each `τ/M`.
    pub deltas: Vec<f64>,
    pub n_paths: u64,
    pub seed: u64,
    pub functions: Vec<TestFunction>,
    pub beta: f64,
    /// `δ_ref = δ_min / refinement`.
    pub refinement: usize,
    /// Fine steps per `δ`.
    pub substeps: usize,
    /// Also run the reweighting estimator.
    pub girsanov: bool,
}

impl ConvergenceConfig {
    /// Toy model, `H = 0.75`, `τ = 0.5`, `T = 1`, `δ ∈ {τ/8, ..., τ/64}`.
    pub fn toy() -> Self {
        let tau = 0.5;
        Self {
            model: "toy".into(),
            tau,
            hurst: 0.75,
            horizon: 1.0,
            t_eval: 1.0,
            deltas: [8.0, 16.0, 32.0, 64.0].iter().map(|m| tau / m).collect(),
            n_paths: 10_000,
            seed: 20240917,
            functions: vec![TestFunction::Cos { k: 1.0 }],
            beta: 0.7,
            refinement: 8,
            substeps: 8,
            girsanov: true,
        }
    }

    /// The model and grid checks of `run_study`, without sampling.
    pub fn validate(&self) -> Result<()> {
        builtin_model(&self.model, self.tau)?.validate_for_hurst(self.hurst)?;
        plan(self).map(|_| ())
    }

    /// Same `δ` list as `M` values.
    pub fn with_m_values(mut self, ms: &[usize]) -> Self {
        self.deltas = ms.iter().map(|&m| self.tau / m as f64).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl From<&Moments> for Estimate {
    fn from(m: &Moments) -> Self {
        Self {
            value: m.mean(),
            stderr: m.stderr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub function: TestFunction,
    pub delta: f64,
    pub estimator: Estimator,
    pub estimate: Estimate,
    pub n_paths: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub used: Vec<f64>,
    /// `δ` whose estimate lies within two standard errors of zero.
    pub excluded: Vec<f64>,
}

/// Least-squares slope of `log|e|` against `log δ` over the points
/// `(δ, e, stderr)` with `|e| > 2 stderr`.
pub fn estimate_order(points: &[(f64, f64, f64)]) -> Result<OrderFit> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut xy = Vec::new();
    for &(delta, e, se) in points {
        if e != 0.0 && e.abs() > 2.0 * se && delta > 0.0 {
            used.push(delta);
            xy.push((delta.ln(), e.abs().ln()));
        } else {
            excluded.push(delta);
        }
    }
    let n = xy.len();
    if n < 3 {
        return Err(Error::InsufficientData { usable: n, needed: 3 });
    }
    let nf = n as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("all step sizes coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(OrderFit {
        slope,
        slope_stderr: (rss / (nf - 2.0) / sxx).sqrt(),
        intercept,
        used,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub function: TestFunction,
    pub estimator: Estimator,
    pub fit: Option<OrderFit>,
    pub note: Option<String>,
}

/// Drop of `|error|` between consecutive step sizes, with the standard
/// error of the paired per-path difference.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDrop {
    pub function: TestFunction,
    pub estimator: Estimator,
    pub delta_coarse: f64,
    pub delta_fine: f64,
    pub drop: f64,
    pub stderr: f64,
}

impl StepDrop {
    pub fn significant(&self) -> bool {
        self.drop > 2.0 * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorReport {
    pub config: ConvergenceConfig,
    pub rows: Vec<ErrorRow>,
    pub fits: Vec<FitRow>,
    pub drops: Vec<StepDrop>,
    pub theoretical_order: f64,
    pub conditions: Vec<ConditionReport>,
    pub conditions_pass: bool,
    pub warnings: Vec<String>,
}

impl WeakErrorReport {
    pub fn rows_for(&self, f: TestFunction, e: Estimator) -> Vec<&ErrorRow> {
        self.rows.iter().filter(|r| r.function == f && r.estimator == e).collect()
    }

    pub fn fit_for(&self, f: TestFunction, e: Estimator) -> Option<&FitRow> {
        self.fits.iter().find(|r| r.function == f && r.estimator == e)
    }

    pub fn drops_for(&self, f: TestFunction, e: Estimator) -> Vec<&StepDrop> {
        self.drops.iter().filter(|r| r.function == f && r.estimator == e).collect()
    }

    /// One row per `(function, δ, estimator)`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "function,delta,estimator,error,stderr,n_paths")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{},{:e},{:e},{}",
                r.function, r.delta, r.estimator, r.estimate.value, r.estimate.stderr, r.n_paths
            )?;
        }
        Ok(())
    }

    /// `key = value` lines; the unqualified `fitted_order` is that of the
    /// first test function under the direct estimator.
    pub fn write_summary<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let primary = self.config.functions.first().and_then(|f| self.fit_for(*f, Estimator::Direct));
        match primary.and_then(|r| r.fit.as_ref()) {
            Some(fit) => {
                writeln!(out, "fitted_order = {:e}", fit.slope)?;
                writeln!(out, "stderr = {:e}", fit.slope_stderr)?;
            }
            None => {
                writeln!(out, "fitted_order = none")?;
                writeln!(out, "stderr = none")?;
            }
        }
        writeln!(out, "theoretical_order = {:e}", self.theoretical_order)?;
        writeln!(out, "conditions_pass = {}", self.conditions_pass)?;
        for r in &self.fits {
            let key = format!("{},{}", r.function, r.estimator);
            match (&r.fit, &r.note) {
                (Some(fit), _) => {
                    writeln!(out, "fit[{key}] = {:e} +- {:e}", fit.slope, fit.slope_stderr)?;
                    if !fit.excluded.is_empty() {
                        writeln!(out, "excluded[{key}] = {:?}", fit.excluded)?;
                    }
                }
                (None, Some(note)) => writeln!(out, "fit[{key}] = none ({note})")?,
                (None, None) => writeln!(out, "fit[{key}] = none")?,
            }
        }
        for d in &self.drops {
            writeln!(
                out,
                "drop[{},{},{:e}->{:e}] = {:e} +- {:e}",
                d.function, d.estimator, d.delta_coarse, d.delta_fine, d.drop, d.stderr
            )?;
        }
        for w in &self.warnings {
            writeln!(out, "warning = {w}")?;
        }
        Ok(())
    }
}

struct Plan {
    master: TimeGrid,
    grids: Vec<TimeGrid>,
    /// Master fine steps per coarse fine step, per `δ`.
    factors: Vec<usize>,
    eval_master: usize,
    eval: Vec<usize>,
}

fn steps_of(a: f64, b: f64, what: &str) -> Result<usize> {
    let k = (a / b).round();
    if k < 1.0 || (k * b - a).abs() > 1e-9 * a {
        return Err(Error::Validation(format!("{what}: {a} is not a multiple of {b}")));
    }
    Ok(k as usize)
}

fn plan(cfg: &ConvergenceConfig) -> Result<Plan> {
    if cfg.deltas.is_empty() {
        return Err(Error::Validation("delta list is empty".into()));
    }
    if cfg.deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("delta list must be strictly descending".into()));
    }
    if cfg.n_paths < 2 {
        return Err(Error::Validation("need at least 2 paths".into()));
    }
    if cfg.refinement == 0 || cfg.substeps == 0 {
        return Err(Error::Validation("refinement and substeps must be positive".into()));
    }
    if !(cfg.t_eval > 0.0 && cfg.t_eval <= cfg.horizon) {
        return Err(Error::Validation(format!(
            "t_eval = {} must lie in (0, T = {}]",
            cfg.t_eval, cfg.horizon
        )));
    }
    let d_min = *cfg.deltas.last().expect("non-empty");
    let d_ref = d_min / cfg.refinement as f64;
    let m_ref = steps_of(cfg.tau, d_ref, "tau / delta_ref")?;
    let master = TimeGrid::new(cfg.tau, cfg.horizon, m_ref, cfg.substeps)?;
    let mut grids = Vec::new();
    let mut factors = Vec::new();
    let mut eval = Vec::new();
    for &delta in &cfg.deltas {
        let m = steps_of(cfg.tau, delta, "tau / delta")?;
        let g = TimeGrid::new(cfg.tau, cfg.horizon, m, cfg.substeps)?;
        factors.push(steps_of(g.step(), master.step(), "delta / delta_ref")?);
        eval.push(g.index_of(cfg.t_eval).map_err(|_| {
            Error::Validation(format!("t_eval = {} is not a node of the delta = {delta} grid", cfg.t_eval))
        })? as usize);
        grids.push(g);
    }
    let eval_master = master.index_of(cfg.t_eval)? as usize;
    Ok(Plan {
        master,
        grids,
        factors,
        eval_master,
        eval,
    })
}

#[derive(Clone)]
struct Acc {
    direct: Vec<Moments>,
    girsanov: Vec<Moments>,
    direct_steps: Vec<Moments>,
    girsanov_steps: Vec<Moments>,
}

impl Acc {
    fn new(nf: usize, nd: usize) -> Self {
        let steps = nf * nd.saturating_sub(1);
        Self {
            direct: vec![Moments::new(); nf * nd],
            girsanov: vec![Moments::new(); nf * nd],
            direct_steps: vec![Moments::new(); steps],
            girsanov_steps: vec![Moments::new(); steps],
        }
    }

    fn merge(&mut self, o: &Self) {
        for (a, b) in [
            (&mut self.direct, &o.direct),
            (&mut self.girsanov, &o.girsanov),
            (&mut self.direct_steps, &o.direct_steps),
            (&mut self.girsanov_steps, &o.girsanov_steps),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
    }
}

fn push_samples(samples: &[f64], nd: usize, fi: usize, all: &mut [Moments], steps: &mut [Moments]) {
    for di in 0..nd {
        all[fi * nd + di].push(samples[di]);
        if di + 1 < nd {
            steps[fi * (nd - 1) + di].push(samples[di] - samples[di + 1]);
        }
    }
}

/// Orchestrates condition checks, both estimators for every `δ` and test
/// function, and the order fits. Deterministic for a fixed seed whatever
/// the number of worker threads.
pub fn run_study(cfg: &ConvergenceConfig) -> Result<WeakErrorReport> {
    let model = builtin_model(&cfg.model, cfg.tau)?;
    run_study_with_model(&model, cfg)
}

pub fn run_study_with_model(model: &ModelSpec, cfg: &ConvergenceConfig) -> Result<WeakErrorReport> {
    if cfg.functions.is_empty() {
        return Err(Error::Validation("no test functions".into()));
    }
    if (model.tau() - cfg.tau).abs() > 1e-12 * cfg.tau {
        return Err(Error::Validation(format!(
            "config tau {} differs from model tau {}",
            cfg.tau,
            model.tau()
        )));
    }
    model.validate_for_hurst(cfg.hurst)?;
    let plan = plan(cfg)?;
    let c = model.constants();
    let mut conditions = Vec::new();
    for &delta in &cfg.deltas {
        conditions.push(check_stepsize_conditions(model, cfg.hurst, cfg.horizon, delta, cfg.beta)?);
    }
    let conditions_pass = conditions.iter().all(|r| r.pass());
    let mut warnings = Vec::new();
    if !conditions_pass {
        warnings.push("step-size conditions fail for some delta: run lies outside the theorem's verified regime".into());
    }

    let nf = cfg.functions.len();
    let nd = cfg.deltas.len();
    let m = model.m();
    let d = model.d();
    let synth = VolterraSynth::new(plan.master, cfg.hurst)?;
    let master_stepper = Stepper::new(model, &plan.master)?;
    let steppers = plan.grids.iter().map(|g| Stepper::new(model, g)).collect::<Result<Vec<_>>>()?;
    let kinv = if cfg.girsanov {
        Some(KhInverseOperator::new(plan.master.positive_part(), cfg.hurst)?)
    } else {
        None
    };
    let pinv = model.structure().sigma_pinv().clone();
    let hist = plan.master.history_steps();
    let step = plan.master.step();

    let parts = batched(cfg.n_paths, DEFAULT_BATCH, |range| -> Result<Acc> {
        let mut acc = Acc::new(nf, nd);
        let mut samples = vec![0.0; nd];
        let mut coarse = Vec::new();
        for p in range {
            let w = WienerPath::sample(plan.master, cfg.seed, p, m)?;
            let fbm = synth.synthesize(w)?;
            let b = fbm.values();
            let xref = master_stepper.truncated_em(model, b, cfg.substeps)?;
            let xref_t = &xref[(hist + plan.eval_master) * d..(hist + plan.eval_master + 1) * d];
            let mut x_delta = Vec::with_capacity(nd);
            for (di, st) in steppers.iter().enumerate() {
                let f = plan.factors[di];
                let n = plan.grids[di].n_steps();
                coarse.clear();
                coarse.extend((0..=n).flat_map(|k| b[k * f * m..(k * f + 1) * m].iter().copied()));
                let x = st.truncated_em(model, &coarse, cfg.substeps)?;
                let h = plan.grids[di].history_steps();
                let i = plan.eval[di];
                x_delta.push(x[(h + i) * d..(h + i + 1) * d].to_vec());
            }
            for (fi, func) in cfg.functions.iter().enumerate() {
                let fr = func.eval(xref_t);
                for di in 0..nd {
                    samples[di] = fr - func.eval(&x_delta[di]);
                }
                push_samples(&samples, nd, fi, &mut acc.direct, &mut acc.direct_steps);
            }
            if let Some(op) = &kinv {
                let y = master_stepper.reference(model, b)?;
                let mut drivers = segment_channels(model, &y, hist, step);
                for &f in &plan.factors {
                    drivers.extend(discrepancy_channels(model, &pinv, &y, hist, step, f * cfg.substeps));
                }
                let k = apply_inverse_all(op, &drivers);
                let w = fbm.wiener().expect("Volterra paths keep their increments");
                let ie = plan.eval_master;
                let r_xi = log_weight_path(&k[..m], w, Sign::Plus)?[ie].exp();
                let mut r_delta = Vec::with_capacity(nd);
                for di in 0..nd {
                    let ch = &k[m * (di + 1)..m * (di + 2)];
                    r_delta.push(log_weight_path(ch, w, Sign::Minus)?[ie].exp());
                }
                let yt = &y[(hist + ie) * d..(hist + ie + 1) * d];
                for (fi, func) in cfg.functions.iter().enumerate() {
                    let fy = func.eval(yt);
                    for di in 0..nd {
                        samples[di] = (r_xi - r_delta[di]) * fy;
                    }
                    push_samples(&samples, nd, fi, &mut acc.girsanov, &mut acc.girsanov_steps);
                }
            }
        }
        Ok(acc)
    });
    let mut acc = Acc::new(nf, nd);
    for part in parts {
        acc.merge(&part?);
    }

    let mut estimators = vec![(Estimator::Direct, &acc.direct, &acc.direct_steps)];
    if cfg.girsanov {
        estimators.push((Estimator::Girsanov, &acc.girsanov, &acc.girsanov_steps));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut drops = Vec::new();
    for (fi, &function) in cfg.functions.iter().enumerate() {
        for &(estimator, all, steps) in &estimators {
            let est: Vec<Estimate> = (0..nd).map(|di| Estimate::from(&all[fi * nd + di])).collect();
            for (di, e) in est.iter().enumerate() {
                rows.push(ErrorRow {
                    function,
                    delta: cfg.deltas[di],
                    estimator,
                    estimate: *e,
                    n_paths: cfg.n_paths,
                });
            }
            for di in 0..nd.saturating_sub(1) {
                let s = &steps[fi * (nd - 1) + di];
                drops.push(StepDrop {
                    function,
                    estimator,
                    delta_coarse: cfg.deltas[di],
                    delta_fine: cfg.deltas[di + 1],
                    drop: est[di].value.abs() - est[di + 1].value.abs(),
                    stderr: s.stderr(),
                });
            }
            let (fit, note) = if nd == 1 {
                (None, Some("single delta: no order fit".to_string()))
            } else {
                let pts: Vec<_> = est.iter().zip(&cfg.deltas).map(|(e, &dl)| (dl, e.value, e.stderr)).collect();
                match estimate_order(&pts) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            fits.push(FitRow {
                function,
                estimator,
                fit,
                note,
            });
        }
    }
    Ok(WeakErrorReport {
        config: cfg.clone(),
        rows,
        fits,
        drops,
        theoretical_order: theoretical_order(c.alpha, cfg.beta, c.theta, cfg.hurst),
        conditions,
        conditions_pass,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakError {
    pub direct: Estimate,
    pub girsanov: Estimate,
}

/// Both estimators for one `δ`; the proxy uses `δ_ref = δ / refinement`.
pub fn weak_error(
    model: &ModelSpec,
    f: TestFunction,
    cfg: &ConvergenceConfig,
    delta: f64,
) -> Result<WeakError> {
    let mut one = cfg.clone();
    one.deltas = vec![delta];
    one.functions = vec![f];
    one.girsanov = true;
    let r = run_study_with_model(model, &one)?;
    let pick = |e| r.rows_for(f, e)[0].estimate;
    Ok(WeakError {
        direct: pick(Estimator::Direct),
        girsanov: pick(Estimator::Girsanov),
    })
}
