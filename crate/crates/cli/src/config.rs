//! Layered run configuration: built-in defaults, then a flat `key = value`
//! file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fbm_sfde::convergence::{ConvergenceConfig, TestFunction};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::model::{builtin_model, ModelSpec, BUILTIN_MODELS, DEFAULT_TAU};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "fbm-sfde", version, about, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Dump fBm, reference and truncated-scheme paths as CSV.
    Paths,
    /// Weak-error study: errors.csv and summary.txt.
    Convergence,
    /// Operator identities, covariance and fBm-law self-checks.
    CheckOperators,
    /// Step-size conditions and assumption spot checks for a model.
    CheckConditions,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Paths => "paths",
            Command::Convergence => "convergence",
            Command::CheckOperators => "check-operators",
            Command::CheckConditions => "check-conditions",
        }
    }
}

/// Every flag is optional; unset flags fall through to the config file and
/// then to the defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Hurst index in (1/2, 1).
    #[arg(long = "H", global = true, value_name = "H")]
    pub hurst: Option<String>,
    /// Horizon.
    #[arg(long = "T", global = true, value_name = "T")]
    pub horizon: Option<String>,
    /// Evaluation time in (0, T]; defaults to T.
    #[arg(long, global = true, value_name = "T")]
    pub t_eval: Option<String>,
    /// Delay.
    #[arg(long, global = true)]
    pub tau: Option<String>,
    /// Comma-separated step counts per delay, `δ = τ/M`.
    #[arg(long = "M", global = true, value_name = "LIST")]
    pub m: Option<String>,
    #[arg(long, global = true)]
    pub beta: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub n_paths: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<String>,
    /// Smaller sample counts and grids.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Fine steps per `δ`.
    #[arg(long, global = true, value_name = "N")]
    pub substeps: Option<String>,
    /// `δ_ref = δ_min / refinement`.
    #[arg(long, global = true, value_name = "N")]
    pub refinement: Option<String>,
    /// Comma-separated test functions (cos1, cos2, cos:<k>, smooth-step, const:<c>).
    #[arg(long, global = true, value_name = "LIST")]
    pub functions: Option<String>,
    /// Also run the reweighting estimator (true/false).
    #[arg(long, global = true, value_name = "BOOL")]
    pub girsanov: Option<String>,
    /// Scales the covariance constant in the reconstruction check.
    #[arg(long, global = true, hide = true)]
    pub ch_scale: Option<String>,
}

const KEYS: &[&str] = &[
    "model",
    "H",
    "T",
    "t-eval",
    "tau",
    "M",
    "beta",
    "n-paths",
    "seed",
    "out",
    "threads",
    "quick",
    "substeps",
    "refinement",
    "functions",
    "girsanov",
    "ch-scale",
];

impl Flags {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, x: &Option<String>| {
            if let Some(x) = x {
                v.push((k, x.clone()));
            }
        };
        put("model", &self.model);
        put("H", &self.hurst);
        put("T", &self.horizon);
        put("t-eval", &self.t_eval);
        put("tau", &self.tau);
        put("M", &self.m);
        put("beta", &self.beta);
        put("n-paths", &self.n_paths);
        put("seed", &self.seed);
        put("threads", &self.threads);
        put("substeps", &self.substeps);
        put("refinement", &self.refinement);
        put("functions", &self.functions);
        put("girsanov", &self.girsanov);
        put("ch-scale", &self.ch_scale);
        if let Some(out) = &self.out {
            v.push(("out", out.display().to_string()));
        }
        if self.quick {
            v.push(("quick", "true".into()));
        }
        v
    }
}

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('_', "-");
    KEYS.iter().copied().find(|&c| c == k)
}

/// Parses a flat `key = value` file. `#` starts a comment.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<&'static str, String>, CliError> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected 'key = value'", no + 1)))?;
        let key = canonical_key(k)
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: unknown key '{}'", no + 1, k.trim())))?;
        if map.insert(key, v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("{origin}:{}: duplicate key '{key}'", no + 1)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: String,
    pub hurst: f64,
    pub horizon: f64,
    pub t_eval: f64,
    pub tau: f64,
    /// Strictly increasing.
    pub m_values: Vec<usize>,
    pub beta: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub quick: bool,
    pub substeps: usize,
    pub refinement: usize,
    pub functions: Vec<TestFunction>,
    pub girsanov: bool,
    pub ch_scale: f64,
}

fn value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{raw}'")))
}

fn flag(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected true or false, got '{raw}'"))),
    }
}

fn range(key: &str, ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{key} must be {what}")))
    }
}

impl RunConfig {
    /// Defaults, overridden by `entries` in order.
    pub fn resolve(command: Command, entries: &BTreeMap<&'static str, String>) -> Result<Self, CliError> {
        let get = |k: &str| entries.get(k).map(String::as_str);
        let quick = get("quick").map(|v| flag("quick", v)).transpose()?.unwrap_or(false);
        let model = get("model").unwrap_or("toy").trim().to_string();
        let hurst: f64 = get("H").map(|v| value("H", v)).transpose()?.unwrap_or(0.75);
        range("H", hurst > 0.5 && hurst < 1.0, &format!("in (1/2, 1), got {hurst}"))?;
        let horizon: f64 = get("T").map(|v| value("T", v)).transpose()?.unwrap_or(1.0);
        range("T", horizon > 0.0 && horizon.is_finite(), &format!("positive, got {horizon}"))?;
        let t_eval: f64 = get("t-eval").map(|v| value("t-eval", v)).transpose()?.unwrap_or(horizon);
        range(
            "t-eval",
            t_eval > 0.0 && t_eval <= horizon,
            &format!("in (0, T = {horizon}], got {t_eval}"),
        )?;
        let tau: f64 = get("tau").map(|v| value("tau", v)).transpose()?.unwrap_or(DEFAULT_TAU);
        range("tau", tau > 0.0 && tau.is_finite(), &format!("positive, got {tau}"))?;
        let m_values: Vec<usize> = match get("M") {
            Some(list) => list
                .split(',')
                .map(|s| value::<usize>("M", s))
                .collect::<Result<_, _>>()?,
            None => vec![8, 16, 32, 64],
        };
        range(
            "M",
            !m_values.is_empty() && m_values[0] > 0 && m_values.windows(2).all(|w| w[0] < w[1]),
            "a strictly increasing list of positive integers",
        )?;
        let beta: f64 = get("beta").map(|v| value("beta", v)).transpose()?.unwrap_or(0.7);
        range("beta", beta > 0.0 && beta < hurst, &format!("in (0, H = {hurst}), got {beta}"))?;
        let default_paths = match (command, quick) {
            (Command::Paths, _) => 1,
            (_, true) => 1_000,
            (_, false) => 10_000,
        };
        let n_paths: u64 = get("n-paths").map(|v| value("n-paths", v)).transpose()?.unwrap_or(default_paths);
        let min_paths = if command == Command::Convergence { 2 } else { 1 };
        range("n-paths", n_paths >= min_paths, &format!("at least {min_paths}"))?;
        let seed: u64 = get("seed").map(|v| value("seed", v)).transpose()?.unwrap_or(20240917);
        let out = PathBuf::from(get("out").unwrap_or("out").trim());
        let threads: Option<usize> = get("threads").map(|v| value("threads", v)).transpose()?;
        range("threads", threads != Some(0), "positive")?;
        let substeps: usize = get("substeps").map(|v| value("substeps", v)).transpose()?.unwrap_or(8);
        range("substeps", substeps > 0, "positive")?;
        let refinement: usize = get("refinement").map(|v| value("refinement", v)).transpose()?.unwrap_or(8);
        range("refinement", refinement > 0, "positive")?;
        let functions = match get("functions") {
            Some(list) => list
                .split(',')
                .map(|s| TestFunction::parse(s.trim()).map_err(|e| CliError::Usage(format!("functions: {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![TestFunction::Cos { k: 1.0 }],
        };
        let girsanov = get("girsanov").map(|v| flag("girsanov", v)).transpose()?.unwrap_or(true);
        let ch_scale: f64 = get("ch-scale").map(|v| value("ch-scale", v)).transpose()?.unwrap_or(1.0);
        range("ch-scale", ch_scale > 0.0 && ch_scale.is_finite(), "positive")?;
        let cfg = Self {
            command,
            model,
            hurst,
            horizon,
            t_eval,
            tau,
            m_values,
            beta,
            n_paths,
            seed,
            out,
            threads,
            quick,
            substeps,
            refinement,
            functions,
            girsanov,
            ch_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Model-dependent preconditions, checked before any computation.
    fn validate(&self) -> Result<(), CliError> {
        if self.command == Command::CheckOperators {
            return Ok(());
        }
        let model = self.model_spec()?;
        model
            .validate_for_hurst(self.hurst)
            .map_err(|e| CliError::Usage(format!("model: {e}")))?;
        let alpha = model.constants().alpha;
        let lo = (2.0 * self.hurst - 1.0) / (2.0 * alpha);
        range(
            "beta",
            self.beta > lo,
            &format!("in ({lo}, {}) for model '{}', got {}", self.hurst, self.model, self.beta),
        )?;
        let m_max = *self.m_values.last().expect("non-empty");
        let fine = match self.command {
            Command::Convergence => m_max * self.refinement,
            _ => m_max,
        };
        TimeGrid::new(self.tau, self.horizon, fine, self.substeps).map_err(|e| CliError::Usage(format!("T: {e}")))?;
        for &m in &self.m_values {
            range(
                "M",
                (fine * self.substeps) % m == 0,
                &format!("a list of divisors of {}, got {m}", fine * self.substeps),
            )?;
        }
        if self.command == Command::Convergence {
            self.convergence_config()
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        builtin_model(&self.model, self.tau).map_err(|_| {
            let names: Vec<&str> = BUILTIN_MODELS.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!("model: unknown model '{}' (known: {})", self.model, names.join(", ")))
        })
    }

    pub fn convergence_config(&self) -> ConvergenceConfig {
        ConvergenceConfig {
            model: self.model.clone(),
            tau: self.tau,
            hurst: self.hurst,
            horizon: self.horizon,
            t_eval: self.t_eval,
            deltas: Vec::new(),
            n_paths: self.n_paths,
            seed: self.seed,
            functions: self.functions.clone(),
            beta: self.beta,
            refinement: self.refinement,
            substeps: self.substeps,
            girsanov: self.girsanov,
        }
        .with_m_values(&self.m_values)
    }

    /// Config-file text reproducing this run, with version and seed
    /// comments. `threads` is omitted: results do not depend on it.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fbm-sfde {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# command: {}", self.command.name());
        let _ = writeln!(s, "# seed: {}", self.seed);
        let m: Vec<String> = self.m_values.iter().map(usize::to_string).collect();
        let f: Vec<String> = self.functions.iter().map(TestFunction::to_string).collect();
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "H = {}", self.hurst);
        let _ = writeln!(s, "T = {}", self.horizon);
        let _ = writeln!(s, "t-eval = {}", self.t_eval);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "M = {}", m.join(","));
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "n-paths = {}", self.n_paths);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "quick = {}", self.quick);
        let _ = writeln!(s, "substeps = {}", self.substeps);
        let _ = writeln!(s, "refinement = {}", self.refinement);
        let _ = writeln!(s, "functions = {}", f.join(","));
        let _ = writeln!(s, "girsanov = {}", self.girsanov);
        if self.ch_scale != 1.0 {
            let _ = writeln!(s, "ch-scale = {}", self.ch_scale);
        }
        s
    }
}

/// File entries first, then flags on top.
pub fn parse_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut entries = match &cli.flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            parse_config_text(&text, &path.display().to_string())?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in cli.flags.entries() {
        entries.insert(k, v);
    }
    RunConfig::resolve(cli.command, &entries)
}

pub fn config_path(out: &Path) -> PathBuf {
    out.join("run.cfg")
}
