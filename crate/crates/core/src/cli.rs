//! The `doptk` command line: JSON experiment configs in, JSON reports and
//! CSV vectors out.
//!
//! Relative paths inside a config resolve against the config file's
//! directory. `--out` overrides `outputs.report`; without either the report
//! goes to stdout. Failures print `{"error": {"kind", "message"}}` to stderr
//! and exit nonzero.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{bound_report, BoundOptions, DEFAULT_F};
use crate::error::{Error, Result};
use crate::gp::{
    hyperparameter_sweep, posterior, relative_error, relative_error_unnormalized, score,
    SweepOptions, DEFAULT_LML_DENSE_CAP,
};
use crate::kernel::{
    assemble_covariance_capped, KernelOperator, KernelSpec, DEFAULT_BLOCK_SIZE, DEFAULT_DENSE_CAP,
};
use crate::nystrom::{NystromOptions, Pivoting, DEFAULT_SHIFT_SCALE};
use crate::points::{grid1d, latin_hypercube, load_points_csv, load_values_csv, write_values_csv, PointSet};
use crate::rng;
use crate::select::{
    random_baseline, select_cholesky_gks, select_conceptual_gks, select_greedy_efficient,
    select_nysgks_with, SelectionResult,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "doptk", version, about = "D-optimal sensor placement for Gaussian-process regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report path; overrides `outputs.report`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for block products and parallel trials.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run every configured selection method and score it.
    Select,
    /// Reconstruct a field from simulated observations at given indices.
    Reconstruct,
    /// Grid search of kernel hyperparameters by log marginal likelihood.
    Sweep,
    /// Score histogram of uniform random selections.
    Baseline,
    /// Evaluate every theoretical bound on the configured instance.
    BoundsCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Select => "select",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
            Command::Baseline => "baseline",
            Command::BoundsCheck => "bounds-check",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PointsSource {
    Grid1d { a: f64, b: f64, n: usize },
    /// `seed` defaults to the experiment seed.
    LatinHypercube { n: usize, dim: usize, seed: Option<u64> },
    Csv { path: PathBuf },
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    ConceptualGks,
    /// `repeats` runs use seeds `seed, seed + 1, …`.
    Nysgks {
        #[serde(default = "ten")]
        p: usize,
        #[serde(default = "one")]
        repeats: usize,
    },
    Cholgks {
        pivoting: Pivoting,
        #[serde(default = "one")]
        repeats: usize,
    },
    Greedy,
    Random { trials: usize },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    /// One `<method>.csv` index file per method run.
    pub indices_dir: Option<PathBuf>,
    pub histogram_csv: Option<PathBuf>,
    pub prediction_csv: Option<PathBuf>,
    pub std_csv: Option<PathBuf>,
    pub table_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Largest `n` for which a dense K is assembled.
    pub dense_cap: usize,
    /// Largest `n` for the dense likelihood in sweeps.
    pub lml_dense_cap: usize,
    /// ν = √n · shift_scale in NysGKS.
    pub shift_scale: f64,
    pub block_size: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dense_cap: DEFAULT_DENSE_CAP,
            lml_dense_cap: DEFAULT_LML_DENSE_CAP,
            shift_scale: DEFAULT_SHIFT_SCALE,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// True field, one value per candidate.
    pub values: PathBuf,
    /// Selected candidate indices, one per row.
    pub indices: PathBuf,
    /// Optional mean field for the unnormalized relative error.
    pub mean: Option<PathBuf>,
    /// Observe the truth exactly; η still enters the solve.
    #[serde(default)]
    pub noiseless: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Observed values at every candidate.
    pub values: PathBuf,
    pub sigma_grid: Vec<f64>,
    pub ell_grid: Vec<f64>,
    pub approx_rank: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub f: f64,
    pub oversampling: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { f: DEFAULT_F, oversampling: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub points: PointsSource,
    pub kernel: KernelSpec,
    /// Number of sensors; required by select, baseline and bounds-check.
    pub k: Option<usize>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub limits: Limits,
    pub reconstruct: Option<ReconstructConfig>,
    pub sweep: Option<SweepConfig>,
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema {}; this build reads schema {SCHEMA_VERSION}",
                cfg.schema
            )));
        }
        cfg.kernel.validate()?;
        if !(cfg.kernel.eta > 0.0) {
            return Err(config_err("kernel.eta must be positive"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PointsSource::Csv { path } = &mut self.points {
            fix(path);
        }
        let o = &mut self.outputs;
        for p in [&mut o.report, &mut o.indices_dir, &mut o.histogram_csv, &mut o.prediction_csv, &mut o.std_csv, &mut o.table_csv]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(r) = &mut self.reconstruct {
            fix(&mut r.values);
            fix(&mut r.indices);
            if let Some(m) = &mut r.mean {
                fix(m);
            }
        }
        if let Some(s) = &mut self.sweep {
            fix(&mut s.values);
        }
    }

    pub fn load_points(&self) -> Result<PointSet> {
        match &self.points {
            PointsSource::Grid1d { a, b, n } => grid1d(*a, *b, *n),
            PointsSource::LatinHypercube { n, dim, seed } => latin_hypercube(*n, *dim, seed.unwrap_or(self.seed)),
            PointsSource::Csv { path } => load_points_csv(path),
        }
    }

    fn k_for(&self, n: usize) -> Result<usize> {
        let k = self.k.ok_or_else(|| config_err("`k` is required for this command"))?;
        if k == 0 || k > n {
            return Err(config_err(format!("k = {k} must be in 1..={n} for the loaded points")));
        }
        Ok(k)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return 0;
            }
            emit_error("usage", &e.to_string());
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            emit_error(e.kind(), &e.to_string());
            1
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    let obj = json!({ "error": { "kind": kind, "message": message.trim_end() } });
    let _ = writeln!(std::io::stderr(), "{obj}");
}

fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        set_threads(t)?;
    }
    let path = cli.config.as_ref().ok_or_else(|| config_err("--config <path> is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let body = execute(cli.command, &cfg)?;
    let mut report = json!({
        "schema": SCHEMA_VERSION,
        "command": cli.command.name(),
        "seed": cfg.seed,
        "config": serde_json::to_value(&cfg).map_err(|e| config_err(e.to_string()))?,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| config_err(e.to_string()))? + "\n";
    match cli.out.as_ref().or(cfg.outputs.report.as_ref()) {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io { path: p.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one command on a resolved config and returns the report body.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Value> {
    match command {
        Command::Select => cmd_select(cfg),
        Command::Reconstruct => cmd_reconstruct(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Baseline => cmd_baseline(cfg),
        Command::BoundsCheck => cmd_bounds_check(cfg),
    }
}

fn write_indices(path: &Path, idx: &[usize]) -> Result<()> {
    let v: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
    write_values_csv(path, Some("index"), &v)
}

/// Reads an index file written by `select` (or any single-column CSV of
/// non-negative integers).
pub fn load_indices_csv(path: &Path, n: usize) -> Result<Vec<usize>> {
    let vals = load_values_csv(path)?;
    vals.iter()
        .enumerate()
        .map(|(row, &v)| {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row + 1,
                    message: format!("{v} is not a candidate index"),
                });
            }
            let i = v as usize;
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            Ok(i)
        })
        .collect()
}

fn run_json(r: &SelectionResult, raw_score: Option<f64>) -> Value {
    let mut v = serde_json::to_value(r).expect("selection result serializes");
    if let Some(s) = raw_score {
        v["raw_pivot_d_optimality"] = json!(s);
    }
    v
}

pub fn cmd_select(cfg: &ExperimentConfig) -> Result<Value> {
    if cfg.methods.is_empty() {
        return Err(config_err("`methods` must list at least one method"));
    }
    let pts = cfg.load_points()?;
    let n = pts.len();
    let k = cfg.k_for(n)?;
    let spec = cfg.kernel;
    let eta = spec.eta;
    let op = KernelOperator::new(&spec, &pts)?.with_block_size(cfg.limits.block_size);
    if let Some(dir) = &cfg.outputs.indices_dir {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    }

    let mut methods = Vec::new();
    for m in &cfg.methods {
        let mut runs: Vec<(SelectionResult, Option<f64>)> = Vec::new();
        let mut extra = json!({});
        let label = match m {
            MethodSpec::ConceptualGks => {
                let dense = assemble_covariance_capped(&spec, &pts, cfg.limits.dense_cap)?;
                runs.push((select_conceptual_gks(&dense, k)?.scored(&op, eta)?, None));
                "conceptual-gks".to_string()
            }
            MethodSpec::Nysgks { p, repeats } => {
                let opts = NystromOptions { oversampling: *p, shift_scale: cfg.limits.shift_scale };
                for r in 0..(*repeats).max(1) {
                    let seed = cfg.seed.wrapping_add(r as u64);
                    runs.push((select_nysgks_with(&op, k, opts, seed)?.scored(&op, eta)?, None));
                }
                format!("nysgks-p{p}")
            }
            MethodSpec::Cholgks { pivoting, repeats } => {
                let reps = match pivoting {
                    Pivoting::Greedy => 1,
                    Pivoting::Random => (*repeats).max(1),
                };
                for r in 0..reps {
                    let seed = cfg.seed.wrapping_add(r as u64);
                    let res = select_cholesky_gks(&op, k, *pivoting, Some(seed))?.scored(&op, eta)?;
                    let raw = match &res.raw_pivots {
                        Some(p) => Some(score(&op, p, eta)?),
                        None => None,
                    };
                    runs.push((res, raw));
                }
                match pivoting {
                    Pivoting::Greedy => "cholgks-greedy".to_string(),
                    Pivoting::Random => "cholgks-random".to_string(),
                }
            }
            MethodSpec::Greedy => {
                runs.push((select_greedy_efficient(&op, k, eta)?.scored(&op, eta)?, None));
                "greedy".to_string()
            }
            MethodSpec::Random { trials } => {
                let h = random_baseline(&op, k, eta, *trials, cfg.seed)?;
                if let Some(p) = &cfg.outputs.histogram_csv {
                    write_values_csv(p, Some("d_optimality"), &h.scores)?;
                }
                extra = json!({
                    "trials": trials,
                    "min": h.min, "max": h.max, "mean": h.mean, "std": h.std,
                });
                "random".to_string()
            }
        };
        if let Some(dir) = &cfg.outputs.indices_dir {
            for (r, (res, _)) in runs.iter().enumerate() {
                let name = if runs.len() == 1 { format!("{label}.csv") } else { format!("{label}-{r}.csv") };
                write_indices(&dir.join(name), &res.indices)?;
            }
        }
        let mut entry = json!({ "label": label });
        if !runs.is_empty() {
            let scores: Vec<f64> = runs.iter().filter_map(|(r, _)| r.d_optimality).collect();
            entry["mean_d_optimality"] = json!(scores.iter().sum::<f64>() / scores.len() as f64);
            entry["runs"] = Value::Array(runs.iter().map(|(r, raw)| run_json(r, *raw)).collect());
        }
        if let (Value::Object(dst), Value::Object(src)) = (&mut entry, extra) {
            dst.extend(src);
        }
        methods.push(entry);
    }
    Ok(json!({ "n": n, "k": k, "methods": methods }))
}

pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<Value> {
    let rc = cfg.reconstruct.as_ref().ok_or_else(|| config_err("`reconstruct` section is required"))?;
    let pts = cfg.load_points()?;
    let n = pts.len();
    let truth = load_values_csv(&rc.values)?;
    if truth.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: truth.len() });
    }
    let sel = load_indices_csv(&rc.indices, n)?;
    let eta = cfg.kernel.eta;
    let mut y: Vec<f64> = sel.iter().map(|&i| truth[i]).collect();
    if !rc.noiseless {
        let z = rng::standard_normals(y.len(), &mut rng::seeded(cfg.seed));
        for (v, e) in y.iter_mut().zip(z) {
            *v += eta * e;
        }
    }
    let op = KernelOperator::new(&cfg.kernel, &pts)?.with_block_size(cfg.limits.block_size);
    let post = posterior(&op, &sel, &y, eta, false)?;
    let field = post.full_field(&sel, &y);
    let mut std = vec![0.0; n];
    for (&i, v) in post.target_indices.iter().zip(post.cov.diagonal()) {
        std[i] = v.max(0.0).sqrt();
    }
    if let Some(p) = &cfg.outputs.prediction_csv {
        write_values_csv(p, Some("mean"), &field)?;
    }
    if let Some(p) = &cfg.outputs.std_csv {
        write_values_csv(p, Some("std"), &std)?;
    }
    let mut body = json!({
        "n": n,
        "k": sel.len(),
        "noiseless": rc.noiseless,
        "relative_error": relative_error(&field, &truth)?,
    });
    if let Some(mp) = &rc.mean {
        let mu = load_values_csv(mp)?;
        body["relative_error_unnormalized"] = json!(relative_error_unnormalized(&field, &truth, &mu)?);
    }
    Ok(body)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Value> {
    let sc = cfg.sweep.as_ref().ok_or_else(|| config_err("`sweep` section with explicit grids is required"))?;
    let pts = cfg.load_points()?;
    let y = load_values_csv(&sc.values)?;
    let opts = SweepOptions { approx_rank: sc.approx_rank, seed: cfg.seed, dense_cap: cfg.limits.lml_dense_cap };
    let res = hyperparameter_sweep(&pts, &y, cfg.kernel.family, &sc.sigma_grid, &sc.ell_grid, cfg.kernel.eta, opts)?;
    if let Some(p) = &cfg.outputs.table_csv {
        let io_err = |source| Error::Io { path: p.clone(), source };
        let mut w = csv::Writer::from_path(p).map_err(|e| config_err(e.to_string()))?;
        w.write_record(["sigma_f", "ell", "lml"]).map_err(|e| config_err(e.to_string()))?;
        for (i, row) in res.table.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([res.sigma_grid[i], res.ell_grid[j], *v].map(crate::points::fmt_f64))
                    .map_err(|e| config_err(e.to_string()))?;
            }
        }
        w.flush().map_err(io_err)?;
    }
    serde_json::to_value(&res).map(|v| json!({ "sweep": v })).map_err(|e| config_err(e.to_string()))
}

pub fn cmd_baseline(cfg: &ExperimentConfig) -> Result<Value> {
    let trials = cfg.baseline.as_ref().map(|b| b.trials).ok_or_else(|| config_err("`baseline.trials` is required"))?;
    let pts = cfg.load_points()?;
    let k = cfg.k_for(pts.len())?;
    let op = KernelOperator::new(&cfg.kernel, &pts)?.with_block_size(cfg.limits.block_size);
    let h = random_baseline(&op, k, cfg.kernel.eta, trials, cfg.seed)?;
    if let Some(p) = &cfg.outputs.histogram_csv {
        write_values_csv(p, Some("d_optimality"), &h.scores)?;
    }
    Ok(json!({
        "n": pts.len(), "k": k, "trials": trials,
        "min": h.min, "max": h.max, "mean": h.mean, "std": h.std,
    }))
}

pub fn cmd_bounds_check(cfg: &ExperimentConfig) -> Result<Value> {
    let pts = cfg.load_points()?;
    let k = cfg.k_for(pts.len())?;
    let dense = assemble_covariance_capped(&cfg.kernel, &pts, cfg.limits.dense_cap)?;
    let opts = BoundOptions { f: cfg.bounds.f, oversampling: cfg.bounds.oversampling, seed: cfg.seed };
    let rep = bound_report(&dense, k, cfg.kernel.eta, opts)?;
    let all = rep.all_satisfied();
    let mut v = serde_json::to_value(&rep).map_err(|e| config_err(e.to_string()))?;
    v["all_satisfied"] = json!(all);
    Ok(v)
}
