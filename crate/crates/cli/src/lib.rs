//! Command-line driver for the tensegrity toolkit.
//!
//! Subcommands cover the whole pipeline: `gen` writes benchmark structure
//! files, `solve`/`modal` run single form-finding and frequency analyses,
//! `dataset`/`train`/`eval` drive the surrogate workflow, and `reproduce`
//! regenerates the error-vs-sample-count study for one benchmark as CSV
//! plot data.
//!
//! Determinism contract: one master `--seed` feeds every stage through
//! tagged derivation ([`Rng::derive`]), so identical invocations produce
//! byte-identical data artifacts. Only wall-clock measurements
//! (`runtime.csv`) vary between runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tenseg_core::dataset::{self, SamplingSpec};
use tenseg_core::nalgebra;
use tenseg_core::modal::{self, ModalResult};
use tenseg_core::numerics::{seed_domain, Rng};
use tenseg_core::statics::{self, EquilibriumState, LoadCase, SolverConfig, GRAVITY_ACCEL};
use tenseg_core::surrogate::{self, EvalReport, MlpModel, TrainConfig};
use tenseg_core::topology::{self, Structure, StructureKind};

#[derive(Parser, Debug)]
#[command(
    name = "tenseg",
    version,
    about = "Tensegrity form-finding, modal analysis, and neural surrogate training"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed; every stage derives its own stream from it (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for generated files (default ".").
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON config supplying defaults for seed, solver, training, trials,
    /// and dataset sizes. Explicit flags win over config values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for dataset generation (fallback: TENSEG_THREADS,
    /// then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a benchmark structure file
    Gen(GenArgs),
    /// Solve static equilibrium under cable rest-length changes
    Solve(SolveArgs),
    /// Solve equilibrium, then report natural frequencies about it
    Modal(ModalArgs),
    /// Sample cable actuations and build a normalized dataset
    Dataset(DatasetArgs),
    /// Train a surrogate network on a dataset file
    Train(TrainArgs),
    /// Evaluate a trained surrogate, or re-run the split/train/test protocol
    Eval(EvalArgs),
    /// Regenerate the error-vs-sample-count study for one benchmark
    Reproduce(ReproduceArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkId {
    Dbar,
    Prism,
    Lander,
}

impl BenchmarkId {
    fn kind(self) -> StructureKind {
        match self {
            BenchmarkId::Dbar => StructureKind::DBar,
            BenchmarkId::Prism => StructureKind::Prism,
            BenchmarkId::Lander => StructureKind::Lander,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Structure family to generate
    #[arg(long, value_enum)]
    pub structure: BenchmarkId,
    /// Bar length in meters (dbar, lander)
    #[arg(long)]
    pub bar_length: Option<f64>,
    /// Triangle circumradius in meters (prism)
    #[arg(long)]
    pub radius: Option<f64>,
    /// Height in meters (prism)
    #[arg(long)]
    pub height: Option<f64>,
    /// Twist between top and bottom triangles in radians (prism)
    #[arg(long, allow_hyphen_values = true)]
    pub twist: Option<f64>,
    /// Inner/outer square side ratio (lander)
    #[arg(long)]
    pub separation_ratio: Option<f64>,
    /// Output path (default <out-dir>/<structure>.json)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Structure file, or one of the benchmark names dbar/prism/lander
    #[arg(long)]
    pub structure: String,
    /// Rest-length changes for the actuated cables, comma-separated meters
    /// (default: all zero)
    #[arg(long, allow_hyphen_values = true)]
    pub dl: Option<String>,
    /// Include self-weight (needs at least one fixed node in the structure)
    #[arg(long)]
    pub gravity: bool,
    /// State output path (default <out-dir>/state.json)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModalArgs {
    /// Structure file, or one of the benchmark names dbar/prism/lander
    #[arg(long)]
    pub structure: String,
    /// Rest-length changes for the actuated cables, comma-separated meters
    /// (default: all zero)
    #[arg(long, allow_hyphen_values = true)]
    pub dl: Option<String>,
    /// Include self-weight (needs at least one fixed node in the structure)
    #[arg(long)]
    pub gravity: bool,
    /// Embed mode shapes in the output file
    #[arg(long)]
    pub shapes: bool,
    /// Output path (default <out-dir>/modal.json)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Structure file, or one of the benchmark names dbar/prism/lander
    #[arg(long)]
    pub structure: String,
    /// Number of samples
    #[arg(long)]
    pub n: usize,
    /// Actuation ranges as lo:hi pairs, comma-separated, one per actuated
    /// cable (default: the benchmark ranges for the structure's family)
    #[arg(long, allow_hyphen_values = true)]
    pub ranges: Option<String>,
    /// Output stem; writes <stem>.csv and <stem>.meta.json under out-dir
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset CSV (expects the .meta.json sidecar next to it)
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden layer widths, comma-separated
    #[arg(long)]
    pub hidden: Option<String>,
    /// Training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Model output path (default <out-dir>/model.json)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV to evaluate on
    #[arg(long)]
    pub data: PathBuf,
    /// With 1 trial the model is scored on the whole file; with more, the
    /// split/train/test protocol is re-run that many times using the
    /// model's architecture, and errors are averaged
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Report output path (default <out-dir>/report.json)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Benchmark to reproduce
    #[arg(long, value_enum)]
    pub experiment: BenchmarkId,
    /// Dataset sizes, comma-separated (default 1000,2000,3000,4000,5000)
    #[arg(long)]
    pub sizes: Option<String>,
    /// Training trials per dataset size (default 20)
    #[arg(long)]
    pub trials: Option<usize>,
}

/// Defaults file loaded via `--config`. Every field is optional; explicit
/// command-line flags take precedence over config values.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub solver: Option<SolverConfig>,
    pub train: Option<TrainSettings>,
    pub trials: Option<usize>,
    pub sizes: Option<Vec<usize>>,
}

/// Training hyperparameter overrides (config file and flags share this).
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub hidden: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl TrainSettings {
    fn merged_over(&self, base: &TrainSettings) -> TrainSettings {
        TrainSettings {
            hidden: self.hidden.clone().or_else(|| base.hidden.clone()),
            learning_rate: self.learning_rate.or(base.learning_rate),
            epochs: self.epochs.or(base.epochs),
            batch_size: self.batch_size.or(base.batch_size),
        }
    }

    fn hidden_dims(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| vec![64, 64, 64])
    }

    fn to_config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::default();
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        cfg.seed = seed;
        cfg
    }
}

/// Global settings after merging flags, config file, and defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub solver: SolverConfig,
    pub train: TrainSettings,
    pub trials: Option<usize>,
    pub sizes: Option<Vec<usize>>,
}

pub fn resolve(global: &GlobalArgs) -> Result<Resolved> {
    let cfg: ExperimentConfig = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let threads = global.threads.or(cfg.threads).or_else(|| {
        std::env::var("TENSEG_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // Ignore the error: the global pool may already exist (tests call
        // into the library repeatedly).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(Resolved {
        seed: global.seed.or(cfg.seed).unwrap_or(0),
        out_dir: global
            .out_dir
            .clone()
            .or(cfg.out_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
        solver: cfg.solver.unwrap_or_default(),
        train: cfg.train.unwrap_or_default(),
        trials: cfg.trials,
        sizes: cfg.sizes,
    })
}

pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}

/// Test entry point: parse the given argv and run the command.
pub fn run_from<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    dispatch(Cli::try_parse_from(argv)?)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let resolved = resolve(&cli.global)?;
    std::fs::create_dir_all(&resolved.out_dir)
        .with_context(|| format!("creating {}", resolved.out_dir.display()))?;
    match cli.command {
        Command::Gen(a) => cmd_gen(&resolved, &a),
        Command::Solve(a) => cmd_solve(&resolved, &a),
        Command::Modal(a) => cmd_modal(&resolved, &a),
        Command::Dataset(a) => cmd_dataset(&resolved, &a),
        Command::Train(a) => cmd_train(&resolved, &a),
        Command::Eval(a) => cmd_eval(&resolved, &a),
        Command::Reproduce(a) => cmd_reproduce(&resolved, &a),
    }
}

// ---------------------------------------------------------------------------
// argument parsing helpers

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("bad number {t:?}"))
        })
        .collect()
}

pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .with_context(|| format!("bad count {t:?}"))
        })
        .collect()
}

/// Parses "lo:hi,lo:hi,..." into per-channel sampling ranges.
pub fn parse_ranges(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .with_context(|| format!("range {pair:?} is not lo:hi"))?;
            Ok((
                lo.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad lower bound {lo:?}"))?,
                hi.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad upper bound {hi:?}"))?,
            ))
        })
        .collect()
}

/// Loads a structure from a file path, or builds a benchmark when given one
/// of the names dbar/prism/lander.
pub fn resolve_structure(source: &str) -> Result<Structure> {
    match source.parse::<StructureKind>() {
        Ok(kind) if kind != StructureKind::Custom => Ok(topology::benchmark(kind)?),
        _ => Ok(Structure::load(Path::new(source))?),
    }
}

fn parse_dl(s: &Structure, text: Option<&str>) -> Result<nalgebra::DVector<f64>> {
    let values = match text {
        Some(t) => parse_f64_list(t)?,
        None => vec![0.0; s.n_actuated()],
    };
    if values.len() != s.n_actuated() {
        bail!(
            "expected {} rest-length changes (one per actuated cable), got {}",
            s.n_actuated(),
            values.len()
        );
    }
    Ok(nalgebra::DVector::from_vec(values))
}

fn load_case(s: &Structure, gravity: bool) -> LoadCase {
    if gravity {
        LoadCase::with_gravity(s.n_nodes(), GRAVITY_ACCEL)
    } else {
        LoadCase::free(s.n_nodes())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------------
// JSON artifact assembly

fn state_json(
    s: &Structure,
    dl: &nalgebra::DVector<f64>,
    solver: &SolverConfig,
    state: &EquilibriumState,
) -> serde_json::Value {
    let coords: Vec<[f64; 3]> = (0..s.n_nodes())
        .map(|i| {
            let p = state.nodes.position(i);
            [p.x, p.y, p.z]
        })
        .collect();
    serde_json::json!({
        "structure_fingerprint": s.fingerprint(),
        "dl": dl.as_slice(),
        "solver": solver,
        "coordinates": coords,
        "rest_lengths": state.rest_lengths.as_slice(),
        "lengths": state.lengths.as_slice(),
        "force_densities": state.force_densities.as_slice(),
        "member_forces": state.member_forces.as_slice(),
        "residual_norm": state.residual_norm,
        "iterations": state.iterations,
        "potential_energy": state.potential_energy,
    })
}

fn modal_json(
    s: &Structure,
    dl: &nalgebra::DVector<f64>,
    modal: &ModalResult,
    shapes: bool,
) -> serde_json::Value {
    let mut value = serde_json::json!({
        "structure_fingerprint": s.fingerprint(),
        "dl": dl.as_slice(),
        "eigenvalues": modal.eigenvalues.as_slice(),
        "frequencies_rad_s": modal.frequencies.as_slice(),
        "frequencies_hz": modal.hz_frequencies.as_slice(),
        "zero_mode_count": modal.zero_mode_count,
        "nonzero_frequencies_rad_s": modal.sorted_nonzero_frequencies().as_slice(),
    });
    if shapes {
        let cols: Vec<Vec<f64>> = modal
            .mode_shapes
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        value["mode_shapes"] = serde_json::json!(cols);
    }
    value
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_gen(res: &Resolved, a: &GenArgs) -> Result<()> {
    let reject = |flag: &str| bail!("--{flag} does not apply to {:?}", a.structure);
    let s = match a.structure {
        BenchmarkId::Dbar => {
            if a.radius.is_some() || a.height.is_some() || a.twist.is_some() {
                return reject("radius/--height/--twist");
            }
            if a.separation_ratio.is_some() {
                return reject("separation-ratio");
            }
            topology::generate_dbar(
                a.bar_length.unwrap_or(topology::DEFAULT_DBAR_BAR_LENGTH),
            )?
        }
        BenchmarkId::Prism => {
            if a.bar_length.is_some() || a.separation_ratio.is_some() {
                return reject("bar-length/--separation-ratio");
            }
            topology::generate_prism(
                a.radius.unwrap_or(topology::DEFAULT_PRISM_RADIUS),
                a.height.unwrap_or(topology::DEFAULT_PRISM_HEIGHT),
                a.twist.unwrap_or(topology::DEFAULT_PRISM_TWIST),
            )?
        }
        BenchmarkId::Lander => {
            if a.radius.is_some() || a.height.is_some() || a.twist.is_some() {
                return reject("radius/--height/--twist");
            }
            topology::generate_lander(
                a.bar_length.unwrap_or(topology::DEFAULT_LANDER_BAR_LENGTH),
                a.separation_ratio
                    .unwrap_or(topology::DEFAULT_LANDER_SEPARATION_RATIO),
            )?
        }
    };
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| res.out_dir.join(format!("{}.json", s.kind.name())));
    s.save(&path)?;
    println!(
        "{}: {} nodes, {} bars, {} strings, {} actuated cables",
        s.kind.name(),
        s.n_nodes(),
        s.n_bars(),
        s.n_strings(),
        s.n_actuated()
    );
    println!("structure -> {}", path.display());
    Ok(())
}

fn solve_common(
    res: &Resolved,
    structure: &str,
    dl_text: Option<&str>,
    gravity: bool,
) -> Result<(Structure, nalgebra::DVector<f64>, EquilibriumState)> {
    let s = resolve_structure(structure)?;
    let dl = parse_dl(&s, dl_text)?;
    let state = statics::solve_equilibrium(&s, &dl, &load_case(&s, gravity), &res.solver)?;
    Ok((s, dl, state))
}

fn print_solve_summary(s: &Structure, state: &EquilibriumState, modal: &ModalResult) {
    println!(
        "converged: residual {:.3e} N in {} iterations",
        state.residual_norm, state.iterations
    );
    println!(
        "member forces [N]: min {:.6e}, max {:.6e}",
        state.member_forces.min(),
        state.member_forces.max()
    );
    let nonzero = modal.sorted_nonzero_frequencies();
    match nonzero.iter().next() {
        Some(w) => println!(
            "first non-zero frequency: {:.6e} rad/s ({:.6e} Hz); {} zero modes",
            w,
            w / (2.0 * std::f64::consts::PI),
            modal.zero_mode_count
        ),
        None => println!("no non-zero frequencies ({} zero modes)", modal.zero_mode_count),
    }
    let _ = s;
}

fn cmd_solve(res: &Resolved, a: &SolveArgs) -> Result<()> {
    let (s, dl, state) = solve_common(res, &a.structure, a.dl.as_deref(), a.gravity)?;
    let modal = modal::modal_analysis(&s, &state)?;
    print_solve_summary(&s, &state, &modal);

    let state_path = a
        .output
        .clone()
        .unwrap_or_else(|| res.out_dir.join("state.json"));
    write_text(
        &state_path,
        &serde_json::to_string_pretty(&state_json(&s, &dl, &res.solver, &state))?,
    )?;
    let modal_path = state_path.with_file_name(match state_path.file_stem() {
        Some(stem) => format!("{}_modal.json", stem.to_string_lossy()),
        None => "modal.json".into(),
    });
    write_text(
        &modal_path,
        &serde_json::to_string_pretty(&modal_json(&s, &dl, &modal, false))?,
    )?;
    println!("state -> {}", state_path.display());
    println!("modal -> {}", modal_path.display());
    Ok(())
}

fn cmd_modal(res: &Resolved, a: &ModalArgs) -> Result<()> {
    let (s, dl, state) = solve_common(res, &a.structure, a.dl.as_deref(), a.gravity)?;
    let modal = modal::modal_analysis(&s, &state)?;
    println!(
        "{} modes: {} zero, {} non-zero",
        modal.eigenvalues.len(),
        modal.zero_mode_count,
        modal.eigenvalues.len() - modal.zero_mode_count
    );
    let nonzero = modal.sorted_nonzero_frequencies();
    let shown: Vec<String> = nonzero
        .iter()
        .take(8)
        .map(|w| format!("{w:.4e}"))
        .collect();
    if !shown.is_empty() {
        println!("lowest non-zero frequencies [rad/s]: {}", shown.join(", "));
    }
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| res.out_dir.join("modal.json"));
    write_text(
        &path,
        &serde_json::to_string_pretty(&modal_json(&s, &dl, &modal, a.shapes))?,
    )?;
    println!("modal -> {}", path.display());
    Ok(())
}

fn cmd_dataset(res: &Resolved, a: &DatasetArgs) -> Result<()> {
    let s = resolve_structure(&a.structure)?;
    let ranges = match &a.ranges {
        Some(text) => parse_ranges(text)?,
        None => dataset::benchmark_ranges(s.kind).context(
            "this structure family has no default actuation ranges; pass --ranges",
        )?,
    };
    let ds_seed = Rng::derive(res.seed, seed_domain::DATASET, 0);
    let spec = SamplingSpec::new(ranges, a.n, ds_seed)?;
    let data = dataset::generate(&s, &spec, &res.solver)?;
    let stem = a
        .stem
        .clone()
        .unwrap_or_else(|| format!("{}_{}", s.kind.name(), a.n));
    let (csv_path, meta_path) = dataset::save(&data, &res.out_dir, &stem)?;
    println!(
        "{} samples, {} inputs -> {} outputs per sample",
        data.len(),
        data.n_inputs(),
        data.n_outputs()
    );
    println!("dataset -> {}", csv_path.display());
    println!("meta    -> {}", meta_path.display());
    Ok(())
}

fn cmd_train(res: &Resolved, a: &TrainArgs) -> Result<()> {
    let data = dataset::load(&a.data)?;
    let flags = TrainSettings {
        hidden: a.hidden.as_deref().map(parse_usize_list).transpose()?,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
    };
    let settings = flags.merged_over(&res.train);
    let cfg = settings.to_config(res.seed);
    let hidden = settings.hidden_dims();
    let model = surrogate::train(&data, &hidden, &cfg)?;
    let report = surrogate::evaluate(&model, &data)?;
    println!(
        "trained {} parameters on {} samples; full-data MSE {:.6e}",
        model.n_parameters(),
        data.len(),
        report.mse_total
    );
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| res.out_dir.join("model.json"));
    model.save(&path, Some(&cfg))?;
    println!("model -> {}", path.display());
    Ok(())
}

fn cmd_eval(res: &Resolved, a: &EvalArgs) -> Result<()> {
    let (model, stored_cfg) = MlpModel::load(&a.model)?;
    let data = dataset::load(&a.data)?;
    let report = if a.trials <= 1 {
        surrogate::evaluate(&model, &data)?
    } else {
        // Re-run the protocol with the model's architecture: fresh splits,
        // fresh initializations, averaged errors.
        let hidden: Vec<usize> = model.layer_dims[1..model.layer_dims.len() - 1].to_vec();
        let mut cfg = stored_cfg.unwrap_or_default();
        cfg.seed = res.seed;
        surrogate::run_trials(&data, &hidden, &cfg, a.trials)?
    };
    println!(
        "MSE total {:.6e} | coords {:.6e} | forces {:.6e} | freqs {:.6e} ({} trial{})",
        report.mse_total,
        report.mse_coords,
        report.mse_forces,
        report.mse_freqs,
        report.trials,
        if report.trials == 1 { "" } else { "s" }
    );
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| res.out_dir.join("report.json"));
    let value = serde_json::json!({
        "model": a.model.display().to_string(),
        "data": a.data.display().to_string(),
        "seed": res.seed,
        "report": report,
    });
    write_text(&path, &serde_json::to_string_pretty(&value)?)?;
    println!("report -> {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// reproduce

pub struct ReproduceRow {
    pub size: usize,
    pub report: EvalReport,
}

pub struct ReproduceOutcome {
    pub rows: Vec<ReproduceRow>,
    pub mse_path: PathBuf,
    pub runtime_path: PathBuf,
}

/// Formats a float with full precision (17 significant digits), enough for
/// an exact `f64` round trip. Keeps the CSV byte-stable across runs.
fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs the sample-count study for one benchmark: for each dataset size,
/// generate a fresh dataset, run the split/train/test protocol `trials`
/// times, and collect mean test errors per output channel.
pub fn run_reproduce(
    kind: StructureKind,
    sizes: &[usize],
    trials: usize,
    master_seed: u64,
    out_dir: &Path,
    solver: &SolverConfig,
    settings: &TrainSettings,
) -> Result<ReproduceOutcome> {
    if sizes.is_empty() {
        bail!("at least one dataset size is required");
    }
    if sizes.iter().any(|&s| s == 0) {
        bail!("dataset sizes must be positive");
    }
    let s = topology::benchmark(kind)?;
    let hidden = settings.hidden_dims();
    let mut rows = Vec::with_capacity(sizes.len());
    for (idx, &size) in sizes.iter().enumerate() {
        let ds_seed = Rng::derive(master_seed, seed_domain::DATASET, idx as u64);
        let spec = SamplingSpec::benchmark(kind, size, ds_seed)?;
        eprintln!("[reproduce {}] size {size}: generating samples...", kind.name());
        let data = dataset::generate(&s, &spec, solver)?;
        let cfg = settings.to_config(Rng::derive(master_seed, seed_domain::TRIAL, idx as u64));
        eprintln!(
            "[reproduce {}] size {size}: {} trials x {} epochs...",
            kind.name(),
            trials,
            cfg.epochs
        );
        let report = surrogate::run_trials(&data, &hidden, &cfg, trials)?;
        eprintln!(
            "[reproduce {}] size {size}: mean test MSE {:.6e}",
            kind.name(),
            report.mse_total
        );
        rows.push(ReproduceRow { size, report });
    }

    let dir = out_dir.join(kind.name());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let provenance = |out: &mut String| {
        let _ = writeln!(out, "# tenseg reproduce");
        let _ = writeln!(
            out,
            "# experiment={} seed={} trials={}",
            kind.name(),
            master_seed,
            trials
        );
        let _ = writeln!(
            out,
            "# sizes={}",
            sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let cfg = settings.to_config(0);
        let _ = writeln!(
            out,
            "# hidden={} lr={} epochs={} batch_size={}",
            hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
            cfg.learning_rate,
            cfg.epochs,
            cfg.batch_size
        );
        let _ = writeln!(
            out,
            "# solver: tolerance={} mu={} max_iterations={}",
            solver.tolerance, solver.mu, solver.max_iterations
        );
    };

    let mut mse = String::new();
    provenance(&mut mse);
    let _ = writeln!(mse, "size,mse_coords,mse_forces,mse_freqs");
    for row in &rows {
        let _ = writeln!(
            mse,
            "{},{},{},{}",
            row.size,
            fmt_full(row.report.mse_coords),
            fmt_full(row.report.mse_forces),
            fmt_full(row.report.mse_freqs)
        );
    }
    let mse_path = dir.join("mse_vs_samples.csv");
    write_text(&mse_path, &mse)?;

    let mut runtime = String::new();
    provenance(&mut runtime);
    let _ = writeln!(runtime, "size,train_s,test_s");
    for row in &rows {
        let _ = writeln!(
            runtime,
            "{},{:.6},{:.6}",
            row.size, row.report.train_time_s, row.report.test_time_s
        );
    }
    let runtime_path = dir.join("runtime.csv");
    write_text(&runtime_path, &runtime)?;

    Ok(ReproduceOutcome {
        rows,
        mse_path,
        runtime_path,
    })
}

fn cmd_reproduce(res: &Resolved, a: &ReproduceArgs) -> Result<()> {
    let sizes = match &a.sizes {
        Some(text) => parse_usize_list(text)?,
        None => res
            .sizes
            .clone()
            .unwrap_or_else(|| vec![1000, 2000, 3000, 4000, 5000]),
    };
    let trials = a.trials.or(res.trials).unwrap_or(20);
    let outcome = run_reproduce(
        a.experiment.kind(),
        &sizes,
        trials,
        res.seed,
        &res.out_dir,
        &res.solver,
        &res.train,
    )?;
    println!("size  mse_coords    mse_forces    mse_freqs     train_s");
    for row in &outcome.rows {
        println!(
            "{:<5} {:.6e}  {:.6e}  {:.6e}  {:.2}",
            row.size,
            row.report.mse_coords,
            row.report.mse_forces,
            row.report.mse_freqs,
            row.report.train_time_s
        );
    }
    println!("mse     -> {}", outcome.mse_path.display());
    println!("runtime -> {}", outcome.runtime_path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_dl_values_parse() {
        let cli = Cli::try_parse_from([
            "tenseg", "solve", "--structure", "dbar", "--dl", "-0.5,-0.5",
        ])
        .unwrap();
        match cli.command {
            Command::Solve(a) => assert_eq!(a.dl.as_deref(), Some("-0.5,-0.5")),
            _ => panic!("expected solve"),
        }
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_f64_list("-0.5, 0.25").unwrap(), vec![-0.5, 0.25]);
        assert_eq!(parse_usize_list("1000,2000").unwrap(), vec![1000, 2000]);
        assert_eq!(
            parse_ranges("-1:0, -0.5:0.5").unwrap(),
            vec![(-1.0, 0.0), (-0.5, 0.5)]
        );
        assert!(parse_ranges("-1").is_err());
        assert!(parse_f64_list("abc").is_err());
    }

    #[test]
    fn benchmark_names_resolve_without_files() {
        assert_eq!(resolve_structure("dbar").unwrap().n_members(), 6);
        assert_eq!(resolve_structure("prism").unwrap().n_members(), 12);
        assert_eq!(resolve_structure("lander").unwrap().n_members(), 30);
        assert!(resolve_structure("no_such_file.json").is_err());
    }

    #[test]
    fn settings_merge_prefers_flags() {
        let flags = TrainSettings {
            epochs: Some(5),
            ..Default::default()
        };
        let config = TrainSettings {
            epochs: Some(50),
            learning_rate: Some(0.5),
            ..Default::default()
        };
        let merged = flags.merged_over(&config);
        assert_eq!(merged.epochs, Some(5));
        assert_eq!(merged.learning_rate, Some(0.5));
        assert_eq!(merged.hidden_dims(), vec![64, 64, 64]);
    }
}
