//! Command-line front end. [`run`] parses arguments, dispatches and maps
//! errors to exit codes: 1 for usage, 2 for data or state problems, 3 for
//! numerical failures.
//!
//! Every invocation emits exactly one [`RunManifest`], written to
//! `--manifest` when given and otherwise printed as a JSON line on stderr.
//! Output files go through a temporary file and a rename, and are only
//! written once the command has succeeded.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bls::{EnhancementActivation, FeatureActivation, GrowthStep, HyperParams};
use crate::data::{self, write_atomic, FileFormat, LabeledFeatures};
use crate::error::BlsError;
use crate::frontend::{compound_scaling, BiasPlacement, RbfKind, ScalingConfig};
use crate::hypersearch::{self, Range, SearchSpace, TrialRecord};
use crate::linalg::{self, Matrix};
use crate::persist;
use crate::pipeline::{ErConfig, Pipeline};
use crate::synth;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Grown and batch-trained weights must agree this closely under `--verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser, Serialize)]
#[command(name = "broadlearn", version, about = "Broad Learning System classifier with incremental growth")]
pub struct Cli {
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Split, fit the front end and train a model.
    Train(TrainArgs),
    /// Add nodes to a grow-capable model without retraining.
    Grow(GrowArgs),
    /// Score a feature file with a saved model.
    Predict(PredictArgs),
    /// Random or successive-halving search over node counts.
    Search(SearchArgs),
    /// Train once per enhancement-node count and tabulate time and accuracy.
    Sweep(SweepArgs),
    /// Evaluate the compound scaling rule.
    Scale(ScaleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// 3-class Gaussian blobs, 750 samples in 8 dimensions.
    Blobs,
    /// Clustered problem that needs many enhancement nodes.
    Planted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Train,
    Test,
}

fn parse_lowercase<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| format!("unknown value '{s}'"))
}

fn parse_format(s: &str) -> Result<FileFormat, String> {
    parse_lowercase(s)
}

fn parse_feature_act(s: &str) -> Result<FeatureActivation, String> {
    parse_lowercase(s)
}

fn parse_enh_act(s: &str) -> Result<EnhancementActivation, String> {
    parse_lowercase(s)
}

fn parse_rbf(s: &str) -> Result<RbfKind, String> {
    parse_lowercase(s)
}

fn parse_bias(s: &str) -> Result<BiasPlacement, String> {
    parse_lowercase(s)
}

fn parse_range(s: &str) -> Result<Range, String> {
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range '{s}', expected LOW:HIGH"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range '{s}', expected LOW:HIGH"))?;
    Ok(Range::new(lo, hi))
}

fn parse_spatial(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("bad map size '{s}', expected HxW"))?;
    let h = h.parse().map_err(|_| format!("bad map height in '{s}'"))?;
    let w = w.parse().map_err(|_| format!("bad map width in '{s}'"))?;
    Ok((h, w))
}

/// Where the samples come from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Feature file (CSV with a trailing `label` column, or FMX).
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    pub features: Option<PathBuf>,
    /// File format; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<FileFormat>,
    /// Labels must come from the feature file itself. For `predict` this
    /// also turns on accuracy reporting.
    #[arg(long)]
    pub labels_in_file: bool,
    /// Use a built-in synthetic dataset instead of a file.
    #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "blobs")]
    pub fixture: Option<Fixture>,
    /// Seed for the fixture generator.
    #[arg(long, default_value_t = 0)]
    pub fixture_seed: u64,
    /// Seed of the 8:2 train/test split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Held-out file; when given, all of `--features` is used for training.
    #[arg(long)]
    pub test_features: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 10)]
    pub n1: usize,
    #[arg(long, default_value_t = 10)]
    pub n2: usize,
    #[arg(long, default_value_t = 200)]
    pub n3: usize,
    /// Ridge coefficient of the output solve.
    #[arg(long, default_value_t = 1e-8)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.8)]
    pub shrink: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "linear", value_parser = parse_feature_act)]
    pub feature_act: FeatureActivation,
    #[arg(long, default_value = "tanh", value_parser = parse_enh_act)]
    pub enh_act: EnhancementActivation,
}

impl HyperArgs {
    fn hyper(&self) -> HyperParams {
        HyperParams {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            lambda: self.lambda,
            feature_activation: self.feature_act,
            enhancement_activation: self.enh_act,
            shrink: self.shrink,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ErArgs {
    /// Insert the connection layer (pooling, batch norm, RBF) before the BLS.
    #[arg(long)]
    pub er: bool,
    #[arg(long, default_value_t = 64)]
    pub er_units: usize,
    #[arg(long, default_value = "gaussian", value_parser = parse_rbf)]
    pub rbf: RbfKind,
    /// `shift` adds the connection bias after normalization, `inside` before.
    #[arg(long, default_value = "shift", value_parser = parse_bias)]
    pub er_bias: BiasPlacement,
    /// Treat each row as a flattened HxWxC map and average-pool it first.
    #[arg(long, value_parser = parse_spatial)]
    pub spatial: Option<(usize, usize)>,
}

impl ErArgs {
    fn config(&self, seed: u64) -> Option<ErConfig> {
        self.er.then_some(ErConfig {
            units: self.er_units,
            rbf: self.rbf,
            bias: self.er_bias,
            seed,
            spatial: self.spatial,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub er: ErArgs,
    /// Keep the design matrix and pseudoinverse so the model can grow.
    #[arg(long)]
    pub grow_capable: bool,
    /// Grow until the training accuracy reaches this value.
    #[arg(long)]
    pub target_ac: Option<f64>,
    #[arg(long, default_value_t = 10, requires = "target_ac")]
    pub max_steps: usize,
    /// Feature nodes added per growth step under `--target-ac`.
    #[arg(long, default_value_t = 20)]
    pub add_feat: usize,
    /// Enhancement nodes added per growth step under `--target-ac`.
    #[arg(long, default_value_t = 500)]
    pub add_enh: usize,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Metrics file, one JSON record per line.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GrowArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model_in: PathBuf,
    /// Defaults to overwriting `--model-in`.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub add_feat: usize,
    #[arg(long, default_value_t = 500)]
    pub add_enh: usize,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    /// Re-solve the grown model in batch and report the weight deviation.
    #[arg(long)]
    pub verify: bool,
    /// Growth log; rows are appended.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model_in: PathBuf,
    /// Which part of the 8:2 split to score.
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    /// Per-sample labels and scores as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = hypersearch::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = hypersearch::DEFAULT_VAL_FRACTION)]
    pub val_fraction: f64,
    #[arg(long, default_value = "1:20", value_parser = parse_range)]
    pub n1_range: Range,
    #[arg(long, default_value = "1:20", value_parser = parse_range)]
    pub n2_range: Range,
    #[arg(long, default_value = "10:1000", value_parser = parse_range)]
    pub n3_range: Range,
    #[arg(long, value_delimiter = ',', default_value = "1e-8")]
    pub lambda_choices: Vec<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub shrink: f64,
    /// Seed for sampling configurations and node weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use successive halving instead of plain random search.
    #[arg(long)]
    pub halving: bool,
    #[arg(long, default_value_t = hypersearch::DEFAULT_ETA)]
    pub eta: f64,
    /// Trial log, one JSON record per trial.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub er: ErArgs,
    /// Enhancement-node counts to try; overrides `--n3`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n3_list: Vec<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScaleArgs {
    #[arg(long, default_value_t = 1.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.15)]
    pub gamma: f64,
    /// Compound coefficient (the exponent of α, β and γ).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Provenance record for one invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub git_describe: Option<String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<BlsError> for Failure {
    fn from(e: BlsError) -> Self {
        let code = match e {
            BlsError::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Files produced by a command, written together once it has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    fn add_records<T: Serialize>(&mut self, path: &Path, records: &[T]) {
        self.add(path, jsonl(records).into_bytes());
    }

    fn commit(&self) -> crate::error::Result<Vec<PathBuf>> {
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        Ok(self.files.iter().map(|(p, _)| p.clone()).collect())
    }
}

fn jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .stderr(std::process::Stdio::null())
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("BROADLEARN_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Run the command line `args` (program name first) and return the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let started = unix_now();
    let clock = Instant::now();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();

    let parsed = Cli::try_parse_from(&args);
    let (command, config, seed, manifest_path, result, outputs) = match parsed {
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            let command = args.get(1).map(|a| a.to_string_lossy().into_owned()).unwrap_or_default();
            let manifest = manifest_flag(&args);
            let result = if code == EXIT_OK {
                Ok(())
            } else {
                Err(usage(e.kind().to_string()))
            };
            (command, serde_json::Value::Null, None, manifest, result, Vec::new())
        }
        Ok(cli) => {
            let config = serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null);
            let (name, seed) = describe(&cli.command);
            let mut outputs = Outputs::default();
            let result = dispatch(&cli.command, &mut outputs).and_then(|_| outputs.commit().map_err(Failure::from));
            let written = match &result {
                Ok(paths) => paths.clone(),
                Err(_) => Vec::new(),
            };
            (name.to_string(), config, seed, cli.manifest.clone(), result.map(|_| ()), written)
        }
    };

    let (exit_code, error) = match result {
        Ok(()) => (EXIT_OK, None),
        Err(f) => {
            if f.code != EXIT_USAGE {
                let _ = writeln!(std::io::stderr(), "error: {}", f.message);
            }
            (f.code, Some(f.message))
        }
    };
    let manifest = RunManifest {
        command,
        config,
        seed,
        started_unix: started,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        outputs,
        git_describe: git_describe(),
        exit_code,
        error,
    };
    let line = serde_json::to_string(&manifest).expect("manifest serializes");
    match manifest_path {
        Some(path) => {
            if let Err(e) = write_atomic(&path, format!("{line}\n").as_bytes()) {
                let _ = writeln!(std::io::stderr(), "error: {e}\n{line}");
                return if exit_code == EXIT_OK { EXIT_DATA } else { exit_code };
            }
        }
        None => {
            let _ = writeln!(std::io::stderr(), "{line}");
        }
    }
    exit_code
}

/// `--manifest` from raw arguments, for runs that fail to parse.
fn manifest_flag(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--manifest" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--manifest=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn describe(cmd: &Command) -> (&'static str, Option<u64>) {
    match cmd {
        Command::Train(a) => ("train", Some(a.hyper.seed)),
        Command::Grow(_) => ("grow", None),
        Command::Predict(_) => ("predict", None),
        Command::Search(a) => ("search", Some(a.seed)),
        Command::Sweep(a) => ("sweep", Some(a.hyper.seed)),
        Command::Scale(_) => ("scale", None),
    }
}

fn dispatch(cmd: &Command, out: &mut Outputs) -> CmdResult {
    match cmd {
        Command::Train(a) => cmd_train(a, out),
        Command::Grow(a) => cmd_grow(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Search(a) => cmd_search(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Scale(a) => cmd_scale(a, out),
    }
}

fn load_all(d: &DataArgs) -> std::result::Result<LabeledFeatures, Failure> {
    match (d.fixture, &d.features) {
        (Some(Fixture::Blobs), _) => Ok(synth::blobs_fixture_data(d.fixture_seed)?),
        (Some(Fixture::Planted), _) => Ok(synth::planted_fixture(d.fixture_seed)?),
        (None, Some(path)) => {
            let format = d.format.unwrap_or_else(|| FileFormat::from_path(path));
            Ok(data::load_features(path, format)?)
        }
        (None, None) => Err(usage("either --features or --fixture is required")),
    }
}

struct Split {
    train: LabeledFeatures,
    test: Option<LabeledFeatures>,
}

/// Training and held-out data as `train` would see them.
fn load_split(d: &DataArgs) -> std::result::Result<Split, Failure> {
    let all = load_all(d)?;
    match &d.test_features {
        Some(path) => {
            let format = d.format.unwrap_or_else(|| FileFormat::from_path(path));
            let test = data::load_features(path, format)?;
            if test.dims() != all.dims() {
                return Err(BlsError::Dimension(format!(
                    "test features have {} columns, training features {}",
                    test.dims(),
                    all.dims()
                ))
                .into());
            }
            let classes = all.classes.max(test.classes);
            let widen = |d: LabeledFeatures| LabeledFeatures::new(d.x, d.labels, Some(classes));
            Ok(Split {
                train: widen(all)?,
                test: Some(widen(test)?),
            })
        }
        None => {
            let s = data::split_8_2(all.len(), d.split_seed)?;
            Ok(Split {
                train: all.subset(&s.train),
                test: Some(all.subset(&s.test)),
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainMetrics {
    record: &'static str,
    path: &'static str,
    n1: usize,
    n2: usize,
    n3: usize,
    lambda: f64,
    seed: u64,
    train_samples: usize,
    test_samples: usize,
    feature_nodes: usize,
    enhancement_nodes: usize,
    train_ac: f64,
    test_ac: Option<f64>,
    test_pc: Option<f64>,
    growth_steps: usize,
    target_reached: Option<bool>,
    train_seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub record: String,
    pub step: usize,
    pub feature_nodes: usize,
    pub enhancement_nodes: usize,
    pub train_ac: f64,
    pub test_ac: Option<f64>,
    pub branch: Option<String>,
    pub max_abs_deviation: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub seconds: f64,
}

fn cmd_train(a: &TrainArgs, out: &mut Outputs) -> CmdResult {
    let hyper = a.hyper.hyper();
    hyper.validate()?;
    let split = load_split(&a.data)?;
    let er = a.er.config(hyper.seed);
    let start = Instant::now();
    let (model, growth) = match a.target_ac {
        Some(target) => {
            let step = GrowthStep::new(a.add_feat, a.add_enh);
            let (m, log) = Pipeline::fit_until(&split.train, &hyper, er, target, step, a.max_steps)?;
            log::info!("growth: {}", log.note());
            (m, Some(log))
        }
        None => (Pipeline::fit(&split.train, &hyper, er, a.grow_capable)?, None),
    };
    let train_seconds = start.elapsed().as_secs_f64();
    let train_ac = model.evaluate(&split.train)?.accuracy;
    let test = split.test.as_ref().map(|t| model.evaluate(t)).transpose()?;
    let metrics = TrainMetrics {
        record: "train",
        path: if er.is_some() { "er-bls" } else { "e-bls" },
        n1: hyper.n1,
        n2: hyper.n2,
        n3: hyper.n3,
        lambda: hyper.lambda,
        seed: hyper.seed,
        train_samples: split.train.len(),
        test_samples: split.test.as_ref().map_or(0, |t| t.len()),
        feature_nodes: model.bls.feature_node_count(),
        enhancement_nodes: model.bls.enhancement_node_count(),
        train_ac,
        test_ac: test.map(|m| m.accuracy),
        test_pc: test.and_then(|m| m.pearson),
        growth_steps: growth.as_ref().map_or(0, |g| g.records.len() - 1),
        target_reached: growth.as_ref().map(|g| g.reached),
        train_seconds,
    };
    println!(
        "{} model: {} feature + {} enhancement nodes, train AC {:.4}, test AC {}, {:.3} s",
        metrics.path,
        metrics.feature_nodes,
        metrics.enhancement_nodes,
        train_ac,
        metrics.test_ac.map_or("n/a".into(), |v| format!("{v:.4}")),
        train_seconds
    );
    if let Some(g) = &growth {
        println!("growth: {} after {} steps", g.note(), metrics.growth_steps);
    }
    if let Some(path) = &a.model_out {
        out.add(path, persist::encode_model(&model)?);
    }
    if let Some(path) = &a.report {
        let mut text = jsonl(&[&metrics]);
        if let Some(g) = &growth {
            let rows: Vec<GrowthRow> = g
                .records
                .iter()
                .map(|r| GrowthRow {
                    record: "growth".into(),
                    step: r.step,
                    feature_nodes: r.feature_nodes,
                    enhancement_nodes: r.enhancement_nodes,
                    train_ac: r.train_accuracy,
                    test_ac: None,
                    branch: None,
                    max_abs_deviation: None,
                    relative_deviation: None,
                    seconds: r.seconds,
                })
                .collect();
            text.push_str(&jsonl(&rows));
        }
        out.add(path, text.into_bytes());
    }
    Ok(())
}

fn weight_deviation(a: &Matrix, b: &Matrix) -> (f64, f64) {
    let mut max_abs = 0.0f64;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            max_abs = max_abs.max((x - y).abs());
        }
    }
    (max_abs, linalg::relative_diff(a, b))
}

fn cmd_grow(a: &GrowArgs, out: &mut Outputs) -> CmdResult {
    let mut model = persist::load_model(&a.model_in)?;
    let split = load_split(&a.data)?;
    let step = GrowthStep::new(a.add_feat, a.add_enh);
    let mut rows = Vec::with_capacity(a.steps);
    let previous = model.bls.stages().len().saturating_sub(1);
    for k in 0..a.steps {
        let start = Instant::now();
        let branch = model.grow(step, &split.train)?;
        let seconds = start.elapsed().as_secs_f64();
        let train_ac = model.training_accuracy(&split.train).unwrap_or(f64::NAN);
        let test_ac = split.test.as_ref().map(|t| model.evaluate(t).map(|m| m.accuracy)).transpose()?;
        println!(
            "step {}: {} feature + {} enhancement nodes, train AC {train_ac:.4}, {seconds:.3} s ({branch:?})",
            previous + k + 1,
            model.bls.feature_node_count(),
            model.bls.enhancement_node_count()
        );
        rows.push(GrowthRow {
            record: "growth".into(),
            step: previous + k + 1,
            feature_nodes: model.bls.feature_node_count(),
            enhancement_nodes: model.bls.enhancement_node_count(),
            train_ac,
            test_ac,
            branch: Some(format!("{branch:?}").to_lowercase()),
            max_abs_deviation: None,
            relative_deviation: None,
            seconds,
        });
    }
    let mut verify_failed = None;
    if a.verify {
        let batch = model.retrain_batch(&split.train)?;
        let (max_abs, rel) = weight_deviation(model.bls.w_out(), batch.bls.w_out());
        println!("verify: max weight deviation {max_abs:.3e}, relative {rel:.3e}");
        if let Some(last) = rows.last_mut() {
            last.max_abs_deviation = Some(max_abs);
            last.relative_deviation = Some(rel);
        }
        if !(rel <= VERIFY_TOLERANCE) {
            verify_failed = Some(rel);
        }
    }
    if let Some(rel) = verify_failed {
        return Err(BlsError::Numeric(format!(
            "grown weights deviate from the batch solution by {rel:.3e} (tolerance {VERIFY_TOLERANCE:e})"
        ))
        .into());
    }
    out.add(a.model_out.as_ref().unwrap_or(&a.model_in), persist::encode_model(&model)?);
    if let Some(path) = &a.report {
        let mut text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(BlsError::Io { path: path.clone(), source: e }.into()),
        };
        if !text.is_empty() && !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&jsonl(&rows));
        out.add(path, text.into_bytes());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictMetrics {
    record: &'static str,
    samples: usize,
    accuracy: Option<f64>,
    pc: Option<f64>,
}

fn cmd_predict(a: &PredictArgs, out: &mut Outputs) -> CmdResult {
    let model = persist::load_model(&a.model_in)?;
    let (x, labels, ids) = match (&a.data.features, a.subset) {
        (Some(path), Subset::All) if a.data.fixture.is_none() => {
            let format = a.data.format.unwrap_or_else(|| FileFormat::from_path(path));
            let file = data::read_feature_file(path, format)?;
            if a.data.labels_in_file && file.labels.is_none() {
                return Err(BlsError::Value(format!("{} carries no labels", path.display())).into());
            }
            (file.x, file.labels, file.ids)
        }
        _ => {
            let d = match a.subset {
                Subset::All => load_all(&a.data)?,
                Subset::Train => load_split(&a.data)?.train,
                Subset::Test => load_split(&a.data)?.test.expect("split has a test part"),
            };
            (d.x, Some(d.labels), d.ids)
        }
    };
    let scores = model.predict_scores(&x)?;
    let pred = crate::bls::argmax_rows(&scores);
    let (accuracy, pc) = match &labels {
        Some(truth) if a.data.labels_in_file || a.data.fixture.is_some() || a.subset != Subset::All => (
            Some(data::accuracy(&pred, truth)?),
            data::pearson_labels(&pred, truth).ok(),
        ),
        _ => (None, None),
    };
    let metrics = PredictMetrics {
        record: "predict",
        samples: pred.len(),
        accuracy,
        pc,
    };
    match accuracy {
        Some(ac) => println!("{} samples, AC {ac:.4}", pred.len()),
        None => println!("{} samples", pred.len()),
    }
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend((0..scores.ncols()).map(|c| format!("score_{c}")));
        w.write_record(&header).map_err(|e| BlsError::Value(e.to_string()))?;
        for (i, &p) in pred.iter().enumerate() {
            let id = ids.as_ref().map_or_else(|| i.to_string(), |v| v[i].clone());
            let mut row = vec![id, p.to_string()];
            row.extend((0..scores.ncols()).map(|c| format!("{}", scores[(i, c)])));
            w.write_record(&row).map_err(|e| BlsError::Value(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BlsError::Value(e.to_string()))?;
        out.add(path, bytes);
    }
    if let Some(path) = &a.report {
        out.add_records(path, &[metrics]);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SearchSummary {
    record: &'static str,
    method: &'static str,
    best_index: usize,
    n1: usize,
    n2: usize,
    n3: usize,
    lambda: f64,
    val_accuracy: f64,
    test_ac: Option<f64>,
    trials: usize,
    work_rows: usize,
}

#[derive(Serialize)]
struct TrialLine<'a> {
    record: &'static str,
    #[serde(flatten)]
    trial: &'a TrialRecord,
}

fn cmd_search(a: &SearchArgs, out: &mut Outputs) -> CmdResult {
    let split = load_split(&a.data)?;
    let space = SearchSpace {
        base: HyperParams {
            shrink: a.shrink,
            seed: a.seed,
            ..HyperParams::default()
        },
        ..SearchSpace::new(a.n1_range, a.n2_range, a.n3_range, a.lambda_choices.clone())
    };
    let outcome = if a.halving {
        hypersearch::halving_search(&space, &split.train, a.budget, a.eta, a.val_fraction, a.seed)?
    } else {
        hypersearch::random_search(&space, &split.train, a.budget, a.val_fraction, a.seed)?
    };
    let best = &outcome.best;
    let test_ac = match &split.test {
        Some(test) => {
            let model = Pipeline::fit(&split.train, &best.hyper, None, false)?;
            Some(model.evaluate(test)?.accuracy)
        }
        None => None,
    };
    let summary = SearchSummary {
        record: "best",
        method: if a.halving { "halving" } else { "random" },
        best_index: best.index,
        n1: best.hyper.n1,
        n2: best.hyper.n2,
        n3: best.hyper.n3,
        lambda: best.hyper.lambda,
        val_accuracy: best.val_accuracy,
        test_ac,
        trials: outcome.log.len(),
        work_rows: outcome.work(),
    };
    println!(
        "best trial {}: n1={} n2={} n3={} lambda={} val AC {:.4}, test AC {}",
        best.index,
        best.hyper.n1,
        best.hyper.n2,
        best.hyper.n3,
        best.hyper.lambda,
        best.val_accuracy,
        test_ac.map_or("n/a".into(), |v| format!("{v:.4}"))
    );
    if let Some(path) = &a.report {
        let records: Vec<TrialRecord> = outcome.log.iter().map(TrialRecord::from).collect();
        let lines: Vec<TrialLine> = records.iter().map(|t| TrialLine { record: "trial", trial: t }).collect();
        let mut text = jsonl(&lines);
        text.push_str(&jsonl(&[summary]));
        out.add(path, text.into_bytes());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    record: &'static str,
    feature_nodes: usize,
    enhancement_nodes: usize,
    train_ac: f64,
    test_ac: Option<f64>,
    seconds: f64,
}

fn cmd_sweep(a: &SweepArgs, out: &mut Outputs) -> CmdResult {
    if a.n3_list.is_empty() {
        return Err(usage("--n3-list needs at least one value"));
    }
    let split = load_split(&a.data)?;
    let base = a.hyper.hyper();
    let er = a.er.config(base.seed);
    let mut rows = Vec::with_capacity(a.n3_list.len());
    println!("{:>14} {:>18} {:>10} {:>8}", "feature nodes", "enhancement nodes", "seconds", "test AC");
    for &n3 in &a.n3_list {
        let hyper = HyperParams { n3, ..base.clone() };
        hyper.validate()?;
        let start = Instant::now();
        let model = Pipeline::fit(&split.train, &hyper, er, false)?;
        let seconds = start.elapsed().as_secs_f64();
        let train_ac = model.evaluate(&split.train)?.accuracy;
        let test_ac = split.test.as_ref().map(|t| model.evaluate(t).map(|m| m.accuracy)).transpose()?;
        let feature_label = format!("{}x{}", hyper.n1, hyper.n2);
        println!(
            "{feature_label:>14} {n3:>18} {seconds:>10.3} {:>8}",
            test_ac.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        rows.push(SweepRow {
            record: "sweep",
            feature_nodes: hyper.feature_nodes(),
            enhancement_nodes: n3,
            train_ac,
            test_ac,
            seconds,
        });
    }
    if let Some(path) = &a.report {
        out.add_records(path, &rows);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScaleRecord {
    record: &'static str,
    alpha: f64,
    beta: f64,
    gamma: f64,
    lambda: f64,
    depth: f64,
    width: f64,
    resolution: f64,
    flops_multiplier: f64,
    constraint_residual: f64,
}

fn cmd_scale(a: &ScaleArgs, out: &mut Outputs) -> CmdResult {
    let cfg = ScalingConfig::new(a.alpha, a.beta, a.gamma, a.lambda)?;
    let s = compound_scaling(&cfg)?;
    println!(
        "d={} w={} r={} flops x{} (alpha*beta^2*gamma^2 - 2 = {})",
        s.depth, s.width, s.resolution, s.flops_multiplier, s.constraint_residual
    );
    if let Some(path) = &a.report {
        out.add_records(
            path,
            &[ScaleRecord {
                record: "scale",
                alpha: a.alpha,
                beta: a.beta,
                gamma: a.gamma,
                lambda: a.lambda,
                depth: s.depth,
                width: s.width,
                resolution: s.resolution,
                flops_multiplier: s.flops_multiplier,
                constraint_residual: s.constraint_residual,
            }],
        );
    }
    Ok(())
}
