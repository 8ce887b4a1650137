//! Command-line pipeline: simulate -> train -> localize -> benchmark ->
//! analyze. The binary in `src/main.rs` is a thin wrapper over [`run`];
//! every subcommand body is a plain function over the library API so tests
//! and examples can drive the same paths.
//!
//! Exit codes: 0 success, 2 usage error (from clap), 1 runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis;
use crate::baselines::{self, BaselineDb, BaselineError};
use crate::csi::{AntennaSelection, CsiError, CsiPacket, SigmaMode};
use crate::datastore::{self, DatastoreError};
use crate::deepnet::{DeepnetError, NetShape, TrainConfig};
use crate::locator::{
    self, BatchConfig, DbFlags, DistanceMetric, FingerprintDatabase, LocationRecord, LocatorError,
};
use crate::rbm::CdSampling;
use crate::rng::mix_seed;
use crate::simulator::{self, Layout, SimScenario, SimulatorError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error(transparent)]
    Deepnet(#[from] DeepnetError),
    #[error(transparent)]
    Locator(#[from] LocatorError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Datastore(#[from] DatastoreError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "deepfi",
    version,
    about = "CSI-fingerprint indoor localization: synthetic datasets, per-location deep autoencoder training, RBF-fusion localization, baselines and analysis"
)]
pub struct Cli {
    /// Worker threads for per-location training and per-model evaluation
    /// (results are independent of this).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic CSI/RSS dataset with ground truth.
    Simulate(SimulateArgs),
    /// Train per-location fingerprint models from a dataset CSV.
    Train(TrainArgs),
    /// Estimate positions for a test dataset against a fingerprint DB.
    Localize(LocalizeArgs),
    /// Run method comparisons and parameter sweeps on synthetic scenarios.
    Benchmark(BenchmarkArgs),
    /// Dataset analytics: stability and error CDFs, cluster counts,
    /// correlation-vs-distance curves.
    Analyze(AnalyzeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutArg {
    LivingRoom,
    Laboratory,
    Custom,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Layout {
        match l {
            LayoutArg::LivingRoom => Layout::LivingRoom,
            LayoutArg::Laboratory => Layout::Laboratory,
            LayoutArg::Custom => Layout::Custom,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Deepfi,
    Fifs,
    Horus,
    Ml,
    Knn,
}

impl MethodArg {
    fn name(&self) -> &'static str {
        match self {
            MethodArg::Deepfi => "deepfi",
            MethodArg::Fifs => "fifs",
            MethodArg::Horus => "horus",
            MethodArg::Ml => "ml",
            MethodArg::Knn => "knn",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceArg {
    L1,
    L2,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaModeArg {
    Std,
    Var,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdSamplingArg {
    Probabilities,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepArg {
    None,
    Antennas,
    TestPackets,
    BatchSize,
    GridSize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "living-room")]
    pub layout: LayoutArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for train.csv, test.csv and scenario.meta.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub grid_m: Option<f64>,
    #[arg(long)]
    pub packets_per_train: Option<usize>,
    #[arg(long)]
    pub packets_per_test: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Hidden-layer widths k1,k2,k3,k4.
    #[arg(long, default_value = "300,150,100,50")]
    pub shape: String,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 30)]
    pub finetune_epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub finetune_lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output fingerprint database file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub grid_m: f64,
    #[arg(long, value_enum, default_value = "probabilities")]
    pub cd_sampling: CdSamplingArg,
    #[arg(long, value_enum, default_value = "l1")]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value = "std")]
    pub sigma_mode: SigmaModeArg,
    /// Drop bias terms from the online forward pass.
    #[arg(long, default_value_t = false)]
    pub no_bias_forward: bool,
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    /// Fingerprint database (required for the deepfi method).
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Test packets CSV.
    #[arg(long)]
    pub packets: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    /// Packets used per test location.
    #[arg(long, default_value_t = 100)]
    pub n_test_packets: usize,
    #[arg(long, value_enum, default_value = "deepfi")]
    pub method: MethodArg,
    /// Training dataset CSV (required for fifs/horus/ml/knn).
    #[arg(long)]
    pub train_dataset: Option<PathBuf>,
    /// Neighbor count for knn.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value = "living-room")]
    pub layout: LayoutArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated method list.
    #[arg(long, default_value = "deepfi,fifs,horus,ml,knn")]
    pub methods: String,
    #[arg(long, value_enum, default_value = "none")]
    pub sweep: SweepArg,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Directory for per-method error CDF CSVs (skipped when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training scale; defaults are desk scale, not survey scale.
    #[arg(long, default_value = "60,40,20,10")]
    pub shape: String,
    #[arg(long, default_value_t = 100)]
    pub packets_per_train: usize,
    #[arg(long, default_value_t = 20)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 30)]
    pub finetune_epochs: usize,
    #[arg(long, default_value_t = 0.08)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 100)]
    pub n_test_packets: usize,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub what: AnalyzeCommand,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// CDF of per-dimension CSI std/mean ratios (plus the RSS comparison).
    Stability {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Subcarrier cluster-count histogram over locations.
    Clusters {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = analysis::CLUSTER_TOLERANCE)]
        tolerance: f64,
    },
    /// CDF of localization errors from a localize report.
    ErrorCdf {
        #[arg(long)]
        report: PathBuf,
    },
    /// Mean response correlation between point pairs at fixed separations.
    CorrDistance {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "0.15,0.3,0.6,1.2")]
        distances: String,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
}

/// Parses "k1,k2,k3,k4" into a network shape.
pub fn parse_shape(text: &str) -> Result<NetShape, CliError> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Invalid(format!("bad --shape {text:?}")))?;
    if parts.len() != 4 {
        return Err(CliError::Invalid(format!(
            "--shape needs 4 comma-separated widths, got {}",
            parts.len()
        )));
    }
    NetShape::new(parts[0], parts[1], parts[2], parts[3]).map_err(CliError::from)
}

fn parse_methods(text: &str) -> Result<Vec<MethodArg>, CliError> {
    text.split(',')
        .map(|m| match m.trim() {
            "deepfi" => Ok(MethodArg::Deepfi),
            "fifs" => Ok(MethodArg::Fifs),
            "horus" => Ok(MethodArg::Horus),
            "ml" => Ok(MethodArg::Ml),
            "knn" => Ok(MethodArg::Knn),
            other => Err(CliError::Invalid(format!("unknown method {other:?}"))),
        })
        .collect()
}

/// Entry point for the binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool may already exist in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Localize(args) => cmd_localize(&args).map(|report| print!("{report}")),
        Command::Benchmark(args) => cmd_benchmark(&args).map(|table| print!("{table}")),
        Command::Analyze(args) => cmd_analyze(&args).map(|out| print!("{out}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Builds the scenario a simulate/benchmark invocation describes.
pub fn scenario_from(layout: LayoutArg, seed: u64, noise_std: Option<f64>, grid_m: Option<f64>) -> SimScenario {
    let mut scenario = match layout {
        LayoutArg::LivingRoom => SimScenario::living_room(seed),
        LayoutArg::Laboratory => SimScenario::laboratory(seed),
        LayoutArg::Custom => SimScenario::living_room(seed),
    };
    if let Some(n) = noise_std {
        scenario.noise_std = n;
    }
    if let Some(g) = grid_m {
        scenario.grid_m = g;
    }
    scenario
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let scenario = scenario_from(args.layout, args.seed, args.noise_std, args.grid_m);
    let layout: Layout = args.layout.into();
    let per_train = args
        .packets_per_train
        .unwrap_or_else(|| layout.default_packets_per_train());
    let per_test = args
        .packets_per_test
        .unwrap_or_else(|| layout.default_packets_per_test());
    let data = simulator::generate_with_counts(&scenario, layout, per_train, per_test)?;

    std::fs::create_dir_all(&args.out)?;
    let to_records = |points: &[simulator::LabeledPoint]| -> Vec<LocationRecord> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| LocationRecord {
                id: i.to_string(),
                xy: p.xy,
                packets: p.packets.clone(),
            })
            .collect()
    };
    let train = to_records(&data.train_points);
    let test = to_records(&data.test_points);
    datastore::write_dataset(&train, &args.out.join("train.csv"))?;
    datastore::write_dataset(&test, &args.out.join("test.csv"))?;
    let layout_name = match args.layout {
        LayoutArg::LivingRoom => "living_room",
        LayoutArg::Laboratory => "laboratory",
        LayoutArg::Custom => "custom",
    };
    datastore::write_scenario_meta(
        &scenario,
        layout_name,
        (train.len(), test.len(), per_train, per_test),
        &args.out.join("scenario.meta"),
    )?;
    eprintln!(
        "wrote {} training and {} test locations under {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let records = datastore::read_dataset(&args.dataset)?;
    if records.is_empty() {
        return Err(CliError::Invalid(format!(
            "dataset {} contains no packets",
            args.dataset.display()
        )));
    }
    let shape = parse_shape(&args.shape)?;
    let cfg = TrainConfig {
        alpha: args.alpha,
        pretrain_epochs: args.pretrain_epochs,
        finetune_epochs: args.finetune_epochs,
        finetune_lr: args.finetune_lr,
        seed: args.seed,
        cd_sampling: match args.cd_sampling {
            CdSamplingArg::Probabilities => CdSampling::Probabilities,
            CdSamplingArg::Full => CdSampling::Full,
        },
    };
    let flags = DbFlags {
        distance: match args.distance {
            DistanceArg::L1 => DistanceMetric::L1,
            DistanceArg::L2 => DistanceMetric::L2,
        },
        sigma_mode: match args.sigma_mode {
            SigmaModeArg::Std => SigmaMode::Std,
            SigmaModeArg::Var => SigmaMode::Var,
        },
        bias_forward_disabled: args.no_bias_forward,
    };
    let start = Instant::now();
    let db = locator::build_database(
        &records,
        &shape,
        &cfg,
        args.grid_m,
        flags,
        AntennaSelection::All,
    )?;
    datastore::save_db(&db, &args.out)?;
    eprintln!(
        "trained {} locations (shape {},{},{},{}) in {:.1}s -> {}",
        db.len(),
        shape.k1,
        shape.k2,
        shape.k3,
        shape.k4,
        start.elapsed().as_secs_f64(),
        args.out.display()
    );
    Ok(())
}

/// Report header produced by `localize`.
pub const REPORT_HEADER: &str = "test_id,x_est,y_est,x_true,y_true,error_m";

/// Runs localization and renders the estimate report CSV.
pub fn cmd_localize(args: &LocalizeArgs) -> Result<String, CliError> {
    let test_records = datastore::read_dataset(&args.packets)?;
    if test_records.is_empty() {
        return Err(CliError::Invalid(format!(
            "test dataset {} contains no packets",
            args.packets.display()
        )));
    }

    let mut report = String::new();
    writeln!(report, "{REPORT_HEADER}").expect("string write");

    let estimator = build_estimator(
        args.method,
        args.db.as_deref(),
        args.train_dataset.as_deref(),
        args.batch_size,
        args.k,
    )?;
    for rec in &test_records {
        let n = args.n_test_packets.min(rec.packets.len()).max(1);
        let est = estimator(&rec.packets[..n])?;
        let err = ((est.0 - rec.xy.0).powi(2) + (est.1 - rec.xy.1).powi(2)).sqrt();
        writeln!(
            report,
            "{},{},{},{},{},{}",
            rec.id, est.0, est.1, rec.xy.0, rec.xy.1, err
        )
        .expect("string write");
    }
    Ok(report)
}

type Estimator<'a> = Box<dyn Fn(&[CsiPacket]) -> Result<(f64, f64), CliError> + 'a>;

fn build_estimator(
    method: MethodArg,
    db_path: Option<&Path>,
    train_dataset: Option<&Path>,
    batch_size: usize,
    k: usize,
) -> Result<Estimator<'static>, CliError> {
    match method {
        MethodArg::Deepfi => {
            let path = db_path.ok_or_else(|| {
                CliError::Invalid("--db is required for --method deepfi".into())
            })?;
            let db = datastore::load_db(path)?;
            let cfg = BatchConfig {
                batch_size,
                ..BatchConfig::default()
            };
            Ok(Box::new(move |packets| {
                Ok(locator::estimate(&db, packets, &cfg)?.xy)
            }))
        }
        _ => {
            let path = train_dataset.ok_or_else(|| {
                CliError::Invalid(format!(
                    "--train-dataset is required for --method {}",
                    method.name()
                ))
            })?;
            let records = datastore::read_dataset(path)?;
            let training: Vec<((f64, f64), Vec<CsiPacket>)> = records
                .into_iter()
                .map(|r| (r.xy, r.packets))
                .collect();
            let bdb = BaselineDb::build(&training)?;
            Ok(Box::new(move |packets| {
                let est = match method {
                    MethodArg::Fifs => baselines::fifs_estimate(&bdb, packets)?,
                    MethodArg::Horus => baselines::horus_estimate(&bdb, packets)?,
                    MethodArg::Ml => baselines::ml_estimate(&bdb, packets)?,
                    MethodArg::Knn => baselines::knn_estimate(&bdb, packets, k)?,
                    MethodArg::Deepfi => unreachable!(),
                };
                Ok(est.xy)
            }))
        }
    }
}

/// One benchmark table row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub sweep: String,
    pub variant: String,
    pub method: String,
    pub mean_error_m: f64,
    pub std_error_m: f64,
    pub train_s: f64,
    pub estimate_s: f64,
    pub errors: Vec<f64>,
}

fn mean_std_of(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the configured benchmark and renders the table; per-method error
/// CDFs go to `args.out` when set.
pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<String, CliError> {
    let methods = parse_methods(&args.methods)?;
    let shape = parse_shape(&args.shape)?;
    let rows = run_benchmark(args, &methods, &shape)?;

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        for row in &rows {
            let name = format!("cdf_{}_{}_{}.csv", row.sweep, row.variant, row.method);
            let mut text = String::from("error_m,cum_fraction\n");
            for (e, f) in analysis::error_cdf(&row.errors) {
                writeln!(text, "{e},{f}").expect("string write");
            }
            std::fs::write(dir.join(name), text)?;
        }
    }

    let mut table = String::from("sweep,variant,method,mean_error_m,std_error_m,train_s,estimate_s\n");
    for row in &rows {
        writeln!(
            table,
            "{},{},{},{:.4},{:.4},{:.3},{:.3}",
            row.sweep, row.variant, row.method, row.mean_error_m, row.std_error_m,
            row.train_s, row.estimate_s
        )
        .expect("string write");
    }
    Ok(table)
}

struct TrialData {
    train: Vec<((f64, f64), Vec<CsiPacket>)>,
    test: Vec<((f64, f64), Vec<CsiPacket>)>,
}

fn generate_trial(
    args: &BenchmarkArgs,
    trial: usize,
    grid_m: Option<f64>,
    packets_per_test: usize,
) -> Result<TrialData, CliError> {
    let seed = mix_seed(args.seed, trial as u64);
    let scenario = scenario_from(args.layout, seed, Some(args.noise_std), grid_m);
    let layout: Layout = args.layout.into();
    let data = simulator::generate_with_counts(
        &scenario,
        layout,
        args.packets_per_train,
        packets_per_test,
    )?;
    Ok(TrialData {
        train: data
            .train_points
            .iter()
            .map(|p| (p.xy, p.packets.clone()))
            .collect(),
        test: data
            .test_points
            .iter()
            .map(|p| (p.xy, p.packets.clone()))
            .collect(),
    })
}

fn train_deepfi(
    data: &TrialData,
    shape: &NetShape,
    args: &BenchmarkArgs,
    trial: usize,
    selection: AntennaSelection,
    grid_m: f64,
) -> Result<FingerprintDatabase, CliError> {
    let records: Vec<LocationRecord> = data
        .train
        .iter()
        .enumerate()
        .map(|(i, (xy, packets))| LocationRecord {
            id: i.to_string(),
            xy: *xy,
            packets: packets.clone(),
        })
        .collect();
    let cfg = TrainConfig {
        pretrain_epochs: args.pretrain_epochs,
        finetune_epochs: args.finetune_epochs,
        seed: mix_seed(args.seed, 0x1000 + trial as u64),
        ..TrainConfig::default()
    };
    let net_shape = if selection.dim() == shape.n_in {
        *shape
    } else {
        NetShape::with_input(selection.dim(), shape.k1, shape.k2, shape.k3, shape.k4)?
    };
    Ok(locator::build_database(
        &records,
        &net_shape,
        &cfg,
        grid_m,
        DbFlags::default(),
        selection,
    )?)
}

fn eval_errors(
    data: &TrialData,
    estimator: &Estimator,
    n_test_packets: usize,
) -> Result<Vec<f64>, CliError> {
    let mut errors = Vec::with_capacity(data.test.len());
    for (xy, packets) in &data.test {
        let n = n_test_packets.min(packets.len()).max(1);
        let est = estimator(&packets[..n])?;
        errors.push(((est.0 - xy.0).powi(2) + (est.1 - xy.1).powi(2)).sqrt());
    }
    Ok(errors)
}

fn baseline_estimator<'a>(
    bdb: &'a BaselineDb,
    method: MethodArg,
    k: usize,
) -> Estimator<'a> {
    Box::new(move |packets| {
        let est = match method {
            MethodArg::Fifs => baselines::fifs_estimate(bdb, packets)?,
            MethodArg::Horus => baselines::horus_estimate(bdb, packets)?,
            MethodArg::Ml => baselines::ml_estimate(bdb, packets)?,
            MethodArg::Knn => baselines::knn_estimate(bdb, packets, k)?,
            MethodArg::Deepfi => unreachable!(),
        };
        Ok(est.xy)
    })
}

fn run_benchmark(
    args: &BenchmarkArgs,
    methods: &[MethodArg],
    shape: &NetShape,
) -> Result<Vec<BenchRow>, CliError> {
    let grid_default = 0.5;
    let mut rows: Vec<BenchRow> = Vec::new();

    // Accumulates per-(sweep, variant, method) errors over trials.
    let push = |rows: &mut Vec<BenchRow>,
                    sweep: &str,
                    variant: &str,
                    method: &str,
                    errors: Vec<f64>,
                    train_s: f64,
                    estimate_s: f64| {
        if let Some(row) = rows
            .iter_mut()
            .find(|r| r.sweep == sweep && r.variant == variant && r.method == method)
        {
            row.errors.extend(errors);
            row.train_s += train_s;
            row.estimate_s += estimate_s;
        } else {
            rows.push(BenchRow {
                sweep: sweep.into(),
                variant: variant.into(),
                method: method.into(),
                mean_error_m: 0.0,
                std_error_m: 0.0,
                train_s,
                estimate_s,
                errors,
            });
        }
    };

    for trial in 0..args.trials.max(1) {
        match args.sweep {
            SweepArg::None => {
                let data = generate_trial(args, trial, None, 100.max(args.n_test_packets))?;
                let bdb = BaselineDb::build(&data.train)?;
                for &method in methods {
                    let (errors, train_s, est_s) = match method {
                        MethodArg::Deepfi => {
                            let t0 = Instant::now();
                            let db = train_deepfi(
                                &data,
                                shape,
                                args,
                                trial,
                                AntennaSelection::All,
                                grid_default,
                            )?;
                            let train_s = t0.elapsed().as_secs_f64();
                            let cfg = BatchConfig {
                                batch_size: args.batch_size,
                                ..BatchConfig::default()
                            };
                            let est: Estimator = Box::new(move |packets| {
                                Ok(locator::estimate(&db, packets, &cfg)?.xy)
                            });
                            let t1 = Instant::now();
                            let errors = eval_errors(&data, &est, args.n_test_packets)?;
                            (errors, train_s, t1.elapsed().as_secs_f64())
                        }
                        _ => {
                            let est = baseline_estimator(&bdb, method, args.k);
                            let t1 = Instant::now();
                            let errors = eval_errors(&data, &est, args.n_test_packets)?;
                            (errors, 0.0, t1.elapsed().as_secs_f64())
                        }
                    };
                    push(&mut rows, "none", "default", method.name(), errors, train_s, est_s);
                }
            }
            SweepArg::Antennas => {
                let data = generate_trial(args, trial, None, 100.max(args.n_test_packets))?;
                let variants = [
                    ("all", AntennaSelection::All),
                    ("antenna0", AntennaSelection::Single(0)),
                    ("antenna1", AntennaSelection::Single(1)),
                    ("antenna2", AntennaSelection::Single(2)),
                ];
                for (name, selection) in variants {
                    let t0 = Instant::now();
                    let db = train_deepfi(&data, shape, args, trial, selection, grid_default)?;
                    let train_s = t0.elapsed().as_secs_f64();
                    let cfg = BatchConfig {
                        batch_size: args.batch_size,
                        ..BatchConfig::default()
                    };
                    let est: Estimator =
                        Box::new(move |packets| Ok(locator::estimate(&db, packets, &cfg)?.xy));
                    let t1 = Instant::now();
                    let errors = eval_errors(&data, &est, args.n_test_packets)?;
                    push(
                        &mut rows,
                        "antennas",
                        name,
                        "deepfi",
                        errors,
                        train_s,
                        t1.elapsed().as_secs_f64(),
                    );
                }
            }
            SweepArg::TestPackets => {
                let data = generate_trial(args, trial, None, 300)?;
                let t0 = Instant::now();
                let db =
                    train_deepfi(&data, shape, args, trial, AntennaSelection::All, grid_default)?;
                let train_s = t0.elapsed().as_secs_f64();
                for n in [5usize, 10, 30, 100, 300] {
                    let cfg = BatchConfig {
                        batch_size: args.batch_size,
                        ..BatchConfig::default()
                    };
                    let db = db.clone();
                    let est: Estimator =
                        Box::new(move |packets| Ok(locator::estimate(&db, packets, &cfg)?.xy));
                    let t1 = Instant::now();
                    let errors = eval_errors(&data, &est, n)?;
                    push(
                        &mut rows,
                        "test-packets",
                        &format!("n{n}"),
                        "deepfi",
                        errors,
                        train_s,
                        t1.elapsed().as_secs_f64(),
                    );
                }
            }
            SweepArg::BatchSize => {
                let data = generate_trial(args, trial, None, 100.max(args.n_test_packets))?;
                let t0 = Instant::now();
                let db =
                    train_deepfi(&data, shape, args, trial, AntennaSelection::All, grid_default)?;
                let train_s = t0.elapsed().as_secs_f64();
                for b in [1usize, 3, 5, 10, 50, 100] {
                    let cfg = BatchConfig {
                        batch_size: b,
                        ..BatchConfig::default()
                    };
                    let db = db.clone();
                    let est: Estimator =
                        Box::new(move |packets| Ok(locator::estimate(&db, packets, &cfg)?.xy));
                    let t1 = Instant::now();
                    let errors = eval_errors(&data, &est, args.n_test_packets)?;
                    push(
                        &mut rows,
                        "batch-size",
                        &format!("b{b}"),
                        "deepfi",
                        errors,
                        train_s,
                        t1.elapsed().as_secs_f64(),
                    );
                }
            }
            SweepArg::GridSize => {
                for grid in [0.25f64, 0.5, 1.0] {
                    let data = generate_trial(args, trial, Some(grid), 100.max(args.n_test_packets))?;
                    let t0 = Instant::now();
                    let db = train_deepfi(&data, shape, args, trial, AntennaSelection::All, grid)?;
                    let train_s = t0.elapsed().as_secs_f64();
                    let cfg = BatchConfig {
                        batch_size: args.batch_size,
                        ..BatchConfig::default()
                    };
                    let est: Estimator =
                        Box::new(move |packets| Ok(locator::estimate(&db, packets, &cfg)?.xy));
                    let t1 = Instant::now();
                    let errors = eval_errors(&data, &est, args.n_test_packets)?;
                    push(
                        &mut rows,
                        "grid-size",
                        &format!("g{grid}"),
                        "deepfi",
                        errors,
                        train_s,
                        t1.elapsed().as_secs_f64(),
                    );
                }
            }
        }
    }

    for row in &mut rows {
        let (mean, std) = mean_std_of(&row.errors);
        row.mean_error_m = mean;
        row.std_error_m = std;
    }
    Ok(rows)
}

/// Renders the output of an `analyze` subcommand as CSV text.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    match &args.what {
        AnalyzeCommand::Stability { dataset } => {
            let records = datastore::read_dataset(dataset)?;
            let per_location: Vec<Vec<CsiPacket>> =
                records.into_iter().map(|r| r.packets).collect();
            let csi = analysis::stability_cdf(&per_location);
            let rss = analysis::error_cdf(&analysis::rss_stability_ratios(&per_location));
            let mut out = String::from("kind,ratio,cum_fraction\n");
            for (r, f) in csi {
                writeln!(out, "csi,{r},{f}").expect("string write");
            }
            for (r, f) in rss {
                writeln!(out, "rss,{r},{f}").expect("string write");
            }
            Ok(out)
        }
        AnalyzeCommand::Clusters { dataset, tolerance } => {
            let records = datastore::read_dataset(dataset)?;
            let mut out = String::from("location_id,antenna,clusters\n");
            for rec in &records {
                if rec.packets.is_empty() {
                    continue;
                }
                // Mean response per antenna over the location's packets.
                for antenna in 0..3 {
                    let mut mean = vec![0.0; 30];
                    for p in &rec.packets {
                        for (m, &a) in mean.iter_mut().zip(p.antenna_slice(antenna)) {
                            *m += a;
                        }
                    }
                    for m in &mut mean {
                        *m /= rec.packets.len() as f64;
                    }
                    let k = analysis::count_clusters(&mean, *tolerance);
                    writeln!(out, "{},{antenna},{k}", rec.id).expect("string write");
                }
            }
            Ok(out)
        }
        AnalyzeCommand::ErrorCdf { report } => {
            let text = std::fs::read_to_string(report)?;
            let mut errors = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if idx == 0 || line.trim().is_empty() {
                    continue;
                }
                let last = line.split(',').next_back().ok_or_else(|| {
                    CliError::Invalid(format!("bad report line {}", idx + 1))
                })?;
                errors.push(last.parse::<f64>().map_err(|_| {
                    CliError::Invalid(format!("bad error value at line {}", idx + 1))
                })?);
            }
            let mut out = String::from("error_m,cum_fraction\n");
            for (e, f) in analysis::error_cdf(&errors) {
                writeln!(out, "{e},{f}").expect("string write");
            }
            Ok(out)
        }
        AnalyzeCommand::CorrDistance {
            seed,
            distances,
            pairs,
        } => {
            let ds: Vec<f64> = distances
                .split(',')
                .map(|d| d.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Invalid(format!("bad --distances {distances:?}")))?;
            let scenario = SimScenario::living_room(*seed);
            let curve = simulator::correlation_by_distance(&scenario, &ds, *pairs, *seed)?;
            let mut out = String::from("distance_m,mean_correlation\n");
            for (d, c) in curve {
                writeln!(out, "{d},{c}").expect("string write");
            }
            Ok(out)
        }
    }
}
