//! Command-line pipeline for the RSSI channel estimators.
//!
//! Each stage is a subcommand that reads and writes plain files, so every
//! intermediate artifact (traces, datasets, models, metrics) is inspectable
//! and the whole experiment is reproducible from its seeds. Every artifact
//! embeds or sits next to the fully resolved configuration that produced it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rssi_estimator::chansim::{
    simulate_location_sweep, simulate_stationary_trace, ChannelParams, SweepSpec,
};
use rssi_estimator::data::{
    average_locations, average_readings, load_csv_locations, load_csv_trace, make_windows,
    temporal_split, temporal_split_at, write_csv_locations, write_csv_trace, Condition, Scenario,
    SplitDataset, TraceMeta, DEFAULT_RSSI_COLUMN,
};
use rssi_estimator::error::Error;
use rssi_estimator::eval::{compare_report, run_baseline, BaselineKind, ReportEntry};
use rssi_estimator::models::{evaluate, sweep_split, train, ModelConfig, TrainingHistory, Variant};
use rssi_estimator::nn::{Activation, LayerSpec, Network};
use rssi_estimator::optim::gradient_check;

const EXIT_CODES_HELP: &str = "EXIT CODES:
  0  success
  2  command-line usage error
  3  I/O error (missing or unwritable file)
  4  parse error (malformed CSV/JSON, bad cell, unknown column)
  5  shape error (dimension mismatch)
  6  numeric error (non-finite values, singular system, failed gradient check)
  7  configuration error (invalid flags or hyperparameters)
  8  data error (empty dataset, bad split boundary)";

#[derive(Parser)]
#[command(
    name = "rssi-estimator",
    version,
    about = "Train and evaluate dense-network RSSI channel estimators on synthetic or captured traces",
    after_help = EXIT_CODES_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic RSSI captures as CSV
    Simulate(SimulateArgs),
    /// Average readings/locations, window a trace, and split it into a dataset file
    Preprocess(PreprocessArgs),
    /// Train an estimator on a dataset file
    Train(TrainArgs),
    /// Evaluate a trained model or a classical baseline on a dataset file
    Evaluate(EvaluateArgs),
    /// Check analytic gradients against central finite differences
    Gradcheck(GradcheckArgs),
    /// Merge metrics files into a comparison report
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PresetArg {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ScenarioArg {
    /// Fixed transmitter-receiver geometry sampled over time
    Stationary,
    /// Multi-location sweep with one capture per location
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VariantArg {
    A,
    B,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::A => Variant::A,
            VariantArg::B => Variant::B,
        }
    }
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Capture geometry
    #[arg(long, value_enum, default_value_t = ScenarioArg::Stationary)]
    scenario: ScenarioArg,
    /// Channel preset: propagation condition and noise level
    #[arg(long, value_enum, default_value_t = PresetArg::Los)]
    preset: PresetArg,
    /// RNG seed (seeds are mandatory; there are no entropy defaults)
    #[arg(long)]
    seed: u64,
    /// Samples to generate (stationary scenario)
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Transmitter-receiver distance in metres (stationary scenario)
    #[arg(long, default_value_t = 3.0)]
    distance: f64,
    /// Comma-separated per-location distances in metres (sweep scenario)
    #[arg(long, value_delimiter = ',')]
    distances: Option<Vec<f64>>,
    /// Samples per location (sweep scenario)
    #[arg(long, default_value_t = 250)]
    samples_per_location: usize,
    /// Override the preset transmit power (dBm)
    #[arg(long)]
    tx_power: Option<f64>,
    /// Override the preset reference path loss (dB)
    #[arg(long)]
    pl0: Option<f64>,
    /// Override the preset reference distance (m)
    #[arg(long)]
    d0: Option<f64>,
    /// Override the preset path-loss exponent
    #[arg(long)]
    exponent: Option<f64>,
    /// Override the preset shadowing deviation (dB)
    #[arg(long)]
    sigma: Option<f64>,
    /// Override the preset shadowing correlation
    #[arg(long)]
    rho: Option<f64>,
    /// Output CSV path; the resolved config lands in <out>.meta.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InputMode {
    /// Plain trace CSV(s); several inputs are averaged per time step
    Trace,
    /// Location-sweep CSV; locations are averaged to one value each
    Locations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SplitMode {
    /// First floor(train_fraction * pairs) pairs train, the rest test
    Fraction,
    /// Explicit --train-pairs / --test-pairs boundary
    Counts,
    /// Next-location layout: final location held out, previous two test
    Sweep,
}

#[derive(Args, Serialize)]
struct PreprocessArgs {
    /// Input CSV path(s); several trace inputs are averaged row-for-row
    #[arg(long = "input", required = true, num_args = 1.., value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    /// How to interpret the input files
    #[arg(long, value_enum, default_value_t = InputMode::Trace)]
    mode: InputMode,
    /// Name of the CSV column holding RSSI values
    #[arg(long, default_value = DEFAULT_RSSI_COLUMN)]
    rssi_column: String,
    /// Sliding-window width
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// How to cut the train/test boundary
    #[arg(long, value_enum, default_value_t = SplitMode::Fraction)]
    split: SplitMode,
    /// Train fraction for --split fraction
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Train pair count for --split counts
    #[arg(long)]
    train_pairs: Option<usize>,
    /// Test pair count for --split counts (remainder when omitted)
    #[arg(long)]
    test_pairs: Option<usize>,
    /// Fit a z-score normalizer on the training pairs (default)
    #[arg(long, overrides_with = "no_normalize")]
    normalize: bool,
    /// Keep raw dBm values
    #[arg(long)]
    no_normalize: bool,
    /// Output dataset JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Dataset JSON produced by `preprocess`
    #[arg(long)]
    dataset: PathBuf,
    /// Estimator variant
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (mandatory here or in --config)
    #[arg(long)]
    seed: Option<u64>,
    /// Override the variant's epoch count (needs --override)
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the variant's window (needs --override)
    #[arg(long)]
    window: Option<usize>,
    /// Neurons per hidden layer
    #[arg(long)]
    hidden: Option<usize>,
    /// Learning rate
    #[arg(long)]
    eta: Option<f64>,
    /// First-moment decay rate
    #[arg(long)]
    beta1: Option<f64>,
    /// Second-moment decay rate
    #[arg(long)]
    beta2: Option<f64>,
    /// Division-guard constant
    #[arg(long)]
    epsilon: Option<f64>,
    /// Expect z-scored training data (default)
    #[arg(long, overrides_with = "no_normalize")]
    normalize: bool,
    /// Expect raw dBm training data
    #[arg(long)]
    no_normalize: bool,
    /// Permit window/epochs values differing from the variant defaults
    #[arg(long = "override")]
    allow_override: bool,
    /// Output path for the trained model JSON
    #[arg(long)]
    out_model: PathBuf,
    /// Output path for the per-epoch history JSON
    #[arg(long)]
    out_history: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Dataset JSON produced by `preprocess`
    #[arg(long)]
    dataset: PathBuf,
    /// Trained model JSON produced by `train`
    #[arg(long, conflicts_with = "baseline")]
    model: Option<PathBuf>,
    /// Classical baseline: persistence, ma:<window>, or ar:<order>
    #[arg(long)]
    baseline: Option<String>,
    /// Row label in reports; defaults to the model variant or baseline name
    #[arg(long)]
    label: Option<String>,
    /// History JSON whose training time should be carried into the metrics
    #[arg(long)]
    history: Option<PathBuf>,
    /// Record measured wall-clock times; without this flag timing fields are
    /// written as 0 so repeated runs are byte-identical
    #[arg(long)]
    timings: bool,
    /// Output metrics JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GradcheckArgs {
    /// RNG seed
    #[arg(long)]
    seed: u64,
    /// Comma-separated layer widths, input first
    #[arg(long, default_value = "10,10,10,1", value_delimiter = ',')]
    shape: Vec<usize>,
    /// Number of random networks to check
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Metrics JSON files produced by `evaluate`, in row order
    #[arg(required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output report JSON path; the text table always prints to stdout
    #[arg(long)]
    out: PathBuf,
}

/// Dataset artifact: the split plus the resolved preprocess configuration.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    config: serde_json::Value,
    split: SplitDataset,
}

/// Model artifact: the trained network, its resolved training configuration,
/// and the invocation that produced it.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    config: ModelConfig,
    invocation: serde_json::Value,
    network: Network,
}

#[derive(Serialize, Deserialize)]
struct HistoryFile {
    config: ModelConfig,
    invocation: serde_json::Value,
    #[serde(flatten)]
    history: TrainingHistory,
}

/// Metrics artifact: one report row plus the resolved evaluate configuration.
#[derive(Serialize, Deserialize)]
struct MetricsFile {
    config: serde_json::Value,
    #[serde(flatten)]
    entry: ReportEntry,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = match &e {
                Error::Io(_) => ("io", 3),
                Error::Parse(_) => ("parse", 4),
                Error::Shape(_) => ("shape", 5),
                Error::Numeric(_) => ("numeric", 6),
                Error::Config(_) => ("config", 7),
                Error::Data(_) => ("data", 8),
            };
            eprintln!("error[{category}]: {e}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Sidecar path for artifacts that are not JSON themselves.
fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn channel_params(args: &SimulateArgs) -> Result<ChannelParams, Error> {
    let mut params = match args.preset {
        PresetArg::Los => ChannelParams::los(args.seed),
        PresetArg::Nlos => ChannelParams::nlos(args.seed),
    };
    if let Some(v) = args.tx_power {
        params.tx_power_dbm = v;
    }
    if let Some(v) = args.pl0 {
        params.pl0_dbm = v;
    }
    if let Some(v) = args.d0 {
        params.d0_m = v;
    }
    if let Some(v) = args.exponent {
        params.exponent = v;
    }
    if let Some(v) = args.sigma {
        params.shadow_sigma_db = v;
    }
    if let Some(v) = args.rho {
        params.shadow_rho = v;
    }
    params.validate()?;
    Ok(params)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let params = channel_params(&args)?;
    match args.scenario {
        ScenarioArg::Stationary => {
            let trace = simulate_stationary_trace(&params, args.distance, args.samples)?;
            write_csv_trace(&args.out, &trace)?;
        }
        ScenarioArg::Sweep => {
            let spec = SweepSpec {
                distances_m: args
                    .distances
                    .clone()
                    .unwrap_or_else(|| SweepSpec::default().distances_m),
                samples_per_location: args.samples_per_location,
            };
            let set = simulate_location_sweep(&params, &spec)?;
            write_csv_locations(&args.out, &set)?;
        }
    }
    write_json(
        &meta_path(&args.out),
        &serde_json::json!({ "command": "simulate", "args": args, "channel": params }),
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<(), Error> {
    let normalize = !args.no_normalize;
    let trace = match args.mode {
        InputMode::Trace => {
            let readings = args
                .inputs
                .iter()
                .map(|path| {
                    load_csv_trace(
                        path,
                        &args.rssi_column,
                        TraceMeta::new(
                            Scenario::Stationary,
                            Condition::Los,
                            path.display().to_string(),
                        ),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            if readings.len() == 1 {
                readings.into_iter().next().unwrap()
            } else {
                average_readings(&readings)?
            }
        }
        InputMode::Locations => {
            if args.inputs.len() != 1 {
                return Err(Error::Config(format!(
                    "locations mode takes exactly one input file, got {}",
                    args.inputs.len()
                )));
            }
            let set = load_csv_locations(&args.inputs[0], &args.rssi_column)?;
            average_locations(&set)?
        }
    };

    let split = match args.split {
        SplitMode::Fraction => {
            let ds = make_windows(&trace, args.window)?;
            temporal_split(&ds, args.train_fraction)?
        }
        SplitMode::Counts => {
            let n_train = args
                .train_pairs
                .ok_or_else(|| Error::Config("--split counts requires --train-pairs".into()))?;
            let ds = make_windows(&trace, args.window)?;
            temporal_split_at(&ds, n_train, args.test_pairs)?
        }
        SplitMode::Sweep => {
            if args.window != 2 {
                return Err(Error::Config(format!(
                    "the sweep split uses windows of 2, got {}",
                    args.window
                )));
            }
            // normalization handled uniformly below
            sweep_split(&trace, false)?
        }
    };
    let split = if normalize {
        split.with_normalizer()?
    } else {
        split
    };

    let file = DatasetFile {
        config: serde_json::json!({ "command": "preprocess", "args": args, "normalize": normalize }),
        split,
    };
    write_json(&args.out, &file)?;
    println!(
        "wrote {} ({} train / {} test pairs)",
        args.out.display(),
        file.split.train.len(),
        file.split.test.len()
    );
    Ok(())
}

/// Optional config-file counterpart of the train flags. Explicit CLI flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfigFile {
    variant: Option<VariantArg>,
    window: Option<usize>,
    hidden: Option<usize>,
    epochs: Option<usize>,
    eta: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    normalize: Option<bool>,
    #[serde(rename = "override")]
    allow_override: Option<bool>,
}

fn resolve_model_config(args: &TrainArgs) -> Result<ModelConfig, Error> {
    let file: TrainConfigFile = match &args.config {
        Some(path) => read_json(path)?,
        None => TrainConfigFile::default(),
    };

    let variant: Variant = args
        .variant
        .or(file.variant)
        .ok_or_else(|| Error::Config("a variant is required (--variant or config file)".into()))?
        .into();
    let seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| Error::Config("a seed is required (--seed or config file)".into()))?;

    let mut cfg = ModelConfig::for_variant(variant, seed);
    if let Some(v) = args.window.or(file.window) {
        cfg.window = v;
    }
    if let Some(v) = args.hidden.or(file.hidden) {
        cfg.hidden = v;
    }
    if let Some(v) = args.epochs.or(file.epochs) {
        cfg.epochs = v;
    }
    if let Some(v) = args.eta.or(file.eta) {
        cfg.hyper.eta = v;
    }
    if let Some(v) = args.beta1.or(file.beta1) {
        cfg.hyper.beta1 = v;
    }
    if let Some(v) = args.beta2.or(file.beta2) {
        cfg.hyper.beta2 = v;
    }
    if let Some(v) = args.epsilon.or(file.epsilon) {
        cfg.hyper.epsilon = v;
    }
    if args.no_normalize {
        cfg.normalize = false;
    } else if let Some(v) = file.normalize {
        cfg.normalize = args.normalize || v;
    }
    cfg.allow_override = args.allow_override || file.allow_override.unwrap_or(false);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = resolve_model_config(&args)?;
    let dataset: DatasetFile = read_json(&args.dataset)?;
    let (network, history) = train(&cfg, &dataset.split)?;

    let invocation = serde_json::json!({ "command": "train", "args": args });
    write_json(
        &args.out_model,
        &ModelFile {
            config: cfg.clone(),
            invocation: invocation.clone(),
            network,
        },
    )?;
    write_json(
        &args.out_history,
        &HistoryFile {
            config: cfg,
            invocation,
            history: history.clone(),
        },
    )?;
    let last = history.epoch_train_mse.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} epochs in {:.3}s; final train MSE {:.6} dBm^2",
        history.epoch_train_mse.len(),
        history.train_seconds,
        last
    );
    Ok(())
}

fn parse_baseline(spec: &str) -> Result<BaselineKind, Error> {
    if spec == "persistence" {
        return Ok(BaselineKind::Persistence);
    }
    if let Some(rest) = spec.strip_prefix("ma:") {
        let window = rest.parse().map_err(|_| {
            Error::Config(format!("bad moving-average window in baseline {spec:?}"))
        })?;
        return Ok(BaselineKind::MovingAverage(window));
    }
    if let Some(rest) = spec.strip_prefix("ar:") {
        let order = rest
            .parse()
            .map_err(|_| Error::Config(format!("bad autoregression order in baseline {spec:?}")))?;
        return Ok(BaselineKind::LeastSquaresAr(order));
    }
    Err(Error::Config(format!(
        "unknown baseline {spec:?}; use persistence, ma:<window>, or ar:<order>"
    )))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let dataset: DatasetFile = read_json(&args.dataset)?;

    let (mut metrics, label, param_count) = match (&args.model, &args.baseline) {
        (Some(model_path), None) => {
            let model: ModelFile = read_json(model_path)?;
            let metrics = evaluate(&model.network, &dataset.split)?;
            let label = args
                .label
                .clone()
                .unwrap_or_else(|| format!("estimator_{}", model.config.variant));
            (metrics, label, Some(model.network.param_count()))
        }
        (None, Some(spec)) => {
            let kind = parse_baseline(spec)?;
            let metrics = run_baseline(kind, &dataset.split)?;
            let label = args.label.clone().unwrap_or_else(|| kind.to_string());
            (metrics, label, None)
        }
        _ => {
            return Err(Error::Config(
                "evaluate needs exactly one of --model or --baseline".into(),
            ))
        }
    };

    if args.timings {
        if let Some(history_path) = &args.history {
            let history: HistoryFile = read_json(history_path)?;
            metrics.train_seconds = history.history.train_seconds;
        }
    } else {
        metrics.train_seconds = 0.0;
        metrics.test_seconds = 0.0;
    }

    let entry = ReportEntry::new(label, &metrics, param_count);
    write_json(
        &args.out,
        &MetricsFile {
            config: serde_json::json!({ "command": "evaluate", "args": args }),
            entry,
        },
    )?;
    println!(
        "test MSE {:.6} dBm^2, RMSE {:.6} dBm over {} pairs",
        metrics.mse, metrics.rmse, metrics.n_pairs
    );
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), Error> {
    if args.shape.len() < 2 {
        return Err(Error::Config(
            "--shape needs at least an input and an output width".into(),
        ));
    }
    let specs: Vec<LayerSpec> = args
        .shape
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let activation = if i + 2 == args.shape.len() {
                Activation::Identity
            } else {
                Activation::LeakyRelu
            };
            LayerSpec::new(pair[0], pair[1], activation)
        })
        .collect();

    let report = gradient_check(&specs, args.seed, args.trials, args.h, 1e-4)?;
    println!(
        "max relative gradient error {:.3e} over {} trials ({} parameters)",
        report.max_rel_err, report.trials, report.params_checked
    );
    if report.max_rel_err > 1e-5 {
        return Err(Error::Numeric(format!(
            "gradient check failed: max relative error {:.3e} exceeds 1e-5",
            report.max_rel_err
        )));
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    let mut entries = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let file: MetricsFile = read_json(path)?;
        entries.push(file.entry);
    }
    let report = compare_report(entries)?;
    std::fs::write(&args.out, report.to_json() + "\n")?;
    write_json(
        &meta_path(&args.out),
        &serde_json::json!({ "command": "report", "args": args }),
    )?;
    print!("{}", report.to_text_table());
    Ok(())
}
