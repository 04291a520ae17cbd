mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isoc_vgae::config::RunConfig;
use isoc_vgae::encoder::LayerKind;
use isoc_vgae::eval::{Ratios, Variant};
use isoc_vgae::pipeline::{FeatureMode, SweepTarget, Task};
use isoc_vgae::{Error, ErrorKind};

/// Exit statuses besides 0 for success.
const EXIT_INVALID: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "isoc-vgae", version, about = "Unsupervised graph embeddings with an inverse-GNN decoder")]
struct Cli {
    /// Repeat for more log output (info, debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train unsupervised; writes a checkpoint and a per-epoch loss log.
    Train(TrainArgs),
    /// Score a checkpoint's embeddings on the configured downstream task.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate each loss variant, or sweep one loss weight.
    Ablate(AblateArgs),
    /// Write one embedding layer of a checkpoint as text.
    ExportEmbeddings(ExportArgs),
}

/// Flags that override the configuration file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda_nei: Option<f64>,
    #[arg(long)]
    lambda_deg: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Encoder output widths, e.g. `512,512`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    decoder_hidden: Option<usize>,
    /// Encoder layer type: gcn or gin.
    #[arg(long, value_parser = parse_layer)]
    layer_kind: Option<LayerKind>,
    #[arg(long, value_parser = parse_features)]
    features: Option<FeatureMode>,
    #[arg(long)]
    degree_cap: Option<usize>,
    /// Train, validation and test fractions, e.g. `0.85,0.05,0.1`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    split: Option<Vec<f64>>,
    #[arg(long)]
    head_layers: Option<usize>,
    #[arg(long)]
    head_hidden: Option<usize>,
    #[arg(long)]
    head_epochs: Option<usize>,
    #[arg(long)]
    head_learning_rate: Option<f64>,
    /// Number of evaluation seeds, counting up from the training seed.
    #[arg(long)]
    seeds: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(task => task);
        set!(seed => train.seed);
        set!(max_epochs => train.max_epochs);
        set!(learning_rate => train.learning_rate);
        set!(lambda_nei => train.lambda_nei);
        set!(lambda_deg => train.lambda_deg);
        set!(patience => train.patience);
        set!(tolerance => train.tolerance);
        set!(dims => model.dims);
        set!(decoder_hidden => model.decoder_hidden);
        set!(features => model.features);
        set!(degree_cap => model.degree_cap);
        set!(head_layers => head.layers);
        set!(head_hidden => head.hidden);
        set!(head_epochs => head.max_epochs);
        set!(head_learning_rate => head.learning_rate);
        set!(seeds => eval.seeds);
        if let Some(l) = self.layer_kind {
            c.model.layer = Some(l);
        }
        if let Some(s) = &self.split {
            c.split = Some(Ratios {
                train: s[0],
                val: s[1],
                test: s[2],
            });
        }
    }
}

fn parse_layer(s: &str) -> Result<LayerKind, String> {
    s.parse::<LayerKind>().map_err(|e| e.to_string())
}

fn parse_features(s: &str) -> Result<FeatureMode, String> {
    match s {
        "dataset" => Ok(FeatureMode::Dataset),
        "identity" => Ok(FeatureMode::Identity),
        other => Err(format!("unknown feature mode `{other}` (expected dataset or identity)")),
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

impl ConfigArgs {
    /// Loads, overrides and validates; nothing heavy runs before this.
    fn resolve(&self) -> isoc_vgae::Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        self.overrides.apply(&mut c);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: ConfigArgs,
    /// Output directory for `checkpoint/`, `loss.tsv` and `config.toml`.
    #[arg(short, long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Also write the metric table here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Train the per-seed heads on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 12)]
    nodes: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Width of the input features and of every encoder layer.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    decoder_hidden: usize,
    #[arg(long, default_value = "gcn", value_parser = parse_layer)]
    layer_kind: LayerKind,
    #[arg(long, default_value_t = 0.1)]
    lambda_nei: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_deg: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Test hook: perturb the analytic gradient of this parameter.
    #[arg(long, hide = true)]
    corrupt: Option<String>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: ConfigArgs,
    /// Loss variants: full, no_nei, no_deg, no_deg_no_nei.
    #[arg(long, value_delimiter = ',', default_value = "full,no_nei,no_deg,no_deg_no_nei")]
    variants: Vec<Variant>,
    /// Sweep one loss weight instead of comparing variants.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<SweepTarget>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1")]
    values: Vec<f64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Run seeds on separate threads.
    #[arg(long)]
    parallel: bool,
}

fn parse_sweep(s: &str) -> Result<SweepTarget, String> {
    match s {
        "lambda_nei" => Ok(SweepTarget::LambdaNei),
        "lambda_deg" => Ok(SweepTarget::LambdaDeg),
        other => Err(format!("unknown sweep `{other}` (expected lambda_nei or lambda_deg)")),
    }
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    run: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Embedding layer, 0 for the input features; defaults to the last.
    #[arg(long)]
    layer: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
        ErrorKind::Invalid => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::ExportEmbeddings(a) => commands::export(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
