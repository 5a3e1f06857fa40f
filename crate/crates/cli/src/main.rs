//! fxcast command line: synthetic data, ingestion, model fitting, metric
//! sweeps, trading simulation, and significance testing.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use fxcast::eval::{SplitSpec, SweepConfig};
use fxcast::ingest::PlausibilityBand;
use fxcast::models::ModelOrder;
use fxcast::synth::SynthSpec;
use fxcast::trading::TradingConfig;

use crate::commands::{FitCmd, IngestCmd, SignifCmd, SweepGridCmd, SynthCmd, TradeCmd};
use crate::config::{
    parse_nk_list, parse_range, validation, CliError, ConfigFile, KindArg, RepArg,
};

const DEFAULT_START: &str = "2010-10-25T00:00:00Z";

#[derive(Parser)]
#[command(
    name = "fxcast",
    version,
    about = "Intraday exchange-rate forecasting and trading-simulation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hourly bar file with a tunable exogenous channel
    Synth(SynthArgs),
    /// Parse message and close files into a filled hourly bar file
    Ingest(IngestArgs),
    /// Fit one model on the training split and save it as JSON
    Fit(FitArgs),
    /// Fit and score a grid of model orders, writing matrix CSVs and JSON
    Sweep(SweepArgs),
    /// Run the moving-average trading rule for one model or a whole grid
    Trade(TradeArgs),
    /// Bootstrap and permutation significance of a model's directional skill
    Signif(SignifArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON config file mirroring the flags by name
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of hourly bars to generate
    #[arg(long)]
    hours: Option<usize>,
    /// Scale of the stable step innovations
    #[arg(long)]
    step_sigma: Option<f64>,
    /// Exogenous predictiveness in [0, 1)
    #[arg(long)]
    kappa: Option<f64>,
    /// Std of the Gaussian noise on the preview channel
    #[arg(long)]
    exo_noise: Option<f64>,
    /// Per-hour drift
    #[arg(long)]
    trend: Option<f64>,
    /// Stability index of the innovations (2 = Gaussian)
    #[arg(long)]
    tail_alpha: Option<f64>,
    /// First bar hour (RFC 3339, on the hour)
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output bar file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Message file: timestamp,author,price_token,volume
    #[arg(long)]
    messages: Option<PathBuf>,
    /// Close file: hour,close
    #[arg(long)]
    closes: Option<PathBuf>,
    /// Lower edge of the price plausibility band
    #[arg(long)]
    band_low: Option<f64>,
    /// Upper edge of the price plausibility band
    #[arg(long)]
    band_high: Option<f64>,
    /// Days with fewer populated hours than this stay out of the fill
    /// distribution estimate
    #[arg(long)]
    sparse_threshold: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    /// Model family: ar, arx, ann or rw
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Autoregressive order
    #[arg(long)]
    na: Option<usize>,
    /// Exogenous order
    #[arg(long)]
    nb: Option<usize>,
    /// Forecast horizon (pure delay)
    #[arg(long)]
    nk: Option<usize>,
    /// Data representation: level or returns
    #[arg(long, value_enum)]
    representation: Option<RepArg>,
    /// Training fraction of the chronological split
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden width of the two ANN layers
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// n_a range as A:B
    #[arg(long)]
    na_range: Option<String>,
    /// n_b range as A:B (ignored for ar)
    #[arg(long)]
    nb_range: Option<String>,
    /// Horizons as a comma list, e.g. 1,2,4
    #[arg(long)]
    nk: Option<String>,
    #[arg(long, value_enum)]
    representation: Option<RepArg>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Seeds averaged per ANN cell
    #[arg(long)]
    ann_seeds: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TradeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    /// Fitted model file (ledger mode)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Model family (grid mode)
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    na_range: Option<String>,
    #[arg(long)]
    nb_range: Option<String>,
    /// Horizon for grid mode
    #[arg(long)]
    nk: Option<String>,
    #[arg(long, value_enum)]
    representation: Option<RepArg>,
    #[arg(long)]
    split: Option<f64>,
    /// Moving-average order
    #[arg(long)]
    m: Option<usize>,
    /// Evaluate the moving average at t itself (reads y(t) early)
    #[arg(long)]
    literal_ma: bool,
    /// Resolve prediction == moving average to +1
    #[arg(long)]
    tie_long: bool,
    /// Compound returns instead of summing
    #[arg(long)]
    compound: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    ann_seeds: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ledger output (ledger mode)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid output (grid mode)
    #[arg(long)]
    grid_out: Option<PathBuf>,
}

#[derive(Args)]
struct SignifArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    split: Option<f64>,
    /// Number of resamples
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| validation(format!("--{flag} is required")))
}

fn parse_start(text: &str) -> Result<DateTime<Utc>, CliError> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| validation(format!("bad --start {text:?}: {e}")))
}

fn split_spec(flag: Option<f64>, file: &ConfigFile) -> SplitSpec {
    flag.or(file.split)
        .map_or_else(SplitSpec::default, SplitSpec::new)
}

fn sweep_config(
    epochs: Option<usize>,
    lr: Option<f64>,
    ann_seeds: Option<usize>,
    hidden: Option<usize>,
    seed: Option<u64>,
    file: &ConfigFile,
) -> SweepConfig {
    let defaults = SweepConfig::default();
    SweepConfig {
        epochs: epochs.or(file.epochs).unwrap_or(defaults.epochs),
        learning_rate: lr.or(file.lr).unwrap_or(defaults.learning_rate),
        ann_seeds: ann_seeds.or(file.ann_seeds).unwrap_or(defaults.ann_seeds),
        hidden_width: hidden.or(file.hidden).unwrap_or(defaults.hidden_width),
        base_seed: seed.or(file.seed).unwrap_or(0),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let defaults = SynthSpec::default();
            let spec = SynthSpec {
                n_hours: required(args.hours.or(file.hours), "hours")?,
                step_sigma: args
                    .step_sigma
                    .or(file.step_sigma)
                    .unwrap_or(defaults.step_sigma),
                coupling: args.kappa.or(file.kappa).unwrap_or(defaults.coupling),
                exo_noise: args
                    .exo_noise
                    .or(file.exo_noise)
                    .unwrap_or(defaults.exo_noise),
                trend: args.trend.or(file.trend).unwrap_or(defaults.trend),
                tail_alpha: args
                    .tail_alpha
                    .or(file.tail_alpha)
                    .unwrap_or(defaults.tail_alpha),
                seed: args.seed.or(file.seed).unwrap_or(0),
            };
            let start = parse_start(
                &args
                    .start
                    .or(file.start)
                    .unwrap_or_else(|| DEFAULT_START.into()),
            )?;
            let out = required(args.out.or(file.out), "out")?;
            commands::run_synth(&SynthCmd { spec, start, out })
        }
        Command::Ingest(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let band = PlausibilityBand::new(
                args.band_low.or(file.band_low).unwrap_or(1.0),
                args.band_high.or(file.band_high).unwrap_or(1.6),
            )
            .map_err(|e| validation(e.to_string()))?;
            commands::run_ingest(&IngestCmd {
                messages: required(args.messages.or(file.messages), "messages")?,
                closes: required(args.closes.or(file.closes), "closes")?,
                band,
                sparse_threshold: args.sparse_threshold.or(file.sparse_threshold).unwrap_or(4),
                seed: args.seed.or(file.seed).unwrap_or(0),
                out: required(args.out.or(file.out), "out")?,
            })
        }
        Command::Fit(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let split = split_spec(args.split, &file);
            let cfg = sweep_config(args.epochs, args.lr, None, args.hidden, args.seed, &file);
            let kind = required(args.kind.or(file.kind), "kind")?;
            let n_a = args.na.or(file.na).unwrap_or(1);
            let n_b = match kind {
                KindArg::Arx | KindArg::Ann => args.nb.or(file.nb).unwrap_or(1),
                KindArg::Ar | KindArg::Rw => 0,
            };
            let nk_from_file = match file.nk.as_deref() {
                Some(text) => Some(
                    text.parse::<usize>()
                        .map_err(|e| validation(format!("config nk {text:?}: {e}")))?,
                ),
                None => None,
            };
            let n_k = args.nk.or(nk_from_file).unwrap_or(1);
            let order = ModelOrder::new(n_a, n_b, n_k).map_err(|e| validation(e.to_string()))?;
            if matches!(kind, KindArg::Arx) && n_b == 0 {
                return Err(validation("arx needs --nb >= 1"));
            }
            commands::run_fit(&FitCmd {
                bars: required(args.bars.or(file.bars), "bars")?,
                kind,
                order,
                representation: args
                    .representation
                    .or(file.representation)
                    .unwrap_or(RepArg::Level),
                split,
                epochs: cfg.epochs,
                learning_rate: cfg.learning_rate,
                hidden: cfg.hidden_width,
                seed: cfg.base_seed,
                out: required(args.out.or(file.out), "out")?,
            })
        }
        Command::Sweep(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let split = split_spec(args.split, &file);
            let config = sweep_config(
                args.epochs,
                args.lr,
                args.ann_seeds,
                args.hidden,
                args.seed,
                &file,
            );
            let na_range = parse_range(
                &args
                    .na_range
                    .or(file.na_range)
                    .unwrap_or_else(|| "1:10".into()),
            )?;
            let nb_range = parse_range(
                &args
                    .nb_range
                    .or(file.nb_range)
                    .unwrap_or_else(|| "1:10".into()),
            )?;
            let horizons = parse_nk_list(&args.nk.or(file.nk).unwrap_or_else(|| "1".into()))?;
            commands::run_sweep(&SweepGridCmd {
                bars: required(args.bars.or(file.bars), "bars")?,
                kind: required(args.kind.or(file.kind), "kind")?,
                na_range,
                nb_range,
                horizons,
                representation: args
                    .representation
                    .or(file.representation)
                    .unwrap_or(RepArg::Level),
                split,
                config,
                out_dir: required(args.out_dir.or(file.out_dir), "out-dir")?,
            })
        }
        Command::Trade(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let split = split_spec(args.split, &file);
            let cfg = sweep_config(
                args.epochs,
                args.lr,
                args.ann_seeds,
                args.hidden,
                args.seed,
                &file,
            );
            let na_range = parse_range(
                &args
                    .na_range
                    .or(file.na_range)
                    .unwrap_or_else(|| "1:10".into()),
            )?;
            let nb_range = parse_range(
                &args
                    .nb_range
                    .or(file.nb_range)
                    .unwrap_or_else(|| "1:10".into()),
            )?;
            let horizons = parse_nk_list(&args.nk.or(file.nk).unwrap_or_else(|| "1".into()))?;
            if horizons.len() != 1 {
                return Err(validation("trade takes a single --nk horizon"));
            }
            let trading = TradingConfig {
                m: args.m.or(file.m).unwrap_or(4),
                n_k: horizons[0],
                literal_ma: args.literal_ma || file.literal_ma.unwrap_or(false),
                tie_long: args.tie_long || file.tie_long.unwrap_or(false),
                compound: args.compound || file.compound.unwrap_or(false),
            };
            if trading.m < 1 {
                return Err(validation("--m must be >= 1"));
            }
            commands::run_trade(&TradeCmd {
                bars: required(args.bars.or(file.bars), "bars")?,
                model: args.model.or(file.model),
                kind: args.kind.or(file.kind),
                na_range,
                nb_range,
                n_k: horizons[0],
                representation: args
                    .representation
                    .or(file.representation)
                    .unwrap_or(RepArg::Level),
                split,
                trading,
                sweep_config: cfg,
                out: args.out.or(file.out),
                grid_out: args.grid_out.or(file.grid_out),
            })
        }
        Command::Signif(args) => {
            let file = ConfigFile::load(args.config.as_deref())?;
            let split = split_spec(args.split, &file);
            let resamples = args
                .boot
                .or(file.boot)
                .unwrap_or(fxcast::stats::DEFAULT_RESAMPLES);
            commands::run_signif(&SignifCmd {
                bars: required(args.bars.or(file.bars), "bars")?,
                model: required(args.model.or(file.model), "model")?,
                split,
                resamples,
                seed: args.seed.or(file.seed).unwrap_or(0),
                out: required(args.out.or(file.out), "out")?,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
