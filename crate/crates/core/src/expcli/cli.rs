use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::preset::{presets, Ablation, ExperimentPreset, MetricPlan, ShiftTarget, SweepAxis, DEFAULT_SEEDS};
use super::render::render;
use super::runner::{run_experiment, run_preset, RunOptions};
use super::table::SweepTable;
use crate::error::{Error, Result};
use crate::metrics::{
    codiagonal_energy, cosine_similarity_matrix, default_drc_rates, detect_bimodality, distribution_stats,
    dropout_robustness_curve, mc_dropout_stats, sparsity, McDropoutConfig, MetricPayload, MetricReport,
};
use crate::model::{DropoutPlacement, DropoutSpec, InitSpec};
use crate::trainer::{train_with, BatchMode, CheckpointSchedule, Data, RunArtifacts, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "groklab", version, about = "Grokking experiments on modular addition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration.
    Train(TrainArgs),
    /// Compute a metric on a checkpoint of a trained run.
    Metric {
        #[command(subcommand)]
        metric: MetricCommand,
    },
    /// Train one run per (value, seed) along an axis and tabulate grokking times.
    Sweep(SweepArgs),
    /// Run a built-in experiment preset.
    Preset(PresetArgs),
    /// Regenerate tables, plots and the check summary from a results directory.
    Render {
        dir: PathBuf,
    },
}

/// Flags that override fields of the configuration.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON document with the TrainConfig schema; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for the split, initialization, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training budget in epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Xavier scale for every group.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// AdamW learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Decoupled weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Mini-batch size; 0 trains on the full training set per step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of pairs used for training.
    #[arg(long)]
    pub split: Option<f64>,
    /// The modulus P.
    #[arg(long)]
    pub modulus: Option<usize>,
    /// Embedding width.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub relu_embedding: bool,
    #[arg(long)]
    pub freeze_embedding: bool,
    #[arg(long)]
    pub freeze_non_embedding: bool,
    /// Hidden-layer dropout rate during training updates.
    #[arg(long)]
    pub train_dropout: Option<f64>,
    /// Store a checkpoint every K epochs instead of the default schedule.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

impl ConfigArgs {
    pub fn build(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => TrainConfig::from_json(&read(path)?)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.alpha {
            c.init = InitSpec::xavier_scaled(v);
        }
        if let Some(v) = self.lr {
            c.optimizer.lr = v;
        }
        if let Some(v) = self.weight_decay {
            c.optimizer.weight_decay = v;
        }
        if let Some(v) = self.batch_size {
            c.batch = if v == 0 { BatchMode::Full } else { BatchMode::Mini { size: v } };
        }
        if let Some(v) = self.split {
            c.split_fraction = v;
        }
        if let Some(v) = self.modulus {
            c.dims.modulus = v;
        }
        if let Some(v) = self.embed_dim {
            c.dims.embed_dim = v;
        }
        if let Some(v) = self.hidden {
            c.dims.hidden = v;
        }
        c.variant.relu_after_embedding |= self.relu_embedding;
        c.variant.freeze_embedding |= self.freeze_embedding;
        c.variant.freeze_non_embedding |= self.freeze_non_embedding;
        if let Some(rate) = self.train_dropout {
            c.train_dropout = Some(DropoutSpec::hidden(rate));
        }
        if let Some(k) = self.checkpoint_every {
            c.checkpoints = CheckpointSchedule::every(k);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Run directory for config, logs and checkpoints.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a log line every N epochs (0 disables).
    #[arg(long, default_value_t = 100)]
    pub print_every: usize,
}

#[derive(Debug, Args)]
pub struct MetricTarget {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Use the stored checkpoint nearest to this epoch; default is the final parameters.
    #[arg(long)]
    pub epoch: Option<usize>,
    /// Seed for dropout masks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON record here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HistGroup {
    Embedding,
    W1,
    W2,
}

#[derive(Debug, Subcommand)]
pub enum MetricCommand {
    /// Test accuracy spread over repeated dropout passes.
    McDropout {
        #[command(flatten)]
        target: MetricTarget,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[arg(long, default_value_t = 100)]
        passes: usize,
        /// Also mask the embedding output.
        #[arg(long)]
        embedding: bool,
    },
    /// Mean test accuracy against dropout rate.
    Drc {
        #[command(flatten)]
        target: MetricTarget,
        /// Comma-separated rates; default 0.0, 0.1, ..., 0.9.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        passes: usize,
    },
    /// Embedding cosine-similarity matrix and codiagonal energy.
    Cosine {
        #[command(flatten)]
        target: MetricTarget,
    },
    /// Histogram, moments and bimodality of one parameter group.
    Hist {
        #[command(flatten)]
        target: MetricTarget,
        #[arg(long, value_enum, default_value = "embedding")]
        group: HistGroup,
    },
    /// Dead and inactive hidden units over the full dataset.
    Sparsity {
        #[command(flatten)]
        target: MetricTarget,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisName {
    Alpha,
    WeightDecay,
    InitInterval,
    LayerShift,
    Ablation,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: AxisName,
    /// Comma-separated values: numbers, `lo:hi` intervals, `none|embedding|weights`,
    /// or ablation names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Seeds per value (default 0,1,2).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Results directory; one subdirectory per cell and seed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Preset name; omit with --list.
    pub name: Option<String>,
    /// List available presets.
    #[arg(long)]
    pub list: bool,
    /// First of three consecutive seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the training budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Results directory [default: results/<name>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Render and evaluate the preset's acceptance checks; exit 3 on failure.
    #[arg(long)]
    pub check: bool,
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn bad(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

pub fn parse_axis(axis: AxisName, values: &[String]) -> Result<SweepAxis> {
    let nums = || -> Result<Vec<f64>> {
        values
            .iter()
            .map(|v| v.trim().parse().map_err(|_| bad(format!("`{v}` is not a number"))))
            .collect()
    };
    Ok(match axis {
        AxisName::Alpha => SweepAxis::Alpha(nums()?),
        AxisName::WeightDecay => SweepAxis::WeightDecay(nums()?),
        AxisName::InitInterval => SweepAxis::InitInterval(
            values
                .iter()
                .map(|v| {
                    let (lo, hi) = v.split_once(':').ok_or_else(|| bad(format!("interval `{v}` is not lo:hi")))?;
                    let p = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad interval `{v}`")));
                    Ok((p(lo)?, p(hi)?))
                })
                .collect::<Result<_>>()?,
        ),
        AxisName::LayerShift => SweepAxis::LayerShift(
            values
                .iter()
                .map(|v| match v.trim() {
                    "none" | "nowhere" => Ok(ShiftTarget::Nowhere),
                    "embedding" | "embeddings" => Ok(ShiftTarget::Embedding),
                    "weights" => Ok(ShiftTarget::Weights),
                    other => Err(bad(format!("unknown shift target `{other}`"))),
                })
                .collect::<Result<_>>()?,
        ),
        AxisName::Ablation => SweepAxis::Ablation(
            values
                .iter()
                .map(|v| match v.trim() {
                    "baseline" => Ok(Ablation::Baseline),
                    "frozen-embedding" => Ok(Ablation::FrozenEmbedding),
                    "relu-embedding" => Ok(Ablation::ReluEmbedding),
                    "constant-embedding" => Ok(Ablation::ConstantEmbedding),
                    "constant-weights" => Ok(Ablation::ConstantWeights),
                    other => Err(bad(format!("unknown ablation `{other}`"))),
                })
                .collect::<Result<_>>()?,
        ),
    })
}

/// Maps a library error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } | Error::NonFiniteResult(_) | Error::PoisonedGradient { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn load_target(t: &MetricTarget) -> Result<(RunArtifacts, usize, crate::model::ModelParams)> {
    let run = RunArtifacts::load(&t.run)?;
    let last = run.log.last().map_or(run.config.epochs, |r| r.epoch);
    match t.epoch {
        None => Ok((run.clone(), last, run.final_params)),
        Some(e) => {
            let (epoch, p) = run
                .nearest_checkpoint(e)
                .map(|(ep, p)| (ep, p.clone()))
                .ok_or_else(|| Error::MissingFile(t.run.join("checkpoints")))?;
            Ok((run, epoch, p))
        }
    }
}

fn metric(cmd: &MetricCommand) -> Result<()> {
    let target = match cmd {
        MetricCommand::McDropout { target, .. }
        | MetricCommand::Drc { target, .. }
        | MetricCommand::Cosine { target }
        | MetricCommand::Hist { target, .. }
        | MetricCommand::Sparsity { target } => target,
    };
    let (run, epoch, params) = load_target(target)?;
    let config = &run.config;
    let data = Data::for_config(config)?;
    let v = config.variant;
    let payload = match cmd {
        MetricCommand::McDropout {
            rate, passes, embedding, ..
        } => {
            let cfg = McDropoutConfig {
                rate: *rate,
                passes: *passes,
                seed: target.seed,
                placement: if *embedding {
                    DropoutPlacement::HiddenAndEmbedding
                } else {
                    DropoutPlacement::Hidden
                },
            };
            MetricPayload::McDropout {
                rate: *rate,
                passes: *passes,
                stats: mc_dropout_stats(&params, &v, &data.test_pairs, &data.test_labels, &cfg)?,
            }
        }
        MetricCommand::Drc { rates, passes, .. } => {
            let rates = if rates.is_empty() { default_drc_rates() } else { rates.clone() };
            let mut curve =
                dropout_robustness_curve(&params, &v, &data.test_pairs, &data.test_labels, &rates, *passes, target.seed)?;
            curve.epoch = Some(epoch);
            MetricPayload::Drc { curve }
        }
        MetricCommand::Cosine { .. } => {
            let c = cosine_similarity_matrix(&params.embedding)?;
            MetricPayload::Cosine {
                energy: codiagonal_energy(&c)?,
                matrix: (0..c.rows()).map(|r| c.row(r).to_vec()).collect(),
            }
        }
        MetricCommand::Hist { group, .. } => {
            let (name, m) = match group {
                HistGroup::Embedding => ("embedding", &params.embedding),
                HistGroup::W1 => ("w1", &params.w1),
                HistGroup::W2 => ("w2", &params.w2),
            };
            let stats = distribution_stats(m.data())?;
            MetricPayload::Histogram {
                group: name.into(),
                peaks: detect_bimodality(&stats.histogram),
                stats,
            }
        }
        MetricCommand::Sparsity { .. } => MetricPayload::Sparsity {
            report: sparsity(&params, &v, &data.all_pairs().0)?,
        },
    };
    let report = MetricReport {
        config_hash: config.hash(),
        seed: target.seed,
        epoch: Some(epoch),
        anchor: None,
        payload,
    };
    match &target.out {
        Some(path) => report.write(path)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn print_table(t: &SweepTable) -> Result<()> {
    t.write_csv(std::io::stdout().lock())
}

fn run_command(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(args) => {
            let config = args.config.build()?;
            let every = args.print_every;
            let run = train_with(&config, args.out.as_deref(), |r| {
                if every > 0 && r.epoch % every == 0 {
                    println!(
                        "epoch {:>6}  loss {:.5}  train {:.4}  test {:.4}  inactive {:.4}",
                        r.epoch, r.train_loss, r.train_acc, r.test_acc, r.inactive_frac
                    );
                }
            })?;
            let t = crate::metrics::grokking_times(
                &run.log,
                crate::metrics::DEFAULT_TRAIN_THRESHOLD,
                crate::metrics::DEFAULT_TEST_THRESHOLD,
            );
            println!(
                "t_train {}  t_test {}  delay {}",
                t.t_train.map_or("no-grok".into(), |v| v.to_string()),
                t.t_test.map_or("no-grok".into(), |v| v.to_string()),
                t.delay.map_or("no-grok".into(), |v| v.to_string())
            );
            Ok(EXIT_OK)
        }
        Command::Metric { metric: m } => metric(&m).map(|_| EXIT_OK),
        Command::Sweep(args) => {
            let axis = parse_axis(args.axis, &args.values)?;
            let preset = ExperimentPreset {
                name: format!("sweep-{}", axis.name()),
                description: "command-line sweep".into(),
                base: args.config.build()?,
                plan: MetricPlan {
                    curves: true,
                    requests: Vec::new(),
                },
                sweep: Some(axis),
                seeds: if args.seeds.is_empty() { DEFAULT_SEEDS.to_vec() } else { args.seeds },
            };
            let outcome = run_experiment(&preset, args.out.as_deref(), &RunOptions::default())?;
            print_table(&outcome.table)?;
            Ok(EXIT_OK)
        }
        Command::Preset(args) => {
            if args.list {
                for p in presets() {
                    println!("{:<18} {}", p.name, p.description);
                }
                return Ok(EXIT_OK);
            }
            let name = args
                .name
                .ok_or_else(|| bad("a preset name is required (see --list)".into()))?;
            let mut options = args.seed.map(RunOptions::from_master_seed).unwrap_or_default();
            options.epochs = args.epochs;
            let out = args.out.unwrap_or_else(|| PathBuf::from("results").join(&name));
            let outcome = run_preset(&name, Some(&out), &options)?;
            print_table(&outcome.table)?;
            let report = render(&out)?;
            println!("wrote {} tables and {} plots under {}", report.tables.len(), report.plots.len(), out.display());
            for c in &report.checks {
                println!("{c}");
            }
            if args.check && !report.all_passed() {
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(EXIT_OK)
        }
        Command::Render { dir } => {
            let report = render(&dir)?;
            for p in report.tables.iter().chain(&report.plots) {
                println!("{}", p.display());
            }
            for c in &report.checks {
                println!("{c}");
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_command(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["groklab", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["groklab", "preset", "nope"]), EXIT_USAGE);
        assert_eq!(main_with_args(["groklab", "render", "/definitely/not/here"]), EXIT_USAGE);
        assert_eq!(main_with_args(["groklab", "--help"]), EXIT_OK);
    }

    #[test]
    fn axis_parsing() {
        let v = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(parse_axis(AxisName::Alpha, &v(&["1", "3"])).unwrap(), SweepAxis::Alpha(vec![1.0, 3.0]));
        assert_eq!(
            parse_axis(AxisName::InitInterval, &v(&["-0.2:0.2", "0.4:0.8"])).unwrap(),
            SweepAxis::InitInterval(vec![(-0.2, 0.2), (0.4, 0.8)])
        );
        assert!(parse_axis(AxisName::LayerShift, &v(&["sideways"])).is_err());
    }

    #[test]
    fn flags_override_config() {
        let args = ConfigArgs {
            epochs: Some(7),
            alpha: Some(3.0),
            batch_size: Some(0),
            freeze_embedding: true,
            ..Default::default()
        };
        let c = args.build().unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.init, InitSpec::xavier_scaled(3.0));
        assert_eq!(c.batch, BatchMode::Full);
        assert!(c.variant.freeze_embedding);
    }

    #[test]
    fn numerical_errors_exit_two() {
        let e = Error::NonFinite {
            epoch: 3,
            quantity: "train loss".into(),
        };
        assert_eq!(exit_code(&e), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::EmptyBatch), EXIT_USAGE);
    }
}
