use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaze2class::commands::{self, EvalSubset};
use gaze2class::config::PipelineConfig;
use gaze2class::{Error, Result};

/// Classify ASD vs TD gaze recordings from rendered gaze images.
#[derive(Debug, Parser)]
#[command(name = "gaze2class", version)]
struct Cli {
    /// Master seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for all outputs.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Print errors only.
    #[arg(long, short, global = true)]
    quiet: bool,

    /// Set any configuration key, e.g. `--set sigma=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort as gaze CSV.
    Generate(GenerateArgs),
    /// Render every recording of a gaze CSV into images.
    Render(RenderArgs),
    /// Transform every image of a rendered directory.
    Transform(TransformArgs),
    /// Train a classifier on an image directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on an image directory.
    Evaluate(EvaluateArgs),
    /// Run the full representation x transform comparison.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct CohortArgs {
    /// Recordings per class.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    per_class: Option<u64>,

    /// Assign each class's recordings to this many subjects.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    subjects_per_class: Option<u64>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    cohort: CohortArgs,

    /// Output CSV [default: <out-dir>/gaze.csv].
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rep {
    Heatmap,
    Scanpath,
    Fixationmap,
}

impl Rep {
    fn key(self) -> &'static str {
        match self {
            Rep::Heatmap => "heatmap",
            Rep::Scanpath => "scanpath",
            Rep::Fixationmap => "fixationmap",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Transform {
    Identity,
    Fft,
    Haar,
}

impl Transform {
    fn key(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Fft => "fft",
            Transform::Haar => "haar",
        }
    }
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Gaze CSV [default: `input_csv` from the configuration].
    #[arg(long, short, value_name = "FILE")]
    input: Option<PathBuf>,

    #[arg(long)]
    rep: Option<Rep>,

    /// Output image side in pixels.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Directory written by `render`.
    #[arg(long, short, value_name = "DIR")]
    input: PathBuf,

    #[arg(long)]
    transform: Option<Transform>,

    /// Haar decomposition levels.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Fraction of samples used for training.
    #[arg(long)]
    train_fraction: Option<f64>,

    /// Keep all samples of a subject on the same side of the split.
    #[arg(long)]
    group_by_subject: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Image directory written by `render` or `transform`.
    #[arg(long, short, value_name = "DIR")]
    input: PathBuf,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    batch_size: Option<usize>,

    /// SGD learning rate; 0 leaves the initial weights untouched.
    #[arg(long)]
    lr: Option<f64>,

    /// Model input side in pixels (multiple of 4).
    #[arg(long)]
    input_side: Option<usize>,

    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,

    /// Image directory written by `render` or `transform`.
    #[arg(long, short, value_name = "DIR")]
    input: PathBuf,

    /// Score every sample instead of the test split.
    #[arg(long)]
    all: bool,

    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Load recordings from a gaze CSV instead of generating them.
    #[arg(long, value_name = "FILE")]
    input_csv: Option<PathBuf>,

    /// Comma-separated cells such as `scanpath:haar,heatmap:fft`, or `all`.
    #[arg(long)]
    grid: Option<String>,

    #[command(flatten)]
    cohort: CohortArgs,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    #[command(flatten)]
    split: SplitArgs,
}

fn parse_key_value(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

/// Command-line settings as configuration overrides, in precedence order.
fn overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut out = cli.set.clone();
    let mut push = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            out.push((key.to_string(), v));
        }
    };
    push("seed", cli.seed.map(|s| s.to_string()));
    push("out_dir", cli.out_dir.as_ref().map(|p| p.display().to_string()));
    let cohort = |push: &mut dyn FnMut(&str, Option<String>), c: &CohortArgs| {
        push("per_class", c.per_class.map(|n| n.to_string()));
        push("subjects_per_class", c.subjects_per_class.map(|n| n.to_string()));
    };
    let split = |push: &mut dyn FnMut(&str, Option<String>), s: &SplitArgs| {
        push("train_fraction", s.train_fraction.map(|f| f.to_string()));
        push("group_by_subject", s.group_by_subject.then(|| "true".to_string()));
    };
    match &cli.command {
        Command::Generate(a) => cohort(&mut push, &a.cohort),
        Command::Render(a) => {
            push("input_csv", a.input.as_ref().map(|p| p.display().to_string()));
            push("representation", a.rep.map(|r| r.key().to_string()));
            push("render_size", a.size.map(|n| n.to_string()));
        }
        Command::Transform(a) => {
            push("transform", a.transform.map(|t| t.key().to_string()));
            push("haar_levels", a.levels.map(|n| n.to_string()));
        }
        Command::Train(a) => {
            push("epochs", a.epochs.map(|n| n.to_string()));
            push("batch_size", a.batch_size.map(|n| n.to_string()));
            push("learning_rate", a.lr.map(|f| f.to_string()));
            push("input_side", a.input_side.map(|n| n.to_string()));
            split(&mut push, &a.split);
        }
        Command::Evaluate(a) => split(&mut push, &a.split),
        Command::Pipeline(a) => {
            push("input_csv", a.input_csv.as_ref().map(|p| p.display().to_string()));
            push("grid", a.grid.clone());
            cohort(&mut push, &a.cohort);
            push("epochs", a.epochs.map(|n| n.to_string()));
            push("learning_rate", a.lr.map(|f| f.to_string()));
            split(&mut push, &a.split);
        }
    }
    out
}

fn run(cli: &Cli, log: &mut dyn Write) -> Result<()> {
    let cfg = PipelineConfig::resolve(cli.config.as_deref(), &overrides(cli))?;
    let out = cfg.out_dir.clone();
    match &cli.command {
        Command::Generate(a) => {
            let output = a.output.clone().unwrap_or_else(|| out.join("gaze.csv"));
            commands::cmd_generate(&cfg, &output, log)?;
        }
        Command::Render(_) => {
            let input = cfg
                .input_csv
                .clone()
                .ok_or_else(|| Error::Usage("render needs --input or an `input_csv` configuration key".into()))?;
            commands::cmd_render(&cfg, &input, cfg.render.representation, &out, log)?;
        }
        Command::Transform(a) => {
            commands::cmd_transform(&cfg, &a.input, cfg.transform, &out, log)?;
        }
        Command::Train(a) => {
            commands::cmd_train(&cfg, &a.input, &out, log)?;
        }
        Command::Evaluate(a) => {
            let subset = if a.all { EvalSubset::All } else { EvalSubset::Test };
            commands::cmd_evaluate(&cfg, &a.checkpoint, &a.input, subset, &out, log)?;
        }
        Command::Pipeline(_) => {
            commands::cmd_pipeline(&cfg, log)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let mut sink = io::sink();
    let log: &mut dyn Write = if cli.quiet { &mut sink } else { &mut stdout };
    match run(&cli, log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
