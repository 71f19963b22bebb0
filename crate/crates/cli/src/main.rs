use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod batch;
mod labels;
mod manifest;
mod phantom;
mod report;
mod shape;

/// Landmark-driven refinement of fused subcortical label maps.
#[derive(Parser, Debug)]
#[command(name = "hoaseg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Merge a 26-label map into the 12 fused labels.
    Fuse {
        input: PathBuf,
        output: PathBuf,
    },
    /// Reconstruct 26 labels from a fused map and its landmarks.
    Refine {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Compare a predicted 26-label map with its reference.
    Evaluate {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        /// Report path; the extension is replaced per format.
        #[arg(long, short)]
        output: PathBuf,
        /// Write only this format instead of both.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, default_value = "subject")]
        subject: String,
    },
    /// Fuse, refine and score a reference map against itself.
    Roundtrip {
        input: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        /// Minimum mean Dice for success.
        #[arg(long, default_value_t = 0.999)]
        threshold: f64,
        /// Also write the metric report here.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Paired signed-rank tests with FDR control between two metric tables.
    Stats {
        /// Metric CSV of method A (baseline).
        a: PathBuf,
        /// Metric CSV of method B.
        b: PathBuf,
        #[arg(long, short, default_value_t = 0.05)]
        q: f64,
        #[arg(long, value_enum, default_value_t = AlternativeArg::TwoSided)]
        alternative: AlternativeArg,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Generate a synthetic rule-consistent label map with landmarks.
    Phantom(phantom::PhantomArgs),
    /// Landmark shape model tools.
    Shape {
        #[command(subcommand)]
        command: shape::ShapeCommand,
    },
    /// Refine (and optionally evaluate) every subject of a cohort table.
    Batch(batch::BatchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RuleArgs {
    /// Rule configuration (TOML).
    #[arg(long, env = "HOA_REFINE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Let each coronal slice shift its dividing line to follow the previous one.
    #[arg(long)]
    pub slice_adjust: bool,
    /// Skip rules whose landmarks are missing.
    #[arg(long)]
    pub partial_rules: bool,
}

impl RuleArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> anyhow::Result<hoaseg::refine::RefinementConfig> {
        let mut cfg = match &self.config {
            Some(path) => hoaseg::refine::RefinementConfig::load(path)?,
            None => hoaseg::refine::RefinementConfig::default(),
        };
        cfg.slice_adjust |= self.slice_adjust;
        cfg.partial_rules |= self.partial_rules;
        Ok(cfg)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum AlternativeArg {
    TwoSided,
    Greater,
    Less,
}

/// Failure with an explicit exit status.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub fn validation(message: impl Into<String>) -> anyhow::Error {
        Exit {
            code: 2,
            message: message.into(),
        }
        .into()
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<hoaseg::Error>() {
            return match e.kind() {
                hoaseg::ErrorKind::Io => 1,
                hoaseg::ErrorKind::Validation => 2,
                hoaseg::ErrorKind::Geometry => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fuse { input, output } => labels::fuse(&input, &output),
        Command::Refine {
            input,
            output,
            landmarks,
            rules,
        } => labels::refine(&input, &landmarks, &output, &rules),
        Command::Evaluate {
            pred,
            gt,
            landmarks,
            output,
            format,
            subject,
        } => report::evaluate(&pred, &gt, &landmarks, &output, format, &subject),
        Command::Roundtrip {
            input,
            landmarks,
            threshold,
            output,
            rules,
        } => labels::roundtrip(&input, &landmarks, threshold, output.as_deref(), &rules),
        Command::Stats {
            a,
            b,
            q,
            alternative,
            output,
            format,
        } => report::stats(&a, &b, q, alternative, &output, format),
        Command::Phantom(args) => phantom::run(&args),
        Command::Shape { command } => shape::run(command),
        Command::Batch(args) => batch::run(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
