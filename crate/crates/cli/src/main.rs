//! textsentry command-line interface.
//!
//! Subcommands: synth-dataset, train, attack, calibrate, detect, evaluate,
//! transfer-evaluate. Flags override values from an optional `--config` TOML
//! file; every artifact embeds a format version and the resolved config.
//! Errors go to stderr as a single JSON object with a nonzero exit code.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use textsentry::scoring::MetricKind;

#[derive(Parser)]
#[command(name = "textsentry", version, about = "Adversarial text detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every experiment-flavored command.
#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// TOML file with default option values (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for all randomness in this run.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-text fan-out.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct DetectorOpts {
    /// Detection statistic.
    #[arg(long)]
    metric: Option<MetricKind>,
    /// Words to score per text: `all` or a count.
    #[arg(long)]
    sample_size: Option<String>,
    /// Decision threshold; alternative to --calibration.
    #[arg(long)]
    threshold: Option<f64>,
    /// Calibration report supplying the threshold.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ClassifierOpts {
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Remote classifier base URL (POST {url}/classify).
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote request timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Remote retry count after the first failed attempt.
    #[arg(long)]
    retries: Option<u32>,
}

#[derive(Args, Debug, Clone)]
struct AttackOpts {
    /// Attack kind: `word` or `char`.
    #[arg(long)]
    attack: Option<String>,
    /// Attack goal: `flip` or `target-score`.
    #[arg(long)]
    goal: Option<String>,
    /// Target score t for --goal target-score (0 < t < 0.5).
    #[arg(long)]
    target_score: Option<f64>,
    /// Maximum fraction of words the attack may perturb.
    #[arg(long)]
    budget: Option<f64>,
    /// Make the attack detector-aware (requires a threshold source).
    #[arg(long)]
    adaptive: bool,
    /// Candidate cap per word.
    #[arg(long)]
    max_candidates: Option<usize>,
    /// Synonym lexicon TSV; defaults to the bundled one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a balanced synthetic sentiment corpus (JSONL).
    SynthDataset {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of texts to generate.
        #[arg(long)]
        size: usize,
        /// Vocabulary profile: `standard` or `tiny`.
        #[arg(long, default_value = "standard")]
        profile: String,
        /// Output JSONL path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the linear classifier on a labeled dataset.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Dataset path (.jsonl or .csv).
        #[arg(long)]
        dataset: PathBuf,
        /// L2 regularization strength.
        #[arg(long)]
        l2: Option<f64>,
        /// Gradient descent learning rate.
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Comma-separated label names, e.g. `negative,positive`.
        #[arg(long)]
        labels: Option<String>,
        /// Output model JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack every correctly-classified text in a dataset.
    Attack {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        classifier: ClassifierOpts,
        #[command(flatten)]
        attack: AttackOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// Labeled dataset of texts to attack.
        #[arg(long)]
        dataset: PathBuf,
        /// Output JSONL path (header line + one result per line).
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the F1-maximizing threshold from attack results.
    Calibrate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        classifier: ClassifierOpts,
        /// Attack results JSONL produced by `attack`.
        #[arg(long)]
        attacks: PathBuf,
        /// Detection statistic.
        #[arg(long)]
        metric: Option<MetricKind>,
        /// Words to score per text: `all` or a count.
        #[arg(long)]
        sample_size: Option<String>,
        /// Sweep a fixed grid with this step instead of midpoints.
        #[arg(long)]
        grid_step: Option<f64>,
        /// Output calibration JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score texts and print verdicts as JSON lines on stdout.
    Detect {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        classifier: ClassifierOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// A single text to score.
        #[arg(long)]
        text: Option<String>,
        /// JSONL file of {"text": ...} objects to score.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Cap on concurrent deletion queries per text.
        #[arg(long)]
        max_in_flight: Option<usize>,
    },
    /// Full experiment: attack, detect, and report ASR/AUC/PW metrics.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        classifier: ClassifierOpts,
        #[command(flatten)]
        attack: AttackOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// Labeled eval dataset.
        #[arg(long)]
        dataset: PathBuf,
        /// Output report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a flat CSV next to the JSON report.
        #[arg(long)]
        csv: bool,
    },
    /// Experiment with attacks generated on a surrogate model.
    TransferEvaluate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        attack: AttackOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// Target model file.
        #[arg(long)]
        model: PathBuf,
        /// Surrogate model file used to generate the attacks.
        #[arg(long)]
        surrogate: PathBuf,
        /// Labeled eval dataset.
        #[arg(long)]
        dataset: PathBuf,
        /// Output report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a flat CSV next to the JSON report.
        #[arg(long)]
        csv: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::SynthDataset {
            common,
            size,
            profile,
            out,
        } => commands::synth_dataset(&common, size, &profile, &out),
        Command::Train {
            common,
            dataset,
            l2,
            learning_rate,
            epochs,
            labels,
            out,
        } => commands::train(&common, &dataset, l2, learning_rate, epochs, labels, &out),
        Command::Attack {
            common,
            classifier,
            attack,
            detector,
            dataset,
            out,
        } => commands::attack(&common, &classifier, &attack, &detector, &dataset, &out),
        Command::Calibrate {
            common,
            classifier,
            attacks,
            metric,
            sample_size,
            grid_step,
            out,
        } => commands::calibrate(
            &common,
            &classifier,
            &attacks,
            metric,
            sample_size.as_deref(),
            grid_step,
            &out,
        ),
        Command::Detect {
            common,
            classifier,
            detector,
            text,
            input,
            max_in_flight,
        } => commands::detect(
            &common,
            &classifier,
            &detector,
            text.as_deref(),
            input.as_deref(),
            max_in_flight,
        ),
        Command::Evaluate {
            common,
            classifier,
            attack,
            detector,
            dataset,
            out,
            csv,
        } => commands::evaluate(&common, &classifier, &attack, &detector, &dataset, &out, csv),
        Command::TransferEvaluate {
            common,
            attack,
            detector,
            model,
            surrogate,
            dataset,
            out,
            csv,
        } => commands::transfer_evaluate(
            &common, &attack, &detector, &model, &surrogate, &dataset, &out, csv,
        ),
    };
    if let Err(error) = outcome {
        let payload = serde_json::json!({
            "error": format!("{error:#}"),
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
