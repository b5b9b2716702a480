//! `wnn`: command-line driver for windowed nearest neighbour experiments.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use wnn_core::augment::{CompositionOrder, Level};
use wnn_core::dataset::{Dataset, IndexRange};
use wnn_core::eval::OpAlgorithm;
use wnn_core::prune::ScoringMode;

fn parse<T: FromStr<Err = wnn_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: wnn_core::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "wnn", version, about = "Windowed nearest neighbour digit classification")]
pub struct Cli {
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Print the resolved run configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the dataset and write the training and test sets as IDX files.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialise an augmented training set, or only count its images.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = parse::<Level>)]
        level: Level,
        #[arg(long, value_parser = parse::<CompositionOrder>, default_value = "shift-first")]
        order: CompositionOrder,
        /// Print per-digit counts without generating images.
        #[arg(long)]
        count_only: bool,
        /// Per-digit base counts to use instead of loading data (count-only).
        #[arg(long, value_delimiter = ',', requires = "count_only")]
        base_counts: Vec<usize>,
        #[arg(long, required_unless_present = "count_only")]
        out_images: Option<PathBuf>,
        #[arg(long, required_unless_present = "count_only")]
        out_labels: Option<PathBuf>,
        /// JSON manifest; defaults to the image path with `.json` appended.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Classify the test set and report per-digit errors.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Resumable record of per-image verdicts.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Stop once this many verdicts are recorded (needs --checkpoint).
        #[arg(long, requires = "checkpoint")]
        stop_after: Option<usize>,
    },
    /// Evaluate WNN for several window sizes.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Odd window sizes, comma separated.
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Prepend a full-image nearest neighbour column.
        #[arg(long)]
        nn: bool,
    },
    /// Greedily exclude windows and record the error curve.
    Prune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of windows to exclude.
        #[arg(long)]
        steps: usize,
        #[arg(long, value_parser = parse::<ScoringMode>, default_value = "cumulative")]
        scoring: ScoringMode,
        /// Split the test set into this many validation images per digit
        /// and a holdout set; without it the whole test set is scored.
        #[arg(long)]
        validation_per_digit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Line records `step,window,errors,holdout_errors`.
        #[arg(long)]
        trace: PathBuf,
        /// Full trace as JSON, including the split.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Final excluded windows, one per line (usable with --exclude-file).
        #[arg(long)]
        windows_out: Option<PathBuf>,
    },
    /// Operation count of one naive classification.
    Opcount {
        #[arg(long, value_parser = parse::<OpAlgorithm>)]
        alg: OpAlgorithm,
        /// Training images per class.
        #[arg(short = 'M', long = "per-class")]
        m: u64,
        /// Window size (ignored for nn).
        #[arg(short = 'S', long = "window", default_value_t = 11)]
        s: u64,
    },
    /// Write selected images as PGM files with an ASCII preview.
    Render {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "test")]
        set: SetChoice,
        #[arg(long)]
        digit: usize,
        /// 1-based index within the digit, as used in reports.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        index: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the image as stored on disk, before orientation correction.
        #[arg(long)]
        orientation_pair: bool,
    },
    /// Common and combined misclassifications of two JSON reports.
    Overlap { a: PathBuf, b: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetChoice {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitChoice {
    Standard,
    Balanced,
    Custom,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_parser = parse::<Dataset>, default_value = "mnist")]
    pub dataset: Dataset,
    /// Directory holding the IDX files under their distribution names.
    #[arg(long, env = "WNN_DATA_DIR", default_value = ".")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Split scheme; implied `custom` when ranges are given.
    #[arg(long, value_enum)]
    pub split: Option<SplitChoice>,
    /// Per-digit 1-based training range, e.g. `1:4000`.
    #[arg(long, value_parser = parse::<IndexRange>)]
    pub train_range: Option<IndexRange>,
    /// Per-digit 1-based test range, e.g. `4001:5000` or `6001:end`.
    #[arg(long, value_parser = parse::<IndexRange>)]
    pub test_range: Option<IndexRange>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "wnn")]
    pub classifier: String,
    /// Window size.
    #[arg(short = 'S', long = "window", default_value_t = wnn_core::wnn::DEFAULT_WINDOW)]
    pub window: usize,
    /// Distance exponent.
    #[arg(short = 'p', long = "exponent", default_value_t = 2.0)]
    pub p: f64,
    /// Binarize images at this threshold (128 if given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "128")]
    pub binarize: Option<u8>,
    /// File of 1-based window indices to leave out.
    #[arg(long)]
    pub exclude_file: Option<PathBuf>,
    /// Augmentation level of the search set.
    #[arg(long, value_parser = parse::<Level>, default_value = "set0")]
    pub augment: Level,
    #[arg(long, value_parser = parse::<CompositionOrder>, default_value = "shift-first")]
    pub order: CompositionOrder,
    /// Composition order of DWNN image extensions.
    #[arg(long, value_parser = parse::<CompositionOrder>, default_value = "warp-first")]
    pub ext_order: CompositionOrder,
    /// Generate augmented images on every pass instead of holding them in memory.
    #[arg(long)]
    pub lazy: bool,
    /// Read the search set from a materialised IDX pair instead of augmenting.
    #[arg(long, requires = "augmented_labels")]
    pub augmented_images: Option<PathBuf>,
    #[arg(long, requires = "augmented_images")]
    pub augmented_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// JSON report (one per column for sweeps, as an array).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Error table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
