use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use wnn_core::augment::{CompositionOrder, Level};
use wnn_core::dataset::{Dataset, SplitScheme, SplitSpec, NUM_DIGITS};
use wnn_core::eval::{read_window_list, OpAlgorithm};
use wnn_core::kernel::Exponent;
use wnn_core::prune::ScoringMode;
use wnn_core::registry::ClassifierRegistry;
use wnn_core::wnn::ClassifierConfig;

use crate::{Cli, Command, DataArgs, ModelArgs, OutputArgs, SetChoice, SplitChoice};

/// Fully resolved and validated settings of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub task: Task,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataConfig {
    pub split: SplitSpec,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelConfig {
    pub classifier: String,
    pub classifier_config: ClassifierConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_file: Option<PathBuf>,
    pub augment: Level,
    pub order: CompositionOrder,
    pub ext_order: CompositionOrder,
    pub lazy: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmented_files: Option<(PathBuf, PathBuf)>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Task {
    Prepare {
        out: PathBuf,
    },
    Augment {
        dataset: Dataset,
        level: Level,
        order: CompositionOrder,
        count_only: bool,
        base_counts: Option<Vec<usize>>,
        out_images: Option<PathBuf>,
        out_labels: Option<PathBuf>,
        manifest: Option<PathBuf>,
    },
    Evaluate {
        json: Option<PathBuf>,
        csv: Option<PathBuf>,
        checkpoint: Option<PathBuf>,
        stop_after: Option<usize>,
    },
    Sweep {
        sizes: Vec<usize>,
        nn: bool,
        json: Option<PathBuf>,
        csv: Option<PathBuf>,
    },
    Prune {
        steps: usize,
        scoring: ScoringMode,
        validation_per_digit: Option<usize>,
        seed: u64,
        trace: PathBuf,
        json: Option<PathBuf>,
        windows_out: Option<PathBuf>,
    },
    Opcount {
        alg: OpAlgorithm,
        per_class: u64,
        window: u64,
    },
    Render {
        set: SetChoice,
        digit: usize,
        index: Vec<usize>,
        out: PathBuf,
        orientation_pair: bool,
    },
    Overlap {
        a: PathBuf,
        b: PathBuf,
    },
}

fn resolve_data(args: &DataArgs) -> Result<DataConfig> {
    let scheme = match (args.split, args.train_range, args.test_range) {
        (None | Some(SplitChoice::Custom), Some(train), Some(test)) => SplitScheme::Custom { train, test },
        (Some(SplitChoice::Custom), _, _) | (None, Some(_), None) | (None, None, Some(_)) => {
            bail!("a custom split needs both --train-range and --test-range")
        }
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            bail!("--train-range/--test-range only apply to --split custom")
        }
        (Some(SplitChoice::Standard), None, None) => SplitScheme::Standard,
        (Some(SplitChoice::Balanced) | None, None, None) => SplitScheme::Balanced,
    };
    let [ti, tl, si, sl] = args.dataset.default_files(&args.data_dir);
    Ok(DataConfig {
        split: SplitSpec {
            dataset: args.dataset,
            scheme,
        },
        train_images: args.train_images.clone().unwrap_or(ti),
        train_labels: args.train_labels.clone().unwrap_or(tl),
        test_images: args.test_images.clone().unwrap_or(si),
        test_labels: args.test_labels.clone().unwrap_or(sl),
    })
}

fn resolve_model(args: &ModelArgs) -> Result<ModelConfig> {
    let registry = ClassifierRegistry::builtin();
    if !registry.contains(&args.classifier) {
        bail!(
            "unknown classifier `{}` (available: {})",
            args.classifier,
            registry.names().join(", ")
        );
    }
    let excluded = match &args.exclude_file {
        Some(path) => read_window_list(path).with_context(|| format!("reading {}", path.display()))?,
        None => Default::default(),
    };
    let config = ClassifierConfig {
        window_size: args.window,
        exponent: Exponent::new(args.p)?,
        excluded,
        binarize: args.binarize,
    };
    config.validate()?;
    if let Some(&w) = config.excluded.iter().find(|&&w| w == 0 || w > 28 * 28) {
        bail!("excluded window {w} outside 1..=784");
    }
    if matches!(args.classifier.as_str(), "dwnn" | "hybrid") && !config.excluded.is_empty() {
        bail!("{} does not support excluded windows", args.classifier);
    }
    Ok(ModelConfig {
        classifier: args.classifier.clone(),
        classifier_config: config,
        exclude_file: args.exclude_file.clone(),
        augment: args.augment,
        order: args.order,
        ext_order: args.ext_order,
        lazy: args.lazy,
        augmented_files: args.augmented_images.clone().zip(args.augmented_labels.clone()),
    })
}

fn outputs(args: &OutputArgs) -> (Option<PathBuf>, Option<PathBuf>) {
    (args.json.clone(), args.csv.clone())
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<RunConfig> {
        let mut data = None;
        let mut model = None;
        let task = match &cli.command {
            Command::Prepare { data: d, out } => {
                data = Some(resolve_data(d)?);
                Task::Prepare { out: out.clone() }
            }
            Command::Augment {
                data: d,
                level,
                order,
                count_only,
                base_counts,
                out_images,
                out_labels,
                manifest,
            } => {
                if base_counts.is_empty() {
                    data = Some(resolve_data(d)?);
                }
                let manifest = manifest.clone().or_else(|| {
                    out_images.as_ref().map(|p| {
                        let mut s = p.clone().into_os_string();
                        s.push(".json");
                        PathBuf::from(s)
                    })
                });
                Task::Augment {
                    dataset: d.dataset,
                    level: *level,
                    order: *order,
                    count_only: *count_only,
                    base_counts: (!base_counts.is_empty()).then(|| base_counts.clone()),
                    out_images: out_images.clone(),
                    out_labels: out_labels.clone(),
                    manifest: manifest.filter(|_| !count_only),
                }
            }
            Command::Evaluate {
                data: d,
                model: m,
                output,
                checkpoint,
                stop_after,
            } => {
                data = Some(resolve_data(d)?);
                model = Some(resolve_model(m)?);
                let (json, csv) = outputs(output);
                Task::Evaluate {
                    json,
                    csv,
                    checkpoint: checkpoint.clone(),
                    stop_after: *stop_after,
                }
            }
            Command::Sweep {
                data: d,
                model: m,
                output,
                sizes,
                nn,
            } => {
                data = Some(resolve_data(d)?);
                let resolved = resolve_model(m)?;
                for &size in sizes {
                    ClassifierConfig {
                        window_size: size,
                        ..resolved.classifier_config.clone()
                    }
                    .validate()?;
                }
                model = Some(resolved);
                let (json, csv) = outputs(output);
                Task::Sweep {
                    sizes: sizes.clone(),
                    nn: *nn,
                    json,
                    csv,
                }
            }
            Command::Prune {
                data: d,
                model: m,
                steps,
                scoring,
                validation_per_digit,
                seed,
                trace,
                json,
                windows_out,
            } => {
                data = Some(resolve_data(d)?);
                let resolved = resolve_model(m)?;
                if resolved.classifier != "wnn" {
                    bail!("pruning applies to the wnn classifier, not `{}`", resolved.classifier);
                }
                let available = 28 * 28 - resolved.classifier_config.excluded.len();
                if *steps >= available {
                    bail!("cannot exclude {steps} windows: {available} remain and one must stay");
                }
                model = Some(resolved);
                Task::Prune {
                    steps: *steps,
                    scoring: *scoring,
                    validation_per_digit: *validation_per_digit,
                    seed: *seed,
                    trace: trace.clone(),
                    json: json.clone(),
                    windows_out: windows_out.clone(),
                }
            }
            Command::Opcount { alg, m, s } => Task::Opcount {
                alg: *alg,
                per_class: *m,
                window: *s,
            },
            Command::Render {
                data: d,
                set,
                digit,
                index,
                out,
                orientation_pair,
            } => {
                if *digit >= NUM_DIGITS {
                    bail!(wnn_core::Error::Parameter(format!("digit {digit} outside 0..=9")));
                }
                if index.is_empty() || index.contains(&0) {
                    bail!(wnn_core::Error::Parameter("image indices are 1-based".into()));
                }
                data = Some(resolve_data(d)?);
                Task::Render {
                    set: *set,
                    digit: *digit,
                    index: index.clone(),
                    out: out.clone(),
                    orientation_pair: *orientation_pair,
                }
            }
            Command::Overlap { a, b } => Task::Overlap {
                a: a.clone(),
                b: b.clone(),
            },
        };
        Ok(RunConfig {
            threads: cli.threads,
            data,
            model,
            task,
        })
    }
}
