use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use wnn_core::augment::{augmented_counts, AugmentLevel, AugmentedSet};
use wnn_core::dataset::{binarize, build_split, read_labeled_set, write_labeled_set, LabeledSet, SplitSpec};
use wnn_core::eval::{
    error_overlap, evaluate, evaluate_checkpointed, op_count, read_report, sweep_window_sizes, with_threads,
    write_text, CheckpointOutcome, ErrorTable, EvaluationReport,
};
use wnn_core::prune::{split_validation, Pruner};
use wnn_core::registry::{ClassifierRegistry, NnClassifier, TrainingContext};

use crate::config::{DataConfig, ModelConfig, RunConfig, Task};
use crate::render::{ascii, write_pgm};
use crate::{Cli, SetChoice};

pub fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::resolve(&cli)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    with_threads(config.threads, || execute(&config))?
}

fn data(config: &RunConfig) -> &DataConfig {
    config.data.as_ref().expect("resolved with data settings")
}

fn model(config: &RunConfig) -> &ModelConfig {
    config.model.as_ref().expect("resolved with model settings")
}

fn load_split(data: &DataConfig) -> Result<(LabeledSet, LabeledSet)> {
    let dataset = data.split.dataset;
    let train = dataset
        .load(&data.train_images, &data.train_labels)
        .with_context(|| format!("loading {}", data.train_images.display()))?;
    let test = dataset
        .load(&data.test_images, &data.test_labels)
        .with_context(|| format!("loading {}", data.test_images.display()))?;
    Ok(build_split(&data.split, train, test)?)
}

fn context(model: &ModelConfig, split: &SplitSpec, train: LabeledSet) -> Result<TrainingContext> {
    let config = model.classifier_config.clone();
    let mut ctx = match &model.augmented_files {
        Some((images, labels)) => {
            let mut set = read_labeled_set(images, labels).with_context(|| format!("loading {}", images.display()))?;
            if let Some(t) = config.binarize {
                set = set.map_images(|i| binarize(i, t))?;
            }
            TrainingContext::new(train, config)?.with_train(Arc::new(set))?
        }
        None => TrainingContext::with_level(
            train,
            Some(AugmentLevel::new(split.dataset, model.augment)),
            model.order,
            model.lazy,
            config,
        )?,
    };
    ctx.ext_order = model.ext_order;
    Ok(ctx)
}

fn binarized(set: LabeledSet, model: &ModelConfig) -> Result<LabeledSet> {
    Ok(match model.classifier_config.binarize {
        Some(t) => set.map_images(|i| binarize(i, t))?,
        None => set,
    })
}

fn column_label(name: &str, window: usize) -> String {
    match name {
        "nn" => "NN".to_string(),
        "wnn" => format!("WNN{window}"),
        "dwnn" => format!("DWNN{window}"),
        "hybrid" => format!("HYBRID{window}"),
        other => other.to_string(),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))?;
    Ok(())
}

fn emit_table(table: &ErrorTable, json: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    print!("{}", table.to_text());
    if let Some(path) = csv {
        write_text(path, &table.to_csv())?;
    }
    if let Some(path) = json {
        let reports: Vec<&EvaluationReport> = table.columns.iter().map(|(_, r)| r).collect();
        write_json(path, &reports)?;
    }
    Ok(())
}

fn execute(config: &RunConfig) -> Result<()> {
    match &config.task {
        Task::Prepare { out } => {
            let (train, test) = load_split(data(config))?;
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            write_labeled_set(
                &train,
                &out.join("train-images-idx3-ubyte"),
                &out.join("train-labels-idx1-ubyte"),
            )?;
            write_labeled_set(
                &test,
                &out.join("test-images-idx3-ubyte"),
                &out.join("test-labels-idx1-ubyte"),
            )?;
            #[derive(Serialize)]
            struct Summary<'a> {
                split: &'a SplitSpec,
                train_counts: Vec<usize>,
                test_counts: Vec<usize>,
            }
            let summary = Summary {
                split: &data(config).split,
                train_counts: train.class_sizes(),
                test_counts: test.class_sizes(),
            };
            write_json(&out.join("split.json"), &summary)?;
            println!("train {} images, test {} images", train.len(), test.len());
        }
        Task::Augment {
            dataset,
            level,
            order,
            count_only,
            base_counts,
            out_images,
            out_labels,
            manifest,
        } => {
            let level = AugmentLevel::new(*dataset, *level);
            if *count_only {
                let base = match base_counts {
                    Some(counts) => counts.clone(),
                    None => load_split(data(config))?.0.class_sizes(),
                };
                let counts = augmented_counts(&base, level);
                println!("digit,count");
                for (d, n) in counts.iter().enumerate() {
                    println!("{d},{n}");
                }
                println!("Total,{}", counts.iter().sum::<usize>());
                return Ok(());
            }
            let (train, _) = load_split(data(config))?;
            let set = AugmentedSet::new(Arc::new(train), level, *order)?;
            let (Some(images), Some(labels), Some(manifest)) = (out_images, out_labels, manifest) else {
                bail!("--out-images and --out-labels are required unless --count-only is given");
            };
            let written = set.materialize(images, labels, manifest)?;
            println!("wrote {} images ({})", written.total, written.level);
        }
        Task::Evaluate {
            json,
            csv,
            checkpoint,
            stop_after,
        } => {
            let model = model(config);
            let (train, test) = load_split(data(config))?;
            let test = binarized(test, model)?;
            let ctx = context(model, &data(config).split, train)?;
            let classifier = ClassifierRegistry::builtin().build(&model.classifier, &ctx)?;
            let start = Instant::now();
            let report = match checkpoint {
                Some(path) => match evaluate_checkpointed(&*classifier, &test, path, *stop_after)? {
                    CheckpointOutcome::Complete(report) => report,
                    CheckpointOutcome::Partial(done) => {
                        eprintln!(
                            "checkpoint {}: {done} of {} verdicts recorded",
                            path.display(),
                            test.len()
                        );
                        return Ok(());
                    }
                },
                None => evaluate(&*classifier, &test)?,
            };
            eprintln!(
                "{} errors on {} test images ({:.2}%) in {:.1}s",
                report.total_errors,
                report.test_count,
                100.0 * report.error_rate,
                start.elapsed().as_secs_f64()
            );
            let mut table = ErrorTable::default();
            table.push(
                column_label(&model.classifier, model.classifier_config.window_size),
                report,
            );
            print!("{}", table.to_text());
            if let Some(path) = csv {
                write_text(path, &table.to_csv())?;
            }
            if let Some(path) = json {
                write_text(path, &table.columns[0].1.to_json()?)?;
            }
        }
        Task::Sweep { sizes, nn, json, csv } => {
            let model = model(config);
            let (train, test) = load_split(data(config))?;
            let test = binarized(test, model)?;
            let ctx = context(model, &data(config).split, train)?;
            let mut table = ErrorTable::default();
            if *nn {
                let classifier = NnClassifier::new(ctx.train.clone(), ctx.config.clone())?;
                table.push("NN", evaluate(&classifier, &test)?);
            }
            let sweep = sweep_window_sizes(ctx.train.clone(), &test, sizes, &ctx.config)?;
            table.columns.extend(sweep.columns);
            emit_table(&table, json.as_deref(), csv.as_deref())?;
        }
        Task::Prune {
            steps,
            scoring,
            validation_per_digit,
            seed,
            trace,
            json,
            windows_out,
        } => {
            let model = model(config);
            let (train, test) = load_split(data(config))?;
            let test = binarized(test, model)?;
            let ctx = context(model, &data(config).split, train)?;
            let result = match validation_per_digit {
                Some(n) => {
                    let split = split_validation(&test, *n, *seed)?;
                    let pruner = Pruner::with_holdout(&*ctx.train, &split.validation, &split.holdout, &ctx.config)?;
                    let mut result = pruner.run(*steps, *scoring)?;
                    result.split = Some(split.info);
                    result
                }
                None => Pruner::new(&*ctx.train, &test, &ctx.config)?.run(*steps, *scoring)?,
            };
            let mut records = Vec::new();
            result.write_records(&mut records)?;
            write_text(trace, &String::from_utf8(records)?)?;
            if let Some(path) = json {
                write_json(path, &result)?;
            }
            if let Some(path) = windows_out {
                let lines: String = result.excluded().iter().map(|w| format!("{w}\n")).collect();
                write_text(path, &lines)?;
            }
            let last = result.steps.last().map_or(result.baseline_errors, |s| s.errors);
            println!(
                "baseline {} errors, {} after excluding {} windows",
                result.baseline_errors,
                last,
                result.steps.len()
            );
        }
        Task::Opcount { alg, per_class, window } => println!("{}", op_count(*alg, *per_class, *window)?),
        Task::Render {
            set,
            digit,
            index,
            out,
            orientation_pair,
        } => {
            let (train, test) = load_split(data(config))?;
            let source = match set {
                SetChoice::Train => &train,
                SetChoice::Test => &test,
            };
            let name = match set {
                SetChoice::Train => "train",
                SetChoice::Test => "test",
            };
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            for &i in index {
                let position = source
                    .class_ids(*digit)
                    .iter()
                    .position(|&id| id == i)
                    .ok_or_else(|| wnn_core::Error::Parameter(format!("{name} set has no image {digit}:{i}")))?;
                let image = &source.class(*digit)[position];
                let path = out.join(format!("{name}-{digit}-{i}.pgm"));
                write_pgm(&path, image)?;
                println!("{digit}:{i} -> {}", path.display());
                print!("{}", ascii(image));
                if *orientation_pair {
                    let stored = out.join(format!("{name}-{digit}-{i}-transposed.pgm"));
                    write_pgm(&stored, &image.transpose())?;
                    println!("{digit}:{i} transposed -> {}", stored.display());
                }
            }
        }
        Task::Overlap { a, b } => {
            let overlap = error_overlap(&read_report(a)?, &read_report(b)?)?;
            println!("common,union,fraction");
            println!("{},{},{:.4}", overlap.common, overlap.union, overlap.fraction);
        }
    }
    Ok(())
}
