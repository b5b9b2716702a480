//! Batch evaluation, error tables, error overlap and operation counts.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageId, LabeledSet, MNIST_SIDE};
use crate::error::{Error, Result};
use crate::registry::{Classifier, WnnClassifier};
use crate::training::ClassSource;
use crate::wnn::ClassifierConfig;

/// A misclassified test image and the digit it was given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misclassified {
    pub id: ImageId,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifier: String,
    pub config: ClassifierConfig,
    pub per_digit_errors: Vec<usize>,
    pub per_digit_tests: Vec<usize>,
    pub total_errors: usize,
    pub test_count: usize,
    pub error_rate: f64,
    /// FNV-1a digest of the test image ids, in evaluation order.
    pub test_digest: String,
    pub misclassified: Vec<Misclassified>,
    /// Not serialized, so reports of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_clock: Option<Duration>,
}

impl EvaluationReport {
    /// Tallies `(id, predicted)` verdicts; ids carry the true digit.
    pub fn from_verdicts(
        classifier: &str,
        config: &ClassifierConfig,
        num_classes: usize,
        verdicts: &[(ImageId, usize)],
    ) -> Self {
        let mut per_digit_errors = vec![0; num_classes];
        let mut per_digit_tests = vec![0; num_classes];
        let mut misclassified = Vec::new();
        for &(id, predicted) in verdicts {
            per_digit_tests[id.digit] += 1;
            if predicted != id.digit {
                per_digit_errors[id.digit] += 1;
                misclassified.push(Misclassified { id, predicted });
            }
        }
        let total_errors = misclassified.len();
        let test_count = verdicts.len();
        EvaluationReport {
            classifier: classifier.to_string(),
            config: config.clone(),
            per_digit_errors,
            per_digit_tests,
            total_errors,
            test_count,
            error_rate: if test_count == 0 {
                0.0
            } else {
                total_errors as f64 / test_count as f64
            },
            test_digest: digest(verdicts.iter().map(|v| v.0)),
            misclassified,
            wall_clock: None,
        }
    }

    pub fn misclassified_ids(&self) -> BTreeSet<ImageId> {
        self.misclassified.iter().map(|m| m.id).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn digest(ids: impl Iterator<Item = ImageId>) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for id in ids {
        for byte in format!("{id};").bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{hash:016x}")
}

/// Runs `f` on a pool of `threads` workers, or on the global pool for 0.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::parameter(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn predict_all(classifier: &dyn Classifier, test: &[crate::dataset::Sample<'_>]) -> Result<Vec<(ImageId, usize)>> {
    test.par_iter()
        .map(|s| Ok((s.id, classifier.predict(s.image)?.digit)))
        .collect()
}

/// Classifies every test image and tallies errors per true digit.
pub fn evaluate(classifier: &dyn Classifier, test: &LabeledSet) -> Result<EvaluationReport> {
    let start = Instant::now();
    let samples: Vec<_> = test.iter().collect();
    let verdicts = predict_all(classifier, &samples)?;
    let mut report =
        EvaluationReport::from_verdicts(classifier.name(), classifier.config(), test.num_classes(), &verdicts);
    report.wall_clock = Some(start.elapsed());
    Ok(report)
}

const CHECKPOINT_MAGIC: &str = "# wnn-checkpoint v1";

fn checkpoint_header(classifier: &dyn Classifier, test: &LabeledSet) -> Result<String> {
    let ids: Vec<ImageId> = test.iter().map(|s| s.id).collect();
    Ok(format!(
        "{CHECKPOINT_MAGIC} {} {} {} {}",
        classifier.name(),
        serde_json::to_string(classifier.config())?,
        ids.len(),
        digest(ids.into_iter())
    ))
}

/// Progress of a checkpointed evaluation.
#[derive(Debug)]
pub enum CheckpointOutcome {
    Complete(EvaluationReport),
    /// Stopped early with this many verdicts recorded.
    Partial(usize),
}

fn read_checkpoint(path: &Path, header: &str, expected: &[ImageId]) -> Result<Vec<(ImageId, usize)>> {
    let bad = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut verdicts = Vec::new();
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(first) if first.trim_end() == header => {}
        Some(_) => {
            return Err(bad(
                "was written for a different classifier, configuration or test set".into()
            ))
        }
        None => return Ok(verdicts),
    }
    let mut valid_len = header.len() + 1;
    for line in lines {
        if !line.ends_with('\n') {
            // Torn final write; it is redone.
            break;
        }
        let (id, predicted) = line
            .trim_end()
            .split_once(',')
            .ok_or_else(|| bad(format!("malformed record `{}`", line.trim_end())))?;
        let id: ImageId = id.parse().map_err(|e: Error| bad(e.to_string()))?;
        let predicted: usize = predicted
            .parse()
            .map_err(|_| bad(format!("malformed prediction in `{}`", line.trim_end())))?;
        if expected.get(verdicts.len()) != Some(&id) {
            return Err(bad(format!("record {id} out of order")));
        }
        verdicts.push((id, predicted));
        valid_len += line.len();
    }
    if valid_len < text.len() {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(valid_len as u64).map_err(|e| Error::io(path, e))?;
    }
    Ok(verdicts)
}

/// [`evaluate`] that appends each verdict to `path` as `digit:index,predicted`
/// and resumes from whatever the file already holds. With `stop_after`, at
/// most that many verdicts are on record when it returns.
pub fn evaluate_checkpointed(
    classifier: &dyn Classifier,
    test: &LabeledSet,
    path: &Path,
    stop_after: Option<usize>,
) -> Result<CheckpointOutcome> {
    let header = checkpoint_header(classifier, test)?;
    let samples: Vec<_> = test.iter().collect();
    let ids: Vec<ImageId> = samples.iter().map(|s| s.id).collect();
    let mut verdicts = if path.exists() {
        read_checkpoint(path, &header, &ids)?
    } else {
        Vec::new()
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    if verdicts.is_empty() && file.metadata().map_err(|e| Error::io(path, e))?.len() == 0 {
        writeln!(file, "{header}").map_err(|e| Error::io(path, e))?;
    }
    let limit = stop_after.unwrap_or(samples.len()).min(samples.len());
    let chunk = 64 * rayon::current_num_threads();
    while verdicts.len() < limit {
        let end = (verdicts.len() + chunk).min(limit);
        let fresh = predict_all(classifier, &samples[verdicts.len()..end])?;
        let mut lines = String::new();
        for (id, predicted) in &fresh {
            lines.push_str(&format!("{id},{predicted}\n"));
        }
        file.write_all(lines.as_bytes()).map_err(|e| Error::io(path, e))?;
        file.flush().map_err(|e| Error::io(path, e))?;
        verdicts.extend(fresh);
    }
    if verdicts.len() < samples.len() {
        return Ok(CheckpointOutcome::Partial(verdicts.len()));
    }
    Ok(CheckpointOutcome::Complete(EvaluationReport::from_verdicts(
        classifier.name(),
        classifier.config(),
        test.num_classes(),
        &verdicts,
    )))
}

/// Reports laid out as columns, one row per digit plus a total row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub columns: Vec<(String, EvaluationReport)>,
}

impl ErrorTable {
    pub fn push(&mut self, label: impl Into<String>, report: EvaluationReport) {
        self.columns.push((label.into(), report));
    }

    pub fn totals(&self) -> Vec<usize> {
        self.columns.iter().map(|(_, r)| r.total_errors).collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let digits = self
            .columns
            .iter()
            .map(|(_, r)| r.per_digit_errors.len())
            .max()
            .unwrap_or(0);
        let mut rows = vec![std::iter::once("digit".to_string())
            .chain(self.columns.iter().map(|(l, _)| l.clone()))
            .collect::<Vec<_>>()];
        for d in 0..digits {
            rows.push(
                std::iter::once(d.to_string())
                    .chain(
                        self.columns
                            .iter()
                            .map(|(_, r)| r.per_digit_errors.get(d).map(usize::to_string).unwrap_or_default()),
                    )
                    .collect(),
            );
        }
        rows.push(
            std::iter::once("Total".to_string())
                .chain(self.totals().iter().map(usize::to_string))
                .collect(),
        );
        rows
    }

    pub fn to_csv(&self) -> String {
        self.rows().iter().map(|r| r.join(",") + "\n").collect()
    }

    /// Right-aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        rows.iter()
            .map(|r| {
                let cells: Vec<String> = r.iter().zip(&widths).map(|(v, &w)| format!("{v:>w$}")).collect();
                cells.join("  ") + "\n"
            })
            .collect()
    }
}

/// WNN evaluated once per window size; columns are labelled `WNN<size>`.
pub fn sweep_window_sizes(
    train: Arc<dyn ClassSource>,
    test: &LabeledSet,
    sizes: &[usize],
    base: &ClassifierConfig,
) -> Result<ErrorTable> {
    let mut table = ErrorTable::default();
    for &size in sizes {
        let config = ClassifierConfig {
            window_size: size,
            ..base.clone()
        };
        let classifier = WnnClassifier::new(train.clone(), config)?;
        table.push(format!("WNN{size}"), evaluate(&classifier, test)?);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub common: usize,
    pub union: usize,
    pub fraction: f64,
}

/// Intersection and union of the misclassified sets of two reports on the same test set.
pub fn error_overlap(a: &EvaluationReport, b: &EvaluationReport) -> Result<Overlap> {
    if a.test_digest != b.test_digest || a.per_digit_tests != b.per_digit_tests {
        return Err(Error::parameter("reports were produced on different test sets"));
    }
    let (x, y) = (a.misclassified_ids(), b.misclassified_ids());
    let common = x.intersection(&y).count();
    let union = x.union(&y).count();
    Ok(Overlap {
        common,
        union,
        fraction: if union == 0 { 1.0 } else { common as f64 / union as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpAlgorithm {
    Nn,
    Wnn,
}

impl std::str::FromStr for OpAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(OpAlgorithm::Nn),
            "wnn" => Ok(OpAlgorithm::Wnn),
            other => Err(Error::parameter(format!(
                "unknown algorithm `{other}` (expected nn or wnn)"
            ))),
        }
    }
}

/// Operation count of one naive classification of a 28x28 image against 10
/// classes of `m` images each. `window_size` is ignored for NN.
pub fn op_count(algorithm: OpAlgorithm, m: u64, window_size: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::parameter("images per class must be at least 1"));
    }
    let pixels = (MNIST_SIDE * MNIST_SIDE) as u64;
    let per_image = match algorithm {
        OpAlgorithm::Nn => pixels * 3 + 1,
        OpAlgorithm::Wnn => {
            if window_size.is_multiple_of(2) {
                return Err(Error::parameter(format!("window size must be odd, got {window_size}")));
            }
            window_size
                .checked_mul(window_size)
                .and_then(|s2| s2.checked_mul(3))
                .and_then(|v| (v + 1).checked_mul(pixels))
                .and_then(|v| v.checked_add(1))
                .ok_or_else(|| Error::parameter("operation count overflows"))?
        }
    };
    10u64
        .checked_mul(m)
        .and_then(|v| v.checked_mul(per_image))
        .ok_or_else(|| Error::parameter("operation count overflows"))
}

/// Writes `contents` to `path`, replacing any existing file.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a report written by [`EvaluationReport::to_json`].
pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Reads 1-based window indices, one per line; blank lines and `#` comments are skipped.
pub fn read_window_list(path: &Path) -> Result<BTreeSet<usize>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut windows = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        for field in line.split([',', ' ', '\t']).filter(|f| !f.is_empty()) {
            let w = field
                .parse()
                .map_err(|_| Error::parameter(format!("bad window index `{field}` in {}", path.display())))?;
            windows.insert(w);
        }
    }
    Ok(windows)
}
