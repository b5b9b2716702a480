//! Greedy window exclusion.
//!
//! Each step scores every remaining window `W` by the number of evaluation
//! errors `NE_W` once `W` is also excluded, keeps the windows with the fewest
//! errors and among those excludes the one with the largest distance gap
//! `GAP_W`. Per-window class minima of every evaluation image are computed
//! once, so scoring a candidate only subtracts one cached term per class.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageId, LabeledSet};
use crate::error::{Error, Result};
use crate::kernel::{with_table, Cost, Exponent, WindowKernel};
use crate::training::ClassSource;
use crate::wnn::{argmin, class_window_minima, ClassifierConfig, WindowMetric};

/// How candidate windows are scored at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringMode {
    /// Candidate excluded together with every window removed so far.
    #[default]
    Cumulative,
    /// Candidate excluded alone, on top of the initially excluded windows.
    Single,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(ScoringMode::Cumulative),
            "single" => Ok(ScoringMode::Single),
            other => Err(Error::parameter(format!(
                "unknown scoring mode `{other}` (expected cumulative or single)"
            ))),
        }
    }
}

fn merged_exclusion(
    candidate: usize,
    current: &BTreeSet<usize>,
    config: &ClassifierConfig,
) -> Result<ClassifierConfig> {
    if current.contains(&candidate) || config.excluded.contains(&candidate) {
        return Err(Error::contract(format!("window {candidate} is already excluded")));
    }
    let mut merged = config.clone();
    merged.excluded.extend(current.iter().copied());
    merged.excluded.insert(candidate);
    Ok(merged)
}

/// `NE_W` by full re-classification: errors on `eval` with `candidate`,
/// `current` and the windows of `config.excluded` left out.
pub fn errors_excluding(
    candidate: usize,
    current: &BTreeSet<usize>,
    eval: &LabeledSet,
    train: &dyn ClassSource,
    config: &ClassifierConfig,
) -> Result<usize> {
    let merged = merged_exclusion(candidate, current, config)?;
    let Some((rows, cols)) = eval.dims() else {
        return Ok(0);
    };
    let metric = WindowMetric::new(rows, cols, &merged)?;
    let mut errors = 0;
    for sample in eval.iter() {
        if metric.classify(sample.image, train)?.0 != sample.id.digit {
            errors += 1;
        }
    }
    Ok(errors)
}

/// `GAP_W` by full re-classification: the summed excess of each evaluation
/// image's true-class distance over its smallest class distance.
pub fn gap(
    candidate: usize,
    current: &BTreeSet<usize>,
    eval: &LabeledSet,
    train: &dyn ClassSource,
    config: &ClassifierConfig,
) -> Result<f64> {
    let merged = merged_exclusion(candidate, current, config)?;
    let Some((rows, cols)) = eval.dims() else {
        return Ok(0.0);
    };
    let metric = WindowMetric::new(rows, cols, &merged)?;
    let mut total = 0.0;
    for sample in eval.iter() {
        let distances = metric.profile(sample.image, train)?.distances();
        let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
        total += distances[sample.id.digit] - min;
    }
    Ok(total)
}

/// Cached per-window class minima for a set of evaluation images.
struct Cache<T> {
    labels: Vec<usize>,
    classes: usize,
    windows: usize,
    /// `[image][class][window]`, flattened.
    minima: Vec<T>,
}

impl<T: Cost> Cache<T> {
    fn build(metric: &WindowMetric, table: &[T; 256], eval: &LabeledSet, train: &dyn ClassSource) -> Cache<T> {
        let layout = metric.layout();
        let classes = train.num_classes();
        let samples: Vec<_> = eval.iter().collect();
        let rows: Vec<Vec<T>> = samples
            .par_iter()
            .map_init(
                || (WindowKernel::new(layout, table), Vec::new()),
                |(kernel, best), sample| {
                    let mut row = Vec::with_capacity(classes * layout.len());
                    for class in 0..classes {
                        class_window_minima(kernel, sample.image, train, class, best);
                        row.extend_from_slice(best);
                    }
                    row
                },
            )
            .collect();
        Cache {
            labels: samples.iter().map(|s| s.id.digit).collect(),
            classes,
            windows: layout.len(),
            minima: rows.concat(),
        }
    }

    fn minima(&self, image: usize, class: usize) -> &[T] {
        let start = (image * self.classes + class) * self.windows;
        &self.minima[start..start + self.windows]
    }

    /// Class sums over the windows not flagged in `excluded`, `[image][class]`.
    fn sums(&self, excluded: &[bool]) -> Vec<T> {
        (0..self.labels.len())
            .flat_map(|i| (0..self.classes).map(move |c| (i, c)))
            .map(|(i, c)| {
                self.minima(i, c)
                    .iter()
                    .zip(excluded)
                    .filter(|(_, &x)| !x)
                    .fold(T::ZERO, |acc, (&v, _)| acc.plus(v))
            })
            .collect()
    }

    fn errors(&self, sums: &[T]) -> usize {
        sums.chunks_exact(self.classes)
            .zip(&self.labels)
            .filter(|(row, &label)| argmin(row) != label)
            .count()
    }

    /// Errors and gap once `window` is subtracted from `sums`.
    fn score(&self, sums: &[T], window: usize, p: Exponent) -> (usize, f64) {
        let mut errors = 0;
        let mut gap = 0.0;
        let mut row = vec![T::ZERO; self.classes];
        for (i, (base, &label)) in sums.chunks_exact(self.classes).zip(&self.labels).enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = base[c].minus(self.minima(i, c)[window]);
            }
            let best = argmin(&row);
            if best != label {
                errors += 1;
                gap += row[label].power_sum().root(p) - row[best].power_sum().root(p);
            }
        }
        (errors, gap)
    }
}

trait Stored: Cost {
    fn wrap(cache: Cache<Self>) -> Store;
}

impl Stored for u64 {
    fn wrap(cache: Cache<Self>) -> Store {
        Store::Exact(cache)
    }
}

impl Stored for f64 {
    fn wrap(cache: Cache<Self>) -> Store {
        Store::Approx(cache)
    }
}

enum Store {
    Exact(Cache<u64>),
    Approx(Cache<f64>),
}

macro_rules! with_store {
    ($store:expr, $c:ident => $body:expr) => {
        match $store {
            Store::Exact($c) => $body,
            Store::Approx($c) => $body,
        }
    };
}

/// One greedy exclusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    /// 1-based index of the excluded window.
    pub window: usize,
    /// Evaluation errors with every window excluded so far.
    pub errors: usize,
    /// Gap of the chosen window when it was scored.
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_errors: Option<usize>,
}

/// Seed and image identities of a validation/holdout split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub per_digit_validation: usize,
    pub validation: Vec<ImageId>,
    pub holdout: Vec<ImageId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub window_size: usize,
    pub exponent: Exponent,
    pub mode: ScoringMode,
    pub initial_excluded: BTreeSet<usize>,
    pub eval_count: usize,
    pub baseline_errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_baseline: Option<usize>,
    pub steps: Vec<PruneStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitInfo>,
}

impl PruneTrace {
    pub fn exclusion_order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.window).collect()
    }

    /// Every window excluded at the end of the run.
    pub fn excluded(&self) -> BTreeSet<usize> {
        self.initial_excluded
            .iter()
            .copied()
            .chain(self.exclusion_order())
            .collect()
    }

    /// Line records `step,window,errors,holdout_errors`; step 0 is the baseline.
    pub fn write_records(&self, mut out: impl Write) -> std::io::Result<()> {
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "step,window,errors,holdout_errors")?;
        writeln!(out, "0,,{},{}", self.baseline_errors, opt(self.holdout_baseline))?;
        for (i, step) in self.steps.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                step.window,
                step.errors,
                opt(step.holdout_errors)
            )?;
        }
        Ok(())
    }
}

/// Greedy window pruning over cached window minima.
pub struct Pruner {
    config: ClassifierConfig,
    total_windows: usize,
    eval: Store,
    holdout: Option<Store>,
}

impl Pruner {
    pub fn new(train: &dyn ClassSource, eval: &LabeledSet, config: &ClassifierConfig) -> Result<Self> {
        Self::build(train, eval, None, config)
    }

    /// Also tracks the error count on `holdout` after every exclusion.
    pub fn with_holdout(
        train: &dyn ClassSource,
        eval: &LabeledSet,
        holdout: &LabeledSet,
        config: &ClassifierConfig,
    ) -> Result<Self> {
        Self::build(train, eval, Some(holdout), config)
    }

    fn build(
        train: &dyn ClassSource,
        eval: &LabeledSet,
        holdout: Option<&LabeledSet>,
        config: &ClassifierConfig,
    ) -> Result<Self> {
        config.validate()?;
        train.require_nonempty_classes()?;
        let (rows, cols) = train
            .dims()
            .ok_or_else(|| Error::contract("training set holds no images"))?;
        for set in std::iter::once(eval).chain(holdout) {
            if set.dims().is_some_and(|d| d != (rows, cols)) {
                return Err(Error::parameter("evaluation and training images differ in size"));
            }
            if set.num_classes() > train.num_classes() {
                return Err(Error::parameter(
                    "evaluation set has more classes than the training set",
                ));
            }
        }
        let all_windows = ClassifierConfig {
            excluded: BTreeSet::new(),
            ..config.clone()
        };
        let metric = WindowMetric::new(rows, cols, &all_windows)?;
        // Validates the initial exclusions.
        WindowMetric::new(rows, cols, config)?;
        let (eval, holdout) = with_table!(metric.table(), table => {
            let build = |set: &LabeledSet| Stored::wrap(Cache::build(&metric, table, set, train));
            (build(eval), holdout.map(build))
        });
        Ok(Pruner {
            config: config.clone(),
            total_windows: rows * cols,
            eval,
            holdout,
        })
    }

    fn flags(&self, excluded: &BTreeSet<usize>) -> Vec<bool> {
        (1..=self.total_windows).map(|w| excluded.contains(&w)).collect()
    }

    /// Cached equivalent of [`errors_excluding`].
    pub fn errors_excluding(&self, candidate: usize, current: &BTreeSet<usize>) -> Result<usize> {
        Ok(self.score(candidate, current)?.0)
    }

    /// Cached equivalent of [`gap`].
    pub fn gap(&self, candidate: usize, current: &BTreeSet<usize>) -> Result<f64> {
        Ok(self.score(candidate, current)?.1)
    }

    fn score(&self, candidate: usize, current: &BTreeSet<usize>) -> Result<(usize, f64)> {
        if candidate == 0 || candidate > self.total_windows {
            return Err(Error::parameter(format!(
                "window {candidate} outside 1..={}",
                self.total_windows
            )));
        }
        let merged = merged_exclusion(candidate, current, &self.config)?;
        let mut base = merged.excluded;
        base.remove(&candidate);
        let flags = self.flags(&base);
        let p = self.config.exponent;
        Ok(with_store!(&self.eval, cache => cache.score(&cache.sums(&flags), candidate - 1, p)))
    }

    /// Runs `steps` greedy exclusions.
    pub fn run(&self, steps: usize, mode: ScoringMode) -> Result<PruneTrace> {
        let initial = self.config.excluded.clone();
        let available = self.total_windows - initial.len();
        if steps >= available {
            return Err(Error::parameter(format!(
                "cannot exclude {steps} more windows: only {available} remain and one must stay"
            )));
        }
        let p = self.config.exponent;
        let mut excluded = self.flags(&initial);
        let initial_flags = excluded.clone();
        let holdout_errors = |flags: &[bool]| {
            self.holdout
                .as_ref()
                .map(|store| with_store!(store, cache => cache.errors(&cache.sums(flags))))
        };
        let baseline_errors = with_store!(&self.eval, cache => cache.errors(&cache.sums(&excluded)));
        let holdout_baseline = holdout_errors(&excluded);
        let mut trace = Vec::with_capacity(steps);
        for _ in 0..steps {
            let scoring = match mode {
                ScoringMode::Cumulative => &excluded,
                ScoringMode::Single => &initial_flags,
            };
            let (window, _, gap) = with_store!(&self.eval, cache => {
                let sums = cache.sums(scoring);
                let candidates: Vec<usize> = (0..self.total_windows).filter(|&w| !excluded[w]).collect();
                candidates
                    .par_iter()
                    .map(|&w| {
                        let (errors, gap) = cache.score(&sums, w, p);
                        (w, errors, gap)
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .reduce(|best, next| {
                        let better = next.1 < best.1 || (next.1 == best.1 && next.2 > best.2);
                        if better { next } else { best }
                    })
                    .expect("at least one candidate window")
            });
            excluded[window] = true;
            let errors = with_store!(&self.eval, cache => cache.errors(&cache.sums(&excluded)));
            trace.push(PruneStep {
                window: window + 1,
                errors,
                gap,
                holdout_errors: holdout_errors(&excluded),
            });
        }
        Ok(PruneTrace {
            window_size: self.config.window_size,
            exponent: p,
            mode,
            initial_excluded: initial,
            eval_count: with_store!(&self.eval, cache => cache.labels.len()),
            baseline_errors,
            holdout_baseline,
            steps: trace,
            split: None,
        })
    }
}

/// Greedy pruning of `steps` windows without a holdout curve.
pub fn prune(
    train: &dyn ClassSource,
    eval: &LabeledSet,
    config: &ClassifierConfig,
    steps: usize,
    mode: ScoringMode,
) -> Result<PruneTrace> {
    Pruner::new(train, eval, config)?.run(steps, mode)
}

/// A seeded per-digit random partition of a test set.
#[derive(Debug, Clone)]
pub struct ValidationSplit {
    pub validation: LabeledSet,
    pub holdout: LabeledSet,
    pub info: SplitInfo,
}

/// Draws `per_digit` validation images uniformly at random from every digit;
/// the remainder forms the holdout set. Both keep the original image ids.
pub fn split_validation(test: &LabeledSet, per_digit: usize, seed: u64) -> Result<ValidationSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validation = Vec::with_capacity(test.num_classes());
    let mut holdout = Vec::with_capacity(test.num_classes());
    for (digit, size) in test.class_sizes().into_iter().enumerate() {
        if per_digit >= size && per_digit > 0 {
            return Err(Error::parameter(format!(
                "digit {digit} has {size} test images, cannot hold out after taking {per_digit} for validation"
            )));
        }
        let mut order: Vec<usize> = (0..size).collect();
        order.shuffle(&mut rng);
        let mut picked = order[..per_digit].to_vec();
        let mut rest = order[per_digit..].to_vec();
        picked.sort_unstable();
        rest.sort_unstable();
        validation.push(picked);
        holdout.push(rest);
    }
    let validation = test.select(&validation)?;
    let holdout = test.select(&holdout)?;
    let ids = |set: &LabeledSet| set.iter().map(|s| s.id).collect();
    let info = SplitInfo {
        seed,
        per_digit_validation: per_digit,
        validation: ids(&validation),
        holdout: ids(&holdout),
    };
    Ok(ValidationSplit {
        validation,
        holdout,
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Image;
    use rand::Rng;

    fn blob(rng: &mut ChaCha8Rng, side: usize) -> Image {
        Image::from_fn(
            side,
            side,
            |_, _| if rng.gen_bool(0.5) { rng.gen_range(0..8) } else { 0 },
        )
    }

    fn toy(seed: u64, per_class: usize) -> (LabeledSet, LabeledSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set =
            |n: usize| LabeledSet::new((0..3).map(|_| (0..n).map(|_| blob(&mut rng, 5)).collect()).collect()).unwrap();
        (set(per_class), set(per_class + 1))
    }

    #[test]
    fn cached_scores_match_recomputation() {
        let config = ClassifierConfig::with_window(3);
        for seed in 0..4 {
            let (train, eval) = toy(seed, 2);
            let pruner = Pruner::new(&train, &eval, &config).unwrap();
            let current: BTreeSet<usize> = [3, 17].into();
            for w in [1, 5, 13, 25] {
                assert_eq!(
                    pruner.errors_excluding(w, &current).unwrap(),
                    errors_excluding(w, &current, &eval, &train, &config).unwrap()
                );
                let fast = pruner.gap(w, &current).unwrap();
                let slow = gap(w, &current, &eval, &train, &config).unwrap();
                assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0), "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn already_excluded_candidate_is_a_contract_error() {
        let (train, eval) = toy(9, 2);
        let config = ClassifierConfig::with_window(3);
        let current: BTreeSet<usize> = [4].into();
        assert!(matches!(
            errors_excluding(4, &current, &eval, &train, &config),
            Err(Error::Contract(_))
        ));
        let pruner = Pruner::new(&train, &eval, &config).unwrap();
        assert!(matches!(pruner.gap(4, &current), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_steps_gives_baseline_only() {
        let (train, eval) = toy(2, 2);
        let config = ClassifierConfig::with_window(3);
        let trace = prune(&train, &eval, &config, 0, ScoringMode::Cumulative).unwrap();
        assert!(trace.steps.is_empty());
        let baseline = eval
            .iter()
            .filter(|s| crate::wnn::classify(s.image, &train, &config).unwrap().0 != s.id.digit)
            .count();
        assert_eq!(trace.baseline_errors, baseline);
    }

    #[test]
    fn greedy_steps_follow_the_rule() {
        let config = ClassifierConfig::with_window(3);
        for seed in 0..3 {
            let (train, eval) = toy(10 + seed, 2);
            let trace = prune(&train, &eval, &config, 2, ScoringMode::Cumulative).unwrap();
            let mut current = BTreeSet::new();
            for step in &trace.steps {
                let scores: Vec<(usize, usize, f64)> = (1..=25)
                    .filter(|w| !current.contains(w))
                    .map(|w| {
                        (
                            w,
                            errors_excluding(w, &current, &eval, &train, &config).unwrap(),
                            gap(w, &current, &eval, &train, &config).unwrap(),
                        )
                    })
                    .collect();
                let fewest = scores.iter().map(|s| s.1).min().unwrap();
                let widest = scores
                    .iter()
                    .filter(|s| s.1 == fewest)
                    .map(|s| s.2)
                    .fold(f64::MIN, f64::max);
                let expected = scores
                    .iter()
                    .find(|s| s.1 == fewest && (s.2 - widest).abs() <= 1e-9 * widest.max(1.0))
                    .unwrap();
                assert_eq!(step.window, expected.0);
                assert_eq!(step.errors, fewest);
                current.insert(step.window);
            }
        }
    }

    #[test]
    fn blank_window_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Content only in the right half, so window 1 (3x3 at the corner) is always blank.
        let mut image = || Image::from_fn(6, 6, |_, c| if c >= 3 { rng.gen() } else { 0 });
        let train = LabeledSet::new((0..2).map(|_| (0..2).map(|_| image()).collect()).collect()).unwrap();
        let eval = LabeledSet::new((0..2).map(|_| (0..3).map(|_| image()).collect()).collect()).unwrap();
        let config = ClassifierConfig::with_window(3);
        let pruner = Pruner::new(&train, &eval, &config).unwrap();
        let trace = pruner.run(0, ScoringMode::Cumulative).unwrap();
        assert_eq!(
            pruner.errors_excluding(1, &BTreeSet::new()).unwrap(),
            trace.baseline_errors
        );
    }

    #[test]
    fn single_mode_scores_against_initial_set() {
        let (train, eval) = toy(21, 2);
        let config = ClassifierConfig::with_window(3);
        let pruner = Pruner::new(&train, &eval, &config).unwrap();
        let trace = pruner.run(3, ScoringMode::Single).unwrap();
        let order = trace.exclusion_order();
        let unique: BTreeSet<_> = order.iter().collect();
        assert_eq!(unique.len(), 3);
        let mut current = BTreeSet::new();
        for step in &trace.steps {
            assert_eq!(
                step.errors,
                errors_excluding(step.window, &current, &eval, &train, &config).unwrap()
            );
            current.insert(step.window);
        }
    }

    #[test]
    fn trace_is_reproducible_and_serializes() {
        let (train, eval) = toy(30, 2);
        let (_, holdout) = toy(31, 2);
        let config = ClassifierConfig::with_window(3);
        let run = || {
            Pruner::with_holdout(&train, &eval, &holdout, &config)
                .unwrap()
                .run(4, ScoringMode::Cumulative)
                .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.steps.iter().all(|s| s.holdout_errors.is_some()));
        let mut buf = Vec::new();
        a.write_records(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("step,window,errors,holdout_errors\n0,,"));
    }

    #[test]
    fn too_many_steps_rejected() {
        let (train, eval) = toy(1, 1);
        let config = ClassifierConfig::with_window(3);
        assert!(matches!(
            prune(&train, &eval, &config, 25, ScoringMode::Cumulative),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn validation_split_partitions_each_digit() {
        let classes = (0..3)
            .map(|d| {
                (0..10)
                    .map(|i| Image::from_fn(1, 1, |_, _| (d * 10 + i) as u8))
                    .collect()
            })
            .collect();
        let test = LabeledSet::new(classes).unwrap();
        let split = split_validation(&test, 7, 42).unwrap();
        assert_eq!(split.validation.class_sizes(), vec![7; 3]);
        assert_eq!(split.holdout.class_sizes(), vec![3; 3]);
        for d in 0..3 {
            let mut all: Vec<usize> = split.validation.class_ids(d).to_vec();
            all.extend(split.holdout.class_ids(d));
            all.sort_unstable();
            assert_eq!(all, (1..=10).collect::<Vec<_>>());
        }
        assert_eq!(split.info, split_validation(&test, 7, 42).unwrap().info);
        assert_ne!(
            split.info.validation,
            split_validation(&test, 7, 43).unwrap().info.validation
        );

        let none = split_validation(&test, 0, 1).unwrap();
        assert!(none.validation.is_empty());
        assert_eq!(none.holdout, test);
        assert!(matches!(split_validation(&test, 10, 1), Err(Error::Parameter(_))));
    }
}
