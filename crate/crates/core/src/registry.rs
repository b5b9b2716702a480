//! Classifiers behind a common trait, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::augment::{build_level, AugmentLevel, AugmentedSet, CompositionOrder, Level};
use crate::dataset::{binarize, Image, LabeledSet};
use crate::dwnn::{resolve, Dwnn, HybridVerdict};
use crate::error::{Error, Result};
use crate::training::ClassSource;
use crate::wnn::{classify_nn, ClassifierConfig, WindowMetric};

/// Outcome of classifying one test image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub digit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<HybridVerdict>,
}

impl Prediction {
    fn plain(digit: usize) -> Self {
        Prediction { digit, verdict: None }
    }
}

pub trait Classifier: Send + Sync {
    /// Registry name of the classifier.
    fn name(&self) -> &str;

    fn config(&self) -> &ClassifierConfig;

    fn predict(&self, image: &Image) -> Result<Prediction>;
}

/// Training data shared by every classifier built from it.
#[derive(Clone)]
pub struct TrainingContext {
    /// Unaugmented training set, used by DWNN.
    pub base: Arc<LabeledSet>,
    /// Set searched by NN and WNN; the augmented set for the hybrid.
    pub train: Arc<dyn ClassSource>,
    pub config: ClassifierConfig,
    /// Composition order for DWNN image extensions.
    pub ext_order: CompositionOrder,
}

impl TrainingContext {
    /// Context whose search set is `base` itself.
    pub fn new(base: LabeledSet, config: ClassifierConfig) -> Result<Self> {
        Self::with_level(base, None, CompositionOrder::ShiftFirst, false, config)
    }

    /// Binarizes `base` if configured, then augments it to `level`, either in
    /// memory or lazily on every pass.
    pub fn with_level(
        base: LabeledSet,
        level: Option<AugmentLevel>,
        order: CompositionOrder,
        lazy: bool,
        config: ClassifierConfig,
    ) -> Result<Self> {
        config.validate()?;
        base.require_nonempty_classes()?;
        let base = match config.binarize {
            Some(t) => base.map_images(|i| binarize(i, t))?,
            None => base,
        };
        let base = Arc::new(base);
        let train: Arc<dyn ClassSource> = match level {
            None => base.clone(),
            Some(l) if l.level == Level::Set0 => base.clone(),
            Some(l) if lazy => Arc::new(AugmentedSet::new(base.clone(), l, order)?),
            Some(l) => Arc::new(build_level(&base, l, order)?),
        };
        Ok(TrainingContext {
            base,
            train,
            config,
            ext_order: CompositionOrder::WarpFirst,
        })
    }

    /// Replaces the search set, e.g. with a materialised augmented set read from disk.
    pub fn with_train(mut self, train: Arc<dyn ClassSource>) -> Result<Self> {
        if train.num_classes() != self.base.num_classes() {
            return Err(Error::parameter("augmented set and base set differ in class count"));
        }
        train.require_nonempty_classes()?;
        self.train = train;
        Ok(self)
    }

    fn dims(&self) -> Result<(usize, usize)> {
        self.base
            .dims()
            .ok_or_else(|| Error::contract("training set holds no images"))
    }
}

fn prepare<'a>(image: &'a Image, config: &ClassifierConfig) -> Result<std::borrow::Cow<'a, Image>> {
    Ok(match config.binarize {
        Some(t) => std::borrow::Cow::Owned(binarize(image, t)?),
        None => std::borrow::Cow::Borrowed(image),
    })
}

/// Full-image nearest neighbour under the configured L^p distance.
pub struct NnClassifier {
    train: Arc<dyn ClassSource>,
    config: ClassifierConfig,
}

impl NnClassifier {
    pub fn new(train: Arc<dyn ClassSource>, config: ClassifierConfig) -> Result<Self> {
        config.validate()?;
        train.require_nonempty_classes()?;
        Ok(NnClassifier { train, config })
    }
}

impl Classifier for NnClassifier {
    fn name(&self) -> &str {
        "nn"
    }

    fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn predict(&self, image: &Image) -> Result<Prediction> {
        let image = prepare(image, &self.config)?;
        Ok(Prediction::plain(classify_nn(
            &image,
            &*self.train,
            self.config.exponent,
        )?))
    }
}

pub struct WnnClassifier {
    train: Arc<dyn ClassSource>,
    metric: WindowMetric,
    config: ClassifierConfig,
}

impl WnnClassifier {
    pub fn new(train: Arc<dyn ClassSource>, config: ClassifierConfig) -> Result<Self> {
        train.require_nonempty_classes()?;
        let (rows, cols) = train
            .dims()
            .ok_or_else(|| Error::contract("training set holds no images"))?;
        Ok(WnnClassifier {
            metric: WindowMetric::new(rows, cols, &config)?,
            train,
            config,
        })
    }
}

impl Classifier for WnnClassifier {
    fn name(&self) -> &str {
        "wnn"
    }

    fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn predict(&self, image: &Image) -> Result<Prediction> {
        let image = prepare(image, &self.config)?;
        Ok(Prediction::plain(self.metric.classify(&image, &*self.train)?.0))
    }
}

pub struct DwnnClassifier {
    base: Arc<LabeledSet>,
    dwnn: Dwnn,
    config: ClassifierConfig,
}

impl Classifier for DwnnClassifier {
    fn name(&self) -> &str {
        "dwnn"
    }

    fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn predict(&self, image: &Image) -> Result<Prediction> {
        let image = prepare(image, &self.config)?;
        Ok(Prediction::plain(self.dwnn.classify(&image, &self.base)?))
    }
}

/// WNN on the search set and DWNN on the base set, disagreements settled by
/// nearest neighbour over the search set.
pub struct HybridClassifier {
    wnn: WnnClassifier,
    dwnn: DwnnClassifier,
}

impl Classifier for HybridClassifier {
    fn name(&self) -> &str {
        "hybrid"
    }

    fn config(&self) -> &ClassifierConfig {
        &self.wnn.config
    }

    fn predict(&self, image: &Image) -> Result<Prediction> {
        let prepared = prepare(image, &self.wnn.config)?;
        let wnn = self.wnn.metric.classify(&prepared, &*self.wnn.train)?.0;
        let dwnn = self.dwnn.dwnn.classify(&prepared, &self.dwnn.base)?;
        let verdict = resolve(&prepared, wnn, dwnn, &*self.wnn.train)?;
        Ok(Prediction {
            digit: verdict.final_digit,
            verdict: Some(verdict),
        })
    }
}

fn build_nn(ctx: &TrainingContext) -> Result<Box<dyn Classifier>> {
    Ok(Box::new(NnClassifier::new(ctx.train.clone(), ctx.config.clone())?))
}

fn wnn(ctx: &TrainingContext) -> Result<WnnClassifier> {
    WnnClassifier::new(ctx.train.clone(), ctx.config.clone())
}

fn dwnn(ctx: &TrainingContext) -> Result<DwnnClassifier> {
    if !ctx.config.excluded.is_empty() {
        return Err(Error::parameter("dwnn does not support excluded windows"));
    }
    let (rows, cols) = ctx.dims()?;
    Ok(DwnnClassifier {
        base: ctx.base.clone(),
        dwnn: Dwnn::with_exponent(rows, cols, ctx.config.window_size, ctx.config.exponent, ctx.ext_order)?,
        config: ctx.config.clone(),
    })
}

fn build_wnn(ctx: &TrainingContext) -> Result<Box<dyn Classifier>> {
    Ok(Box::new(wnn(ctx)?))
}

fn build_dwnn(ctx: &TrainingContext) -> Result<Box<dyn Classifier>> {
    Ok(Box::new(dwnn(ctx)?))
}

fn build_hybrid(ctx: &TrainingContext) -> Result<Box<dyn Classifier>> {
    Ok(Box::new(HybridClassifier {
        wnn: wnn(ctx)?,
        dwnn: dwnn(ctx)?,
    }))
}

pub type Factory = fn(&TrainingContext) -> Result<Box<dyn Classifier>>;

/// Name-to-factory table of classifiers.
#[derive(Clone, Default)]
pub struct ClassifierRegistry {
    factories: BTreeMap<String, Factory>,
}

impl ClassifierRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding `nn`, `wnn`, `dwnn` and `hybrid`.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register("nn", build_nn);
        registry.register("wnn", build_wnn);
        registry.register("dwnn", build_dwnn);
        registry.register("hybrid", build_hybrid);
        registry
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, ctx: &TrainingContext) -> Result<Box<dyn Classifier>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::parameter(format!(
                "unknown classifier `{name}` (available: {})",
                self.names().join(", ")
            ))
        })?;
        factory(ctx)
    }
}
