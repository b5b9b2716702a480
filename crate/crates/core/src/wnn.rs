//! Windowed nearest neighbour (WNN) distances and classification.
//!
//! For a test image `B` and a class `A`, the local distance on window `W` is
//! `min_{A in class} (sum_{k in W} |B(k) - A(k)|^p)^(1/p)` and the global
//! distance is `(sum_W local^p)^(1/p)` over all non-excluded windows. The
//! classifier picks the class with the smallest global distance, the lowest
//! class index winning ties. Plain nearest neighbour is the special case where
//! every window covers the whole image.
//!
//! All comparisons are made on the p-th power sums, never on roots.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Image;
use crate::error::{Error, Result};
use crate::kernel::{full_sum, total, with_table, Cost, CostTable, Exponent, PowerSum, WindowKernel, WindowLayout};
use crate::training::{ClassSource, SingleClass};

/// Window size used unless configured otherwise.
pub const DEFAULT_WINDOW: usize = 11;

/// A window of side `size` centred on the pixel with 1-based row-major `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub size: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub window_size: usize,
    pub exponent: Exponent,
    /// 1-based indices of windows left out of the global sum.
    #[serde(default)]
    pub excluded: BTreeSet<usize>,
    /// Binarization threshold applied to training and test images, if any.
    #[serde(default)]
    pub binarize: Option<u8>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            window_size: DEFAULT_WINDOW,
            exponent: Exponent::EUCLIDEAN,
            excluded: BTreeSet::new(),
            binarize: None,
        }
    }
}

impl ClassifierConfig {
    pub fn with_window(window_size: usize) -> Self {
        ClassifierConfig {
            window_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 3 || self.window_size.is_multiple_of(2) {
            return Err(Error::parameter(format!(
                "window size must be odd and at least 3, got {}",
                self.window_size
            )));
        }
        if self.binarize == Some(0) {
            return Err(Error::parameter("binarization threshold must be in 1..=255"));
        }
        Ok(())
    }
}

/// Global p-th power sums from a test image to every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub exponent: Exponent,
    pub power_sums: Vec<PowerSum>,
}

impl DistanceProfile {
    pub fn distances(&self) -> Vec<f64> {
        self.power_sums.iter().map(|s| s.root(self.exponent)).collect()
    }

    /// Smallest class index attaining the minimum.
    pub fn argmin(&self) -> usize {
        argmin(&self.power_sums)
    }
}

pub(crate) fn argmin<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn check_dims(b: &Image, source: &dyn ClassSource) -> Result<()> {
    match source.dims() {
        Some(dims) if dims != b.dims() => Err(Error::parameter(format!(
            "test image is {}x{} but training images are {}x{}",
            b.rows(),
            b.cols(),
            dims.0,
            dims.1
        ))),
        _ => Ok(()),
    }
}

/// Per-window minima of one class, for every active window of `layout`.
pub(crate) fn class_window_minima<T: Cost>(
    kernel: &mut WindowKernel<'_, T>,
    b: &Image,
    source: &dyn ClassSource,
    class: usize,
    best: &mut Vec<T>,
) {
    best.clear();
    best.resize(kernel.layout().len(), T::MAX);
    let pixels = b.pixels();
    source.for_each_image(class, &mut |a| kernel.accumulate(pixels, a.pixels(), best));
}

/// Precomputed window geometry and cost table for repeated WNN evaluation on
/// one grid size.
#[derive(Clone)]
pub struct WindowMetric {
    layout: WindowLayout,
    table: CostTable,
    exponent: Exponent,
}

impl WindowMetric {
    pub fn new(rows: usize, cols: usize, config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let layout = WindowLayout::new(rows, cols, config.window_size, &config.excluded)?;
        Ok(WindowMetric {
            layout,
            table: CostTable::for_windows(config.exponent, rows, cols),
            exponent: config.exponent,
        })
    }

    /// Like [`WindowMetric::new`] but accepts any odd window size, including 1.
    pub(crate) fn unchecked(rows: usize, cols: usize, size: usize, exponent: Exponent) -> Result<Self> {
        Ok(WindowMetric {
            layout: WindowLayout::new(rows, cols, size, &BTreeSet::new())?,
            table: CostTable::for_windows(exponent, rows, cols),
            exponent,
        })
    }

    pub fn layout(&self) -> &WindowLayout {
        &self.layout
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn is_exact(&self) -> bool {
        self.table.is_exact()
    }

    pub(crate) fn table(&self) -> &CostTable {
        &self.table
    }

    pub(crate) fn check(&self, b: &Image, source: &dyn ClassSource) -> Result<()> {
        if b.dims() != (self.layout.rows(), self.layout.cols()) {
            return Err(Error::parameter(format!(
                "image is {}x{} but the metric was built for {}x{}",
                b.rows(),
                b.cols(),
                self.layout.rows(),
                self.layout.cols()
            )));
        }
        check_dims(b, source)?;
        source.require_nonempty_classes()
    }

    /// Global power sum from `b` to each class of `source`.
    pub fn profile(&self, b: &Image, source: &dyn ClassSource) -> Result<DistanceProfile> {
        self.check(b, source)?;
        let power_sums = with_table!(&self.table, table => {
            let mut kernel = WindowKernel::new(&self.layout, table);
            let mut best = Vec::new();
            (0..source.num_classes())
                .map(|class| {
                    class_window_minima(&mut kernel, b, source, class, &mut best);
                    total(&best).power_sum()
                })
                .collect()
        });
        Ok(DistanceProfile {
            exponent: self.exponent,
            power_sums,
        })
    }

    /// Local power sums `dist_W^p` of one class on every active window.
    pub fn window_minima(&self, b: &Image, source: &dyn ClassSource, class: usize) -> Result<Vec<PowerSum>> {
        self.check(b, source)?;
        Ok(with_table!(&self.table, table => {
            let mut kernel = WindowKernel::new(&self.layout, table);
            let mut best = Vec::new();
            class_window_minima(&mut kernel, b, source, class, &mut best);
            best.iter().map(|v| v.power_sum()).collect()
        }))
    }

    pub fn classify(&self, b: &Image, source: &dyn ClassSource) -> Result<(usize, DistanceProfile)> {
        let profile = self.profile(b, source)?;
        Ok((profile.argmin(), profile))
    }
}

fn nonempty(class: &[Image]) -> Result<()> {
    if class.is_empty() {
        return Err(Error::contract("class holds no images"));
    }
    Ok(())
}

/// `dist_{W,p}(B, class)` for a single window.
pub fn local_distance(b: &Image, class: &[Image], window: WindowSpec, p: Exponent) -> Result<f64> {
    nonempty(class)?;
    let total = b.rows() * b.cols();
    if window.index == 0 || window.index > total {
        return Err(Error::parameter(format!(
            "window index {} outside 1..={total}",
            window.index
        )));
    }
    let metric = WindowMetric::unchecked(b.rows(), b.cols(), window.size, p)?;
    let minima = metric.window_minima(b, &SingleClass(class), 0)?;
    Ok(minima[window.index - 1].root(p))
}

/// `dist_{W,p}(B, class)` for every window, in window order.
pub fn local_distances(b: &Image, class: &[Image], size: usize, p: Exponent) -> Result<Vec<f64>> {
    nonempty(class)?;
    let metric = WindowMetric::unchecked(b.rows(), b.cols(), size, p)?;
    let minima = metric.window_minima(b, &SingleClass(class), 0)?;
    Ok(minima.into_iter().map(|s| s.root(p)).collect())
}

/// `Dist_p(B, class)^p` over the non-excluded windows.
pub fn global_power_sum(b: &Image, class: &[Image], config: &ClassifierConfig) -> Result<PowerSum> {
    nonempty(class)?;
    let metric = WindowMetric::new(b.rows(), b.cols(), config)?;
    Ok(metric.profile(b, &SingleClass(class))?.power_sums[0])
}

/// `Dist_p(B, class)` over the non-excluded windows.
pub fn global_distance(b: &Image, class: &[Image], config: &ClassifierConfig) -> Result<f64> {
    Ok(global_power_sum(b, class, config)?.root(config.exponent))
}

/// WNN classification of `b`: the digit of the closest class and all class distances.
pub fn classify(b: &Image, train: &dyn ClassSource, config: &ClassifierConfig) -> Result<(usize, DistanceProfile)> {
    WindowMetric::new(b.rows(), b.cols(), config)?.classify(b, train)
}

/// Full-image nearest-neighbour power sums restricted to `classes`.
pub fn nn_power_sums(b: &Image, train: &dyn ClassSource, classes: &[usize], p: Exponent) -> Result<Vec<PowerSum>> {
    check_dims(b, train)?;
    for &c in classes {
        if c >= train.num_classes() {
            return Err(Error::parameter(format!("class {c} does not exist")));
        }
        if train.class_len(c) == 0 {
            return Err(Error::contract(format!("training class {c} is empty")));
        }
    }
    let table = CostTable::new(p, (b.rows() * b.cols()) as u64);
    let pixels = b.pixels();
    Ok(with_table!(&table, t => {
        classes
            .iter()
            .map(|&class| {
                let mut best = Cost::MAX;
                train.for_each_image(class, &mut |a| {
                    let d = full_sum(t, pixels, a.pixels());
                    if d < best {
                        best = d;
                    }
                });
                best.power_sum()
            })
            .collect()
    }))
}

/// Nearest-neighbour classification with the full-image L^p distance.
pub fn classify_nn(b: &Image, train: &dyn ClassSource, p: Exponent) -> Result<usize> {
    let classes: Vec<usize> = (0..train.num_classes()).collect();
    let sums = nn_power_sums(b, train, &classes, p)?;
    Ok(argmin(&sums))
}

/// Nearest neighbour among the listed classes; ties go to the lowest class index.
pub fn classify_nn_among(b: &Image, train: &dyn ClassSource, classes: &[usize], p: Exponent) -> Result<usize> {
    if classes.is_empty() {
        return Err(Error::parameter("no candidate classes"));
    }
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let sums = nn_power_sums(b, train, &sorted, p)?;
    Ok(sorted[argmin(&sums)])
}

/// Log-likelihood of `b` under the per-window Gaussian model of `class`, up to
/// the additive normalising constant: `-Dist(B, class)^2 / (2 sigma^2)`.
pub fn likelihood_score(b: &Image, class: &[Image], window_size: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::parameter(format!("sigma must be positive, got {sigma}")));
    }
    let config = ClassifierConfig::with_window(window_size);
    let squared = global_power_sum(b, class, &config)?.to_f64();
    Ok(-squared / (2.0 * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Image {
        Image::from_fn(rows, cols, |_, _| rng.gen())
    }

    /// Window sum computed cell by cell, zero outside the grid.
    fn naive_window(b: &Image, a: &Image, size: usize, center: usize, p: u32) -> u64 {
        let half = (size / 2) as isize;
        let (r, c) = ((center / b.cols()) as isize, (center % b.cols()) as isize);
        let mut sum = 0;
        for dr in -half..=half {
            for dc in -half..=half {
                sum += (b.get(r + dr, c + dc).abs_diff(a.get(r + dr, c + dc)) as u64).pow(p);
            }
        }
        sum
    }

    #[test]
    fn self_distance_is_zero_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_image(&mut rng, 28, 28);
        let class = vec![random_image(&mut rng, 28, 28), b.clone()];
        for d in local_distances(&b, &class, 11, Exponent::EUCLIDEAN).unwrap() {
            assert_eq!(d, 0.0);
        }
        assert_eq!(global_distance(&b, &class, &ClassifierConfig::default()).unwrap(), 0.0);
        assert_eq!(likelihood_score(&b, &class, 11, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn toy_local_distance_matches_hand_sum() {
        // 4x4 grid, S=3, window centred at (1,1) (index 6) covers rows 0..3, cols 0..3.
        let b = Image::new(4, 4, (0..16).map(|v| v * 10).collect()).unwrap();
        let a = Image::new(4, 4, vec![0; 16]).unwrap();
        let mut expected = 0u64;
        for r in 0..3 {
            for c in 0..3 {
                let v = (r * 4 + c) as u64 * 10;
                expected += v * v;
            }
        }
        let d = local_distance(
            &b,
            std::slice::from_ref(&a),
            WindowSpec { size: 3, index: 6 },
            Exponent::EUCLIDEAN,
        )
        .unwrap();
        assert_eq!(d, (expected as f64).sqrt());
        // Corner window (index 1) is clipped to rows 0..2, cols 0..2.
        let d = local_distance(&b, &[a], WindowSpec { size: 3, index: 1 }, Exponent::EUCLIDEAN).unwrap();
        assert_eq!(d, ((100 + 1600 + 2500) as f64).sqrt());
    }

    #[test]
    fn binary_images_make_p_irrelevant_to_power_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = Image::from_fn(6, 6, |_, _| rng.gen_range(0..=1));
        let class: Vec<Image> = (0..3)
            .map(|_| Image::from_fn(6, 6, |_, _| rng.gen_range(0..=1)))
            .collect();
        let p1 = WindowMetric::unchecked(6, 6, 3, Exponent::new(1.0).unwrap()).unwrap();
        let p2 = WindowMetric::unchecked(6, 6, 3, Exponent::new(2.0).unwrap()).unwrap();
        let src = SingleClass(&class);
        assert_eq!(
            p1.window_minima(&b, &src, 0).unwrap(),
            p2.window_minima(&b, &src, 0).unwrap()
        );
    }

    #[test]
    fn large_window_is_scaled_full_image_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_image(&mut rng, 28, 28);
        let a = random_image(&mut rng, 28, 28);
        for p in [1.0, 2.0, 3.0] {
            let config = ClassifierConfig {
                window_size: 55,
                exponent: Exponent::new(p).unwrap(),
                ..Default::default()
            };
            let got = global_power_sum(&b, std::slice::from_ref(&a), &config).unwrap();
            let full: u64 = b
                .pixels()
                .iter()
                .zip(a.pixels())
                .map(|(&x, &y)| (x.abs_diff(y) as u64).pow(p as u32))
                .sum();
            assert_eq!(got, PowerSum::Exact(784 * full));
        }
    }

    #[test]
    fn excluded_window_adds_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_image(&mut rng, 28, 28);
        let class: Vec<Image> = (0..4).map(|_| random_image(&mut rng, 28, 28)).collect();
        let full = global_power_sum(&b, &class, &ClassifierConfig::default()).unwrap();
        let w = 300;
        let mut config = ClassifierConfig::default();
        config.excluded.insert(w);
        let without = global_power_sum(&b, &class, &config).unwrap();
        let local = local_distance(&b, &class, WindowSpec { size: 11, index: w }, Exponent::EUCLIDEAN).unwrap();
        let (PowerSum::Exact(full), PowerSum::Exact(without)) = (full, without) else {
            panic!("p=2 must be exact")
        };
        assert_eq!(without + (local * local).round() as u64, full);
    }

    #[test]
    fn classify_returns_class_containing_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let classes: Vec<Vec<Image>> = (0..10)
            .map(|_| (0..3).map(|_| random_image(&mut rng, 28, 28)).collect())
            .collect();
        let set = LabeledSet::new(classes).unwrap();
        let b = set.class(7)[1].clone();
        let (digit, profile) = classify(&b, &set, &ClassifierConfig::default()).unwrap();
        assert_eq!(digit, 7);
        assert_eq!(profile.power_sums[7], PowerSum::Exact(0));
        assert_eq!(classify_nn(&b, &set, Exponent::EUCLIDEAN).unwrap(), 7);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shared: Vec<Image> = (0..2).map(|_| random_image(&mut rng, 5, 5)).collect();
        let set = LabeledSet::new(vec![vec![random_image(&mut rng, 5, 5)], shared.clone(), shared]).unwrap();
        let b = random_image(&mut rng, 5, 5);
        let config = ClassifierConfig::with_window(3);
        let (_, profile) = classify(&b, &set, &config).unwrap();
        assert_eq!(profile.power_sums[1], profile.power_sums[2]);
        // Force class 0 far away so 1 and 2 tie for the minimum.
        let far = LabeledSet::new(vec![
            vec![Image::from_fn(5, 5, |_, _| 255)],
            set.class(1).to_vec(),
            set.class(2).to_vec(),
        ])
        .unwrap();
        let dark = Image::zeros(5, 5);
        let (digit, profile) = classify(&dark, &far, &config).unwrap();
        assert_eq!(profile.power_sums[1], profile.power_sums[2]);
        if profile.power_sums[1] < profile.power_sums[0] {
            assert_eq!(digit, 1);
        }
        assert_eq!(classify_nn_among(&dark, &far, &[2, 1], Exponent::EUCLIDEAN).unwrap(), 1);
    }

    #[test]
    fn window_decomposition_counts_pixel_coverage() {
        // Sum over windows of a singleton class's local power sums equals each
        // pixel's squared difference weighted by how many windows cover it.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_image(&mut rng, 28, 28);
        let a = random_image(&mut rng, 28, 28);
        for size in [3usize, 11] {
            let config = ClassifierConfig::with_window(size);
            let PowerSum::Exact(total) = global_power_sum(&b, std::slice::from_ref(&a), &config).unwrap() else {
                panic!()
            };
            let half = size / 2;
            // Closed-form coverage along one axis: number of centres within `half` of x.
            let cover = |x: usize| (x + half).min(27) - x.saturating_sub(half) + 1;
            let mut expected = 0u64;
            for r in 0..28 {
                for c in 0..28 {
                    // Cross-check the closed form against direct enumeration.
                    let direct = (0..784usize)
                        .filter(|w| (w / 28).abs_diff(r) <= half && (w % 28).abs_diff(c) <= half)
                        .count();
                    assert_eq!(cover(r) * cover(c), direct);
                    let d = b.pixels()[r * 28 + c].abs_diff(a.pixels()[r * 28 + c]) as u64;
                    expected += direct as u64 * d * d;
                }
            }
            assert_eq!(total, expected);
            let naive: u64 = (0..784).map(|w| naive_window(&b, &a, size, w, 2)).sum();
            assert_eq!(total, naive);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::with_window(4).validate().is_err());
        assert!(ClassifierConfig::with_window(1).validate().is_err());
        assert!(ClassifierConfig::with_window(3).validate().is_ok());
        let b = Image::zeros(28, 28);
        assert!(matches!(
            global_distance(&b, &[], &ClassifierConfig::default()),
            Err(Error::Contract(_))
        ));
        let all = ClassifierConfig {
            excluded: (1..=784).collect(),
            ..Default::default()
        };
        assert!(matches!(
            global_distance(&b, std::slice::from_ref(&b), &all),
            Err(Error::Contract(_))
        ));
        assert!(likelihood_score(&b, std::slice::from_ref(&b), 11, 0.0).is_err());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let set = LabeledSet::new(vec![vec![Image::zeros(4, 4)]]).unwrap();
        assert!(classify(&Image::zeros(5, 5), &set, &ClassifierConfig::with_window(3)).is_err());
        assert!(classify_nn(&Image::zeros(5, 5), &set, Exponent::EUCLIDEAN).is_err());
    }
}
