//! Distance-WNN and the WNN/DWNN hybrid.
//!
//! DWNN measures the windowed distance from a test image to each training
//! image's 125-variant extension separately, then takes the minimum over the
//! class. The hybrid runs WNN on an augmented set alongside DWNN on the base
//! set and lets plain nearest neighbour settle disagreements.

use serde::{Deserialize, Serialize};

use crate::augment::{build_ext, CompositionOrder, ExtendedImage};
use crate::dataset::{Image, LabeledSet};
use crate::error::Result;
use crate::kernel::{total, with_table, Cost, Exponent, PowerSum, WindowKernel};
use crate::training::{ClassSource, SingleClass};
use crate::wnn::{argmin, class_window_minima, classify_nn_among, ClassifierConfig, WindowMetric};

/// `d(B, A)`: the WNN distance from `b` to the variants of one extended image.
pub fn dwnn_image_distance(b: &Image, ext: &ExtendedImage, window_size: usize) -> Result<f64> {
    let config = ClassifierConfig::with_window(window_size);
    let metric = WindowMetric::new(b.rows(), b.cols(), &config)?;
    let profile = metric.profile(b, &SingleClass(ext.variants()))?;
    Ok(profile.power_sums[0].root(Exponent::EUCLIDEAN))
}

/// DWNN classifier over an unaugmented training set.
#[derive(Clone)]
pub struct Dwnn {
    metric: WindowMetric,
    order: CompositionOrder,
}

impl Dwnn {
    pub fn new(rows: usize, cols: usize, window_size: usize, order: CompositionOrder) -> Result<Self> {
        Self::with_exponent(rows, cols, window_size, Exponent::EUCLIDEAN, order)
    }

    pub fn with_exponent(
        rows: usize,
        cols: usize,
        window_size: usize,
        exponent: Exponent,
        order: CompositionOrder,
    ) -> Result<Self> {
        let config = ClassifierConfig {
            exponent,
            ..ClassifierConfig::with_window(window_size)
        };
        Ok(Dwnn {
            metric: WindowMetric::new(rows, cols, &config)?,
            order,
        })
    }

    /// `D(B, class)^2` for every class: the smallest `d(B, A)^2` over the
    /// class's images, each extension generated on the fly.
    pub fn profile(&self, b: &Image, set0: &LabeledSet) -> Result<Vec<PowerSum>> {
        self.metric.check(b, set0)?;
        let layout = self.metric.layout();
        Ok(with_table!(self.metric.table(), table => {
            let mut kernel = WindowKernel::new(layout, table);
            let mut best = Vec::new();
            (0..set0.num_classes())
                .map(|class| {
                    let mut class_best = Cost::MAX;
                    for a in set0.class(class) {
                        let ext = build_ext(a, self.order);
                        class_window_minima(&mut kernel, b, &SingleClass(ext.variants()), 0, &mut best);
                        let d = total(&best);
                        if d < class_best {
                            class_best = d;
                        }
                    }
                    class_best.power_sum()
                })
                .collect()
        }))
    }

    pub fn classify(&self, b: &Image, set0: &LabeledSet) -> Result<usize> {
        Ok(argmin(&self.profile(b, set0)?))
    }
}

/// DWNN classification with extensions built rotate-then-shift.
pub fn dwnn_classify(b: &Image, set0: &LabeledSet, window_size: usize) -> Result<usize> {
    Dwnn::new(b.rows(), b.cols(), window_size, CompositionOrder::WarpFirst)?.classify(b, set0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Agreement,
    NnTiebreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridVerdict {
    pub wnn_digit: usize,
    pub dwnn_digit: usize,
    pub final_digit: usize,
    pub resolved_by: Resolution,
}

/// Combines two predictions; on disagreement the full-image nearest neighbour
/// among the two candidate classes of `augmented` decides.
pub fn resolve(b: &Image, wnn_digit: usize, dwnn_digit: usize, augmented: &dyn ClassSource) -> Result<HybridVerdict> {
    if wnn_digit == dwnn_digit {
        return Ok(HybridVerdict {
            wnn_digit,
            dwnn_digit,
            final_digit: wnn_digit,
            resolved_by: Resolution::Agreement,
        });
    }
    let final_digit = classify_nn_among(b, augmented, &[wnn_digit, dwnn_digit], Exponent::EUCLIDEAN)?;
    Ok(HybridVerdict {
        wnn_digit,
        dwnn_digit,
        final_digit,
        resolved_by: Resolution::NnTiebreak,
    })
}

/// WNN on `augmented` and DWNN on `set0`, resolved by [`resolve`].
pub fn hybrid_classify(
    b: &Image,
    set0: &LabeledSet,
    augmented: &dyn ClassSource,
    window_size: usize,
) -> Result<HybridVerdict> {
    let config = ClassifierConfig::with_window(window_size);
    let (wnn_digit, _) = WindowMetric::new(b.rows(), b.cols(), &config)?.classify(b, augmented)?;
    let dwnn_digit = dwnn_classify(b, set0, window_size)?;
    resolve(b, wnn_digit, dwnn_digit, augmented)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{AugmentLevel, AugmentedSet, Level};
    use crate::dataset::Dataset;
    use crate::wnn::global_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn blob(rng: &mut ChaCha8Rng, side: usize) -> Image {
        Image::from_fn(side, side, |_, _| if rng.gen_bool(0.4) { rng.gen() } else { 0 })
    }

    /// d(B, A)^2 by explicit loops over windows, variants and window cells.
    fn oracle_image_distance_sq(b: &Image, variants: &[Image], size: usize) -> u64 {
        let half = (size / 2) as isize;
        let (rows, cols) = b.dims();
        let mut sum = 0;
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                let mut best = u64::MAX;
                for x in variants {
                    let mut s = 0u64;
                    for dr in -half..=half {
                        for dc in -half..=half {
                            let d = b.get(r + dr, c + dc).abs_diff(x.get(r + dr, c + dc)) as u64;
                            s += d * d;
                        }
                    }
                    best = best.min(s);
                }
                sum += best;
            }
        }
        sum
    }

    #[test]
    fn member_of_extension_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = blob(&mut rng, 28);
        let ext = build_ext(&a, CompositionOrder::WarpFirst);
        assert_eq!(dwnn_image_distance(&ext.variants()[37], &ext, 11).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_extension_reduces_to_wnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = blob(&mut rng, 28);
        let b = blob(&mut rng, 28);
        let ext = ExtendedImage::from_variants(vec![a.clone(); 125]).unwrap();
        let config = ClassifierConfig::with_window(11);
        assert_eq!(
            dwnn_image_distance(&b, &ext, 11).unwrap(),
            global_distance(&b, &[a], &config).unwrap()
        );
    }

    #[test]
    fn toy_image_distance_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = blob(&mut rng, 6);
            let b = blob(&mut rng, 6);
            let ext = build_ext(&a, CompositionOrder::WarpFirst);
            let got = dwnn_image_distance(&b, &ext, 3).unwrap();
            let want = (oracle_image_distance_sq(&b, ext.variants(), 3) as f64).sqrt();
            assert_eq!(got, want);
        }
    }

    fn toy_set(rng: &mut ChaCha8Rng, classes: usize, per_class: usize, side: usize) -> LabeledSet {
        LabeledSet::new(
            (0..classes)
                .map(|_| (0..per_class).map(|_| blob(rng, side)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn classify_matches_oracle_and_recovers_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..4 {
            let set = toy_set(&mut rng, 4, 2, 6);
            let b = blob(&mut rng, 6);
            let oracle: Vec<u64> = (0..4)
                .map(|c| {
                    set.class(c)
                        .iter()
                        .map(|a| oracle_image_distance_sq(&b, build_ext(a, CompositionOrder::WarpFirst).variants(), 3))
                        .min()
                        .unwrap()
                })
                .collect();
            let dwnn = Dwnn::new(6, 6, 3, CompositionOrder::WarpFirst).unwrap();
            let got = dwnn.profile(&b, &set).unwrap();
            assert_eq!(got, oracle.iter().map(|&v| PowerSum::Exact(v)).collect::<Vec<_>>());
            assert_eq!(dwnn.classify(&b, &set).unwrap(), argmin(&oracle));
            assert_eq!(dwnn_classify(&set.class(3)[1], &set, 3).unwrap(), 3);
        }
    }

    #[test]
    fn extension_distance_bounded_by_plain_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = ClassifierConfig::with_window(3);
        for _ in 0..20 {
            let a = blob(&mut rng, 6);
            let b = blob(&mut rng, 6);
            let ext = build_ext(&a, CompositionOrder::WarpFirst);
            assert!(dwnn_image_distance(&b, &ext, 3).unwrap() <= global_distance(&b, &[a], &config).unwrap());
        }
    }

    #[test]
    fn union_of_extensions_bounds_class_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let config = ClassifierConfig::with_window(3);
        for _ in 0..5 {
            let set = toy_set(&mut rng, 2, 3, 6);
            let b = blob(&mut rng, 6);
            let dwnn = Dwnn::new(6, 6, 3, CompositionOrder::WarpFirst).unwrap();
            let per_class = dwnn.profile(&b, &set).unwrap();
            for (class, &d) in per_class.iter().enumerate() {
                let union: Vec<Image> = set
                    .class(class)
                    .iter()
                    .flat_map(|a| build_ext(a, CompositionOrder::WarpFirst).variants().to_vec())
                    .collect();
                let wnn_union = crate::wnn::global_power_sum(&b, &union, &config).unwrap();
                assert!(wnn_union <= d);
            }
        }
    }

    #[test]
    fn agreement_is_kept() {
        let set = LabeledSet::new(vec![vec![Image::zeros(4, 4)]; 10]).unwrap();
        let v = resolve(&Image::zeros(4, 4), 9, 9, &set).unwrap();
        assert_eq!(v.final_digit, 9);
        assert_eq!(v.resolved_by, Resolution::Agreement);
    }

    #[test]
    fn disagreement_goes_to_nearest_neighbour_of_two_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = 0;
        let mut dwnn_wins = 0;
        for _ in 0..200 {
            let set0 = Arc::new(toy_set(&mut rng, 3, 1, 6));
            let set4 = AugmentedSet::new(
                set0.clone(),
                AugmentLevel::new(Dataset::EmnistDigits, Level::Set1),
                CompositionOrder::ShiftFirst,
            )
            .unwrap();
            let b = blob(&mut rng, 6);
            let v = hybrid_classify(&b, &set0, &set4, 3).unwrap();
            assert!(v.final_digit == v.wnn_digit || v.final_digit == v.dwnn_digit);
            assert_eq!(v.resolved_by == Resolution::Agreement, v.wnn_digit == v.dwnn_digit);
            if v.resolved_by == Resolution::NnTiebreak {
                seen += 1;
                // Oracle: brute-force full-image squared distances over both classes.
                let mut best = (u64::MAX, usize::MAX);
                let mut candidates = [v.wnn_digit, v.dwnn_digit];
                candidates.sort();
                for c in candidates {
                    set4.for_each_image(c, &mut |a| {
                        let d: u64 = b
                            .pixels()
                            .iter()
                            .zip(a.pixels())
                            .map(|(&x, &y)| (x.abs_diff(y) as u64).pow(2))
                            .sum();
                        if d < best.0 {
                            best = (d, c);
                        }
                    });
                }
                assert_eq!(v.final_digit, best.1);
                if v.final_digit == v.dwnn_digit {
                    dwnn_wins += 1;
                }
            }
        }
        assert!(seen > 0, "no disagreement produced");
        assert!(dwnn_wins > 0, "nearest neighbour never sided with dwnn");
    }
}
