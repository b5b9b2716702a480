//! Seeded synthetic 28x28 digits for smoke tests and demos.
//!
//! Each digit is drawn as a seven-segment glyph with random placement, slant,
//! stroke width and intensity, so classes are separable but not trivially so.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_idx, Dataset, Image, LabeledSet, MNIST_SIDE, NUM_DIGITS};
use crate::error::Result;

/// Segments a..g (top, upper right, lower right, bottom, lower left, upper left, middle).
const SEGMENTS: [[bool; 7]; NUM_DIGITS] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

fn distance_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (x, y) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt()
}

/// One synthetic image of `digit`.
pub fn digit_image(digit: usize, rng: &mut impl Rng) -> Image {
    let cx = 13.5 + rng.gen_range(-1.5..1.5);
    let cy = 13.5 + rng.gen_range(-1.5..1.5);
    let half_w = rng.gen_range(3.5..5.0);
    let half_h = rng.gen_range(7.0..8.5);
    let slant = rng.gen_range(-0.25..0.25);
    let width = rng.gen_range(1.0..2.0);
    let peak = rng.gen_range(190.0..255.0);
    let at = |x: f64, y: f64| (cx + x * half_w - y * half_h * slant, cy + y * half_h);
    let corners = [
        at(-1.0, -1.0),
        at(1.0, -1.0),
        at(-1.0, 0.0),
        at(1.0, 0.0),
        at(-1.0, 1.0),
        at(1.0, 1.0),
    ];
    let [tl, tr, ml, mr, bl, br] = corners;
    let lines = [(tl, tr), (tr, mr), (mr, br), (bl, br), (ml, bl), (tl, ml), (ml, mr)];
    let active: Vec<_> = lines
        .iter()
        .zip(SEGMENTS[digit % NUM_DIGITS])
        .filter_map(|(l, on)| on.then_some(*l))
        .collect();
    let noise: Vec<f64> = (0..MNIST_SIDE * MNIST_SIDE).map(|_| rng.gen_range(0.85..1.0)).collect();
    Image::from_fn(MNIST_SIDE, MNIST_SIDE, |r, c| {
        let p = (c as f64, r as f64);
        let d = active
            .iter()
            .map(|&(a, b)| distance_to_segment(p, a, b))
            .fold(f64::INFINITY, f64::min);
        let v = peak * (1.0 - (d - width).max(0.0)).clamp(0.0, 1.0) * noise[r * MNIST_SIDE + c];
        v.round() as u8
    })
}

/// `per_digit` images of every digit from a fixed seed.
pub fn digit_set(per_digit: usize, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = (0..NUM_DIGITS)
        .map(|d| (0..per_digit).map(|_| digit_image(d, &mut rng)).collect())
        .collect();
    LabeledSet::new(classes).expect("uniform 28x28 images")
}

/// Writes IDX train/test files under the conventional MNIST names in `dir`.
/// Labels cycle through the digits so the files are interleaved like real data.
pub fn write_mnist_like(dir: &Path, train_per_digit: usize, test_per_digit: usize, seed: u64) -> Result<()> {
    let [ti, tl, si, sl] = Dataset::Mnist.default_files(dir);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = |n: usize| -> Vec<(Image, u8)> {
        (0..n * NUM_DIGITS)
            .map(|i| {
                let d = i % NUM_DIGITS;
                (digit_image(d, &mut rng), d as u8)
            })
            .collect()
    };
    let train = pairs(train_per_digit);
    let test = pairs(test_per_digit);
    write_idx(train.iter().map(|(i, l)| (i, *l)), &ti, &tl)?;
    write_idx(test.iter().map(|(i, l)| (i, *l)), &si, &sl)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_non_blank() {
        let a = digit_set(3, 7);
        assert_eq!(a, digit_set(3, 7));
        assert!(a.iter().all(|s| !s.image.is_blank()));
        assert_ne!(a, digit_set(3, 8));
    }
}
