//! Images, labelled image sets, IDX parsing and train/test splits.

mod idx;
mod split;

pub use idx::{load_idx, parse_idx, read_labeled_set, write_idx, write_labeled_set, IdxWriter};
pub use split::{build_split, Dataset, IndexRange, SplitScheme, SplitSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of MNIST and EMNIST images.
pub const MNIST_SIDE: usize = 28;

/// Number of digit classes.
pub const NUM_DIGITS: usize = 10;

/// A greyscale image stored row-major, one byte per pixel.
///
/// Reads outside the grid return 0, which is how windows near the border are
/// zero-padded. Production data is always 28x28; smaller grids exist so that
/// the kernels can be checked against brute force on toy instances.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::parameter("image dimensions must be positive"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::parameter(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        Ok(Image { rows, cols, pixels })
    }

    /// A 28x28 image from exactly 784 row-major bytes.
    pub fn mnist(pixels: Vec<u8>) -> Result<Self> {
        Image::new(MNIST_SIDE, MNIST_SIDE, pixels)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        Image {
            rows,
            cols,
            pixels: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut image = Image::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                image.pixels[r * cols + c] = f(r, c);
            }
        }
        image
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixel at (row, col); 0 anywhere outside the grid.
    pub fn get(&self, row: isize, col: isize) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            0
        } else {
            self.pixels[row as usize * self.cols + col as usize]
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        assert!(row < self.rows && col < self.cols);
        self.pixels[row * self.cols + col] = value;
    }

    pub fn transpose(&self) -> Image {
        Image::from_fn(self.cols, self.rows, |r, c| self.pixels[c * self.cols + r])
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Image {}x{}", self.rows, self.cols)?;
        for row in self.pixels.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|p| format!("{p:3}")).collect();
            writeln!(f, "  {}", line.join(" "))?;
        }
        Ok(())
    }
}

/// EMNIST stores images transposed relative to MNIST's display orientation.
pub fn orient_emnist(image: &Image) -> Image {
    image.transpose()
}

/// Two-level quantisation to {0, 255}. Threshold must be in 1..=255.
pub fn binarize(image: &Image, threshold: u8) -> Result<Image> {
    if threshold == 0 {
        return Err(Error::parameter("binarization threshold must be in 1..=255"));
    }
    let pixels = image
        .pixels
        .iter()
        .map(|&p| if p >= threshold { 255 } else { 0 })
        .collect();
    Ok(Image {
        rows: image.rows,
        cols: image.cols,
        pixels,
    })
}

/// Identifies an image inside a [`LabeledSet`]: its digit and its 1-based
/// position in the per-digit enumeration of the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImageId {
    pub digit: usize,
    pub index: usize,
}

impl std::fmt::Display for ImageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.digit, self.index)
    }
}

impl std::str::FromStr for ImageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (d, i) = s
            .split_once(':')
            .ok_or_else(|| Error::parameter(format!("image id `{s}` is not digit:index")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::parameter(format!("image id `{s}` is not digit:index")))
        };
        Ok(ImageId {
            digit: parse(d)?,
            index: parse(i)?,
        })
    }
}

/// Images grouped by class, class `i` holding digit `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSet {
    classes: Vec<Vec<Image>>,
    ids: Vec<Vec<usize>>,
}

impl LabeledSet {
    /// Builds a set whose per-class ids run 1, 2, 3, ...
    pub fn new(classes: Vec<Vec<Image>>) -> Result<Self> {
        let ids = classes.iter().map(|c| (1..=c.len()).collect()).collect();
        LabeledSet::with_ids(classes, ids)
    }

    pub fn with_ids(classes: Vec<Vec<Image>>, ids: Vec<Vec<usize>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::parameter("a labeled set needs at least one class"));
        }
        if ids.len() != classes.len() || ids.iter().zip(&classes).any(|(i, c)| i.len() != c.len()) {
            return Err(Error::parameter("image ids do not line up with class contents"));
        }
        let set = LabeledSet { classes, ids };
        if let Some(first) = set.iter().next() {
            let dims = first.image.dims();
            if set.iter().any(|s| s.image.dims() != dims) {
                return Err(Error::parameter("all images of a labeled set must share dimensions"));
            }
        }
        Ok(set)
    }

    /// Groups (image, label) pairs by label, keeping file order within a class.
    pub fn from_pairs(pairs: Vec<(Image, u8)>, num_classes: usize) -> Result<Self> {
        let mut classes = vec![Vec::new(); num_classes];
        for (image, label) in pairs {
            let slot = classes
                .get_mut(label as usize)
                .ok_or_else(|| Error::parameter(format!("label {label} outside 0..{num_classes}")))?;
            slot.push(image);
        }
        LabeledSet::new(classes)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, digit: usize) -> &[Image] {
        &self.classes[digit]
    }

    pub fn class_ids(&self, digit: usize) -> &[usize] {
        &self.ids[digit]
    }

    pub fn classes(&self) -> &[Vec<Image>] {
        &self.classes
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimensions shared by every image, `None` for an empty set.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.iter().next().map(|s| s.image.dims())
    }

    /// Errors unless every class holds at least one image.
    pub fn require_nonempty_classes(&self) -> Result<()> {
        match self.classes.iter().position(Vec::is_empty) {
            Some(digit) => Err(Error::contract(format!("training class {digit} is empty"))),
            None => Ok(()),
        }
    }

    /// Samples in class order, then id order within a class.
    pub fn iter(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        self.classes
            .iter()
            .zip(&self.ids)
            .enumerate()
            .flat_map(|(digit, (images, ids))| {
                images.iter().zip(ids).map(move |(image, &index)| Sample {
                    id: ImageId { digit, index },
                    image,
                })
            })
    }

    pub fn map_images(&self, mut f: impl FnMut(&Image) -> Result<Image>) -> Result<LabeledSet> {
        let classes = self
            .classes
            .iter()
            .map(|c| c.iter().map(&mut f).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        LabeledSet::with_ids(classes, self.ids.clone())
    }

    /// Keeps the images of each class at the given positions (0-based, in order).
    pub fn select(&self, positions: &[Vec<usize>]) -> Result<LabeledSet> {
        if positions.len() != self.classes.len() {
            return Err(Error::parameter("selection must name positions for every class"));
        }
        let mut classes = Vec::with_capacity(self.classes.len());
        let mut ids = Vec::with_capacity(self.classes.len());
        for (digit, picks) in positions.iter().enumerate() {
            let mut images = Vec::with_capacity(picks.len());
            let mut class_ids = Vec::with_capacity(picks.len());
            for &p in picks {
                let image = self.classes[digit]
                    .get(p)
                    .ok_or_else(|| Error::parameter(format!("position {p} outside class {digit}")))?;
                images.push(image.clone());
                class_ids.push(self.ids[digit][p]);
            }
            classes.push(images);
            ids.push(class_ids);
        }
        LabeledSet::with_ids(classes, ids)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub id: ImageId,
    pub image: &'a Image,
}
