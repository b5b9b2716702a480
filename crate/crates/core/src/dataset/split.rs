use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_idx, orient_emnist, Image, LabeledSet, NUM_DIGITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dataset {
    Mnist,
    EmnistDigits,
}

impl Dataset {
    /// Training images per digit in the balanced split.
    fn balanced_train_count(self) -> usize {
        match self {
            Dataset::Mnist => 6000,
            Dataset::EmnistDigits => 24000,
        }
    }

    /// Conventional file names of the uncompressed distribution inside `dir`,
    /// as (train images, train labels, test images, test labels).
    pub fn default_files(self, dir: &Path) -> [PathBuf; 4] {
        let names = match self {
            Dataset::Mnist => [
                "train-images-idx3-ubyte",
                "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte",
                "t10k-labels-idx1-ubyte",
            ],
            Dataset::EmnistDigits => [
                "emnist-digits-train-images-idx3-ubyte",
                "emnist-digits-train-labels-idx1-ubyte",
                "emnist-digits-test-images-idx3-ubyte",
                "emnist-digits-test-labels-idx1-ubyte",
            ],
        };
        names.map(|n| dir.join(n))
    }

    /// Loads an IDX pair and, for EMNIST, corrects the storage orientation.
    pub fn load(self, images_path: &Path, labels_path: &Path) -> Result<Vec<(Image, u8)>> {
        let mut pairs = load_idx(images_path, labels_path)?;
        if self == Dataset::EmnistDigits {
            for (image, _) in &mut pairs {
                *image = orient_emnist(image);
            }
        }
        Ok(pairs)
    }
}

impl std::str::FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Dataset::Mnist),
            "emnist" | "emnist-digits" => Ok(Dataset::EmnistDigits),
            other => Err(Error::parameter(format!("unknown dataset `{other}`"))),
        }
    }
}

/// 1-based inclusive index range within one digit's enumeration; an open end
/// runs to the last available image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub start: usize,
    pub end: Option<usize>,
}

impl IndexRange {
    pub fn new(start: usize, end: usize) -> Self {
        IndexRange { start, end: Some(end) }
    }

    pub fn from(start: usize) -> Self {
        IndexRange { start, end: None }
    }

    fn resolve(&self, digit: usize, available: usize) -> Result<(usize, usize)> {
        let end = self.end.unwrap_or(available);
        if self.start == 0 || end < self.start {
            return Err(Error::Split {
                digit,
                message: format!("range {self} is empty or not 1-based"),
            });
        }
        if end > available {
            return Err(Error::Split {
                digit,
                message: format!("range {self} exceeds the {available} available images"),
            });
        }
        Ok((self.start, end))
    }
}

impl std::fmt::Display for IndexRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.end {
            Some(end) => write!(f, "{}:{}", self.start, end),
            None => write!(f, "{}:end", self.start),
        }
    }
}

impl std::str::FromStr for IndexRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parameter(format!("index range `{s}` is not start:end"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = match b.trim() {
            "" | "end" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        Ok(IndexRange { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SplitScheme {
    /// Training file as training set, test file as test set.
    Standard,
    /// A fixed number of training images per digit, the rest for testing.
    Balanced,
    Custom {
        train: IndexRange,
        test: IndexRange,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub dataset: Dataset,
    pub scheme: SplitScheme,
}

/// Splits the concatenation of the training and test files into per-digit
/// training and test sets.
///
/// Images of each digit are enumerated from 1 in file order, training file
/// first; the resulting sets carry those indices as image ids.
pub fn build_split(
    spec: &SplitSpec,
    train_file: Vec<(Image, u8)>,
    test_file: Vec<(Image, u8)>,
) -> Result<(LabeledSet, LabeledSet)> {
    let mut per_digit: Vec<Vec<Image>> = vec![Vec::new(); NUM_DIGITS];
    let mut from_train_file = [0usize; NUM_DIGITS];
    for (image, label) in train_file {
        per_digit[label as usize].push(image);
        from_train_file[label as usize] += 1;
    }
    for (image, label) in test_file {
        per_digit[label as usize].push(image);
    }

    let mut train = (Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new());
    for (digit, images) in per_digit.into_iter().enumerate() {
        let available = images.len();
        let (train_range, test_range) = match spec.scheme {
            SplitScheme::Standard => (
                IndexRange::new(1, from_train_file[digit]),
                IndexRange::from(from_train_file[digit] + 1),
            ),
            SplitScheme::Balanced => {
                let n = spec.dataset.balanced_train_count();
                (IndexRange::new(1, n), IndexRange::from(n + 1))
            }
            SplitScheme::Custom { train, test } => (train, test),
        };
        let (a, b) = train_range.resolve(digit, available)?;
        let (c, d) = if test_range.end.is_none() && test_range.start == available + 1 {
            // An open test range starting just past the data is simply empty.
            (available + 1, available)
        } else {
            test_range.resolve(digit, available)?
        };
        if a <= d && c <= b {
            return Err(Error::Split {
                digit,
                message: format!("training range {train_range} overlaps test range {test_range}"),
            });
        }
        let slice = |lo: usize, hi: usize| -> (Vec<Image>, Vec<usize>) {
            ((lo..=hi).map(|i| images[i - 1].clone()).collect(), (lo..=hi).collect())
        };
        let (ti, tid) = slice(a, b);
        train.0.push(ti);
        train.1.push(tid);
        let (si, sid) = slice(c, d);
        test.0.push(si);
        test.1.push(sid);
    }
    Ok((
        LabeledSet::with_ids(train.0, train.1)?,
        LabeledSet::with_ids(test.0, test.1)?,
    ))
}
