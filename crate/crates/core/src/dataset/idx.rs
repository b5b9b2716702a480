//! IDX container format, as used for the MNIST and EMNIST distributions.
//!
//! ```text
//! images: u32 magic 0x00000803 | u32 count | u32 rows | u32 cols | count*rows*cols bytes
//! labels: u32 magic 0x00000801 | u32 count | count bytes
//! ```
//! All header integers are big-endian.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Image, LabeledSet, MNIST_SIDE, NUM_DIGITS};
use crate::error::{Error, IdxFile, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, file: IdxFile, field: &'static str) -> Result<u32> {
    let word = bytes.get(offset..offset + 4).ok_or(Error::Truncated {
        file,
        field,
        needed: offset + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([word[0], word[1], word[2], word[3]]))
}

/// Parses in-memory IDX image and label files into (image, label) pairs in file order.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Vec<(Image, u8)>> {
    let magic = read_u32(image_bytes, 0, IdxFile::Images, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            file: IdxFile::Images,
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let magic = read_u32(label_bytes, 0, IdxFile::Labels, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            file: IdxFile::Labels,
            expected: LABEL_MAGIC,
            found: magic,
        });
    }

    let count = read_u32(image_bytes, 4, IdxFile::Images, "count")? as usize;
    let rows = read_u32(image_bytes, 8, IdxFile::Images, "rows")? as usize;
    let cols = read_u32(image_bytes, 12, IdxFile::Images, "cols")? as usize;
    let label_count = read_u32(label_bytes, 4, IdxFile::Labels, "count")? as usize;

    if rows != MNIST_SIDE {
        return Err(Error::Dimension {
            field: "rows",
            found: rows,
        });
    }
    if cols != MNIST_SIDE {
        return Err(Error::Dimension {
            field: "cols",
            found: cols,
        });
    }
    if count != label_count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let pixels_per_image = rows * cols;
    let image_data = &image_bytes[16..];
    if image_data.len() < count * pixels_per_image {
        return Err(Error::Truncated {
            file: IdxFile::Images,
            field: "pixel data",
            needed: 16 + count * pixels_per_image,
            available: image_bytes.len(),
        });
    }
    let label_data = &label_bytes[8..];
    if label_data.len() < count {
        return Err(Error::Truncated {
            file: IdxFile::Labels,
            field: "label data",
            needed: 8 + count,
            available: label_bytes.len(),
        });
    }

    image_data
        .chunks_exact(pixels_per_image)
        .zip(label_data)
        .take(count)
        .enumerate()
        .map(|(item, (pixels, &label))| {
            if label as usize >= NUM_DIGITS {
                return Err(Error::Label { item, value: label });
            }
            Ok((Image::new(rows, cols, pixels.to_vec())?, label))
        })
        .collect()
}

/// Reads an IDX image/label file pair from disk.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<(Image, u8)>> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx(&images, &labels)
}

/// Streams images and labels into an IDX file pair whose item count is known up front.
pub struct IdxWriter {
    images: BufWriter<fs::File>,
    labels: BufWriter<fs::File>,
    images_path: PathBuf,
    labels_path: PathBuf,
    dims: (usize, usize),
    expected: usize,
    written: usize,
}

impl IdxWriter {
    pub fn create(images_path: &Path, labels_path: &Path, count: usize, dims: (usize, usize)) -> Result<Self> {
        let open = |path: &Path| -> Result<BufWriter<fs::File>> {
            Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
        };
        let mut writer = IdxWriter {
            images: open(images_path)?,
            labels: open(labels_path)?,
            images_path: images_path.to_path_buf(),
            labels_path: labels_path.to_path_buf(),
            dims,
            expected: count,
            written: 0,
        };
        let count = u32::try_from(count).map_err(|_| Error::parameter("IDX files hold at most 2^32-1 items"))?;
        for word in [IMAGE_MAGIC, count, dims.0 as u32, dims.1 as u32] {
            writer
                .images
                .write_all(&word.to_be_bytes())
                .map_err(|e| Error::io(&writer.images_path, e))?;
        }
        for word in [LABEL_MAGIC, count] {
            writer
                .labels
                .write_all(&word.to_be_bytes())
                .map_err(|e| Error::io(&writer.labels_path, e))?;
        }
        Ok(writer)
    }

    pub fn push(&mut self, image: &Image, label: u8) -> Result<()> {
        if image.dims() != self.dims {
            return Err(Error::parameter("IDX output requires uniform image dimensions"));
        }
        if self.written == self.expected {
            return Err(Error::parameter("more items written than declared in the IDX header"));
        }
        self.images
            .write_all(image.pixels())
            .map_err(|e| Error::io(&self.images_path, e))?;
        self.labels
            .write_all(&[label])
            .map_err(|e| Error::io(&self.labels_path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        if self.written != self.expected {
            return Err(Error::parameter(format!(
                "IDX header declares {} items but {} were written",
                self.expected, self.written
            )));
        }
        self.images.flush().map_err(|e| Error::io(&self.images_path, e))?;
        self.labels.flush().map_err(|e| Error::io(&self.labels_path, e))?;
        Ok(self.written)
    }
}

/// Writes (image, label) pairs as an IDX file pair. All images must share dimensions.
pub fn write_idx<'a, I>(items: I, images_path: &Path, labels_path: &Path) -> Result<usize>
where
    I: IntoIterator<Item = (&'a Image, u8)>,
{
    let items: Vec<(&Image, u8)> = items.into_iter().collect();
    let dims = items.first().map_or((MNIST_SIDE, MNIST_SIDE), |(i, _)| i.dims());
    let mut writer = IdxWriter::create(images_path, labels_path, items.len(), dims)?;
    for (image, label) in items {
        writer.push(image, label)?;
    }
    writer.finish()
}

/// Writes a labeled set class by class.
pub fn write_labeled_set(set: &LabeledSet, images_path: &Path, labels_path: &Path) -> Result<usize> {
    write_idx(
        set.iter().map(|s| (s.image, s.id.digit as u8)),
        images_path,
        labels_path,
    )
}

/// Loads an IDX pair and groups it into ten digit classes.
pub fn read_labeled_set(images_path: &Path, labels_path: &Path) -> Result<LabeledSet> {
    LabeledSet::from_pairs(load_idx(images_path, labels_path)?, NUM_DIGITS)
}
