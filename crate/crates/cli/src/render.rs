use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use wnn_core::dataset::Image;

/// Binary greymap (P5) with maxval 255.
pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    bytes.extend_from_slice(image.pixels());
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(&bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

const RAMP: &[u8] = b" .:-=+*#%@";

pub fn ascii(image: &Image) -> String {
    let mut out = String::with_capacity((image.cols() + 1) * image.rows());
    for row in image.pixels().chunks(image.cols()) {
        out.extend(row.iter().map(|&v| RAMP[v as usize * (RAMP.len() - 1) / 255] as char));
        out.push('\n');
    }
    out
}
