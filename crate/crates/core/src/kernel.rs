//! Per-window distance kernel.
//!
//! For a pair of images the per-pixel costs `|b - a|^p` are accumulated into a
//! summed-area table once, after which every window's cost is four table
//! reads. Windows are clipped to the grid, which is the same as zero padding
//! because out-of-grid pixels are 0 in both images and contribute nothing.
//!
//! Costs are exact `u64` integers whenever `p` is an integer small enough for
//! the largest possible global sum to fit; otherwise `f64` is used and results
//! are not guaranteed to be bit-identical across platforms.

use std::collections::BTreeSet;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::dataset::Image;
use crate::error::{Error, Result};

/// Exponent `p >= 1` of the local and global norms.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub const EUCLIDEAN: Exponent = Exponent(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::parameter(format!("exponent p must be finite and >= 1, got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn as_integer(self) -> Option<u32> {
        (self.0.fract() == 0.0 && self.0 <= 64.0).then_some(self.0 as u32)
    }
}

impl Default for Exponent {
    fn default() -> Self {
        Exponent::EUCLIDEAN
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A sum of p-th powers: the quantity compared when taking minima.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSum {
    Exact(u64),
    Approx(f64),
}

impl PowerSum {
    pub fn to_f64(self) -> f64 {
        match self {
            PowerSum::Exact(v) => v as f64,
            PowerSum::Approx(v) => v,
        }
    }

    /// The p-th root, i.e. the distance itself.
    pub fn root(self, p: Exponent) -> f64 {
        let v = self.to_f64();
        match p.as_integer() {
            Some(1) => v,
            Some(2) => v.sqrt(),
            _ => v.powf(1.0 / p.value()),
        }
    }
}

/// Scalar type of the per-pixel costs and their sums.
pub trait Cost: Copy + PartialOrd + Send + Sync + Debug + 'static {
    const ZERO: Self;
    const MAX: Self;
    fn plus(self, other: Self) -> Self;
    fn minus(self, other: Self) -> Self;
    fn power_sum(self) -> PowerSum;
}

impl Cost for u64 {
    const ZERO: Self = 0;
    const MAX: Self = u64::MAX;

    #[inline(always)]
    fn plus(self, other: Self) -> Self {
        self + other
    }

    #[inline(always)]
    fn minus(self, other: Self) -> Self {
        self - other
    }

    fn power_sum(self) -> PowerSum {
        PowerSum::Exact(self)
    }
}

impl Cost for f64 {
    const ZERO: Self = 0.0;
    const MAX: Self = f64::INFINITY;

    #[inline(always)]
    fn plus(self, other: Self) -> Self {
        self + other
    }

    #[inline(always)]
    fn minus(self, other: Self) -> Self {
        self - other
    }

    fn power_sum(self) -> PowerSum {
        PowerSum::Approx(self)
    }
}

/// `|d|^p` for every absolute intensity difference `d` in 0..=255.
#[derive(Clone)]
pub enum CostTable {
    Exact(Box<[u64; 256]>),
    Approx(Box<[f64; 256]>),
}

impl CostTable {
    /// Picks the exact table when `p` is an integer and `max_terms` costs of
    /// `255^p` cannot overflow `u64`.
    pub fn new(p: Exponent, max_terms: u64) -> CostTable {
        if let Some(k) = p.as_integer() {
            let top = (255u128).checked_pow(k);
            if let Some(total) = top.and_then(|t| t.checked_mul(max_terms as u128)) {
                if total <= u64::MAX as u128 {
                    let mut table = Box::new([0u64; 256]);
                    for (d, slot) in table.iter_mut().enumerate() {
                        *slot = (d as u64).pow(k);
                    }
                    return CostTable::Exact(table);
                }
            }
        }
        let mut table = Box::new([0f64; 256]);
        for (d, slot) in table.iter_mut().enumerate() {
            *slot = (d as f64).powf(p.value());
        }
        CostTable::Approx(table)
    }

    /// Table sized for global window sums over a `rows x cols` grid.
    pub fn for_windows(p: Exponent, rows: usize, cols: usize) -> CostTable {
        let cells = (rows * cols) as u64;
        CostTable::new(p, cells.saturating_mul(cells))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, CostTable::Exact(_))
    }
}

/// Runs `$body` with `$t` bound to the concrete `[T; 256]` table.
macro_rules! with_table {
    ($table:expr, $t:ident => $body:expr) => {
        match $table {
            $crate::kernel::CostTable::Exact($t) => {
                let $t: &[u64; 256] = &**$t;
                $body
            }
            $crate::kernel::CostTable::Approx($t) => {
                let $t: &[f64; 256] = &**$t;
                $body
            }
        }
    };
}
pub(crate) use with_table;

#[inline(always)]
fn abs_diff(a: u8, b: u8) -> usize {
    a.abs_diff(b) as usize
}

/// Full-image cost between two equally sized images.
#[inline]
pub fn full_sum<T: Cost>(table: &[T; 256], b: &[u8], a: &[u8]) -> T {
    b.iter()
        .zip(a)
        .fold(T::ZERO, |acc, (&x, &y)| acc.plus(table[abs_diff(x, y)]))
}

/// Geometry of the active windows for one grid size and window size.
#[derive(Debug, Clone)]
pub struct WindowLayout {
    rows: usize,
    cols: usize,
    size: usize,
    /// 0-based centre index of each active window, ascending.
    windows: Vec<usize>,
    /// Summed-area table offsets `[top-left, top-right, bottom-left, bottom-right]`.
    corners: Vec<[usize; 4]>,
}

impl WindowLayout {
    /// `excluded` holds 1-based window indices.
    pub fn new(rows: usize, cols: usize, size: usize, excluded: &BTreeSet<usize>) -> Result<Self> {
        if size.is_multiple_of(2) || size == 0 {
            return Err(Error::parameter(format!("window size must be odd, got {size}")));
        }
        let total = rows * cols;
        if let Some(&bad) = excluded.iter().find(|&&w| w == 0 || w > total) {
            return Err(Error::parameter(format!("excluded window {bad} outside 1..={total}")));
        }
        let windows: Vec<usize> = (0..total).filter(|w| !excluded.contains(&(w + 1))).collect();
        if windows.is_empty() {
            return Err(Error::contract("every window is excluded"));
        }
        let half = size / 2;
        let stride = cols + 1;
        let corners = windows
            .iter()
            .map(|&w| {
                let (r, c) = (w / cols, w % cols);
                let r0 = r.saturating_sub(half);
                let r1 = (r + half + 1).min(rows);
                let c0 = c.saturating_sub(half);
                let c1 = (c + half + 1).min(cols);
                [r0 * stride + c0, r0 * stride + c1, r1 * stride + c0, r1 * stride + c1]
            })
            .collect();
        Ok(WindowLayout {
            rows,
            cols,
            size,
            windows,
            corners,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn total_windows(&self) -> usize {
        self.rows * self.cols
    }

    /// 0-based centre indices of the active windows.
    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Reusable scratch for window sums of one image pair at a time.
pub struct WindowKernel<'t, T: Cost> {
    layout: &'t WindowLayout,
    table: &'t [T; 256],
    sat: Vec<T>,
}

impl<'t, T: Cost> WindowKernel<'t, T> {
    pub fn new(layout: &'t WindowLayout, table: &'t [T; 256]) -> Self {
        let len = (layout.rows + 1) * (layout.cols + 1);
        WindowKernel {
            layout,
            table,
            sat: vec![T::ZERO; len],
        }
    }

    pub fn layout(&self) -> &WindowLayout {
        self.layout
    }

    fn check(&self, b: &Image, a: &Image) -> Result<()> {
        let dims = (self.layout.rows, self.layout.cols);
        if b.dims() != dims || a.dims() != dims {
            return Err(Error::parameter(format!(
                "image dimensions {:?}/{:?} do not match the {}x{} window layout",
                b.dims(),
                a.dims(),
                dims.0,
                dims.1
            )));
        }
        Ok(())
    }

    fn fill(&mut self, b: &[u8], a: &[u8]) {
        let cols = self.layout.cols;
        let stride = cols + 1;
        let table = self.table;
        for (r, (brow, arow)) in b.chunks_exact(cols).zip(a.chunks_exact(cols)).enumerate() {
            let (done, rest) = self.sat.split_at_mut((r + 1) * stride);
            let above = &done[r * stride + 1..];
            let here = &mut rest[1..stride];
            let mut run = T::ZERO;
            for (((out, &up), &x), &y) in here.iter_mut().zip(above).zip(brow).zip(arow) {
                run = run.plus(table[abs_diff(x, y)]);
                *out = up.plus(run);
            }
        }
    }

    /// Writes the cost of every active window for the pair into `out`.
    pub fn window_sums(&mut self, b: &Image, a: &Image, out: &mut [T]) -> Result<()> {
        self.check(b, a)?;
        self.fill(b.pixels(), a.pixels());
        let sat = &self.sat;
        for (slot, c) in out.iter_mut().zip(&self.layout.corners) {
            *slot = sat[c[3]].plus(sat[c[0]]).minus(sat[c[1]].plus(sat[c[2]]));
        }
        Ok(())
    }

    /// Lowers each `best[k]` to the pair's cost on active window `k` if smaller.
    pub fn accumulate_min(&mut self, b: &Image, a: &Image, best: &mut [T]) -> Result<()> {
        self.check(b, a)?;
        self.accumulate(b.pixels(), a.pixels(), best);
        Ok(())
    }

    /// [`Self::accumulate_min`] for callers that already checked dimensions.
    #[inline]
    pub(crate) fn accumulate(&mut self, b: &[u8], a: &[u8], best: &mut [T]) {
        debug_assert_eq!(b.len(), self.layout.rows * self.layout.cols);
        debug_assert_eq!(a.len(), b.len());
        self.fill(b, a);
        let sat = &self.sat;
        for (slot, c) in best.iter_mut().zip(&self.layout.corners) {
            let s = sat[c[3]].plus(sat[c[0]]).minus(sat[c[1]].plus(sat[c[2]]));
            if s < *slot {
                *slot = s;
            }
        }
    }
}

/// Sum of a window-cost vector in window order.
pub fn total<T: Cost>(values: &[T]) -> T {
    values.iter().fold(T::ZERO, |acc, &v| acc.plus(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_window_sum(b: &Image, a: &Image, size: usize, center: usize, p: u32) -> u64 {
        let half = (size / 2) as isize;
        let (r, c) = ((center / b.cols()) as isize, (center % b.cols()) as isize);
        let mut sum = 0u64;
        for dr in -half..=half {
            for dc in -half..=half {
                let d = b.get(r + dr, c + dc).abs_diff(a.get(r + dr, c + dc)) as u64;
                sum += d.pow(p);
            }
        }
        sum
    }

    #[test]
    fn window_sums_match_naive_loops() {
        let b = Image::from_fn(7, 5, |r, c| ((r * 37 + c * 11) % 256) as u8);
        let a = Image::from_fn(7, 5, |r, c| ((r * 5 + c * 91 + 3) % 256) as u8);
        for size in [1, 3, 5, 9, 15] {
            let layout = WindowLayout::new(7, 5, size, &BTreeSet::new()).unwrap();
            for p in [1u32, 2, 3] {
                let CostTable::Exact(table) = CostTable::for_windows(Exponent(p as f64), 7, 5) else {
                    panic!("expected exact table")
                };
                let mut kernel = WindowKernel::new(&layout, &table);
                let mut out = vec![0u64; layout.len()];
                kernel.window_sums(&b, &a, &mut out).unwrap();
                for (k, &w) in layout.windows().iter().enumerate() {
                    assert_eq!(out[k], naive_window_sum(&b, &a, size, w, p), "S={size} p={p} w={w}");
                }
            }
        }
    }

    #[test]
    fn exclusion_removes_windows() {
        let excluded: BTreeSet<usize> = [1, 5, 784].into_iter().collect();
        let layout = WindowLayout::new(28, 28, 11, &excluded).unwrap();
        assert_eq!(layout.len(), 781);
        assert!(!layout.windows().contains(&0));
        assert!(!layout.windows().contains(&783));
        let all: BTreeSet<usize> = (1..=9).collect();
        assert!(matches!(WindowLayout::new(3, 3, 3, &all), Err(Error::Contract(_))));
        let bad: BTreeSet<usize> = [10].into_iter().collect();
        assert!(WindowLayout::new(3, 3, 3, &bad).is_err());
        assert!(WindowLayout::new(3, 3, 4, &BTreeSet::new()).is_err());
    }

    #[test]
    fn table_selection() {
        assert!(CostTable::for_windows(Exponent(2.0), 28, 28).is_exact());
        assert!(CostTable::for_windows(Exponent(5.0), 28, 28).is_exact());
        assert!(!CostTable::for_windows(Exponent(6.0), 28, 28).is_exact());
        assert!(!CostTable::for_windows(Exponent(1.5), 28, 28).is_exact());
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }
}
