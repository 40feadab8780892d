use super::{DistanceField, PlotFrame};
use crate::{Error, Result};

/// A set of cells on a [`PlotFrame`].
///
/// Stored as a row-major bitset over the whole frame, so clipping to the
/// frame is structural and counts are exact. Regions are immutable values;
/// every operation returns a new region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    frame: PlotFrame,
    words: Vec<u64>,
}

/// A horizontal run of member cells `[start, end)` on row `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub row: usize,
    pub start: usize,
    pub end: usize,
}

fn word_count(cells: usize) -> usize {
    cells.div_ceil(64)
}

impl Region {
    pub fn empty(frame: &PlotFrame) -> Self {
        Region {
            frame: *frame,
            words: vec![0; word_count(frame.cell_count())],
        }
    }

    pub fn full(frame: &PlotFrame) -> Self {
        let mut r = Region::empty(frame);
        r.words.iter_mut().for_each(|w| *w = !0);
        r.clear_tail();
        r
    }

    /// Builds a region from cell indices; cells outside the frame are dropped.
    pub fn from_cells<I>(frame: &PlotFrame, cells: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut r = Region::empty(frame);
        for (i, j) in cells {
            if i < frame.width() && j < frame.height() {
                r.set(i, j);
            }
        }
        r
    }

    /// Cells for which `pred(i, j)` holds.
    pub fn from_predicate(frame: &PlotFrame, mut pred: impl FnMut(usize, usize) -> bool) -> Self {
        let mut r = Region::empty(frame);
        for j in 0..frame.height() {
            for i in 0..frame.width() {
                if pred(i, j) {
                    r.set(i, j);
                }
            }
        }
        r
    }

    pub fn frame(&self) -> &PlotFrame {
        &self.frame
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        if i >= self.frame.width() || j >= self.frame.height() {
            return false;
        }
        let idx = j * self.frame.width() + i;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub(crate) fn set(&mut self, i: usize, j: usize) {
        let idx = j * self.frame.width() + i;
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    /// Sets cells `[start, end)` of `row`. Callers keep the span inside the frame.
    pub(crate) fn set_run(&mut self, row: usize, start: usize, end: usize) {
        debug_assert!(end <= self.frame.width() && row < self.frame.height());
        if start >= end {
            return;
        }
        let base = row * self.frame.width();
        let (mut lo, hi) = (base + start, base + end);
        while lo < hi {
            let w = lo / 64;
            let bit = lo % 64;
            let n = (64 - bit).min(hi - lo);
            let mask = if n == 64 {
                !0
            } else {
                ((1u64 << n) - 1) << bit
            };
            self.words[w] |= mask;
            lo += n;
        }
    }

    /// Fills the axis-aligned block of columns `cols` and rows `rows`.
    pub(crate) fn fill_block(
        &mut self,
        cols: std::ops::Range<usize>,
        rows: std::ops::Range<usize>,
    ) {
        for j in rows {
            self.set_run(j, cols.start, cols.end);
        }
    }

    fn clear_tail(&mut self) {
        let n = self.frame.cell_count();
        if !n.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
    }

    /// Exact number of member cells.
    pub fn pixel_count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Member area in square meters.
    pub fn area(&self) -> f64 {
        let res = self.frame.resolution();
        self.pixel_count() as f64 * res * res
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_frame(&self, other: &Region) -> Result<()> {
        if self.frame == other.frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch)
        }
    }

    fn zip(&self, other: &Region, op: impl Fn(u64, u64) -> u64) -> Result<Region> {
        self.check_frame(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(Region {
            frame: self.frame,
            words,
        })
    }

    fn zip_count(&self, other: &Region, op: impl Fn(u64, u64) -> u64) -> Result<u64> {
        self.check_frame(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| op(a, b).count_ones() as u64)
            .sum())
    }

    pub fn intersect(&self, other: &Region) -> Result<Region> {
        self.zip(other, |a, b| a & b)
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        self.zip(other, |a, b| a | b)
    }

    /// Cells of `self` not in `other`.
    pub fn difference(&self, other: &Region) -> Result<Region> {
        self.zip(other, |a, b| a & !b)
    }

    /// Cells of the frame not in `self`.
    pub fn complement(&self) -> Region {
        let mut r = Region {
            frame: self.frame,
            words: self.words.iter().map(|w| !w).collect(),
        };
        r.clear_tail();
        r
    }

    /// `pixel_count(self ∩ other)` without materializing the intersection.
    pub fn intersection_count(&self, other: &Region) -> Result<u64> {
        self.zip_count(other, |a, b| a & b)
    }

    /// `pixel_count(self \ other)` without materializing the difference.
    pub fn difference_count(&self, other: &Region) -> Result<u64> {
        self.zip_count(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &Region) -> Result<bool> {
        Ok(self.difference_count(other)? == 0)
    }

    pub fn is_disjoint(&self, other: &Region) -> Result<bool> {
        Ok(self.intersection_count(other)? == 0)
    }

    /// Morphological dilation by a Euclidean disk: every cell whose center
    /// lies within `dist` meters of a member cell's center.
    pub fn buffer(&self, dist: f64) -> Result<Region> {
        if !(dist >= 0.0) || !dist.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "buffer distance must be a finite non-negative value, got {dist}"
            )));
        }
        if dist == 0.0 || self.is_empty() {
            return Ok(self.clone());
        }
        Ok(DistanceField::from_region(self).within(dist))
    }

    /// Iterates member cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.frame.width();
        self.words.iter().enumerate().flat_map(move |(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let idx = w * 64 + b;
                Some((idx % width, idx / width))
            })
        })
    }

    /// Maximal horizontal runs of member cells, row by row.
    pub fn runs(&self) -> Vec<Run> {
        let mut runs: Vec<Run> = Vec::new();
        for (i, j) in self.cells() {
            match runs.last_mut() {
                Some(r) if r.row == j && r.end == i => r.end += 1,
                _ => runs.push(Run {
                    row: j,
                    start: i,
                    end: i + 1,
                }),
            }
        }
        runs
    }
}
