use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::SNAP;
use crate::{Error, Result};

/// Georeferenced pixel grid onto which every region is rasterized.
///
/// Cell `(i, j)` covers `[x_min + i·res, x_min + (i+1)·res) × [y_min + j·res, …)`;
/// `i` indexes columns (x) and `j` rows (y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame", into = "RawFrame")]
pub struct PlotFrame {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    resolution: f64,
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    resolution_m: f64,
}

impl TryFrom<RawFrame> for PlotFrame {
    type Error = Error;

    fn try_from(raw: RawFrame) -> Result<Self> {
        PlotFrame::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max, raw.resolution_m)
    }
}

impl From<PlotFrame> for RawFrame {
    fn from(f: PlotFrame) -> Self {
        RawFrame {
            x_min: f.x_min,
            y_min: f.y_min,
            x_max: f.x_max,
            y_max: f.y_max,
            resolution_m: f.resolution,
        }
    }
}

impl PlotFrame {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, resolution: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max, resolution]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "frame coordinates must be finite".into(),
            ));
        }
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frame resolution must be positive, got {resolution}"
            )));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::InvalidArgument(format!(
                "empty frame extent [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        let width = ((x_max - x_min) / resolution).round();
        let height = ((y_max - y_min) / resolution).round();
        if width < 1.0 || height < 1.0 {
            return Err(Error::InvalidArgument(
                "frame is smaller than one pixel".into(),
            ));
        }
        Ok(PlotFrame {
            x_min,
            y_min,
            x_max,
            y_max,
            resolution,
            width: width as usize,
            height: height as usize,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Number of pixel columns.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixel rows.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// Length of the frame diagonal in meters.
    pub fn diagonal(&self) -> f64 {
        let w = self.width as f64 * self.resolution;
        let h = self.height as f64 * self.resolution;
        w.hypot(h)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.column_center(i), self.row_center(j))
    }

    pub fn column_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.resolution
    }

    pub fn row_center(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.resolution
    }

    /// Columns whose centers fall in `[lo, hi)`, clipped to the frame.
    pub fn column_span(&self, lo: f64, hi: f64) -> Range<usize> {
        span(lo, hi, self.x_min, self.resolution, self.width)
    }

    /// Rows whose centers fall in `[lo, hi)`, clipped to the frame.
    pub fn row_span(&self, lo: f64, hi: f64) -> Range<usize> {
        span(lo, hi, self.y_min, self.resolution, self.height)
    }
}

fn span(lo: f64, hi: f64, origin: f64, res: f64, n: usize) -> Range<usize> {
    if !(hi > lo) {
        return 0..0;
    }
    let first = ((lo - origin) / res - 0.5 - SNAP).ceil();
    let end = ((hi - origin) / res - 0.5 - SNAP).ceil();
    let clamp = |v: f64| v.max(0.0).min(n as f64) as usize;
    let (first, end) = (clamp(first), clamp(end));
    if end <= first {
        0..0
    } else {
        first..end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_round_to_whole_pixels() {
        let f = PlotFrame::new(0.0, 0.0, 40.0, 40.0, 0.1).unwrap();
        assert_eq!((f.width(), f.height()), (400, 400));
        let f = PlotFrame::new(0.0, 0.0, 40.0, 20.0, 1.0).unwrap();
        assert_eq!(f.cell_count(), 800);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(PlotFrame::new(0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(PlotFrame::new(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(PlotFrame::new(0.0, 0.0, 1.0, 1.0, -1.0).is_err());
        assert!(PlotFrame::new(0.0, 0.0, 0.2, 1.0, 1.0).is_err());
        assert!(PlotFrame::new(0.0, f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn spans_are_half_open_on_centers() {
        let f = PlotFrame::new(0.0, 0.0, 10.0, 10.0, 1.0).unwrap();
        assert_eq!(f.column_span(2.0, 5.0), 2..5);
        // boundary on a center: included at lo, excluded at hi
        assert_eq!(f.column_span(2.5, 5.5), 2..5);
        assert_eq!(f.column_span(-3.0, 3.0), 0..3);
        assert_eq!(f.column_span(8.0, 30.0), 8..10);
        assert_eq!(f.column_span(11.0, 30.0), 0..0);
        assert_eq!(f.column_span(4.2, 4.4), 0..0);
    }

    #[test]
    fn decimal_boundaries_do_not_flip() {
        let f = PlotFrame::new(0.0, 0.0, 40.0, 40.0, 0.1).unwrap();
        assert_eq!(f.column_span(10.0, 20.0).len(), 100);
        assert_eq!(f.column_span(10.05, 10.35).len(), 3);
    }
}
