//! RandCrowns: a buffered Rand-index score for comparing object
//! delineations against imprecisely labeled targets.
//!
//! Every region is a set of pixels on a [`PlotFrame`]. A desired target is
//! surrounded by a true-positive core (`R_a`), an ignored cushion (`R_o`) and
//! an edge ring whose area is tuned to a multiple of the core (`R_e`). A
//! delineation is then scored with squared pixel counts over those regions.
//!
//! ```
//! use randcrowns::{PlotFrame, RcParams, RectShape, Shape, TargetRegions};
//!
//! let frame = PlotFrame::new(0.0, 0.0, 40.0, 40.0, 1.0).unwrap();
//! let target = Shape::Rect(RectShape::new(15.0, 15.0, 10.0, 10.0).unwrap());
//! let params = RcParams::new(1.0, 2.0, 2.0).unwrap();
//! let regions = TargetRegions::build(&target, &params, &frame).unwrap();
//!
//! let delineation = Shape::Rect(RectShape::new(15.0, 15.0, 12.0, 12.0).unwrap());
//! let record = regions.score(&delineation.rasterize(&frame)).unwrap();
//! assert_eq!(record.rand_crowns, 1.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod regions;

pub use error::{Error, Result};
pub use geometry::{DistanceField, PlotFrame, PolyShape, RectShape, Region, Shape};
pub use metrics::ScoreRecord;
pub use regions::{EdgeMode, RcParams, RegionSet, TargetRegions};
