//! Pixel-grid region algebra.
//!
//! Shapes are rasterized onto a [`PlotFrame`] by the cell-center rule and
//! combined as exact cell sets. Buffering is Euclidean dilation measured
//! between cell centers.

mod closed_form;
mod distance;
mod frame;
mod region;
mod shape;

pub use closed_form::{rect_region_areas, RectAreas};
pub use distance::DistanceField;
pub use frame::PlotFrame;
pub use region::{Region, Run};
pub use shape::{PolyShape, RectShape, Shape};

/// Fraction of a pixel absorbed when comparing cell centers against
/// boundaries, so that decimal coordinates landing on a center do not
/// flip with floating-point noise.
pub(crate) const SNAP: f64 = 1e-9;
