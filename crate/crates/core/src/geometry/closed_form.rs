use super::RectShape;
use crate::{Error, Result};

/// Analytic areas (m²) of the scoring regions around a rectangular target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectAreas {
    pub true_positive: f64,
    pub outer: f64,
    pub edge: f64,
}

/// Closed-form areas of the core, cushion and edge regions of a box target.
///
/// The cushion is the full annulus between the target and the target grown
/// by `omega`; the edge is the annulus from there out to `omega + gamma·tau`.
pub fn rect_region_areas(
    target: &RectShape,
    alpha: f64,
    omega: f64,
    tau: f64,
    gamma: f64,
) -> Result<RectAreas> {
    let (l, h) = (target.l, target.h);
    if !(alpha >= 0.0) || 2.0 * alpha >= l.min(h) {
        return Err(Error::DegenerateTarget(format!(
            "inset {alpha} m empties a {l} x {h} m target"
        )));
    }
    if !(omega > 0.0) || !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need omega > 0 and tau >= 0, got omega={omega}, tau={tau}"
        )));
    }
    let inner_l = l + 2.0 * omega;
    let inner_h = h + 2.0 * omega;
    let ext = 2.0 * gamma * tau;
    Ok(RectAreas {
        true_positive: (l - 2.0 * alpha) * (h - 2.0 * alpha),
        outer: inner_l * inner_h - l * h,
        edge: (inner_l + ext) * (inner_h + ext) - inner_l * inner_h,
    })
}
