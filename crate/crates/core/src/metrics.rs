//! Pair-count terms and the RandCrowns, IoU and IoUCrowns scores.

use serde::{Deserialize, Serialize};

use crate::geometry::Region;
use crate::regions::RegionSet;
use crate::{Error, Result};

/// Scores of one (delineation, target) pair.
///
/// `a`, `b`, `c`, `d` are squared pixel counts of `D ∩ R_a`, `R_b \ D`,
/// `D ∩ R_b` and `R_a \ D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub rand_crowns: f64,
    pub iou: f64,
    pub iou_crowns: f64,
    /// A denominator was zero and the affected score was set to 0.
    pub degenerate: bool,
}

fn squared(n: u64) -> Result<u64> {
    n.checked_mul(n)
        .ok_or_else(|| Error::InvalidInput(format!("pixel count {n} overflows when squared")))
}

/// Scores `delineation` against a region set finalized for it.
pub fn rand_crowns(delineation: &Region, rs: &RegionSet<'_>) -> Result<ScoreRecord> {
    let a_px = delineation.intersection_count(rs.r_a())?;
    let d_px = rs.r_a().pixel_count() - a_px;
    let c_px = delineation.intersection_count(rs.r_b())?;
    let b_px = rs.r_b().pixel_count() - c_px;

    let (a, b, c, d) = (
        squared(a_px)?,
        squared(b_px)?,
        squared(c_px)?,
        squared(d_px)?,
    );
    let mut degenerate = false;

    let rc_den = a as u128 + b as u128 + c as u128 + d as u128;
    let rand_crowns = if rc_den == 0 {
        log::warn!("RandCrowns denominator is zero; scoring the pair as 0");
        degenerate = true;
        0.0
    } else {
        (a as u128 + b as u128) as f64 / rc_den as f64
    };

    let iouc_den = a as u128 + c as u128 + d as u128;
    let iou_crowns = if iouc_den == 0 {
        degenerate = true;
        0.0
    } else {
        a as f64 / iouc_den as f64
    };

    let iou = match iou(delineation, rs.target()) {
        Ok(v) => v,
        Err(_) => {
            degenerate = true;
            0.0
        }
    };

    Ok(ScoreRecord {
        a,
        b,
        c,
        d,
        rand_crowns,
        iou,
        iou_crowns,
        degenerate,
    })
}

/// Plain intersection over union of two regions.
pub fn iou(delineation: &Region, target: &Region) -> Result<f64> {
    let inter = delineation.intersection_count(target)?;
    let union = delineation.pixel_count() + target.pixel_count() - inter;
    if union == 0 {
        return Err(Error::InvalidInput("IoU of two empty regions".into()));
    }
    Ok(inter as f64 / union as f64)
}

/// Buffered IoU, `a / (a + c + d)`: RandCrowns without the true negatives.
pub fn iou_crowns(delineation: &Region, rs: &RegionSet<'_>) -> Result<f64> {
    Ok(rand_crowns(delineation, rs)?.iou_crowns)
}

/// Classic Rand-index pair counts for two inside/outside partitions of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    /// Pairs together in both partitions.
    pub a: u64,
    /// Pairs apart in both partitions.
    pub b: u64,
    /// Pairs together in the delineation partition only.
    pub c: u64,
    /// Pairs together in the target partition only.
    pub d: u64,
}

impl PairCounts {
    pub fn rand(&self) -> f64 {
        let total = self.a + self.b + self.c + self.d;
        if total == 0 {
            1.0
        } else {
            (self.a + self.b) as f64 / total as f64
        }
    }
}

/// Frames above this many cells are refused by [`classic_rand_pairs`].
pub const DEFAULT_PAIR_CELL_BUDGET: usize = 1 << 22;

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Exact unordered pair counts over every pixel of the frame, with each
/// region splitting the frame into inside and outside.
pub fn classic_rand_pairs(
    delineation: &Region,
    target: &Region,
    cell_budget: usize,
) -> Result<PairCounts> {
    let n = delineation.frame().cell_count();
    if n > cell_budget {
        return Err(Error::InvalidInput(format!(
            "frame of {n} cells exceeds the pair-count budget of {cell_budget}"
        )));
    }
    let both = delineation.intersection_count(target)?;
    let d_only = delineation.pixel_count() - both;
    let t_only = target.pixel_count() - both;
    let neither = n as u64 - both - d_only - t_only;

    let a = pairs(both) + pairs(d_only) + pairs(t_only) + pairs(neither);
    let together_d = pairs(both + d_only) + pairs(t_only + neither);
    let together_t = pairs(both + t_only) + pairs(d_only + neither);
    let total = pairs(n as u64);
    let c = together_d - a;
    let d = together_t - a;
    Ok(PairCounts {
        a,
        b: total - a - c - d,
        c,
        d,
    })
}
