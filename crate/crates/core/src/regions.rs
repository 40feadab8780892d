//! Construction of the scoring regions around a desired target.
//!
//! * `R_a`: the target eroded inward by `alpha` (true-positive core).
//! * `R_o`: the annulus of width `omega` around the target (ignored).
//! * `R_e`: the annulus beyond `R_o`, sized so that `|R_e| / |R_a| ≈ gamma`.
//! * `R_b`: `R_e` plus any delineation pixels beyond the outer boundary,
//!   never including the target or `R_o`.
//!
//! Box targets grow as boxes (full rectangular annuli). Other shapes grow by
//! Euclidean dilation and the edge width is found by the shrink-and-check
//! search, extended to grow when the starting width is too small and refined
//! by bisection.

use serde::{Deserialize, Serialize};

use crate::geometry::{DistanceField, PlotFrame, RectShape, Region, Shape};
use crate::metrics::{self, ScoreRecord};
use crate::{Error, Result};

/// Tunables of the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    /// Inset of the true-positive core, meters.
    pub alpha: f64,
    /// Width of the ignored cushion, meters.
    pub omega: f64,
    /// Target ratio `|R_b| / |R_a|`.
    pub gamma: f64,
    /// Shrink step of the edge search; defaults to one pixel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Accepted `|ratio - gamma|`; defaults to `0.05 * gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_tol: Option<f64>,
}

impl RcParams {
    pub fn new(alpha: f64, omega: f64, gamma: f64) -> Result<Self> {
        let p = RcParams {
            alpha,
            omega,
            gamma,
            delta: None,
            ratio_tol: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = Some(delta);
        self.validate()?;
        Ok(self)
    }

    pub fn with_ratio_tol(mut self, tol: f64) -> Result<Self> {
        self.ratio_tol = Some(tol);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} out of range: {v}")));
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha (must be > 0)", self.alpha);
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return bad("omega (must be > 0)", self.omega);
        }
        if !(self.gamma >= 1.0) || !self.gamma.is_finite() {
            return bad("gamma (must be >= 1)", self.gamma);
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) || !d.is_finite() {
                return bad("delta (must be > 0)", d);
            }
        }
        if let Some(t) = self.ratio_tol {
            if !(t >= 0.0) || !t.is_finite() {
                return bad("ratio_tol (must be >= 0)", t);
            }
        }
        Ok(())
    }

    pub fn delta_for(&self, frame: &PlotFrame) -> f64 {
        self.delta.unwrap_or(frame.resolution())
    }

    pub fn ratio_tol(&self) -> f64 {
        self.ratio_tol.unwrap_or(0.05 * self.gamma)
    }
}

/// How a target is grown outward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Boxes grow as boxes with the closed-form starting width; polygons
    /// grow by Euclidean dilation.
    #[default]
    Auto,
    /// Euclidean dilation and the iterative search for every shape.
    Iterative,
}

/// Outward growth of a target region by a distance.
#[derive(Debug)]
pub enum Growth {
    Rect { rect: RectShape, frame: PlotFrame },
    Euclidean(DistanceField),
}

impl Growth {
    pub fn for_shape(shape: &Shape, target: &Region, mode: EdgeMode) -> Growth {
        match (mode, shape) {
            (EdgeMode::Auto, Shape::Rect(rect)) => Growth::Rect {
                rect: *rect,
                frame: *target.frame(),
            },
            _ => Growth::Euclidean(DistanceField::from_region(target)),
        }
    }

    fn frame(&self) -> &PlotFrame {
        match self {
            Growth::Rect { frame, .. } => frame,
            Growth::Euclidean(f) => f.frame(),
        }
    }

    /// Pixel count of the target grown by `d`.
    pub fn count(&self, d: f64) -> u64 {
        match self {
            Growth::Rect { rect, frame } => rect.count_grown(d, frame),
            Growth::Euclidean(f) => f.count_within(d),
        }
    }

    /// The target grown by `d`.
    pub fn region(&self, d: f64) -> Region {
        match self {
            Growth::Rect { rect, frame } => rect.rasterize_grown(d, frame),
            Growth::Euclidean(f) => f.within(d),
        }
    }

    /// Grown by `outer` minus grown by `inner`.
    pub fn ring(&self, inner: f64, outer: f64) -> Region {
        match self {
            Growth::Rect { rect, frame } => rect
                .rasterize_grown(outer, frame)
                .difference(&rect.rasterize_grown(inner, frame))
                .expect("same frame"),
            Growth::Euclidean(f) => f.ring(inner, outer),
        }
    }
}

/// The true-positive core: the target eroded by `alpha`.
pub fn true_positive_region(shape: &Shape, alpha: f64, frame: &PlotFrame) -> Result<Region> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    if 2.0 * alpha >= shape.min_extent() {
        return Err(Error::DegenerateTarget(format!(
            "inset {alpha} m exceeds half the target extent {} m",
            shape.min_extent()
        )));
    }
    let r = shape.eroded(alpha, frame);
    if r.is_empty() {
        return Err(Error::DegenerateTarget(format!(
            "no pixel remains after insetting the target by {alpha} m"
        )));
    }
    Ok(r)
}

/// The ignored cushion: the target grown by `omega`, minus the target.
pub fn outer_region(shape: &Shape, omega: f64, frame: &PlotFrame) -> Result<Region> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "omega must be > 0, got {omega}"
        )));
    }
    let target = shape.rasterize(frame);
    let growth = Growth::for_shape(shape, &target, EdgeMode::Auto);
    growth.region(omega).difference(&target)
}

/// Positive root `tau` of `(h + 2ω + 2τ)(l + 2ω + 2τ) − h·l = area_ra`,
/// or 0 when the cushion alone already exceeds `area_ra`.
pub fn solve_tau(area_ra: f64, l: f64, h: f64, omega: f64) -> f64 {
    // with u = 2τ: u² + (L + H)u + (L·H − h·l − A) = 0
    let big_l = l + 2.0 * omega;
    let big_h = h + 2.0 * omega;
    let b = big_l + big_h;
    let c = big_l * big_h - h * l - area_ra;
    if c >= 0.0 {
        return 0.0;
    }
    let disc = b * b - 4.0 * c;
    let u = (-b + disc.sqrt()) / 2.0;
    (u / 2.0).max(0.0)
}

/// Result of the edge-width search.
#[derive(Debug, Clone)]
pub struct EdgeRegion {
    pub region: Region,
    /// Edge width beyond the cushion, meters.
    pub epsilon: f64,
    pub achieved_ratio: f64,
    /// Largest ratio change caused by moving `epsilon` one step either way.
    pub step_slack: f64,
    /// The frame caps the ring below the requested ratio.
    pub clipped: bool,
}

/// Edge ring for `r_a` by the shrink-and-check search starting at
/// `epsilon = 2·gamma·omega`.
pub fn edge_region_iterative(
    r_a: &Region,
    growth: &Growth,
    params: &RcParams,
) -> Result<EdgeRegion> {
    params.validate()?;
    let start = 2.0 * params.gamma * params.omega;
    solve_edge(r_a, growth, params, start)
}

fn solve_edge(r_a: &Region, growth: &Growth, params: &RcParams, start: f64) -> Result<EdgeRegion> {
    let ra = r_a.pixel_count();
    if ra == 0 {
        return Err(Error::DegenerateTarget("empty true-positive region".into()));
    }
    let frame = *growth.frame();
    let omega = params.omega;
    let gamma = params.gamma;
    let delta = params.delta_for(&frame);
    let tol = params.ratio_tol();
    let max_eps = frame.diagonal();
    let base = growth.count(omega);
    let ratio = |e: f64| (growth.count(omega + e) - base) as f64 / ra as f64;

    let mut eps = start.clamp(0.0, max_eps);
    let mut r = ratio(eps);
    let (mut lo, mut r_lo, mut hi, mut r_hi);
    if r > gamma {
        hi = eps;
        r_hi = r;
        loop {
            eps = (eps - delta).max(0.0);
            r = ratio(eps);
            if r <= gamma {
                break;
            }
            hi = eps;
            r_hi = r;
        }
        lo = eps;
        r_lo = r;
    } else {
        lo = eps;
        r_lo = r;
        let mut step = delta;
        loop {
            if lo >= max_eps {
                let clipped = gamma - r_lo > tol;
                return Ok(finish(growth, params, lo, r_lo, clipped, &ratio, delta));
            }
            let next = (lo + step).min(max_eps);
            let rn = ratio(next);
            if rn > gamma {
                hi = next;
                r_hi = rn;
                break;
            }
            lo = next;
            r_lo = rn;
            step *= 2.0;
        }
    }

    // keep r_lo <= gamma < r_hi while narrowing
    let min_width = frame.resolution() * 1e-6;
    for _ in 0..64 {
        if (gamma - r_lo).min(r_hi - gamma) <= tol || hi - lo <= min_width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let rm = ratio(mid);
        if rm > gamma {
            hi = mid;
            r_hi = rm;
        } else {
            lo = mid;
            r_lo = rm;
        }
    }
    let (eps, r) = if gamma - r_lo <= r_hi - gamma {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    Ok(finish(growth, params, eps, r, false, &ratio, delta))
}

fn finish(
    growth: &Growth,
    params: &RcParams,
    eps: f64,
    r: f64,
    clipped: bool,
    ratio: &dyn Fn(f64) -> f64,
    delta: f64,
) -> EdgeRegion {
    let up = ratio(eps + delta) - r;
    let down = r - ratio((eps - delta).max(0.0));
    EdgeRegion {
        region: growth.ring(params.omega, params.omega + eps),
        epsilon: eps,
        achieved_ratio: r,
        step_slack: up.max(down),
        clipped,
    }
}

/// `R_b`: the edge ring, extended by delineation pixels lying beyond the
/// outer boundary. The target and cushion are always excluded.
pub fn finalize_true_negative(
    r_e: &Region,
    r_o: &Region,
    target: &Region,
    delineation: &Region,
) -> Result<Region> {
    let excluded = r_o.union(target)?;
    let bounded = excluded.union(r_e)?;
    if delineation.is_subset(&bounded)? {
        return Ok(r_e.clone());
    }
    r_e.union(delineation)?.difference(&excluded)
}

/// Target-dependent regions, shared by every delineation scored against it.
#[derive(Debug)]
pub struct TargetRegions {
    target: Region,
    r_a: Region,
    r_o: Region,
    r_e: Region,
    tau: Option<f64>,
    epsilon: f64,
    achieved_ratio: f64,
    step_slack: f64,
    clipped: bool,
    mode: EdgeMode,
}

impl TargetRegions {
    pub fn build(shape: &Shape, params: &RcParams, frame: &PlotFrame) -> Result<Self> {
        Self::build_with(shape, params, frame, EdgeMode::Auto)
    }

    pub fn build_with(
        shape: &Shape,
        params: &RcParams,
        frame: &PlotFrame,
        mode: EdgeMode,
    ) -> Result<Self> {
        params.validate()?;
        let target = shape.rasterize(frame);
        let r_a = true_positive_region(shape, params.alpha, frame)?;
        let growth = Growth::for_shape(shape, &target, mode);
        let r_o = growth.region(params.omega).difference(&target)?;

        let (edge, tau) = match (&growth, shape) {
            (Growth::Rect { .. }, Shape::Rect(rect)) => {
                let core = (rect.l - 2.0 * params.alpha) * (rect.h - 2.0 * params.alpha);
                let tau = solve_tau(core, rect.l, rect.h, params.omega);
                let start = if tau > 0.0 {
                    params.gamma * tau
                } else {
                    2.0 * params.gamma * params.omega
                };
                (solve_edge(&r_a, &growth, params, start)?, Some(tau))
            }
            _ => (edge_region_iterative(&r_a, &growth, params)?, None),
        };

        Ok(TargetRegions {
            target,
            r_a,
            r_o,
            r_e: edge.region,
            tau,
            epsilon: edge.epsilon,
            achieved_ratio: edge.achieved_ratio,
            step_slack: edge.step_slack,
            clipped: edge.clipped,
            mode,
        })
    }

    pub fn target(&self) -> &Region {
        &self.target
    }

    pub fn r_a(&self) -> &Region {
        &self.r_a
    }

    pub fn r_o(&self) -> &Region {
        &self.r_o
    }

    pub fn r_e(&self) -> &Region {
        &self.r_e
    }

    /// Closed-form edge parameter, for box targets grown as boxes.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `|R_e| / |R_a|` before any delineation extends the edge.
    pub fn achieved_ratio(&self) -> f64 {
        self.achieved_ratio
    }

    pub fn step_slack(&self) -> f64 {
        self.step_slack
    }

    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn mode(&self) -> EdgeMode {
        self.mode
    }

    pub fn frame(&self) -> &PlotFrame {
        self.target.frame()
    }

    /// Completes the region set for one delineation.
    pub fn finalize(&self, delineation: &Region) -> Result<RegionSet<'_>> {
        let r_b = finalize_true_negative(&self.r_e, &self.r_o, &self.target, delineation)?;
        Ok(RegionSet { base: self, r_b })
    }

    /// Region set with `R_b = R_e`, as seen by a delineation inside the outer boundary.
    pub fn unextended(&self) -> RegionSet<'_> {
        RegionSet {
            base: self,
            r_b: self.r_e.clone(),
        }
    }

    /// Finalizes against `delineation` and scores it.
    pub fn score(&self, delineation: &Region) -> Result<ScoreRecord> {
        let set = self.finalize(delineation)?;
        metrics::rand_crowns(delineation, &set)
    }
}

/// Complete region set for one (target, delineation) pair.
#[derive(Debug, Clone)]
pub struct RegionSet<'a> {
    base: &'a TargetRegions,
    r_b: Region,
}

impl<'a> RegionSet<'a> {
    pub fn base(&self) -> &'a TargetRegions {
        self.base
    }

    pub fn target(&self) -> &Region {
        &self.base.target
    }

    pub fn r_a(&self) -> &Region {
        &self.base.r_a
    }

    pub fn r_o(&self) -> &Region {
        &self.base.r_o
    }

    pub fn r_e(&self) -> &Region {
        &self.base.r_e
    }

    pub fn r_b(&self) -> &Region {
        &self.r_b
    }

    pub fn frame(&self) -> &PlotFrame {
        self.base.frame()
    }
}
