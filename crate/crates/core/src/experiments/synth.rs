use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatorEnsemble, Crown, Plot};
use crate::geometry::{PlotFrame, PolyShape, RectShape, Shape};
use crate::{Error, Result};

/// Layout and warp magnitudes of a synthetic annotator ensemble.
///
/// Base crowns are axis-aligned boxes placed one per cell of a square grid
/// over each plot. Every annotator sees each base crown through an
/// independent warp: per-axis scale in `[1 - scale, 1 + scale]`, rotation in
/// `[-rotation_deg, rotation_deg]`, and a translation drawn uniformly from a
/// disk of radius `translation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub frame: PlotFrame,
    pub plots: usize,
    pub crowns_per_plot: usize,
    pub annotators: usize,
    /// Range of base box side lengths, meters.
    pub min_size: f64,
    pub max_size: f64,
    pub translation: f64,
    pub scale: f64,
    pub rotation_deg: f64,
    /// Emit rotated boxes as polygons instead of their bounding boxes.
    pub polygons: bool,
    pub seed: u64,
    /// Redraws allowed per warped crown before giving up.
    pub retry_budget: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            frame: PlotFrame::new(0.0, 0.0, 40.0, 40.0, 0.1).expect("valid default frame"),
            plots: 4,
            crowns_per_plot: 16,
            annotators: 4,
            min_size: 3.0,
            max_size: 8.0,
            translation: 0.5,
            scale: 0.1,
            rotation_deg: 0.0,
            polygons: false,
            seed: 0,
            retry_budget: 32,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.plots == 0 || self.crowns_per_plot == 0 {
            return bad("need at least one plot and one crown per plot".into());
        }
        if self.annotators < 1 {
            return bad("need at least one annotator".into());
        }
        if !(self.min_size > 0.0 && self.max_size >= self.min_size && self.max_size.is_finite()) {
            return bad(format!(
                "invalid size range [{}, {}]",
                self.min_size, self.max_size
            ));
        }
        for (name, v) in [
            ("translation", self.translation),
            ("scale", self.scale),
            ("rotation_deg", self.rotation_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("warp magnitude {name} must be >= 0, got {v}"));
            }
        }
        if self.scale >= 1.0 {
            return bad(format!("scale magnitude must be < 1, got {}", self.scale));
        }
        Ok(())
    }
}

struct Base {
    x: f64,
    y: f64,
    l: f64,
    h: f64,
}

/// Deterministic synthetic ensemble for `spec`.
pub fn synth_ensemble(spec: &SynthSpec) -> Result<AnnotatorEnsemble> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let f = &spec.frame;
    let side = (spec.crowns_per_plot as f64).sqrt().ceil() as usize;
    let cw = (f.x_max() - f.x_min()) / side as f64;
    let ch = (f.y_max() - f.y_min()) / side as f64;

    let plots: Vec<Plot> = (0..spec.plots)
        .map(|p| Plot {
            id: format!("plot{}", p + 1),
            frame: *f,
        })
        .collect();
    let annotators: Vec<String> = (0..spec.annotators)
        .map(|a| format!("a{}", a + 1))
        .collect();

    let mut crowns = Vec::with_capacity(spec.plots * spec.crowns_per_plot);
    for p in 0..spec.plots {
        for c in 0..spec.crowns_per_plot {
            let (col, row) = (c % side, c / side);
            let l = rng.random_range(spec.min_size..=spec.max_size);
            let h = rng.random_range(spec.min_size..=spec.max_size);
            let slack_x = ((cw - l) / 4.0).max(0.0);
            let slack_y = ((ch - h) / 4.0).max(0.0);
            let base = Base {
                x: f.x_min() + (col as f64 + 0.5) * cw + rng.random_range(-slack_x..=slack_x),
                y: f.y_min() + (row as f64 + 0.5) * ch + rng.random_range(-slack_y..=slack_y),
                l,
                h,
            };
            let id = format!("p{}c{:02}", p + 1, c);
            let shapes = (0..spec.annotators)
                .map(|_| warp_within_frame(&base, spec, &mut rng, &id))
                .collect::<Result<Vec<_>>>()?;
            crowns.push(Crown {
                id,
                plot: p,
                shapes,
            });
        }
    }
    AnnotatorEnsemble::new(plots, annotators, crowns)
}

fn warp_within_frame(
    base: &Base,
    spec: &SynthSpec,
    rng: &mut ChaCha8Rng,
    id: &str,
) -> Result<Shape> {
    let f = &spec.frame;
    for _ in 0..=spec.retry_budget {
        let shape = warp(base, spec, rng)?;
        let (x0, y0, x1, y1) = shape.bbox();
        if x0 >= f.x_min() && y0 >= f.y_min() && x1 <= f.x_max() && y1 <= f.y_max() {
            return Ok(shape);
        }
    }
    Err(Error::InvalidInput(format!(
        "crown {id} kept leaving the frame after {} redraws",
        spec.retry_budget
    )))
}

fn warp(base: &Base, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Shape> {
    let sx = 1.0 + spec.scale * rng.random_range(-1.0..=1.0);
    let sy = 1.0 + spec.scale * rng.random_range(-1.0..=1.0);
    let theta = (spec.rotation_deg * rng.random_range(-1.0..=1.0)).to_radians();
    let r = spec.translation * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let (cx, cy) = (base.x + r * phi.cos(), base.y + r * phi.sin());
    let (hl, hh) = (base.l * sx / 2.0, base.h * sy / 2.0);

    if theta == 0.0 && !spec.polygons {
        return Ok(RectShape::new(cx, cy, 2.0 * hl, 2.0 * hh)?.into());
    }
    let (s, c) = theta.sin_cos();
    let ring: Vec<[f64; 2]> = [(-hl, -hh), (hl, -hh), (hl, hh), (-hl, hh)]
        .iter()
        .map(|&(u, v)| [cx + c * u - s * v, cy + s * u + c * v])
        .collect();
    if spec.polygons {
        return Ok(PolyShape::new(ring, Vec::new())?.into());
    }
    let xs = ring.iter().map(|p| p[0]);
    let ys = ring.iter().map(|p| p[1]);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    Ok(RectShape::from_bounds(x0, y0, x1, y1)?.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            frame: PlotFrame::new(0.0, 0.0, 30.0, 30.0, 0.5).unwrap(),
            plots: 2,
            crowns_per_plot: 9,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = synth_ensemble(&small()).unwrap();
        let b = synth_ensemble(&small()).unwrap();
        assert_eq!(a, b);
        let c = synth_ensemble(&SynthSpec {
            seed: 12,
            ..small()
        })
        .unwrap();
        assert_ne!(a, c);
        assert_eq!(a.crowns.len(), 18);
        assert_eq!(a.annotators, vec!["a1", "a2", "a3", "a4"]);
    }

    #[test]
    fn zero_magnitudes_give_identical_annotators() {
        let spec = SynthSpec {
            translation: 0.0,
            scale: 0.0,
            rotation_deg: 0.0,
            ..small()
        };
        for c in synth_ensemble(&spec).unwrap().crowns {
            assert!(c.shapes.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn translation_stays_within_bound() {
        let spec = SynthSpec {
            scale: 0.0,
            translation: 0.5,
            annotators: 6,
            ..small()
        };
        let base = synth_ensemble(&SynthSpec {
            translation: 0.0,
            ..spec.clone()
        })
        .unwrap();
        let e = synth_ensemble(&spec).unwrap();
        // Every draw is consumed whatever the magnitudes, so the zero-translation
        // run shares its base crowns with the jittered one.
        let mut max_shift: f64 = 0.0;
        for (cb, ce) in base.crowns.iter().zip(&e.crowns) {
            let (bx, by) = cb.shapes[0].centroid();
            for s in &ce.shapes {
                let (x, y) = s.centroid();
                let d = ((x - bx).powi(2) + (y - by).powi(2)).sqrt();
                assert!(d <= 0.5 + 1e-12, "shift {d}");
                max_shift = max_shift.max(d);
            }
        }
        assert!(max_shift > 0.3);
        assert_eq!(base.crowns.len(), e.crowns.len());
    }

    #[test]
    fn rotation_yields_bbox_or_polygon() {
        let spec = SynthSpec {
            rotation_deg: 20.0,
            ..small()
        };
        let boxes = synth_ensemble(&spec).unwrap();
        assert!(boxes
            .crowns
            .iter()
            .flat_map(|c| &c.shapes)
            .all(|s| matches!(s, Shape::Rect(_))));
        let polys = synth_ensemble(&SynthSpec {
            polygons: true,
            ..spec
        })
        .unwrap();
        assert!(polys
            .crowns
            .iter()
            .flat_map(|c| &c.shapes)
            .all(|s| matches!(s, Shape::Poly(_))));
        for (b, p) in boxes.crowns.iter().zip(&polys.crowns) {
            for (sb, sp) in b.shapes.iter().zip(&p.shapes) {
                let (u, v) = (sb.bbox(), sp.bbox());
                assert!((u.0 - v.0).abs() < 1e-9 && (u.3 - v.3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impossible_layout_errors() {
        let spec = SynthSpec {
            frame: PlotFrame::new(0.0, 0.0, 5.0, 5.0, 0.5).unwrap(),
            crowns_per_plot: 1,
            min_size: 6.0,
            max_size: 6.0,
            retry_budget: 3,
            ..small()
        };
        assert!(synth_ensemble(&spec).is_err());
    }
}
