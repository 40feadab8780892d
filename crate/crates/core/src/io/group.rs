use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{Annotation, AnnotationFile};
use crate::experiments::{AnnotatorEnsemble, Crown, Plot};
use crate::geometry::{PlotFrame, Region, Shape};
use crate::matching::greedy_one_to_one;
use crate::{Error, Result};

/// Plot id given to features that carry none.
pub const DEFAULT_PLOT_ID: &str = "plot";

/// Result of [`group_by_crown`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub ensemble: AnnotatorEnsemble,
    /// Groups lacking a label from at least one annotator.
    pub dropped_groups: usize,
    /// Features that ended up in no complete group.
    pub dropped_features: usize,
}

/// Collects annotations from every file into crowns labeled by all
/// annotators.
///
/// Within a plot, features sharing a `crown_id` form a group. Features
/// without one are clustered around the labels of the annotator with the
/// smallest id: each other annotator contributes its best-overlapping shape
/// when the IoU exceeds `tolerance`, assigned greedily by IoU. Every plot
/// shares `frame`.
pub fn group_by_crown(
    files: &[AnnotationFile],
    frame: &PlotFrame,
    tolerance: f64,
) -> Result<Grouping> {
    if !(0.0..=1.0).contains(&tolerance) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be in [0, 1], got {tolerance}"
        )));
    }
    let all: Vec<&Annotation> = files.iter().flat_map(|f| &f.features).collect();
    let annotators: Vec<String> = all
        .iter()
        .map(|a| a.annotator_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if annotators.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "grouping needs at least 2 annotators, found {}",
            annotators.len()
        )));
    }
    let ann_index: BTreeMap<&str, usize> = annotators
        .iter()
        .enumerate()
        .map(|(k, a)| (a.as_str(), k))
        .collect();

    let mut by_plot: BTreeMap<&str, Vec<&Annotation>> = BTreeMap::new();
    for a in &all {
        by_plot
            .entry(a.plot_id.as_deref().unwrap_or(DEFAULT_PLOT_ID))
            .or_default()
            .push(a);
    }

    let mut plots = Vec::new();
    let mut crowns = Vec::new();
    let mut dropped_groups = 0;
    let mut dropped_features = 0;
    for (p, (plot_id, feats)) in by_plot.into_iter().enumerate() {
        plots.push(Plot {
            id: plot_id.to_string(),
            frame: *frame,
        });

        let mut by_id: BTreeMap<&str, Vec<Option<&Shape>>> = BTreeMap::new();
        let mut loose: Vec<Vec<&Shape>> = vec![Vec::new(); annotators.len()];
        for a in feats {
            let z = ann_index[a.annotator_id.as_str()];
            match &a.crown_id {
                Some(c) => {
                    let slot = &mut by_id
                        .entry(c)
                        .or_insert_with(|| vec![None; annotators.len()])[z];
                    if slot.is_some() {
                        return Err(Error::Validation(format!(
                            "annotator {} labels crown {c} in plot {plot_id} more than once",
                            a.annotator_id
                        )));
                    }
                    *slot = Some(&a.shape);
                }
                None => loose[z].push(&a.shape),
            }
        }

        for (id, shapes) in by_id {
            if shapes.iter().all(Option::is_some) {
                crowns.push(Crown {
                    id: id.to_string(),
                    plot: p,
                    shapes: shapes.into_iter().map(|s| s.unwrap().clone()).collect(),
                });
            } else {
                dropped_groups += 1;
                dropped_features += shapes.iter().flatten().count();
            }
        }

        let clustered = cluster(&mut loose, frame, tolerance);
        let n_loose: usize = loose.iter().map(Vec::len).sum();
        let mut used = 0;
        for (g, group) in clustered.into_iter().enumerate() {
            let present = group.iter().flatten().count();
            if present == annotators.len() {
                used += present;
                crowns.push(Crown {
                    id: format!("auto{g:03}"),
                    plot: p,
                    shapes: group.into_iter().map(|s| s.unwrap().clone()).collect(),
                });
            } else {
                dropped_groups += 1;
            }
        }
        dropped_features += n_loose - used;
    }

    if dropped_groups > 0 {
        log::info!("dropped {dropped_groups} crowns not labeled by every annotator ({dropped_features} features)");
    }
    if crowns.is_empty() {
        return Err(Error::EmptyEnsemble(
            "no crown is labeled by every annotator".into(),
        ));
    }
    Ok(Grouping {
        ensemble: AnnotatorEnsemble::new(plots, annotators, crowns)?,
        dropped_groups,
        dropped_features,
    })
}

/// Total order on shapes by geometry, so input order never matters.
fn shape_order(a: &Shape, b: &Shape) -> Ordering {
    let key = |s: &Shape| {
        let (x0, y0, x1, y1) = s.bbox();
        let mut k = vec![x0, y0, x1, y1, s.area()];
        k.extend(s.exterior().into_iter().flatten());
        k
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(ka.len().cmp(&kb.len()))
}

/// Groups of one optional shape per annotator, anchored on annotator 0.
fn cluster<'a>(
    loose: &mut [Vec<&'a Shape>],
    frame: &PlotFrame,
    tolerance: f64,
) -> Vec<Vec<Option<&'a Shape>>> {
    for shapes in loose.iter_mut() {
        shapes.sort_by(|a, b| shape_order(a, b));
    }
    let anchors = &loose[0];
    let anchor_px: Vec<Region> = anchors.iter().map(|s| s.rasterize(frame)).collect();
    let mut groups: Vec<Vec<Option<&Shape>>> = anchors
        .iter()
        .map(|&s| {
            let mut g = vec![None; loose.len()];
            g[0] = Some(s);
            g
        })
        .collect();

    for (z, shapes) in loose.iter().enumerate().skip(1) {
        let px: Vec<Region> = shapes.iter().map(|s| s.rasterize(frame)).collect();
        let mut candidates = Vec::new();
        for (ai, ra) in anchor_px.iter().enumerate() {
            for (si, rs) in px.iter().enumerate() {
                let inter = ra.intersection_count(rs).expect("same frame");
                if inter == 0 {
                    continue;
                }
                let union = ra.pixel_count() + rs.pixel_count() - inter;
                let iou = inter as f64 / union as f64;
                if iou > tolerance {
                    candidates.push((iou, ai, si));
                }
            }
        }
        for (_, ai, si) in greedy_one_to_one(candidates, anchors.len(), shapes.len()) {
            groups[ai][z] = Some(shapes[si]);
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RectShape;

    fn frame() -> PlotFrame {
        PlotFrame::new(0.0, 0.0, 50.0, 50.0, 0.5).unwrap()
    }

    fn ann(ann: &str, crown: Option<&str>, x: f64, y: f64) -> Annotation {
        let mut a = Annotation::new(RectShape::new(x, y, 4.0, 4.0).unwrap(), ann);
        a.crown_id = crown.map(str::to_string);
        a
    }

    fn file(features: Vec<Annotation>) -> AnnotationFile {
        AnnotationFile {
            crs: None,
            features,
        }
    }

    #[test]
    fn groups_by_shared_crown_ids() {
        let f1 = file(vec![
            ann("a", Some("1"), 5.0, 5.0),
            ann("a", Some("2"), 20.0, 20.0),
        ]);
        let f2 = file(vec![
            ann("b", Some("2"), 21.0, 20.0),
            ann("b", Some("1"), 5.0, 6.0),
        ]);
        let g = group_by_crown(&[f1, f2], &frame(), 0.3).unwrap();
        let ids: Vec<_> = g.ensemble.crowns.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["1", "2"]);
        assert_eq!(g.ensemble.crowns[1].shapes[1].centroid(), (21.0, 20.0));
        assert_eq!(g.dropped_groups, 0);
    }

    #[test]
    fn clusters_by_iou_without_ids() {
        let f = file(vec![
            ann("a", None, 5.0, 5.0),
            ann("a", None, 30.0, 30.0),
            ann("b", None, 30.2, 29.9),
            ann("b", None, 5.3, 5.0),
        ]);
        let g = group_by_crown(&[f], &frame(), 0.3).unwrap();
        assert_eq!(g.ensemble.crowns.len(), 2);
        for c in &g.ensemble.crowns {
            let (x0, _) = c.shapes[0].centroid();
            let (x1, _) = c.shapes[1].centroid();
            assert!((x0 - x1).abs() < 0.5);
        }
    }

    #[test]
    fn incomplete_crowns_are_dropped_and_counted() {
        let mut feats = Vec::new();
        for a in ["a", "b", "c", "d"] {
            feats.push(ann(a, Some("full"), 5.0, 5.0));
        }
        for a in ["a", "b", "c"] {
            feats.push(ann(a, Some("partial"), 20.0, 20.0));
        }
        let g = group_by_crown(&[file(feats)], &frame(), 0.3).unwrap();
        assert_eq!(g.ensemble.crowns.len(), 1);
        assert_eq!(g.dropped_groups, 1);
        assert_eq!(g.dropped_features, 3);
    }

    #[test]
    fn no_complete_group_is_an_error() {
        let f = file(vec![
            ann("a", Some("1"), 5.0, 5.0),
            ann("b", Some("2"), 5.0, 5.0),
        ]);
        assert!(matches!(
            group_by_crown(&[f], &frame(), 0.3),
            Err(Error::EmptyEnsemble(_))
        ));
    }

    #[test]
    fn shuffled_features_group_identically() {
        let feats = vec![
            ann("a", None, 5.0, 5.0),
            ann("a", None, 12.0, 5.0),
            ann("a", None, 30.0, 30.0),
            ann("b", None, 30.2, 29.9),
            ann("b", None, 5.3, 5.0),
            ann("b", None, 12.4, 5.2),
            ann("b", None, 40.0, 40.0),
            ann("a", Some("k"), 20.0, 40.0),
            ann("b", Some("k"), 20.0, 40.0),
        ];
        let base = group_by_crown(&[file(feats.clone())], &frame(), 0.3).unwrap();
        let mut rev = feats.clone();
        rev.reverse();
        let (x, y) = rev.split_at(4);
        let other = group_by_crown(&[file(y.to_vec()), file(x.to_vec())], &frame(), 0.3).unwrap();
        assert_eq!(base, other);
        assert_eq!(base.ensemble.crowns.len(), 4);
        assert_eq!(base.dropped_features, 1);
    }
}
