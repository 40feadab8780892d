//! Pairing delineations with desired targets and folding per-target scores
//! into a global figure.
//!
//! All outputs are ordered by identifier, never by input position, so
//! shuffling the inputs cannot change a result.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{PlotFrame, Region, Shape};
use crate::{Error, Result};

/// A shape with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub id: String,
    pub shape: Shape,
}

impl Labeled {
    pub fn new(id: impl Into<String>, shape: impl Into<Shape>) -> Self {
        Labeled {
            id: id.into(),
            shape: shape.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    MaxIou,
    NearestCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Keep the lowest score among a target's delineations.
    #[default]
    MinOfTies,
    /// Average a target's scores and divide by the number of delineations
    /// attributed to it, unmatched ones included.
    MeanDividedByCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub target_id: String,
    pub delineation_id: String,
    /// IoU for `max_iou`, center distance (m) for `nearest_center`.
    pub pairing_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedDelineation {
    pub id: String,
    /// Target with the nearest center, used by the count penalty.
    pub nearest_target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub strategy: Strategy,
    pub pairs: Vec<MatchPair>,
    pub unmatched_targets: Vec<String>,
    pub unmatched_delineations: Vec<UnmatchedDelineation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScore {
    pub target_id: String,
    pub score: f64,
    pub n_assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalScore {
    pub mean: f64,
    /// Population standard deviation over targets.
    pub std_dev: f64,
    pub per_target: Vec<TargetScore>,
    pub penalty_mode: PenaltyMode,
}

fn sorted_by_id(items: &[Labeled], what: &str) -> Result<Vec<Labeled>> {
    let mut v = items.to_vec();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = v.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidInput(format!(
            "duplicate {what} id {:?}",
            w[0].id
        )));
    }
    Ok(v)
}

fn center_distance(a: &Shape, b: &Shape) -> f64 {
    let (ax, ay) = a.centroid();
    let (bx, by) = b.centroid();
    (ax - bx).hypot(ay - by)
}

fn nearest_target(d: &Labeled, targets: &[Labeled]) -> Option<String> {
    // targets are sorted, so the first minimum is the smallest id
    targets
        .iter()
        .map(|t| (center_distance(&t.shape, &d.shape), &t.id))
        .fold(
            None,
            |best: Option<(f64, &String)>, (dist, id)| match best {
                Some((b, _)) if b <= dist => best,
                _ => Some((dist, id)),
            },
        )
        .map(|(_, id)| id.clone())
}

fn finish(
    strategy: Strategy,
    mut pairs: Vec<MatchPair>,
    targets: &[Labeled],
    delineations: &[Labeled],
) -> MatchResult {
    pairs.sort_by(|a, b| {
        a.target_id
            .cmp(&b.target_id)
            .then_with(|| a.delineation_id.cmp(&b.delineation_id))
    });
    let paired_t: BTreeSet<&str> = pairs.iter().map(|p| p.target_id.as_str()).collect();
    let paired_d: BTreeSet<&str> = pairs.iter().map(|p| p.delineation_id.as_str()).collect();
    let unmatched_targets = targets
        .iter()
        .filter(|t| !paired_t.contains(t.id.as_str()))
        .map(|t| t.id.clone())
        .collect();
    let unmatched_delineations = delineations
        .iter()
        .filter(|d| !paired_d.contains(d.id.as_str()))
        .map(|d| UnmatchedDelineation {
            id: d.id.clone(),
            nearest_target: nearest_target(d, targets),
        })
        .collect();
    MatchResult {
        strategy,
        pairs,
        unmatched_targets,
        unmatched_delineations,
    }
}

/// Greedy one-to-one matching by descending IoU. Pairs with zero overlap
/// are never matched. Ties break on target id, then delineation id.
pub fn match_max_iou(
    delineations: &[Labeled],
    targets: &[Labeled],
    frame: &PlotFrame,
) -> Result<MatchResult> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no targets to match against".into()));
    }
    let targets = sorted_by_id(targets, "target")?;
    let delineations = sorted_by_id(delineations, "delineation")?;

    let t_regions: Vec<Region> = targets.iter().map(|t| t.shape.rasterize(frame)).collect();
    let d_regions: Vec<Region> = delineations
        .iter()
        .map(|d| d.shape.rasterize(frame))
        .collect();

    let mut candidates = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        for (di, d) in delineations.iter().enumerate() {
            if !bboxes_overlap(&t.shape, &d.shape) {
                continue;
            }
            let inter = t_regions[ti].intersection_count(&d_regions[di])?;
            if inter == 0 {
                continue;
            }
            let union = t_regions[ti].pixel_count() + d_regions[di].pixel_count() - inter;
            candidates.push((inter as f64 / union as f64, ti, di));
        }
    }
    let pairs = greedy_one_to_one(candidates, targets.len(), delineations.len())
        .into_iter()
        .map(|(score, ti, di)| MatchPair {
            target_id: targets[ti].id.clone(),
            delineation_id: delineations[di].id.clone(),
            pairing_score: score,
        })
        .collect();
    Ok(finish(Strategy::MaxIou, pairs, &targets, &delineations))
}

/// Takes `(score, target, delineation)` candidates best-first; each index is
/// used at most once. Indices follow id order, so index ties are id ties.
pub(crate) fn greedy_one_to_one(
    mut candidates: Vec<(f64, usize, usize)>,
    n_targets: usize,
    n_delineations: usize,
) -> Vec<(f64, usize, usize)> {
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut t_used = vec![false; n_targets];
    let mut d_used = vec![false; n_delineations];
    let mut out = Vec::new();
    for (score, ti, di) in candidates {
        if t_used[ti] || d_used[di] {
            continue;
        }
        t_used[ti] = true;
        d_used[di] = true;
        out.push((score, ti, di));
    }
    out
}

fn bboxes_overlap(a: &Shape, b: &Shape) -> bool {
    let (ax0, ay0, ax1, ay1) = a.bbox();
    let (bx0, by0, bx1, by1) = b.bbox();
    ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1
}

/// Gives every target the delineation whose center is nearest to its own.
///
/// Equidistant candidates are resolved by keeping the one that `score`
/// rates lowest, then by id. A delineation may serve several targets.
pub fn match_nearest_center<F>(
    delineations: &[Labeled],
    targets: &[Labeled],
    score: F,
) -> Result<MatchResult>
where
    F: Fn(&Labeled, &Labeled) -> f64,
{
    let targets = sorted_by_id(targets, "target")?;
    let delineations = sorted_by_id(delineations, "delineation")?;
    let mut pairs = Vec::new();
    for t in &targets {
        let dists: Vec<f64> = delineations
            .iter()
            .map(|d| center_distance(&t.shape, &d.shape))
            .collect();
        let Some(min) = dists.iter().copied().reduce(f64::min) else {
            continue;
        };
        let eps = 1e-9 * min.max(1.0);
        let chosen = delineations
            .iter()
            .zip(&dists)
            .filter(|(_, &dist)| dist - min <= eps)
            .map(|(d, _)| (score(t, d), d))
            .reduce(|best, cand| if cand.0 < best.0 { cand } else { best })
            .map(|(_, d)| d)
            .expect("at least one delineation at the minimum");
        pairs.push(MatchPair {
            target_id: t.id.clone(),
            delineation_id: chosen.id.clone(),
            pairing_score: min,
        });
    }
    Ok(finish(
        Strategy::NearestCenter,
        pairs,
        &targets,
        &delineations,
    ))
}

/// Per-target scores and their mean. Unmatched targets score 0.
///
/// `scores` maps `(target_id, delineation_id)` to the pair's score and must
/// cover every pair of `m`.
pub fn aggregate(
    m: &MatchResult,
    scores: &BTreeMap<(String, String), f64>,
    mode: PenaltyMode,
) -> Result<GlobalScore> {
    let mut per: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for t in &m.unmatched_targets {
        per.entry(t).or_default();
    }
    for p in &m.pairs {
        let s = scores
            .get(&(p.target_id.clone(), p.delineation_id.clone()))
            .copied()
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "no score for pair ({}, {})",
                    p.target_id, p.delineation_id
                ))
            })?;
        per.entry(&p.target_id).or_default().0.push(s);
    }
    if per.is_empty() {
        return Err(Error::InvalidInput(
            "cannot aggregate over zero targets".into(),
        ));
    }
    for u in &m.unmatched_delineations {
        if let Some(t) = &u.nearest_target {
            if let Some(entry) = per.get_mut(t.as_str()) {
                entry.1 += 1;
            }
        }
    }

    let per_target: Vec<TargetScore> = per
        .into_iter()
        .map(|(id, (s, extra))| {
            let (score, n_assigned) = if s.is_empty() {
                (0.0, 0)
            } else {
                match mode {
                    PenaltyMode::MinOfTies => {
                        (s.iter().copied().fold(f64::INFINITY, f64::min), s.len())
                    }
                    PenaltyMode::MeanDividedByCount => {
                        let n = s.len() + extra;
                        let mean = s.iter().sum::<f64>() / s.len() as f64;
                        (mean / n as f64, n)
                    }
                }
            };
            TargetScore {
                target_id: id.to_string(),
                score,
                n_assigned,
            }
        })
        .collect();

    let n = per_target.len() as f64;
    let mean = per_target.iter().map(|t| t.score).sum::<f64>() / n;
    let var = per_target
        .iter()
        .map(|t| (t.score - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(GlobalScore {
        mean,
        std_dev: var.sqrt(),
        per_target,
        penalty_mode: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RectShape;

    fn frame() -> PlotFrame {
        PlotFrame::new(0.0, 0.0, 40.0, 40.0, 1.0).unwrap()
    }

    fn rect(id: &str, x: f64, y: f64, l: f64, h: f64) -> Labeled {
        Labeled::new(id, RectShape::new(x, y, l, h).unwrap())
    }

    fn ids(m: &MatchResult) -> Vec<(&str, &str)> {
        m.pairs
            .iter()
            .map(|p| (p.target_id.as_str(), p.delineation_id.as_str()))
            .collect()
    }

    #[test]
    fn identical_delineation_matches_its_target() {
        let t = vec![
            rect("t1", 10.0, 10.0, 6.0, 6.0),
            rect("t2", 30.0, 30.0, 6.0, 6.0),
        ];
        let d = vec![rect("d1", 10.0, 10.0, 6.0, 6.0)];
        let m = match_max_iou(&d, &t, &frame()).unwrap();
        assert_eq!(ids(&m), vec![("t1", "d1")]);
        assert_eq!(m.pairs[0].pairing_score, 1.0);
        assert_eq!(m.unmatched_targets, vec!["t2"]);
    }

    #[test]
    fn greedy_order_on_iou_matrix() {
        let matrix = [[0.8, 0.1], [0.2, 0.6]];
        let mut cand = vec![];
        for (ti, row) in matrix.iter().enumerate() {
            for (di, &v) in row.iter().enumerate() {
                cand.push((v, ti, di));
            }
        }
        let out = greedy_one_to_one(cand, 2, 2);
        assert_eq!(out, vec![(0.8, 0, 0), (0.6, 1, 1)]);
    }

    #[test]
    fn greedy_prefers_larger_overlap() {
        let t = vec![
            rect("t1", 10.0, 10.0, 8.0, 8.0),
            rect("t2", 20.0, 10.0, 8.0, 8.0),
        ];
        // d1 overlaps t1 heavily and t2 slightly; d2 overlaps both partially
        let d = vec![
            rect("d1", 11.0, 10.0, 8.0, 8.0),
            rect("d2", 18.0, 10.0, 8.0, 8.0),
        ];
        let m = match_max_iou(&d, &t, &frame()).unwrap();
        assert_eq!(ids(&m), vec![("t1", "d1"), ("t2", "d2")]);
    }

    #[test]
    fn zero_iou_never_matches() {
        let t = vec![rect("t1", 5.0, 5.0, 4.0, 4.0)];
        let d = vec![rect("d1", 30.0, 30.0, 4.0, 4.0)];
        let m = match_max_iou(&d, &t, &frame()).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(
            m.unmatched_delineations[0].nearest_target.as_deref(),
            Some("t1")
        );
        assert!(match_max_iou(&d, &[], &frame()).is_err());
        let m = match_max_iou(&[], &t, &frame()).unwrap();
        assert_eq!(m.unmatched_targets, vec!["t1"]);
    }

    #[test]
    fn nearest_center_pairs_by_distance() {
        let t = vec![
            rect("a", 0.0, 0.0, 2.0, 2.0),
            rect("b", 10.0, 10.0, 2.0, 2.0),
        ];
        let d = vec![rect("x", 9.0, 9.0, 2.0, 2.0), rect("y", 1.0, 1.0, 2.0, 2.0)];
        let m = match_nearest_center(&d, &t, |_, _| 1.0).unwrap();
        assert_eq!(ids(&m), vec![("a", "y"), ("b", "x")]);
        assert!((m.pairs[0].pairing_score - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nearest_center_tie_keeps_lower_score() {
        let t = vec![rect("t", 10.0, 10.0, 4.0, 4.0)];
        let d = vec![
            rect("big", 13.0, 10.0, 4.0, 4.0),
            rect("small", 7.0, 10.0, 4.0, 4.0),
        ];
        let scores = |_: &Labeled, d: &Labeled| if d.id == "big" { 0.3 } else { 0.9 };
        let m = match_nearest_center(&d, &t, scores).unwrap();
        assert_eq!(ids(&m), vec![("t", "big")]);
        let m = match_nearest_center(&d, &t, |_, d| if d.id == "big" { 0.9 } else { 0.3 }).unwrap();
        assert_eq!(ids(&m), vec![("t", "small")]);
    }

    #[test]
    fn nearest_center_without_delineations() {
        let t = vec![rect("t", 10.0, 10.0, 4.0, 4.0)];
        let m = match_nearest_center(&[], &t, |_, _| 1.0).unwrap();
        assert!(m.pairs.is_empty());
        let g = aggregate(&m, &BTreeMap::new(), PenaltyMode::MinOfTies).unwrap();
        assert_eq!(g.mean, 0.0);
        assert_eq!(g.per_target[0].n_assigned, 0);
    }

    fn result(pairs: &[(&str, &str)], unmatched: &[&str]) -> MatchResult {
        MatchResult {
            strategy: Strategy::MaxIou,
            pairs: pairs
                .iter()
                .map(|(t, d)| MatchPair {
                    target_id: t.to_string(),
                    delineation_id: d.to_string(),
                    pairing_score: 1.0,
                })
                .collect(),
            unmatched_targets: unmatched.iter().map(|s| s.to_string()).collect(),
            unmatched_delineations: vec![],
        }
    }

    fn scores(v: &[(&str, &str, f64)]) -> BTreeMap<(String, String), f64> {
        v.iter()
            .map(|(t, d, s)| ((t.to_string(), d.to_string()), *s))
            .collect()
    }

    #[test]
    fn aggregate_examples() {
        let m = result(&[("t1", "d1"), ("t2", "d2")], &[]);
        let g = aggregate(
            &m,
            &scores(&[("t1", "d1", 1.0), ("t2", "d2", 1.0)]),
            PenaltyMode::MinOfTies,
        )
        .unwrap();
        assert_eq!((g.mean, g.std_dev), (1.0, 0.0));

        let m = result(&[("t1", "d1"), ("t2", "d2")], &["t3"]);
        let g = aggregate(
            &m,
            &scores(&[("t1", "d1", 1.0), ("t2", "d2", 1.0)]),
            PenaltyMode::MinOfTies,
        )
        .unwrap();
        assert!((g.mean - 2.0 / 3.0).abs() < 1e-15);

        let m = result(&[("t", "d1"), ("t", "d2")], &[]);
        let s = scores(&[("t", "d1", 0.9), ("t", "d2", 0.7)]);
        let g = aggregate(&m, &s, PenaltyMode::MeanDividedByCount).unwrap();
        assert!((g.mean - 0.4).abs() < 1e-15);
        assert_eq!(g.per_target[0].n_assigned, 2);
        let g = aggregate(&m, &s, PenaltyMode::MinOfTies).unwrap();
        assert_eq!(g.mean, 0.7);
    }

    #[test]
    fn aggregate_errors() {
        let m = result(&[], &[]);
        assert!(aggregate(&m, &BTreeMap::new(), PenaltyMode::MinOfTies).is_err());
        let m = result(&[("t", "d")], &[]);
        assert!(aggregate(&m, &BTreeMap::new(), PenaltyMode::MinOfTies).is_err());
    }

    #[test]
    fn spurious_delineation_only_lowers_count_penalty() {
        let t = vec![
            rect("t1", 10.0, 10.0, 6.0, 6.0),
            rect("t2", 30.0, 30.0, 6.0, 6.0),
        ];
        let d = vec![
            rect("d1", 10.0, 10.0, 6.0, 6.0),
            rect("d2", 30.5, 30.0, 6.0, 6.0),
        ];
        let mut with_spurious = d.clone();
        with_spurious.push(rect("zz", 12.0, 36.0, 2.0, 2.0));
        let s = scores(&[("t1", "d1", 0.9), ("t2", "d2", 0.8)]);
        for mode in [PenaltyMode::MinOfTies, PenaltyMode::MeanDividedByCount] {
            let base = aggregate(&match_max_iou(&d, &t, &frame()).unwrap(), &s, mode).unwrap();
            let more = aggregate(
                &match_max_iou(&with_spurious, &t, &frame()).unwrap(),
                &s,
                mode,
            )
            .unwrap();
            assert!(more.mean <= base.mean);
            if mode == PenaltyMode::MeanDividedByCount {
                assert!(more.mean < base.mean);
            } else {
                assert_eq!(more.mean, base.mean);
            }
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let t = vec![
            rect("t", 10.0, 10.0, 6.0, 6.0),
            rect("t", 20.0, 10.0, 6.0, 6.0),
        ];
        assert!(match_max_iou(&[], &t, &frame()).is_err());
    }
}
