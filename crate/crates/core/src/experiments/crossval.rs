use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnnotatorEnsemble;
use crate::geometry::Region;
use crate::metrics::ScoreRecord;
use crate::regions::{RcParams, TargetRegions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RandCrowns,
    Iou,
    IouCrowns,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RandCrowns, Metric::Iou, Metric::IouCrowns];

    pub fn of(&self, r: &ScoreRecord) -> f64 {
        match self {
            Metric::RandCrowns => r.rand_crowns,
            Metric::Iou => r.iou,
            Metric::IouCrowns => r.iou_crowns,
        }
    }
}

/// Spread of one crown's scores when one annotator is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrownVariance {
    pub plot_id: String,
    pub crown_id: String,
    pub target_annotator: String,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentVariance {
    pub target_annotator: String,
    /// Mean of the per-crown sample variances.
    pub avg_variance: f64,
    /// Crowns that entered the average.
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub metric: Metric,
    /// Mean over held-out annotators of each experiment's average variance.
    pub avg_variance: f64,
    pub per_experiment: Vec<ExperimentVariance>,
    pub per_crown: Vec<CrownVariance>,
    /// Crowns in the ensemble.
    pub k: usize,
    /// Delineations per crown in each experiment.
    pub z: usize,
    /// (experiment, crown) pairs dropped because the target had no core.
    pub n_skipped: usize,
    /// Target region sets whose edge ring was capped by the frame.
    pub n_clipped: usize,
}

/// Reports for all three metrics from one pass over the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub rand_crowns: VarianceReport,
    pub iou: VarianceReport,
    pub iou_crowns: VarianceReport,
}

impl CrossValidation {
    pub fn report(&self, metric: Metric) -> &VarianceReport {
        match metric {
            Metric::RandCrowns => &self.rand_crowns,
            Metric::Iou => &self.iou,
            Metric::IouCrowns => &self.iou_crowns,
        }
    }
}

/// Unbiased sample variance (denominator `n − 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Average over crowns of the sample variance of each crown's scores.
pub fn average_variance(per_crown_scores: &[Vec<f64>]) -> Result<f64> {
    if per_crown_scores.is_empty() {
        return Err(Error::InvalidInput("no crowns to average over".into()));
    }
    if let Some(s) = per_crown_scores.iter().find(|s| s.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "a crown needs at least 2 scores for a sample variance, got {}",
            s.len()
        )));
    }
    let k = per_crown_scores.len() as f64;
    Ok(per_crown_scores
        .iter()
        .map(|s| sample_variance(s))
        .sum::<f64>()
        / k)
}

/// An ensemble with every annotation rasterized once, for repeated
/// evaluation under different parameters.
pub struct PreparedEnsemble<'a> {
    ensemble: &'a AnnotatorEnsemble,
    regions: Vec<Vec<Region>>,
}

enum Outcome {
    Scored {
        records: Vec<ScoreRecord>,
        clipped: bool,
    },
    Skipped,
}

impl<'a> PreparedEnsemble<'a> {
    pub fn new(ensemble: &'a AnnotatorEnsemble) -> Result<Self> {
        ensemble.validate()?;
        if ensemble.annotators.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "leave-one-out needs at least 3 annotators, got {}",
                ensemble.annotators.len()
            )));
        }
        if ensemble.crowns.is_empty() {
            return Err(Error::EmptyEnsemble("the ensemble has no crowns".into()));
        }
        let regions = ensemble
            .crowns
            .par_iter()
            .map(|c| {
                let frame = ensemble.frame_of(c);
                c.shapes.iter().map(|s| s.rasterize(frame)).collect()
            })
            .collect();
        Ok(PreparedEnsemble { ensemble, regions })
    }

    pub fn ensemble(&self) -> &AnnotatorEnsemble {
        self.ensemble
    }

    /// Leave-one-annotator-out evaluation of all metrics. Returns `Ok(None)`
    /// when every crown was skipped in every experiment.
    pub fn evaluate(&self, params: &RcParams) -> Result<Option<CrossValidation>> {
        params.validate()?;
        let e = self.ensemble;
        let n_ann = e.annotators.len();
        let tasks: Vec<(usize, usize)> = (0..n_ann)
            .flat_map(|h| (0..e.crowns.len()).map(move |k| (h, k)))
            .collect();

        let outcomes: Vec<Result<Outcome>> = tasks
            .par_iter()
            .map(|&(h, k)| {
                let crown = &e.crowns[k];
                let frame = e.frame_of(crown);
                let target = match TargetRegions::build(&crown.shapes[h], params, frame) {
                    Ok(t) => t,
                    Err(Error::DegenerateTarget(msg)) => {
                        log::debug!(
                            "skipping crown {} with target annotator {}: {msg}",
                            crown.id,
                            e.annotators[h]
                        );
                        return Ok(Outcome::Skipped);
                    }
                    Err(err) => return Err(err),
                };
                if target.clipped() {
                    log::debug!("edge ring of crown {} clipped by the frame", crown.id);
                }
                let records = (0..n_ann)
                    .filter(|&z| z != h)
                    .map(|z| target.score(&self.regions[k][z]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Outcome::Scored {
                    records,
                    clipped: target.clipped(),
                })
            })
            .collect();

        let mut n_skipped = 0;
        let mut n_clipped = 0;
        let mut scored: Vec<Vec<(usize, Vec<ScoreRecord>)>> = vec![Vec::new(); n_ann];
        for (&(h, k), outcome) in tasks.iter().zip(outcomes) {
            match outcome? {
                Outcome::Skipped => n_skipped += 1,
                Outcome::Scored { records, clipped } => {
                    n_clipped += clipped as usize;
                    scored[h].push((k, records));
                }
            }
        }
        if n_skipped > 0 {
            log::info!("{n_skipped} (experiment, crown) pairs skipped as degenerate");
        }
        if scored.iter().all(|s| s.is_empty()) {
            return Ok(None);
        }

        let report = |metric: Metric| {
            let mut per_experiment = Vec::new();
            let mut per_crown = Vec::new();
            for (h, crowns) in scored.iter().enumerate() {
                if crowns.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                for (k, records) in crowns {
                    let xs: Vec<f64> = records.iter().map(|r| metric.of(r)).collect();
                    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                    let variance = sample_variance(&xs);
                    sum += variance;
                    per_crown.push(CrownVariance {
                        plot_id: e.plots[e.crowns[*k].plot].id.clone(),
                        crown_id: e.crowns[*k].id.clone(),
                        target_annotator: e.annotators[h].clone(),
                        mean,
                        variance,
                    });
                }
                per_experiment.push(ExperimentVariance {
                    target_annotator: e.annotators[h].clone(),
                    avg_variance: sum / crowns.len() as f64,
                    k: crowns.len(),
                });
            }
            let avg_variance = per_experiment.iter().map(|x| x.avg_variance).sum::<f64>()
                / per_experiment.len() as f64;
            VarianceReport {
                metric,
                avg_variance,
                per_experiment,
                per_crown,
                k: e.crowns.len(),
                z: n_ann - 1,
                n_skipped,
                n_clipped,
            }
        };

        Ok(Some(CrossValidation {
            rand_crowns: report(Metric::RandCrowns),
            iou: report(Metric::Iou),
            iou_crowns: report(Metric::IouCrowns),
        }))
    }
}

/// Leave-one-annotator-out average variance of one metric.
pub fn cross_validate(
    ensemble: &AnnotatorEnsemble,
    params: &RcParams,
    metric: Metric,
) -> Result<VarianceReport> {
    Ok(cross_validate_all(ensemble, params)?.report(metric).clone())
}

/// Leave-one-annotator-out average variance of every metric.
pub fn cross_validate_all(
    ensemble: &AnnotatorEnsemble,
    params: &RcParams,
) -> Result<CrossValidation> {
    PreparedEnsemble::new(ensemble)?
        .evaluate(params)?
        .ok_or_else(|| {
            Error::EmptyEnsemble("every crown is degenerate under these parameters".into())
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Crown, Plot};
    use crate::geometry::{PlotFrame, RectShape, Shape};

    #[test]
    fn eq15_by_hand() {
        let v = average_variance(&[vec![0.0, 1.0]]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        // K = 2: variances 1/3 and 0
        let v = average_variance(&[vec![0.0, 0.0, 1.0], vec![0.4, 0.4, 0.4]]).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        assert!(average_variance(&[]).is_err());
        assert!(average_variance(&[vec![1.0]]).is_err());
    }

    fn frame() -> PlotFrame {
        PlotFrame::new(0.0, 0.0, 40.0, 40.0, 0.5).unwrap()
    }

    fn ensemble(shapes: Vec<Vec<Shape>>) -> AnnotatorEnsemble {
        let n = shapes[0].len();
        AnnotatorEnsemble::new(
            vec![Plot {
                id: "p".into(),
                frame: frame(),
            }],
            (0..n).map(|k| format!("a{k}")).collect(),
            shapes
                .into_iter()
                .enumerate()
                .map(|(k, shapes)| Crown {
                    id: format!("c{k}"),
                    plot: 0,
                    shapes,
                })
                .collect(),
        )
        .unwrap()
    }

    fn rect(x: f64, y: f64, l: f64, h: f64) -> Shape {
        Shape::Rect(RectShape::new(x, y, l, h).unwrap())
    }

    #[test]
    fn identical_annotators_have_zero_variance() {
        let e = ensemble(vec![
            vec![rect(10.0, 10.0, 5.0, 4.0); 4],
            vec![rect(25.0, 28.0, 6.0, 7.0); 4],
        ]);
        let params = RcParams::new(0.7, 1.2, 3.0).unwrap();
        let cv = cross_validate_all(&e, &params).unwrap();
        for m in Metric::ALL {
            assert_eq!(cv.report(m).avg_variance, 0.0);
        }
        assert_eq!(cv.rand_crowns.per_experiment.len(), 4);
        assert_eq!(cv.rand_crowns.z, 3);
    }

    #[test]
    fn degenerate_crowns_are_skipped_and_counted() {
        let e = ensemble(vec![
            vec![
                rect(10.0, 10.0, 5.0, 4.0),
                rect(10.2, 10.0, 5.0, 4.0),
                rect(10.0, 10.1, 5.0, 4.0),
            ],
            vec![rect(30.0, 30.0, 1.0, 1.0); 3],
        ]);
        let params = RcParams::new(0.7, 1.2, 3.0).unwrap();
        let rep = cross_validate(&e, &params, Metric::Iou).unwrap();
        assert_eq!(rep.n_skipped, 3);
        assert!(rep.per_experiment.iter().all(|x| x.k == 1));
    }

    #[test]
    fn everything_degenerate_is_an_error() {
        let e = ensemble(vec![vec![rect(30.0, 30.0, 1.0, 1.0); 3]]);
        let params = RcParams::new(0.7, 1.2, 3.0).unwrap();
        assert!(matches!(
            cross_validate_all(&e, &params),
            Err(Error::EmptyEnsemble(_))
        ));
    }

    #[test]
    fn two_annotators_are_rejected() {
        let e = ensemble(vec![vec![rect(10.0, 10.0, 5.0, 4.0); 2]]);
        let params = RcParams::new(0.7, 1.2, 3.0).unwrap();
        assert!(cross_validate_all(&e, &params).is_err());
    }
}
