use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnnotatorEnsemble, PreparedEnsemble};
use crate::regions::RcParams;
use crate::{Error, Result};

/// Inclusive arithmetic range `[low:step:high]`, serialized as a 3-array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct GridRange {
    pub low: f64,
    pub step: f64,
    pub high: f64,
}

impl From<[f64; 3]> for GridRange {
    fn from([low, step, high]: [f64; 3]) -> Self {
        GridRange { low, step, high }
    }
}

impl From<GridRange> for [f64; 3] {
    fn from(r: GridRange) -> Self {
        [r.low, r.step, r.high]
    }
}

impl GridRange {
    pub fn new(low: f64, step: f64, high: f64) -> Result<Self> {
        let r = GridRange { low, step, high };
        r.validate()?;
        Ok(r)
    }

    pub fn single(value: f64) -> Self {
        GridRange {
            low: value,
            step: 1.0,
            high: value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.step.is_finite() && self.high.is_finite()) {
            return Err(Error::InvalidArgument("grid range must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grid step must be > 0, got {}",
                self.step
            )));
        }
        if self.high < self.low {
            return Err(Error::InvalidArgument(format!(
                "grid range upper bound {} is below lower bound {}",
                self.high, self.low
            )));
        }
        Ok(())
    }

    /// Grid values `low + i·step` up to `high`, tolerant of float drift in
    /// the step count and rounded to 1e-9 so that 0.1 + 0.2 lands on 0.3.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.high - self.low) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.low + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alpha: GridRange,
    pub omega: GridRange,
    pub gamma: GridRange,
}

impl SweepGrid {
    /// α 0.1:0.1:1.0 m, ω 0.1:0.1:1.5 m, γ 1:1:7, 1050 points.
    pub fn full() -> Self {
        SweepGrid {
            alpha: GridRange::from([0.1, 0.1, 1.0]),
            omega: GridRange::from([0.1, 0.1, 1.5]),
            gamma: GridRange::from([1.0, 1.0, 7.0]),
        }
    }

    pub fn single(params: &RcParams) -> Self {
        SweepGrid {
            alpha: GridRange::single(params.alpha),
            omega: GridRange::single(params.omega),
            gamma: GridRange::single(params.gamma),
        }
    }

    /// Grid points in α-major, then ω, then γ order.
    pub fn points(&self) -> Result<Vec<(f64, f64, f64)>> {
        self.alpha.validate()?;
        self.omega.validate()?;
        self.gamma.validate()?;
        let (al, om, ga) = (
            self.alpha.values(),
            self.omega.values(),
            self.gamma.values(),
        );
        let mut out = Vec::with_capacity(al.len() * om.len() * ga.len());
        for &a in &al {
            for &o in &om {
                for &g in &ga {
                    out.push((a, o, g));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha_m: f64,
    pub omega_m: f64,
    pub gamma: f64,
    /// NaN when no crown could be scored at this point.
    pub var_rc: f64,
    pub var_iou: f64,
    pub var_iouc: f64,
    pub n_skipped: usize,
    pub n_clipped: usize,
}

impl SweepRecord {
    pub fn params(&self, template: &RcParams) -> RcParams {
        RcParams {
            alpha: self.alpha_m,
            omega: self.omega_m,
            gamma: self.gamma,
            ..*template
        }
    }
}

/// Average variance of every metric at each grid point. `template` supplies
/// the search step and ratio tolerance. Records come back in grid order.
pub fn sweep(
    ensemble: &AnnotatorEnsemble,
    grid: &SweepGrid,
    template: &RcParams,
) -> Result<Vec<SweepRecord>> {
    let points = grid.points()?;
    let prepared = PreparedEnsemble::new(ensemble)?;
    let total = ensemble.crowns.len() * ensemble.annotators.len();
    points
        .par_iter()
        .map(|&(alpha, omega, gamma)| {
            let params = RcParams {
                alpha,
                omega,
                gamma,
                ..*template
            };
            if let Err(e) = params.validate() {
                log::warn!("grid point ({alpha}, {omega}, {gamma}) is infeasible: {e}");
                return Ok(SweepRecord {
                    alpha_m: alpha,
                    omega_m: omega,
                    gamma,
                    var_rc: f64::NAN,
                    var_iou: f64::NAN,
                    var_iouc: f64::NAN,
                    n_skipped: total,
                    n_clipped: 0,
                });
            }
            Ok(match prepared.evaluate(&params)? {
                Some(cv) => SweepRecord {
                    alpha_m: alpha,
                    omega_m: omega,
                    gamma,
                    var_rc: cv.rand_crowns.avg_variance,
                    var_iou: cv.iou.avg_variance,
                    var_iouc: cv.iou_crowns.avg_variance,
                    n_skipped: cv.rand_crowns.n_skipped,
                    n_clipped: cv.rand_crowns.n_clipped,
                },
                None => SweepRecord {
                    alpha_m: alpha,
                    omega_m: omega,
                    gamma,
                    var_rc: f64::NAN,
                    var_iou: f64::NAN,
                    var_iouc: f64::NAN,
                    n_skipped: total,
                    n_clipped: 0,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_1050_distinct_points() {
        let pts = SweepGrid::full().points().unwrap();
        assert_eq!(pts.len(), 1050);
        let mut keys: Vec<_> = pts
            .iter()
            .map(|&(a, o, g)| {
                (
                    (a * 10.0).round() as i64,
                    (o * 10.0).round() as i64,
                    g as i64,
                )
            })
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 1050);
        assert_eq!(pts[0], (0.1, 0.1, 1.0));
        assert_eq!(pts[1049], (1.0, 1.5, 7.0));
    }

    #[test]
    fn range_values_are_clean() {
        assert_eq!(
            GridRange::from([0.1, 0.1, 1.0]).values(),
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        );
        assert_eq!(GridRange::single(0.7).values(), vec![0.7]);
        assert!(GridRange::new(1.0, 0.0, 2.0).is_err());
        assert!(GridRange::new(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn range_serializes_as_triple() {
        let r = GridRange::from([0.1, 0.1, 1.5]);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, "[0.1,0.1,1.5]");
        assert_eq!(serde_json::from_str::<GridRange>(&s).unwrap(), r);
    }
}
