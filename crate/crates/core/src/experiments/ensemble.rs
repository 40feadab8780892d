use std::collections::BTreeSet;

use crate::geometry::{PlotFrame, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub id: String,
    pub frame: PlotFrame,
}

/// One crown as drawn by every annotator, in annotator order.
#[derive(Debug, Clone, PartialEq)]
pub struct Crown {
    pub id: String,
    /// Index into [`AnnotatorEnsemble::plots`].
    pub plot: usize,
    pub shapes: Vec<Shape>,
}

/// Crowns labeled by every one of a fixed set of annotators.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorEnsemble {
    pub plots: Vec<Plot>,
    pub annotators: Vec<String>,
    pub crowns: Vec<Crown>,
}

impl AnnotatorEnsemble {
    pub fn new(plots: Vec<Plot>, annotators: Vec<String>, crowns: Vec<Crown>) -> Result<Self> {
        let e = AnnotatorEnsemble {
            plots,
            annotators,
            crowns,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let unique: BTreeSet<&String> = self.annotators.iter().collect();
        if unique.len() != self.annotators.len() {
            return Err(Error::Validation("annotator ids are not unique".into()));
        }
        for c in &self.crowns {
            if c.shapes.len() != self.annotators.len() {
                return Err(Error::Validation(format!(
                    "crown {} has {} shapes for {} annotators",
                    c.id,
                    c.shapes.len(),
                    self.annotators.len()
                )));
            }
            if c.plot >= self.plots.len() {
                return Err(Error::Validation(format!(
                    "crown {} refers to a missing plot",
                    c.id
                )));
            }
        }
        Ok(())
    }

    pub fn frame_of(&self, crown: &Crown) -> &PlotFrame {
        &self.plots[crown.plot].frame
    }

    /// Same crowns with annotators reordered by `order` (a permutation of indices).
    pub fn permute_annotators(&self, order: &[usize]) -> Result<Self> {
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != (0..self.annotators.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(
                "not a permutation of the annotators".into(),
            ));
        }
        Ok(AnnotatorEnsemble {
            plots: self.plots.clone(),
            annotators: order.iter().map(|&k| self.annotators[k].clone()).collect(),
            crowns: self
                .crowns
                .iter()
                .map(|c| Crown {
                    id: c.id.clone(),
                    plot: c.plot,
                    shapes: order.iter().map(|&k| c.shapes[k].clone()).collect(),
                })
                .collect(),
        })
    }
}
