//! Annotator-agreement experiments: leave-one-annotator-out variance,
//! parameter sweeps, and seeded synthetic annotator ensembles.

mod crossval;
mod ensemble;
mod sweep;
mod synth;

pub use crossval::{
    average_variance, cross_validate, cross_validate_all, sample_variance, CrossValidation,
    CrownVariance, ExperimentVariance, Metric, PreparedEnsemble, VarianceReport,
};
pub use ensemble::{AnnotatorEnsemble, Crown, Plot};
pub use sweep::{sweep, GridRange, SweepGrid, SweepRecord};
pub use synth::{synth_ensemble, SynthSpec};
