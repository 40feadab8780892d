//! File formats: GeoJSON annotations and region overlays, CSV/JSON score
//! tables, sweep tables and run configuration.
//!
//! Coordinates are plot-local meters. A `crs` member on an annotation file is
//! carried through untouched; no reprojection happens.

mod config;
mod export;
mod geojson;
mod group;

use std::path::Path;

pub use config::{
    load_config, GroupingConfig, MatchingConfig, ParamsConfig, RunConfig, SynthConfig,
};
pub use export::{
    export_regions, export_scores, load_regions, read_json, read_scores, read_sweep_csv,
    regions_to_value, write_json, write_sweep_csv, LoadedRegion, RegionLabel, RegionRole,
    ScoreFormat, ScoreReport, ScoreRow, FLAG_CLIPPED, FLAG_DEGENERATE, FLAG_UNMATCHED,
    SCORE_COLUMNS, SWEEP_COLUMNS,
};
pub use geojson::{
    annotations_to_value, load_annotations, parse_annotations, shape_from_rings, shape_geometry,
    write_annotations, Annotation, AnnotationFile, Role,
};
pub use group::{group_by_crown, Grouping, DEFAULT_PLOT_ID};

use crate::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
