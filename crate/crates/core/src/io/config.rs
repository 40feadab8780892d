use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geojson::parse_json;
use super::read_text;
use crate::experiments::{Metric, SweepGrid, SynthSpec};
use crate::geometry::PlotFrame;
use crate::matching::{PenaltyMode, Strategy};
use crate::regions::RcParams;
use crate::{Error, Result};

/// Everything a run needs besides its input files. Read from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<PlotFrame>,
    #[serde(default)]
    pub params: ParamsConfig,
    /// Metric reported by `crossval`; all three when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub matching: MatchingConfig,
    #[serde(default)]
    pub grouping: GroupingConfig,
    #[serde(default = "SweepGrid::full")]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            frame: None,
            params: ParamsConfig::default(),
            metric: None,
            matching: MatchingConfig::default(),
            grouping: GroupingConfig::default(),
            sweep: SweepGrid::full(),
            synth: SynthConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub alpha_m: f64,
    pub omega_m: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_tol: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            alpha_m: 0.7,
            omega_m: 1.2,
            gamma: 3.0,
            delta_m: None,
            ratio_tol: None,
        }
    }
}

impl ParamsConfig {
    pub fn rc_params(&self) -> Result<RcParams> {
        let p = RcParams {
            alpha: self.alpha_m,
            omega: self.omega_m,
            gamma: self.gamma,
            delta: self.delta_m,
            ratio_tol: self.ratio_tol,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingConfig {
    pub strategy: Strategy,
    pub penalty: PenaltyMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingConfig {
    /// IoU a shape must exceed to join a crown lacking a `crown_id`.
    pub tolerance: f64,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig { tolerance: 0.3 }
    }
}

/// Synthetic ensemble layout; frame and seed come from the enclosing config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub plots: usize,
    pub crowns_per_plot: usize,
    pub annotators: usize,
    pub min_size_m: f64,
    pub max_size_m: f64,
    pub translation_m: f64,
    pub scale: f64,
    pub rotation_deg: f64,
    pub polygons: bool,
    pub retry_budget: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = SynthSpec::default();
        SynthConfig {
            plots: d.plots,
            crowns_per_plot: d.crowns_per_plot,
            annotators: d.annotators,
            min_size_m: d.min_size,
            max_size_m: d.max_size,
            translation_m: d.translation,
            scale: d.scale,
            rotation_deg: d.rotation_deg,
            polygons: d.polygons,
            retry_budget: d.retry_budget,
        }
    }
}

impl RunConfig {
    pub fn rc_params(&self) -> Result<RcParams> {
        self.params.rc_params()
    }

    pub fn require_frame(&self) -> Result<PlotFrame> {
        self.frame
            .ok_or_else(|| Error::Validation("no plot frame configured (frame.* keys)".into()))
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let s = &self.synth;
        SynthSpec {
            frame: self.frame.unwrap_or(SynthSpec::default().frame),
            plots: s.plots,
            crowns_per_plot: s.crowns_per_plot,
            annotators: s.annotators,
            min_size: s.min_size_m,
            max_size: s.max_size_m,
            translation: s.translation_m,
            scale: s.scale,
            rotation_deg: s.rotation_deg,
            polygons: s.polygons,
            seed: self.seed,
            retry_budget: s.retry_budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rc_params()?;
        self.sweep.points()?;
        if !(0.0..=1.0).contains(&self.grouping.tolerance) {
            return Err(Error::Validation(format!(
                "grouping.tolerance must be in [0, 1], got {}",
                self.grouping.tolerance
            )));
        }
        self.synth_spec().validate()
    }
}

/// Reads a config; `.json` files are JSON, everything else TOML.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config = if is_json {
        let value = parse_json(&text, path)?;
        serde_json::from_value(value).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
    } else {
        parse_toml(&text, path)?
    };
    config_checked(config)
}

fn config_checked(c: RunConfig) -> Result<RunConfig> {
    c.validate()?;
    Ok(c)
}

fn parse_toml(text: &str, path: &Path) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
        Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })
}
