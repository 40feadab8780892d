use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::geojson::parse_json;
use super::{read_text, write_text};
use crate::experiments::SweepRecord;
use crate::geometry::{PlotFrame, Region};
use crate::matching::GlobalScore;
use crate::metrics::ScoreRecord;
use crate::regions::RegionSet;
use crate::{Error, Result};

pub const SCORE_COLUMNS: [&str; 12] = [
    "plot_id",
    "crown_id",
    "annotator_target",
    "annotator_delin",
    "a",
    "b",
    "c",
    "d",
    "rc",
    "iou",
    "iou_crowns",
    "flags",
];

pub const SWEEP_COLUMNS: [&str; 8] = [
    "alpha_m",
    "omega_m",
    "gamma",
    "var_rc",
    "var_iou",
    "var_iouc",
    "n_skipped",
    "n_clipped",
];

/// Zero denominator in a score.
pub const FLAG_DEGENERATE: &str = "degenerate";
/// Edge ring capped by the frame before reaching its ratio.
pub const FLAG_CLIPPED: &str = "clipped";
/// Target with no delineation; its scores are the 0 penalty.
pub const FLAG_UNMATCHED: &str = "unmatched";

/// One row of a score table. `flags` is a `;`-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub plot_id: String,
    pub crown_id: String,
    pub annotator_target: String,
    pub annotator_delin: String,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub rc: f64,
    pub iou: f64,
    pub iou_crowns: f64,
    pub flags: String,
}

impl ScoreRow {
    pub fn new(
        plot_id: impl Into<String>,
        crown_id: impl Into<String>,
        annotator_target: impl Into<String>,
        annotator_delin: impl Into<String>,
        record: &ScoreRecord,
        extra_flags: &[&str],
    ) -> Self {
        let mut flags: Vec<&str> = Vec::new();
        if record.degenerate {
            flags.push(FLAG_DEGENERATE);
        }
        flags.extend_from_slice(extra_flags);
        ScoreRow {
            plot_id: plot_id.into(),
            crown_id: crown_id.into(),
            annotator_target: annotator_target.into(),
            annotator_delin: annotator_delin.into(),
            a: record.a,
            b: record.b,
            c: record.c,
            d: record.d,
            rc: record.rand_crowns,
            iou: record.iou,
            iou_crowns: record.iou_crowns,
            flags: flags.join(";"),
        }
    }

    pub fn record(&self) -> ScoreRecord {
        ScoreRecord {
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            rand_crowns: self.rc,
            iou: self.iou,
            iou_crowns: self.iou_crowns,
            degenerate: self.has_flag(FLAG_DEGENERATE),
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split(';').any(|f| f == flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub records: Vec<ScoreRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<GlobalScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Csv,
    Json,
}

impl ScoreFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ScoreFormat::Json,
            _ => ScoreFormat::Csv,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn to_csv<T: Serialize>(header: &[&str], rows: &[T], path: &Path) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn from_csv<T: DeserializeOwned>(header: &[&str], path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected columns {:?}", found.iter().collect::<Vec<_>>()),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// CSV keeps only the rows; JSON keeps rows and the global score.
pub fn export_scores(
    report: &ScoreReport,
    path: impl AsRef<Path>,
    format: ScoreFormat,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        ScoreFormat::Csv => write_text(path, &to_csv(&SCORE_COLUMNS, &report.records, path)?),
        ScoreFormat::Json => write_json(report, path),
    }
}

pub fn read_scores(path: impl AsRef<Path>, format: ScoreFormat) -> Result<ScoreReport> {
    let path = path.as_ref();
    match format {
        ScoreFormat::Csv => Ok(ScoreReport {
            records: from_csv(&SCORE_COLUMNS, path)?,
            global: None,
        }),
        ScoreFormat::Json => read_json(path),
    }
}

pub fn write_sweep_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_text(path, &to_csv(&SWEEP_COLUMNS, records, path)?)
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    from_csv(&SWEEP_COLUMNS, path.as_ref())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let value = parse_json(&read_text(path)?, path)?;
    serde_json::from_value(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRole {
    RA,
    RO,
    RE,
    RB,
}

impl RegionRole {
    pub const ALL: [RegionRole; 4] = [
        RegionRole::RA,
        RegionRole::RO,
        RegionRole::RE,
        RegionRole::RB,
    ];

    pub fn of<'r>(&self, set: &'r RegionSet<'_>) -> &'r Region {
        match self {
            RegionRole::RA => set.r_a(),
            RegionRole::RO => set.r_o(),
            RegionRole::RE => set.r_e(),
            RegionRole::RB => set.r_b(),
        }
    }
}

/// Identifies the target a region set was built for.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegionLabel {
    pub plot_id: String,
    pub crown_id: String,
    pub annotator_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRegion {
    pub label: RegionLabel,
    pub role: RegionRole,
    pub region: Region,
}

/// Pixel blocks `(col_start, col_end, row_start, row_end)` covering `r`,
/// merging equal runs on consecutive rows.
fn blocks(r: &Region) -> Vec<(usize, usize, usize, usize)> {
    let mut open: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut done = Vec::new();
    for run in r.runs() {
        match open.get_mut(&(run.start, run.end)) {
            Some((_, last)) if *last + 1 == run.row => *last = run.row,
            _ => {
                if let Some((first, last)) = open.insert((run.start, run.end), (run.row, run.row)) {
                    done.push((run.start, run.end, first, last + 1));
                }
            }
        }
    }
    done.extend(
        open.into_iter()
            .map(|((s, e), (first, last))| (s, e, first, last + 1)),
    );
    done.sort_by_key(|&(s, _, r0, _)| (r0, s));
    done
}

fn region_geometry(r: &Region) -> Value {
    let f = r.frame();
    let res = f.resolution();
    let polys: Vec<Value> = blocks(r)
        .into_iter()
        .map(|(c0, c1, r0, r1)| {
            let x0 = f.x_min() + c0 as f64 * res;
            let x1 = f.x_min() + c1 as f64 * res;
            let y0 = f.y_min() + r0 as f64 * res;
            let y1 = f.y_min() + r1 as f64 * res;
            json!([[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]])
        })
        .collect();
    json!({ "type": "MultiPolygon", "coordinates": polys })
}

/// GeoJSON with four role-tagged features (`r_a`, `r_o`, `r_e`, `r_b`) per set.
pub fn regions_to_value(sets: &[(RegionLabel, RegionSet<'_>)]) -> Value {
    let mut features = Vec::new();
    for (label, set) in sets {
        for role in RegionRole::ALL {
            let r = role.of(set);
            let mut props = Map::new();
            props.insert("plot_id".into(), json!(label.plot_id));
            props.insert("crown_id".into(), json!(label.crown_id));
            props.insert("annotator_id".into(), json!(label.annotator_id));
            props.insert(
                "role".into(),
                serde_json::to_value(role).expect("role serializes"),
            );
            props.insert("pixel_count".into(), json!(r.pixel_count()));
            features.push(
                json!({ "type": "Feature", "properties": props, "geometry": region_geometry(r) }),
            );
        }
    }
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn export_regions(sets: &[(RegionLabel, RegionSet<'_>)], path: impl AsRef<Path>) -> Result<()> {
    write_json(&regions_to_value(sets), path)
}

/// Reads a file written by [`export_regions`] back onto `frame`.
pub fn load_regions(path: impl AsRef<Path>, frame: &PlotFrame) -> Result<Vec<LoadedRegion>> {
    let path = path.as_ref();
    let root = parse_json(&read_text(path)?, path)?;
    let bad = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("not a FeatureCollection".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for (k, f) in features.iter().enumerate() {
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let text = |key: &str| {
            props
                .get(key)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string()
        };
        let role: RegionRole = props
            .get("role")
            .cloned()
            .and_then(|r| serde_json::from_value(r).ok())
            .ok_or_else(|| bad(format!("feature {k}: missing or unknown role")))?;
        let polys = f
            .pointer("/geometry/coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("feature {k}: missing MultiPolygon coordinates")))?;
        let mut region = Region::empty(frame);
        for poly in polys {
            let pts: Vec<(f64, f64)> = poly
                .pointer("/0")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(|p| Some((p.get(0)?.as_f64()?, p.get(1)?.as_f64()?)))
                .collect();
            if pts.is_empty() {
                return Err(bad(format!("feature {k}: empty block")));
            }
            let (x0, x1) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    (a.min(p.0), b.max(p.0))
                });
            let (y0, y1) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    (a.min(p.1), b.max(p.1))
                });
            region.fill_block(frame.column_span(x0, x1), frame.row_span(y0, y1));
        }
        out.push(LoadedRegion {
            label: RegionLabel {
                plot_id: text("plot_id"),
                crown_id: text("crown_id"),
                annotator_id: text("annotator_id"),
            },
            role,
            region,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolyShape, Shape};
    use crate::matching::{PenaltyMode, TargetScore};
    use crate::regions::{RcParams, TargetRegions};

    fn record() -> ScoreRecord {
        ScoreRecord {
            a: 2304,
            b: 11664,
            c: 2500,
            d: 256,
            rand_crowns: 13968.0 / 16724.0,
            iou: 0.1 + 0.2,
            iou_crowns: 1.0 / 3.0,
            degenerate: false,
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        export_scores(
            &ScoreReport {
                records: vec![],
                global: None,
            },
            &p,
            ScoreFormat::Csv,
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "plot_id,crown_id,annotator_target,annotator_delin,a,b,c,d,rc,iou,iou_crowns,flags\n"
        );
        assert!(read_scores(&p, ScoreFormat::Csv)
            .unwrap()
            .records
            .is_empty());
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let rows = vec![
            ScoreRow::new("p1", "c1", "a1", "a2", &record(), &[]),
            ScoreRow::new(
                "p1",
                "c2",
                "a1",
                "",
                &ScoreRecord {
                    degenerate: true,
                    ..record()
                },
                &[FLAG_CLIPPED],
            ),
        ];
        assert_eq!(rows[1].flags, "degenerate;clipped");
        assert!(rows[1].record().degenerate);
        let report = ScoreReport {
            records: rows,
            global: Some(GlobalScore {
                mean: 2.0 / 3.0,
                std_dev: 0.1 + 0.7,
                per_target: vec![TargetScore {
                    target_id: "c1".into(),
                    score: 1.0 / 7.0,
                    n_assigned: 2,
                }],
                penalty_mode: PenaltyMode::MeanDividedByCount,
            }),
        };
        let dir = tempfile::tempdir().unwrap();
        let j = dir.path().join("s.json");
        export_scores(&report, &j, ScoreFormat::Json).unwrap();
        assert_eq!(read_scores(&j, ScoreFormat::Json).unwrap(), report);
        let c = dir.path().join("s.csv");
        export_scores(&report, &c, ScoreFormat::Csv).unwrap();
        assert_eq!(
            read_scores(&c, ScoreFormat::Csv).unwrap().records,
            report.records
        );
    }

    #[test]
    fn sweep_csv_round_trips_nan() {
        let recs = vec![SweepRecord {
            alpha_m: 0.1,
            omega_m: 0.3,
            gamma: 2.0,
            var_rc: f64::NAN,
            var_iou: 0.25,
            var_iouc: 1e-17,
            n_skipped: 3,
            n_clipped: 1,
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sw.csv");
        write_sweep_csv(&recs, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(
            text.starts_with("alpha_m,omega_m,gamma,var_rc,var_iou,var_iouc,n_skipped,n_clipped\n")
        );
        let back = read_sweep_csv(&p).unwrap();
        assert!(back[0].var_rc.is_nan());
        assert_eq!(back[0].var_iouc, 1e-17);
        assert_eq!(back[0].n_skipped, 3);
    }

    #[test]
    fn regions_round_trip_pixel_for_pixel() {
        let frame = PlotFrame::new(-3.0, 2.0, 27.0, 32.0, 0.5).unwrap();
        let hex = PolyShape::new(
            vec![
                [8.0, 10.0],
                [14.0, 9.0],
                [18.0, 14.0],
                [15.0, 20.0],
                [9.0, 21.0],
                [5.0, 15.0],
            ],
            vec![],
        )
        .unwrap();
        let target = Shape::Poly(hex);
        let t =
            TargetRegions::build(&target, &RcParams::new(0.7, 1.2, 3.0).unwrap(), &frame).unwrap();
        let d = target.translated(6.0, 0.0).rasterize(&frame);
        let set = t.finalize(&d).unwrap();
        let label = RegionLabel {
            plot_id: "p".into(),
            crown_id: "hex".into(),
            annotator_id: "a1".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.geojson");
        export_regions(&[(label.clone(), set.clone())], &p).unwrap();
        let back = load_regions(&p, &frame).unwrap();
        assert_eq!(back.len(), 4);
        for (loaded, role) in back.iter().zip(RegionRole::ALL) {
            assert_eq!(loaded.role, role);
            assert_eq!(loaded.label, label);
            assert_eq!(&loaded.region, role.of(&set));
        }

        let q = dir.path().join("empty.geojson");
        export_regions(&[], &q).unwrap();
        assert!(load_regions(&q, &frame).unwrap().is_empty());
    }
}
