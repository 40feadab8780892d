use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{read_text, write_text};
use crate::geometry::{PolyShape, RectShape, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Delineation,
}

/// One labeled footprint with its properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub shape: Shape,
    pub annotator_id: String,
    pub plot_id: Option<String>,
    pub crown_id: Option<String>,
    pub role: Option<Role>,
    /// Remaining feature properties, carried through untouched.
    pub extra: Map<String, Value>,
}

impl Annotation {
    pub fn new(shape: impl Into<Shape>, annotator_id: impl Into<String>) -> Self {
        Annotation {
            shape: shape.into(),
            annotator_id: annotator_id.into(),
            plot_id: None,
            crown_id: None,
            role: None,
            extra: Map::new(),
        }
    }
}

/// Contents of a GeoJSON FeatureCollection of annotations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationFile {
    /// Passed through verbatim; coordinates are taken as plot-local meters.
    pub crs: Option<Value>,
    pub features: Vec<Annotation>,
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationFile> {
    let path = path.as_ref();
    parse_annotations(&read_text(path)?, path)
}

/// Parses GeoJSON text; `path` only labels errors.
pub fn parse_annotations(text: &str, path: &Path) -> Result<AnnotationFile> {
    let root = parse_json(text, path)?;
    let format = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let obj = root
        .as_object()
        .ok_or_else(|| format("top level is not a JSON object".into()))?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(format("top level is not a FeatureCollection".into()));
    }
    let raw = match obj.get("features") {
        None => Vec::new(),
        Some(Value::Array(a)) => a.clone(),
        Some(_) => return Err(format("`features` is not an array".into())),
    };

    let mut missing = Vec::new();
    let mut features = Vec::with_capacity(raw.len());
    for (k, f) in raw.iter().enumerate() {
        let props = match f.get("properties") {
            Some(Value::Object(m)) => m.clone(),
            None | Some(Value::Null) => Map::new(),
            Some(_) => {
                return Err(format(format!(
                    "feature {k}: `properties` is not an object"
                )))
            }
        };
        let label = |v: Option<&Value>, key: &str| -> Result<Option<String>> {
            match v {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(Value::Number(n)) => Ok(Some(n.to_string())),
                Some(_) => Err(Error::Validation(format!(
                    "feature {k}: `{key}` must be a string"
                ))),
            }
        };
        let annotator_id = label(props.get("annotator_id"), "annotator_id")?;
        let plot_id = label(props.get("plot_id"), "plot_id")?;
        let crown_id = label(props.get("crown_id"), "crown_id")?;
        let role = match props.get("role") {
            None | Some(Value::Null) => None,
            Some(v) => Some(Role::deserialize(v).map_err(|_| {
                Error::Validation(format!(
                    "feature {k}: role must be \"target\" or \"delineation\""
                ))
            })?),
        };
        let name = match &crown_id {
            Some(c) => format!("feature {k} (crown {c})"),
            None => format!("feature {k}"),
        };
        let geometry = f
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| Error::Validation(format!("{name}: missing geometry")))?;
        let shape =
            shape_from_geometry(geometry).map_err(|e| Error::Validation(format!("{name}: {e}")))?;
        let Some(annotator_id) = annotator_id else {
            missing.push(k);
            continue;
        };
        let mut extra = props;
        for key in ["annotator_id", "plot_id", "crown_id", "role"] {
            extra.remove(key);
        }
        features.push(Annotation {
            shape,
            annotator_id,
            plot_id,
            crown_id,
            role,
            extra,
        });
    }
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|k| k.to_string()).collect();
        return Err(Error::Validation(format!(
            "{}: features without annotator_id: {}",
            path.display(),
            list.join(", ")
        )));
    }
    Ok(AnnotationFile {
        crs: obj.get("crs").cloned(),
        features,
    })
}

pub(crate) fn parse_json(text: &str, path: &Path) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn shape_from_geometry(g: &Value) -> std::result::Result<Shape, String> {
    let kind = g.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = g.get("coordinates").ok_or("geometry has no coordinates")?;
    let rings = match kind {
        "Polygon" => polygon_rings(coords)?,
        "MultiPolygon" => {
            let parts = coords
                .as_array()
                .ok_or("MultiPolygon coordinates are not an array")?;
            if parts.len() != 1 {
                return Err(format!(
                    "MultiPolygon with {} parts; one footprint per feature",
                    parts.len()
                ));
            }
            polygon_rings(&parts[0])?
        }
        other => return Err(format!("unsupported geometry type {other:?}")),
    };
    shape_from_rings(rings).map_err(|e| e.to_string())
}

fn polygon_rings(v: &Value) -> std::result::Result<Vec<Vec<[f64; 2]>>, String> {
    let rings = v.as_array().ok_or("polygon coordinates are not an array")?;
    if rings.is_empty() {
        return Err("polygon has no rings".into());
    }
    rings
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| "ring is not an array".to_string())?
                .iter()
                .map(|p| {
                    let xy = p
                        .as_array()
                        .filter(|a| a.len() >= 2)
                        .ok_or("position needs x and y")?;
                    match (xy[0].as_f64(), xy[1].as_f64()) {
                        (Some(x), Some(y)) => Ok([x, y]),
                        _ => Err("position coordinates must be numbers".to_string()),
                    }
                })
                .collect()
        })
        .collect()
}

/// Axis-aligned rectangles become [`RectShape`], anything else a polygon.
pub fn shape_from_rings(mut rings: Vec<Vec<[f64; 2]>>) -> Result<Shape> {
    if rings.len() == 1 {
        if let Some(r) = as_box(&rings[0]) {
            return Ok(r.into());
        }
    }
    let exterior = rings.remove(0);
    Ok(PolyShape::new(exterior, rings)?.into())
}

fn as_box(ring: &[[f64; 2]]) -> Option<RectShape> {
    let open = match ring {
        [first, .., last] if first == last => &ring[..ring.len() - 1],
        _ => ring,
    };
    if open.len() != 4 {
        return None;
    }
    let vertical = |a: [f64; 2], b: [f64; 2]| a[0] == b[0] && a[1] != b[1];
    let horizontal = |a: [f64; 2], b: [f64; 2]| a[1] == b[1] && a[0] != b[0];
    let edges: Vec<_> = (0..4).map(|k| (open[k], open[(k + 1) % 4])).collect();
    let alternating = |first: &dyn Fn([f64; 2], [f64; 2]) -> bool,
                       second: &dyn Fn([f64; 2], [f64; 2]) -> bool| {
        edges.iter().enumerate().all(|(k, &(a, b))| {
            if k % 2 == 0 {
                first(a, b)
            } else {
                second(a, b)
            }
        })
    };
    if !(alternating(&vertical, &horizontal) || alternating(&horizontal, &vertical)) {
        return None;
    }
    let xs = open.iter().map(|p| p[0]);
    let ys = open.iter().map(|p| p[1]);
    let x0 = xs.clone().fold(f64::INFINITY, f64::min);
    let x1 = xs.fold(f64::NEG_INFINITY, f64::max);
    let y0 = ys.clone().fold(f64::INFINITY, f64::min);
    let y1 = ys.fold(f64::NEG_INFINITY, f64::max);
    RectShape::from_bounds(x0, y0, x1, y1).ok()
}

fn closed(ring: &[[f64; 2]]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p[0], p[1]])).collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first);
    }
    Value::Array(pts)
}

/// GeoJSON Polygon geometry of a shape; boxes are written counter-clockwise.
pub fn shape_geometry(shape: &Shape) -> Value {
    let rings: Vec<Value> = match shape {
        Shape::Rect(r) => {
            let (x0, y0, x1, y1) = r.bounds();
            vec![closed(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]])]
        }
        Shape::Poly(p) => std::iter::once(p.exterior())
            .chain(p.holes().iter().map(Vec::as_slice))
            .map(closed)
            .collect(),
    };
    json!({ "type": "Polygon", "coordinates": rings })
}

pub fn annotations_to_value(file: &AnnotationFile) -> Value {
    let features: Vec<Value> = file
        .features
        .iter()
        .map(|a| {
            let mut props = a.extra.clone();
            props.insert("annotator_id".into(), json!(a.annotator_id));
            if let Some(p) = &a.plot_id {
                props.insert("plot_id".into(), json!(p));
            }
            if let Some(c) = &a.crown_id {
                props.insert("crown_id".into(), json!(c));
            }
            if let Some(r) = a.role {
                props.insert(
                    "role".into(),
                    serde_json::to_value(r).expect("role serializes"),
                );
            }
            json!({ "type": "Feature", "properties": props, "geometry": shape_geometry(&a.shape) })
        })
        .collect();
    let mut root = Map::new();
    root.insert("type".into(), json!("FeatureCollection"));
    if let Some(crs) = &file.crs {
        root.insert("crs".into(), crs.clone());
    }
    root.insert("features".into(), Value::Array(features));
    Value::Object(root)
}

pub fn write_annotations(file: &AnnotationFile, path: impl AsRef<Path>) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(&annotations_to_value(file)).expect("JSON values serialize");
    text.push('\n');
    write_text(path.as_ref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<AnnotationFile> {
        parse_annotations(text, Path::new("test.geojson"))
    }

    #[test]
    fn axis_aligned_square_is_a_box() {
        let f = parse(
            r#"{"type":"FeatureCollection","features":[{"type":"Feature",
               "properties":{"annotator_id":"a1","crown_id":"c1","species":"oak"},
               "geometry":{"type":"Polygon","coordinates":[[[1,1],[1,3],[3,3],[3,1],[1,1]]]}}]}"#,
        )
        .unwrap();
        assert_eq!(f.features.len(), 1);
        assert_eq!(
            f.features[0].shape,
            Shape::Rect(RectShape::new(2.0, 2.0, 2.0, 2.0).unwrap())
        );
        assert_eq!(f.features[0].extra["species"], json!("oak"));
    }

    #[test]
    fn skewed_quad_stays_a_polygon() {
        let f = parse(
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"annotator_id":7},
               "geometry":{"type":"Polygon","coordinates":[[[0,0],[4,0],[5,3],[0,3],[0,0]]]}}]}"#,
        )
        .unwrap();
        assert!(matches!(f.features[0].shape, Shape::Poly(_)));
        assert_eq!(f.features[0].annotator_id, "7");
    }

    #[test]
    fn empty_collection_is_valid() {
        let f = parse(r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
        assert!(f.features.is_empty());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("{\"type\":\"FeatureCollection\",\n\"features\": [,]}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_annotator_ids_are_listed() {
        let g = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}"#;
        let text = format!(
            r#"{{"type":"FeatureCollection","features":[
              {{"type":"Feature","properties":{{}},"geometry":{g}}},
              {{"type":"Feature","properties":{{"annotator_id":"x"}},"geometry":{g}}},
              {{"type":"Feature","properties":null,"geometry":{g}}}]}}"#
        );
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("annotator_id: 0, 2"), "{msg}");
    }

    #[test]
    fn self_intersection_names_the_feature() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature",
            "properties":{"annotator_id":"a","crown_id":"bow"},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[2,2],[2,0],[0,2],[0,0]]]}}]}"#;
        let err = parse(text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("feature 0 (crown bow)"), "{err}");
    }

    #[test]
    fn write_then_read_round_trips() {
        let poly = PolyShape::new(
            vec![[0.1, 0.2], [5.3, 0.7], [4.9, 6.123456789], [0.3, 4.0]],
            vec![vec![[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]]],
        )
        .unwrap();
        let mut a = Annotation::new(RectShape::new(3.3, 4.4, 1.7, 2.9).unwrap(), "a1");
        a.plot_id = Some("p".into());
        a.role = Some(Role::Target);
        a.extra.insert("note".into(), json!({"k": [1, 2]}));
        let mut b = Annotation::new(poly, "a2");
        b.crown_id = Some("c9".into());
        let file = AnnotationFile {
            crs: Some(json!({"type": "name", "properties": {"name": "local"}})),
            features: vec![a, b],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.geojson");
        write_annotations(&file, &path).unwrap();
        let back = load_annotations(&path).unwrap();
        assert_eq!(back.crs, file.crs);
        for (x, y) in file.features.iter().zip(&back.features) {
            assert_eq!(
                (&x.annotator_id, &x.plot_id, &x.crown_id, x.role, &x.extra),
                (&y.annotator_id, &y.plot_id, &y.crown_id, y.role, &y.extra)
            );
            let (u, v) = (x.shape.exterior(), y.shape.exterior());
            assert_eq!(u.len(), v.len());
            for (p, q) in u.iter().zip(&v) {
                assert!((p[0] - q[0]).abs() <= 1e-9 && (p[1] - q[1]).abs() <= 1e-9);
            }
        }
        assert!(matches!(back.features[0].shape, Shape::Rect(_)));
    }
}
