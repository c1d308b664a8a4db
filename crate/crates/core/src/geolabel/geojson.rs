//! A GeoJSON FeatureCollection subset: planar Polygon features without holes.
//!
//! Properties: `kind` (`BUILDING`, `BLOCK` or `LANDUSE`), `floors` for
//! buildings, `population` for blocks and `class` (code 1..13) for land use.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{bail, Error, Result};
use crate::geolabel::geometry::{FeatureKind, PolygonFeature};
use crate::task::LandUse;

fn parse_kind(n: usize, props: &Map<String, Value>) -> Result<FeatureKind> {
    let kind = props.get("kind").and_then(Value::as_str).unwrap_or("");
    let number = |key: &str| -> Result<&Value> {
        props.get(key).ok_or_else(|| Error::Format(format!("feature {n}: {kind} needs property {key:?}")))
    };
    match kind.to_ascii_uppercase().as_str() {
        "BUILDING" => {
            let floors = number("floors")?
                .as_u64()
                .filter(|&f| f >= 1 && f <= u32::MAX as u64)
                .ok_or_else(|| Error::Format(format!("feature {n}: floors must be a positive integer")))?;
            Ok(FeatureKind::Building { floors: floors as u32 })
        }
        "BLOCK" => {
            let population = number("population")?
                .as_f64()
                .ok_or_else(|| Error::Format(format!("feature {n}: population must be a number")))?;
            Ok(FeatureKind::Block { population })
        }
        "LANDUSE" => {
            let class = match number("class")? {
                Value::Number(v) => v
                    .as_u64()
                    .and_then(|c| u8::try_from(c).ok())
                    .and_then(LandUse::from_code)
                    .ok_or_else(|| Error::Format(format!("feature {n}: unknown land-use code {v}")))?,
                Value::String(s) => s.parse().map_err(|e| Error::Format(format!("feature {n}: {e}")))?,
                other => bail!(Format, "feature {n}: class must be a code, got {other}"),
            };
            Ok(FeatureKind::LandUse { class })
        }
        _ => bail!(Format, "feature {n}: unknown kind {kind:?}"),
    }
}

fn parse_ring(n: usize, geometry: &Value) -> Result<Vec<[f64; 2]>> {
    if geometry.get("type").and_then(Value::as_str) != Some("Polygon") {
        bail!(Format, "feature {n}: only Polygon geometries are supported");
    }
    let rings = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format(format!("feature {n}: missing coordinates")))?;
    match rings.len() {
        1 => {}
        0 => bail!(Format, "feature {n}: polygon has no rings"),
        _ => bail!(Format, "feature {n}: polygons with holes are not supported"),
    }
    let points = rings[0].as_array().ok_or_else(|| Error::Format(format!("feature {n}: ring is not an array")))?;
    points
        .iter()
        .map(|p| match p.as_array().map(Vec::as_slice) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => bail!(Format, "feature {n}: non-numeric coordinate"),
            },
            _ => bail!(Format, "feature {n}: position needs two coordinates"),
        })
        .collect()
}

pub fn parse_features(text: &str) -> Result<Vec<PolygonFeature>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid JSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        bail!(Format, "expected a FeatureCollection");
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format("FeatureCollection has no features array".into()))?;
    features
        .iter()
        .enumerate()
        .map(|(n, f)| {
            let empty = Map::new();
            let props = f.get("properties").and_then(Value::as_object).unwrap_or(&empty);
            let kind = parse_kind(n, props)?;
            let geometry = f.get("geometry").ok_or_else(|| Error::Format(format!("feature {n}: no geometry")))?;
            let ring = parse_ring(n, geometry)?;
            PolygonFeature::new(ring, kind).map_err(|e| Error::Format(format!("feature {n}: {e}")))
        })
        .collect()
}

pub fn features_to_string(features: &[PolygonFeature]) -> String {
    let features: Vec<Value> = features
        .iter()
        .map(|f| {
            let props = match f.kind {
                FeatureKind::Building { floors } => json!({ "kind": "BUILDING", "floors": floors }),
                FeatureKind::Block { population } => json!({ "kind": "BLOCK", "population": population }),
                FeatureKind::LandUse { class } => json!({ "kind": "LANDUSE", "class": class.code() }),
            };
            let ring: Vec<Value> = f.ring().iter().map(|p| json!([p[0], p[1]])).collect();
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": { "type": "Polygon", "coordinates": [ring] },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string(&doc).expect("serializing a JSON value cannot fail")
}

pub fn read_features(path: &Path) -> Result<Vec<PolygonFeature>> {
    let text = std::fs::read_to_string(path)?;
    parse_features(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_features(path: &Path, features: &[PolygonFeature]) -> Result<()> {
    std::fs::write(path, features_to_string(features))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geolabel::geometry::Rect;

    #[test]
    fn round_trip() {
        let r = Rect::new(0.1, 0.2, 10.3, 7.7);
        let features = vec![
            PolygonFeature::rectangle(r, FeatureKind::Building { floors: 4 }).unwrap(),
            PolygonFeature::rectangle(r, FeatureKind::Block { population: 123.456 }).unwrap(),
            PolygonFeature::rectangle(r, FeatureKind::LandUse { class: LandUse::Others }).unwrap(),
        ];
        let text = features_to_string(&features);
        assert!(text.contains("\"class\":13"));
        assert_eq!(parse_features(&text).unwrap(), features);
    }

    #[test]
    fn rejects_unsupported_input() {
        let square = "[[0,0],[1,0],[1,1],[0,1],[0,0]]";
        let doc = |props: &str, coords: &str| {
            format!(
                r#"{{"type":"FeatureCollection","features":[{{"type":"Feature","properties":{props},"geometry":{{"type":"Polygon","coordinates":{coords}}}}}]}}"#
            )
        };
        assert!(parse_features(&doc(r#"{"kind":"BUILDING","floors":2}"#, &format!("[{square}]"))).is_ok());
        assert!(parse_features(&doc(r#"{"kind":"BUILDING","floors":2}"#, &format!("[{square},{square}]"))).is_err());
        assert!(parse_features(&doc(r#"{"kind":"BUILDING","floors":0}"#, &format!("[{square}]"))).is_err());
        assert!(parse_features(&doc(r#"{"kind":"LANDUSE","class":14}"#, &format!("[{square}]"))).is_err());
        assert!(parse_features(&doc(r#"{"kind":"TREE"}"#, &format!("[{square}]"))).is_err());
        assert!(parse_features(&doc(r#"{"kind":"BLOCK","population":5}"#, "[[[0,0],[0,1],[1,1],[1,0],[0,0]]]")).is_err());
        assert!(parse_features("{\"type\":\"Feature\"}").is_err());
        assert!(parse_features("not json").is_err());
    }
}
