//! Per-cell labels from polygon layers.

use crate::error::{bail, Result};
use crate::geolabel::geometry::{clip_polygon_area, FeatureKind, PolygonFeature};
use crate::geolabel::grid::{value_range, GridSpec, LabelGrid};
use crate::task::{LandUse, Task};

/// A clamped label grid plus the raw per-cell sums and any warnings.
#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub grid: LabelGrid,
    pub unclamped: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Calls `f(cell_index, clipped_area)` for every cell the feature overlaps.
fn for_each_overlap(feature: &PolygonFeature, spec: &GridSpec, mut f: impl FnMut(usize, f64)) {
    let (rows, cols) = spec.cells_overlapping(&feature.bbox());
    for r in rows {
        for c in cols.clone() {
            let a = clip_polygon_area(feature, &spec.cell_rect(r, c));
            if a > 0.0 {
                f(spec.index(r, c), a);
            }
        }
    }
}

fn building_floors(features: &[PolygonFeature]) -> Result<Vec<u32>> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| match f.kind {
            FeatureKind::Building { floors } => Ok(floors),
            other => bail!(InvalidArgument, "feature {i} is {other:?}, expected a building"),
        })
        .collect()
}

fn clamp_layer(spec: &GridSpec, kind: Task, raw: Vec<f64>, mask: Vec<bool>, warnings: &mut Vec<String>) -> Result<GridOutcome> {
    let (lo, hi) = value_range(kind);
    let mut values = Vec::with_capacity(raw.len());
    for (i, &v) in raw.iter().enumerate() {
        if mask[i] && v > hi {
            let (r, c) = spec.cell_of(i);
            warnings.push(format!("cell ({r},{c}): {kind} {v} exceeds {hi}, clamped"));
        }
        values.push(v.clamp(lo, hi));
    }
    Ok(GridOutcome { grid: LabelGrid::new(*spec, kind, values, mask)?, unclamped: raw, warnings: std::mem::take(warnings) })
}

/// Building footprint area over cell area.
pub fn building_density_grid(buildings: &[PolygonFeature], spec: &GridSpec) -> Result<GridOutcome> {
    spec.validate()?;
    building_floors(buildings)?;
    let mut raw = vec![0.0; spec.len()];
    for b in buildings {
        for_each_overlap(b, spec, |i, a| raw[i] += a);
    }
    let cell = spec.cell_area();
    raw.iter_mut().for_each(|v| *v /= cell);
    clamp_layer(spec, Task::Bd, raw, vec![true; spec.len()], &mut Vec::new())
}

/// Floor area (footprint times floors, summed per building) over cell area.
pub fn floor_area_ratio_grid(buildings: &[PolygonFeature], spec: &GridSpec) -> Result<GridOutcome> {
    spec.validate()?;
    let floors = building_floors(buildings)?;
    let mut raw = vec![0.0; spec.len()];
    for (b, &fl) in buildings.iter().zip(&floors) {
        for_each_overlap(b, spec, |i, a| raw[i] += a * fl as f64);
    }
    let cell = spec.cell_area();
    raw.iter_mut().for_each(|v| *v /= cell);
    clamp_layer(spec, Task::Far, raw, vec![true; spec.len()], &mut Vec::new())
}

/// Areal weighting of block populations; cells touching no block are masked.
pub fn population_grid(blocks: &[PolygonFeature], spec: &GridSpec) -> Result<GridOutcome> {
    spec.validate()?;
    let mut raw = vec![0.0; spec.len()];
    let mut mask = vec![false; spec.len()];
    let mut warnings = Vec::new();
    for (n, b) in blocks.iter().enumerate() {
        let FeatureKind::Block { population } = b.kind else {
            bail!(InvalidArgument, "feature {n} is {:?}, expected a block", b.kind);
        };
        let area = b.area();
        if area <= 0.0 {
            warnings.push(format!("block {n} has zero area; its population {population} is dropped"));
            continue;
        }
        for_each_overlap(b, spec, |i, a| {
            raw[i] += population * a / area;
            mask[i] = true;
        });
    }
    clamp_layer(spec, Task::Pop, raw, mask, &mut warnings)
}

/// Majority-area land use per cell; ties go to the lower class index and
/// uncovered cells are masked.
pub fn landuse_grid(zones: &[PolygonFeature], spec: &GridSpec) -> Result<GridOutcome> {
    spec.validate()?;
    let mut areas = vec![[0.0f64; LandUse::COUNT]; spec.len()];
    for (n, z) in zones.iter().enumerate() {
        let FeatureKind::LandUse { class } = z.kind else {
            bail!(InvalidArgument, "feature {n} is {:?}, expected a land-use zone", z.kind);
        };
        for_each_overlap(z, spec, |i, a| areas[i][class.index()] += a);
    }
    let mut values = Vec::with_capacity(spec.len());
    let mut mask = Vec::with_capacity(spec.len());
    for per_class in &areas {
        let mut best = 0;
        for k in 1..LandUse::COUNT {
            if per_class[k] > per_class[best] {
                best = k;
            }
        }
        let covered = per_class[best] > 0.0;
        values.push(if covered { best as f64 } else { 0.0 });
        mask.push(covered);
    }
    let unclamped = values.clone();
    Ok(GridOutcome { grid: LabelGrid::new(*spec, Task::Land, values, mask)?, unclamped, warnings: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geolabel::geometry::Rect;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64, kind: FeatureKind) -> PolygonFeature {
        PolygonFeature::rectangle(Rect::new(x0, y0, x1, y1), kind).unwrap()
    }

    fn bldg(x0: f64, y0: f64, x1: f64, y1: f64, floors: u32) -> PolygonFeature {
        rect(x0, y0, x1, y1, FeatureKind::Building { floors })
    }

    #[test]
    fn half_covered_cell() {
        let g = GridSpec::with_dims(1, 1).unwrap();
        let out = building_density_grid(&[bldg(0.0, 0.0, 120.0, 240.0, 1)], &g).unwrap();
        assert!((out.grid.get(0, 0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(building_density_grid(&[], &g).unwrap().grid.get(0, 0), Some(0.0));
    }

    #[test]
    fn straddling_building_splits_area() {
        let g = GridSpec::with_dims(1, 2).unwrap();
        // 100 m wide, 30 m in cell 0 and 70 m in cell 1
        let b = bldg(210.0, 10.0, 310.0, 60.0, 1);
        let out = building_density_grid(std::slice::from_ref(&b), &g).unwrap();
        let (l, r) = (out.grid.get(0, 0).unwrap(), out.grid.get(0, 1).unwrap());
        assert!((l - 30.0 * 50.0 / 57600.0).abs() < 1e-15);
        assert!((l + r - b.area() / g.cell_area()).abs() < 1e-15);
    }

    #[test]
    fn far_sums_per_building() {
        let g = GridSpec::with_dims(1, 1).unwrap();
        let full = floor_area_ratio_grid(&[bldg(0.0, 0.0, 240.0, 240.0, 3)], &g).unwrap();
        assert!((full.grid.get(0, 0).unwrap() - 3.0).abs() < 1e-12);
        let mixed = floor_area_ratio_grid(&[bldg(0.0, 0.0, 120.0, 120.0, 2), bldg(120.0, 120.0, 240.0, 240.0, 4)], &g).unwrap();
        assert!((mixed.grid.get(0, 0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn overlapping_buildings_warn_and_clamp() {
        let g = GridSpec::with_dims(1, 1).unwrap();
        let b = bldg(0.0, 0.0, 240.0, 240.0, 1);
        let out = building_density_grid(&[b.clone(), b], &g).unwrap();
        assert_eq!(out.grid.get(0, 0), Some(1.0));
        assert_eq!(out.unclamped[0], 2.0);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn wrong_feature_kind_rejected() {
        let g = GridSpec::with_dims(1, 1).unwrap();
        let block = rect(0.0, 0.0, 1.0, 1.0, FeatureKind::Block { population: 1.0 });
        assert!(building_density_grid(std::slice::from_ref(&block), &g).is_err());
        assert!(landuse_grid(std::slice::from_ref(&block), &g).is_err());
        assert!(population_grid(&[bldg(0.0, 0.0, 1.0, 1.0, 1)], &g).is_err());
    }

    #[test]
    fn population_weighting_and_mask() {
        let g = GridSpec::with_dims(3, 3).unwrap();
        let blocks = [
            rect(0.0, 0.0, 480.0, 480.0, FeatureKind::Block { population: 1000.0 }),
            rect(500.0, 500.0, 600.0, 600.0, FeatureKind::Block { population: 77.0 }),
        ];
        let out = population_grid(&blocks, &g).unwrap();
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((out.grid.get(r, c).unwrap() - 250.0).abs() < 1e-9);
        }
        assert!((out.grid.get(2, 2).unwrap() - 77.0).abs() < 1e-9);
        assert_eq!(out.grid.get(0, 2), None);
        assert_eq!(out.grid.valid_count(), 5);
    }

    #[test]
    fn zero_area_block_warns() {
        let g = GridSpec::with_dims(1, 1).unwrap();
        let flat = PolygonFeature::new(
            vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [0.0, 0.0]],
            FeatureKind::Block { population: 5.0 },
        )
        .unwrap();
        let out = population_grid(&[flat], &g).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.grid.get(0, 0), None);
    }

    #[test]
    fn majority_and_tie_break() {
        let g = GridSpec::with_dims(1, 3).unwrap();
        let zone = |x0, x1, class| rect(x0, 0.0, x1, 240.0, FeatureKind::LandUse { class });
        let zones = [
            zone(0.0, 240.0, LandUse::Agriculture),
            zone(240.0, 384.0, LandUse::Industrial),
            zone(384.0, 480.0, LandUse::Commercial),
            // cell 2 split evenly between class index 1 and class index 4
            zone(480.0, 600.0, LandUse::RegionalTransport),
            zone(600.0, 720.0, LandUse::WaterRiverLake),
        ];
        let out = landuse_grid(&zones, &g).unwrap();
        assert_eq!(out.grid.get(0, 0), Some(LandUse::Agriculture.index() as f64));
        assert_eq!(out.grid.get(0, 1), Some(LandUse::Industrial.index() as f64));
        assert_eq!(out.grid.get(0, 2), Some(1.0));
        let uncovered = landuse_grid(&zones[..1], &g).unwrap();
        assert_eq!(uncovered.grid.valid_count(), 1);
    }
}
