//! Per-cell labels from polygon data, discretization, sample assembly and
//! synthetic test cities.

mod dataset;
mod discretize;
pub mod geojson;
mod geometry;
mod grid;
mod labels;
pub mod synth;

pub use dataset::{
    assemble_dataset, materialize, read_records, records_from_csv, records_to_csv, sample_records, stratified_holdout,
    write_records,
    LabelScheme, SampleRecord,
};
pub use discretize::{dediscretize, discretize, DiscretizationSpec};
pub use geometry::{clip_area, clip_polygon_area, clip_to_rect, point_in_ring, shoelace_area, FeatureKind, PolygonFeature, Rect};
pub use grid::{value_range, GridSpec, LabelGrid, DEFAULT_CELL_SIZE};
pub use labels::{building_density_grid, floor_area_ratio_grid, landuse_grid, population_grid, GridOutcome};
pub use synth::{synthesize_city, SyntheticCity};
