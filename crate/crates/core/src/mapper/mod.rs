//! Raster tiling, per-cell inference and map products.

mod predict;
pub mod products;
pub mod raster;
pub mod tiling;

pub use predict::{predict_products, CellDistributions, Decoding, MapProduct, PredictOptions};
pub use products::{read_products, write_products};
pub use raster::{GeoTransform, PixelData, RasterImage};
pub use tiling::{extract_window, full_tile_counts, grid_for_raster, tile_layout, tile_raster, TileLayout, TILE_PIXELS};
