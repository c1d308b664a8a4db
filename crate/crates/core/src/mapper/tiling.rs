//! Cutting a raster into per-cell tiles.

use crate::error::{bail, Result};
use crate::geolabel::GridSpec;
use crate::mapper::raster::RasterImage;
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Tile edge in pixels.
pub const TILE_PIXELS: usize = 200;

/// Rows and columns of full tiles in a `height`×`width` pixel raster.
pub fn full_tile_counts(height: usize, width: usize) -> (usize, usize) {
    (height / TILE_PIXELS, width / TILE_PIXELS)
}

/// Grid of all full tiles of `raster`, anchored at the raster origin.
pub fn grid_for_raster(raster: &RasterImage) -> Result<GridSpec> {
    let (rows, cols) = full_tile_counts(raster.height(), raster.width());
    GridSpec::new(raster.geo.origin_x, raster.geo.origin_y, TILE_PIXELS as f64 * raster.geo.pixel_size, rows, cols)
}

/// Pixel placement of a grid on a raster.
#[derive(Clone, Debug, PartialEq)]
pub struct TileLayout {
    pub spec: GridSpec,
    /// Pixel row and column of the grid origin; may be negative.
    pub pixel_origin: (i64, i64),
    /// Cells whose 200×200 window lies entirely inside the raster.
    pub covered: Vec<bool>,
}

impl TileLayout {
    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    /// Top-left pixel of a covered cell.
    pub fn window(&self, index: usize) -> Option<(usize, usize)> {
        if !self.covered[index] {
            return None;
        }
        let (r, c) = self.spec.cell_of(index);
        let y = self.pixel_origin.0 + (r * TILE_PIXELS) as i64;
        let x = self.pixel_origin.1 + (c * TILE_PIXELS) as i64;
        Some((y as usize, x as usize))
    }
}

fn whole_pixels(offset: f64, pixel: f64, what: &str) -> Result<i64> {
    let p = offset / pixel;
    let rounded = p.round();
    if (p - rounded).abs() > 1e-6 {
        bail!(InvalidArgument, "grid {what} origin is {p} pixels from the raster origin, not a whole pixel");
    }
    Ok(rounded as i64)
}

/// Places `spec` on `raster`; cells reaching past the raster edge are uncovered.
pub fn tile_layout(raster: &RasterImage, spec: &GridSpec) -> Result<TileLayout> {
    spec.validate()?;
    let ps = raster.geo.pixel_size;
    let expected = TILE_PIXELS as f64 * ps;
    if ((spec.cell_size - expected) / expected).abs() > 1e-9 {
        bail!(InvalidArgument, "cell size {} m does not match {TILE_PIXELS} pixels of {ps} m", spec.cell_size);
    }
    let row0 = whole_pixels(spec.origin_y - raster.geo.origin_y, ps, "y")?;
    let col0 = whole_pixels(spec.origin_x - raster.geo.origin_x, ps, "x")?;
    let t = TILE_PIXELS as i64;
    let covered = (0..spec.len())
        .map(|i| {
            let (r, c) = spec.cell_of(i);
            let y = row0 + r as i64 * t;
            let x = col0 + c as i64 * t;
            y >= 0 && x >= 0 && y + t <= raster.height() as i64 && x + t <= raster.width() as i64
        })
        .collect();
    Ok(TileLayout { spec: *spec, pixel_origin: (row0, col0), covered })
}

/// The `size`×`size` window with top-left pixel `(y0, x0)` as a tensor.
pub fn extract_window<T: Scalar>(raster: &RasterImage, y0: usize, x0: usize, size: usize) -> Tensor<T> {
    let ch = raster.channels();
    let mut data = Vec::with_capacity(size * size * ch);
    for y in y0..y0 + size {
        let start = (y * raster.width() + x0) * ch;
        for i in start..start + size * ch {
            data.push(T::of(raster.data().get(i)));
        }
    }
    Tensor::from_vec(size, size, ch, data).expect("window length matches its shape")
}

/// Full tiles in row-major cell order, paired with their cell index.
pub fn tile_raster<'a, T: Scalar>(
    raster: &'a RasterImage,
    spec: &GridSpec,
) -> Result<impl Iterator<Item = (usize, Tensor<T>)> + 'a> {
    let layout = tile_layout(raster, spec)?;
    Ok((0..layout.spec.len()).filter_map(move |i| {
        let (y, x) = layout.window(i)?;
        Some((i, extract_window(raster, y, x, TILE_PIXELS)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::raster::{GeoTransform, PixelData};

    fn raster(h: usize, w: usize) -> RasterImage {
        let data = (0..h * w).map(|i| (i % 256) as u8).collect();
        RasterImage::new(h, w, 1, PixelData::U8(data), GeoTransform::default()).unwrap()
    }

    #[test]
    fn grid_counts() {
        let r = raster(400, 600);
        let g = grid_for_raster(&r).unwrap();
        assert_eq!((g.rows, g.cols), (2, 3));
        assert!((g.cell_size - 240.0).abs() < 1e-12);
        assert_eq!(tile_raster::<f64>(&r, &g).unwrap().count(), 6);
    }

    #[test]
    fn city_scale_counts() {
        let (rows, cols) = full_tile_counts(47537, 38100);
        assert_eq!((rows, cols, rows * cols), (237, 190, 45030));
    }

    #[test]
    fn remainder_is_excluded() {
        let r = raster(450, 630);
        let g = grid_for_raster(&r).unwrap();
        assert_eq!((g.rows, g.cols), (2, 3));
        let bigger = GridSpec::new(0.0, 0.0, 240.0, 3, 4).unwrap();
        let layout = tile_layout(&r, &bigger).unwrap();
        assert_eq!(layout.covered_count(), 6);
        assert!(!layout.covered[3] && !layout.covered[8]);
    }

    #[test]
    fn tiles_partition_the_covered_pixels() {
        let r = raster(400, 600);
        let g = grid_for_raster(&r).unwrap();
        let layout = tile_layout(&r, &g).unwrap();
        let mut hits = vec![0u8; 400 * 600];
        for i in 0..g.len() {
            let (y0, x0) = layout.window(i).unwrap();
            for y in y0..y0 + 200 {
                for x in x0..x0 + 200 {
                    hits[y * 600 + x] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
        for (i, tile) in tile_raster::<f64>(&r, &g).unwrap() {
            let (y0, x0) = layout.window(i).unwrap();
            assert_eq!(tile.get(7, 11, 0), r.sample(y0 + 7, x0 + 11, 0));
        }
    }

    #[test]
    fn shifted_grid_and_misalignment() {
        let r = raster(400, 400);
        let shifted = GridSpec::new(120.0, 0.0, 240.0, 2, 2).unwrap();
        let layout = tile_layout(&r, &shifted).unwrap();
        assert_eq!(layout.pixel_origin, (0, 100));
        assert_eq!(layout.covered, vec![true, false, true, false]);
        assert!(tile_layout(&r, &GridSpec::new(0.5, 0.0, 240.0, 1, 1).unwrap()).is_err());
        assert!(tile_layout(&r, &GridSpec::new(0.0, 0.0, 250.0, 1, 1).unwrap()).is_err());
    }
}
