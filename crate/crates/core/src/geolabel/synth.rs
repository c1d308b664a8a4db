//! Deterministic synthetic cities with exact ground truth.
//!
//! Every cell carries one land-use class. The class fixes the ground color,
//! texture, roof color, building coverage, floor count and population per
//! unit of building density, so all four labels are functions of the class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::geolabel::geometry::{FeatureKind, PolygonFeature, Rect};
use crate::geolabel::grid::{GridSpec, LabelGrid};
use crate::mapper::raster::{GeoTransform, PixelData, RasterImage, DEFAULT_PIXEL_SIZE};
use crate::mapper::tiling::TILE_PIXELS;
use crate::task::{LandUse, Task};

/// Lots per cell side; each cell holds at most `LOTS_PER_SIDE²` buildings.
pub const LOTS_PER_SIDE: usize = 4;

/// Generator settings of one land-use class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassProfile {
    pub ground: [u8; 3],
    pub roof: [u8; 3],
    /// Period in pixels of the diagonal ground stripes; 0 for none.
    pub stripe_period: usize,
    pub noise: u8,
    pub building_density: f64,
    pub buildings: usize,
    pub floors: u32,
    /// Persons per cell per unit of building density.
    pub population_per_density: f64,
}

impl ClassProfile {
    pub fn floor_area_ratio(&self) -> f64 {
        self.building_density * self.floors as f64
    }

    pub fn population(&self) -> f64 {
        self.building_density * self.population_per_density
    }
}

const fn profile(
    ground: [u8; 3],
    roof: [u8; 3],
    stripe_period: usize,
    noise: u8,
    density_level: usize,
    buildings: usize,
    floors: u32,
    population_per_density: f64,
) -> ClassProfile {
    ClassProfile {
        ground,
        roof,
        stripe_period,
        noise,
        // midpoint of a 0.04-wide density bin
        building_density: if buildings == 0 { 0.0 } else { (density_level as f64 + 0.5) * 0.04 },
        buildings,
        floors,
        population_per_density,
    }
}

/// Profiles in class-index order.
pub const PROFILES: [ClassProfile; LandUse::COUNT] = [
    profile([190, 110, 110], [235, 225, 215], 0, 20, 12, 16, 8, 6000.0),
    profile([35, 65, 140], [0, 0, 0], 0, 6, 0, 0, 1, 0.0),
    profile([150, 175, 70], [200, 190, 150], 12, 24, 1, 2, 1, 5000.0),
    profile([55, 135, 55], [190, 200, 190], 0, 30, 2, 4, 1, 1500.0),
    profile([165, 165, 165], [80, 80, 90], 24, 16, 6, 8, 2, 400.0),
    profile([145, 125, 175], [210, 210, 230], 0, 18, 10, 8, 2, 1900.0),
    profile([225, 185, 125], [250, 250, 250], 8, 14, 7, 12, 18, 23000.0),
    profile([200, 145, 95], [120, 60, 40], 0, 22, 8, 16, 6, 13000.0),
    profile([150, 85, 60], [110, 105, 100], 5, 28, 17, 16, 3, 8500.0),
    profile([85, 85, 85], [140, 140, 140], 16, 10, 1, 4, 1, 3000.0),
    profile([115, 160, 205], [240, 200, 120], 0, 20, 9, 8, 5, 6500.0),
    profile([45, 110, 115], [0, 0, 0], 10, 8, 0, 0, 1, 0.0),
    profile([125, 105, 75], [90, 140, 120], 6, 26, 3, 4, 1, 3500.0),
];

/// Raster, polygons and exact per-cell truth of a synthetic city.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCity {
    pub raster: RasterImage,
    pub grid: GridSpec,
    pub buildings: Vec<PolygonFeature>,
    pub blocks: Vec<PolygonFeature>,
    pub zones: Vec<PolygonFeature>,
    /// Class of each cell, row-major.
    pub plan: Vec<LandUse>,
}

impl SyntheticCity {
    /// Generator truth for one layer, without any geometry processing.
    pub fn truth(&self, task: Task) -> LabelGrid {
        let values = self
            .plan
            .iter()
            .map(|c| {
                let p = &PROFILES[c.index()];
                match task {
                    Task::Land => c.index() as f64,
                    Task::Bd => p.building_density,
                    Task::Far => p.floor_area_ratio(),
                    Task::Pop => p.population(),
                }
            })
            .collect();
        LabelGrid::new(self.grid, task, values, vec![true; self.grid.len()]).expect("profiles stay in range")
    }

    /// Number of cells of each class.
    pub fn class_counts(&self) -> [usize; LandUse::COUNT] {
        let mut counts = [0; LandUse::COUNT];
        self.plan.iter().for_each(|c| counts[c.index()] += 1);
        counts
    }
}

/// Balanced class plan: every class gets `⌊n/13⌋` or `⌈n/13⌉` cells, placed at random.
fn class_plan(cells: usize, rng: &mut ChaCha8Rng) -> Vec<LandUse> {
    let mut extra: Vec<LandUse> = LandUse::ALL.to_vec();
    extra.shuffle(rng);
    let mut plan: Vec<LandUse> = (0..cells)
        .map(|k| if k < cells - cells % LandUse::COUNT { LandUse::ALL[k % LandUse::COUNT] } else { extra[k % LandUse::COUNT] })
        .collect();
    plan.shuffle(rng);
    plan
}

fn cell_buildings(cell: Rect<f64>, p: &ClassProfile, rng: &mut ChaCha8Rng) -> Vec<Rect<f64>> {
    if p.buildings == 0 {
        return Vec::new();
    }
    let lot = (cell.max_x - cell.min_x) / LOTS_PER_SIDE as f64;
    let cell_area = (cell.max_x - cell.min_x) * (cell.max_y - cell.min_y);
    let footprint = p.building_density * cell_area / p.buildings as f64;
    let mut lots: Vec<usize> = (0..LOTS_PER_SIDE * LOTS_PER_SIDE).collect();
    lots.shuffle(rng);
    lots.truncate(p.buildings);
    lots.sort_unstable();
    lots.into_iter()
        .map(|k| {
            // aspect ratio within what the lot can hold
            let max_side = lot * 0.95;
            let min_w = footprint / max_side;
            let w = if min_w >= max_side { max_side } else { rng.random_range(min_w.max(lot * 0.3).min(max_side)..=max_side) };
            let h = footprint / w;
            let (lr, lc) = (k / LOTS_PER_SIDE, k % LOTS_PER_SIDE);
            let x0 = cell.min_x + lc as f64 * lot + rng.random_range(0.0..=(lot - w));
            let y0 = cell.min_y + lr as f64 * lot + rng.random_range(0.0..=(lot - h).max(0.0));
            Rect::new(x0, y0, x0 + w, y0 + h)
        })
        .collect()
}

fn paint_cell(
    pixels: &mut [u8],
    width: usize,
    (r0, c0): (usize, usize),
    p: &ClassProfile,
    roofs: &[Rect<f64>],
    geo: &GeoTransform,
    rng: &mut ChaCha8Rng,
) {
    for y in r0..r0 + TILE_PIXELS {
        for x in c0..c0 + TILE_PIXELS {
            let cy = geo.origin_y + (y as f64 + 0.5) * geo.pixel_size;
            let cx = geo.origin_x + (x as f64 + 0.5) * geo.pixel_size;
            let on_roof = roofs.iter().any(|r| cx >= r.min_x && cx < r.max_x && cy >= r.min_y && cy < r.max_y);
            let stripe = p.stripe_period > 0 && ((x + y) / p.stripe_period) % 2 == 0;
            let noise = rng.random_range(-(p.noise as i32)..=p.noise as i32);
            let base = if on_roof { p.roof } else { p.ground };
            let o = (y * width + x) * 3;
            for ch in 0..3 {
                let shade = if stripe && !on_roof { -25 } else { 0 };
                pixels[o + ch] = (base[ch] as i32 + shade + noise).clamp(0, 255) as u8;
            }
        }
    }
}

/// Generates a `rows`×`cols`-cell city; identical seeds give identical cities.
pub fn synthesize_city(seed: u64, rows: usize, cols: usize) -> Result<SyntheticCity> {
    if rows < 4 || cols < 4 {
        bail!(InvalidArgument, "synthetic city needs at least 4x4 cells, got {rows}x{cols}");
    }
    let geo = GeoTransform { origin_x: 0.0, origin_y: 0.0, pixel_size: DEFAULT_PIXEL_SIZE };
    let grid = GridSpec::new(0.0, 0.0, TILE_PIXELS as f64 * geo.pixel_size, rows, cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = class_plan(grid.len(), &mut rng);
    let (height, width) = (rows * TILE_PIXELS, cols * TILE_PIXELS);
    let mut pixels = vec![0u8; height * width * 3];
    let mut buildings = Vec::new();
    let mut blocks = Vec::new();
    let mut zones = Vec::new();
    for (i, class) in plan.iter().enumerate() {
        let (r, c) = grid.cell_of(i);
        let cell = grid.cell_rect(r, c);
        let p = &PROFILES[class.index()];
        let roofs = cell_buildings(cell, p, &mut rng);
        paint_cell(&mut pixels, width, (r * TILE_PIXELS, c * TILE_PIXELS), p, &roofs, &geo, &mut rng);
        for roof in &roofs {
            buildings.push(PolygonFeature::rectangle(*roof, FeatureKind::Building { floors: p.floors })?);
        }
        let split = cell.min_x + grid.cell_size * rng.random_range(0.25..0.75);
        for part in [Rect::new(cell.min_x, cell.min_y, split, cell.max_y), Rect::new(split, cell.min_y, cell.max_x, cell.max_y)] {
            let population = p.population() * part.area() / cell.area();
            blocks.push(PolygonFeature::rectangle(part, FeatureKind::Block { population })?);
        }
        zones.push(PolygonFeature::rectangle(cell, FeatureKind::LandUse { class: *class })?);
    }
    let raster = RasterImage::new(height, width, 3, PixelData::U8(pixels), geo)?;
    Ok(SyntheticCity { raster, grid, buildings, blocks, zones, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geolabel::{building_density_grid, floor_area_ratio_grid, landuse_grid, population_grid};

    #[test]
    fn profiles_are_consistent() {
        for (k, p) in PROFILES.iter().enumerate() {
            let lot_area = (240.0 / LOTS_PER_SIDE as f64).powi(2) * 0.95 * 0.95;
            if p.buildings > 0 {
                assert!(p.building_density * 57600.0 / p.buildings as f64 <= lot_area, "class {k} buildings overflow lots");
            }
            assert!(p.floor_area_ratio() <= 10.0 && p.population() <= 7500.0, "class {k} out of range");
        }
        assert_eq!(PROFILES[LandUse::WaterRiverLake.index()].buildings, 0);
        assert_eq!(PROFILES[LandUse::WaterPond.index()].buildings, 0);
    }

    #[test]
    fn deterministic() {
        let a = synthesize_city(5, 4, 5).unwrap();
        let b = synthesize_city(5, 4, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.raster, synthesize_city(6, 4, 5).unwrap().raster);
        assert!(synthesize_city(1, 3, 8).is_err());
    }

    #[test]
    fn balanced_plan() {
        let city = synthesize_city(2, 8, 8).unwrap();
        let counts = city.class_counts();
        assert!(counts.iter().all(|&n| n == 4 || n == 5));
        assert_eq!(counts.iter().sum::<usize>(), 64);
    }

    #[test]
    fn pipeline_matches_generator_truth() {
        let city = synthesize_city(11, 5, 6).unwrap();
        let bd = building_density_grid(&city.buildings, &city.grid).unwrap();
        let far = floor_area_ratio_grid(&city.buildings, &city.grid).unwrap();
        let pop = population_grid(&city.blocks, &city.grid).unwrap();
        let land = landuse_grid(&city.zones, &city.grid).unwrap();
        for (task, got) in [(Task::Bd, &bd.grid), (Task::Far, &far.grid), (Task::Pop, &pop.grid), (Task::Land, &land.grid)] {
            let want = city.truth(task);
            assert_eq!(got.valid_count(), city.grid.len());
            let tol = if task == Task::Pop { 1e-9 * 7500.0 } else { 1e-9 };
            for (a, b) in got.values().iter().zip(want.values()) {
                assert!((a - b).abs() <= tol, "{task}: {a} vs {b}");
            }
        }
        for (i, c) in city.plan.iter().enumerate() {
            if matches!(c, LandUse::WaterRiverLake | LandUse::WaterPond) {
                assert_eq!(bd.grid.get_index(i), Some(0.0));
                assert_eq!(far.grid.get_index(i), Some(0.0));
            }
        }
    }
}
