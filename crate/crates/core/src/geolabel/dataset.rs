//! Training samples from a raster and its label grids.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::geolabel::discretize::DiscretizationSpec;
use crate::geolabel::grid::{GridSpec, LabelGrid};
use crate::mapper::tiling::{extract_window, tile_layout, TILE_PIXELS};
use crate::mapper::RasterImage;
use crate::net::{Label, Sample};
use crate::numerics::Tensor;
use crate::scalar::Scalar;
use crate::task::Task;

/// Binning of the three continuous layers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelScheme {
    pub bd: DiscretizationSpec,
    pub far: DiscretizationSpec,
    pub pop: DiscretizationSpec,
}

impl Default for LabelScheme {
    fn default() -> Self {
        LabelScheme { bd: DiscretizationSpec::BD, far: DiscretizationSpec::FAR, pop: DiscretizationSpec::POP }
    }
}

impl LabelScheme {
    pub fn spec(&self, task: Task) -> Option<&DiscretizationSpec> {
        match task {
            Task::Land => None,
            Task::Bd => Some(&self.bd),
            Task::Far => Some(&self.far),
            Task::Pop => Some(&self.pop),
        }
    }

    /// Each spec must be valid and have one level per head output.
    pub fn validate(&self) -> Result<()> {
        for task in [Task::Bd, Task::Far, Task::Pop] {
            let spec = self.spec(task).expect("continuous task");
            spec.validate()?;
            if spec.levels != task.classes() {
                bail!(InvalidArgument, "{task} uses {} levels but its head has {} outputs", spec.levels, task.classes());
            }
        }
        Ok(())
    }

    /// Class index of a cell value.
    pub fn encode(&self, task: Task, value: f64) -> usize {
        match self.spec(task) {
            None => value as usize,
            Some(spec) => spec.discretize(value),
        }
    }

    /// Value represented by a class index.
    pub fn decode(&self, task: Task, class: usize) -> Result<f64> {
        match self.spec(task) {
            None if class < task.classes() => Ok(class as f64),
            None => bail!(InvalidArgument, "land class {class} out of range"),
            Some(spec) => spec.dediscretize(class),
        }
    }
}

/// One labelled cell before its tile is cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub row: usize,
    pub col: usize,
    pub label: Label,
}

fn common_spec(grids: &[&LabelGrid]) -> Result<GridSpec> {
    let Some(first) = grids.first() else {
        bail!(InvalidArgument, "no label grids given");
    };
    let mut seen = HashSet::new();
    for g in grids {
        if !g.spec.same_cells(&first.spec) {
            bail!(ShapeMismatch, "label grids {} and {} are on different grids", first.kind, g.kind);
        }
        if !seen.insert(g.kind) {
            bail!(InvalidArgument, "two {} grids given", g.kind);
        }
    }
    Ok(first.spec)
}

/// One record per unmasked cell and grid, shuffled by `seed`.
pub fn sample_records(grids: &[&LabelGrid], scheme: &LabelScheme, seed: u64) -> Result<Vec<SampleRecord>> {
    scheme.validate()?;
    let spec = common_spec(grids)?;
    let mut records = Vec::new();
    for i in 0..spec.len() {
        let (row, col) = spec.cell_of(i);
        for g in grids {
            if let Some(v) = g.get_index(i) {
                let label = Label::new(g.kind, scheme.encode(g.kind, v))?;
                records.push(SampleRecord { row, col, label });
            }
        }
    }
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(records)
}

/// Cuts the tile for every record; records of the same cell share one tile.
pub fn materialize<T: Scalar>(raster: &RasterImage, spec: &GridSpec, records: &[SampleRecord]) -> Result<Vec<Sample<T>>> {
    let layout = tile_layout(raster, spec)?;
    let mut tiles: Vec<Option<Arc<Tensor<T>>>> = vec![None; spec.len()];
    records
        .iter()
        .map(|r| {
            if r.row >= spec.rows || r.col >= spec.cols {
                bail!(InvalidArgument, "record cell ({},{}) outside the {}x{} grid", r.row, r.col, spec.rows, spec.cols);
            }
            let i = spec.index(r.row, r.col);
            let Some((y, x)) = layout.window(i) else {
                bail!(InvalidArgument, "cell ({},{}) is not covered by the raster", r.row, r.col);
            };
            let tile = tiles[i].get_or_insert_with(|| Arc::new(extract_window(raster, y, x, TILE_PIXELS)));
            Ok(Sample { tile: Arc::clone(tile), label: r.label })
        })
        .collect()
}

/// Samples for every unmasked cell and label kind, shuffled by `seed`.
pub fn assemble_dataset<T: Scalar>(
    raster: &RasterImage,
    grids: &[&LabelGrid],
    scheme: &LabelScheme,
    seed: u64,
) -> Result<Vec<Sample<T>>> {
    let records = sample_records(grids, scheme, seed)?;
    materialize(raster, &common_spec(grids)?, &records)
}

/// Marks `per_class` random cells of every land class as held out; classes
/// with no more than `per_class` cells keep all of them for training.
pub fn stratified_holdout(land: &LabelGrid, per_class: usize, seed: u64) -> Result<Vec<bool>> {
    if land.kind != Task::Land {
        bail!(InvalidArgument, "holdout needs a land grid, got {}", land.kind);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; land.spec.len()];
    for class in 0..Task::Land.classes() {
        let mut cells: Vec<usize> = (0..land.spec.len()).filter(|&i| land.class_at(i) == Some(class)).collect();
        if cells.len() <= per_class {
            continue;
        }
        cells.shuffle(&mut rng);
        cells[..per_class].iter().for_each(|&i| held[i] = true);
    }
    Ok(held)
}

/// CSV with header `row,col,task,label`.
pub fn records_to_csv(records: &[SampleRecord]) -> String {
    let mut out = String::from("row,col,task,label\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.row, r.col, r.label.task, r.label.class);
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<SampleRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("row,col,task,label") {
        bail!(Format, "expected header row,col,task,label");
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                bail!(Format, "line {}: expected 4 fields", n + 2);
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("line {}: {e}", n + 2)));
            let task: Task = f[2].parse()?;
            Ok(SampleRecord { row: num(f[0])?, col: num(f[1])?, label: Label::new(task, num(f[3])?)? })
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    records_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::{GeoTransform, PixelData};

    fn raster(h: usize, w: usize) -> RasterImage {
        let data = (0..h * w * 3).map(|i| (i % 253) as u8).collect();
        RasterImage::new(h, w, 3, PixelData::U8(data), GeoTransform::default()).unwrap()
    }

    fn grids(mask: Vec<bool>) -> (LabelGrid, LabelGrid) {
        let spec = GridSpec::with_dims(1, 3).unwrap();
        let land = LabelGrid::new(spec, Task::Land, vec![0.0, 5.0, 12.0], mask.clone()).unwrap();
        let bd = LabelGrid::new(spec, Task::Bd, vec![0.5, 1.0, 0.0], mask).unwrap();
        (land, bd)
    }

    #[test]
    fn one_sample_per_cell_and_kind() {
        let r = raster(200, 600);
        let (land, bd) = grids(vec![true; 3]);
        let samples: Vec<Sample<f64>> = assemble_dataset(&r, &[&land, &bd], &LabelScheme::default(), 3).unwrap();
        assert_eq!(samples.len(), 6);
        let mut labels: Vec<(Task, usize)> = samples.iter().map(|s| (s.label.task, s.label.class)).collect();
        labels.sort();
        assert_eq!(labels, vec![(Task::Land, 0), (Task::Land, 5), (Task::Land, 12), (Task::Bd, 0), (Task::Bd, 12), (Task::Bd, 24)]);
        let tiles: HashSet<*const Tensor<f64>> = samples.iter().map(|s| Arc::as_ptr(&s.tile)).collect();
        assert_eq!(tiles.len(), 3);
    }

    #[test]
    fn masked_cells_emit_nothing() {
        let r = raster(200, 600);
        let (land, bd) = grids(vec![true, false, true]);
        let records = sample_records(&[&land, &bd], &LabelScheme::default(), 0).unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|rec| rec.col != 1));
        assert_eq!(materialize::<f32>(&r, &land.spec, &records).unwrap().len(), 4);
    }

    #[test]
    fn uncovered_cell_rejected() {
        let r = raster(200, 400);
        let (land, bd) = grids(vec![true; 3]);
        assert!(assemble_dataset::<f64>(&r, &[&land, &bd], &LabelScheme::default(), 0).is_err());
    }

    #[test]
    fn shuffle_is_seeded() {
        let (land, bd) = grids(vec![true; 3]);
        let a = sample_records(&[&land, &bd], &LabelScheme::default(), 9).unwrap();
        let b = sample_records(&[&land, &bd], &LabelScheme::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(records_from_csv(&records_to_csv(&a)).unwrap(), a);
    }

    #[test]
    fn holdout_per_class() {
        let spec = GridSpec::with_dims(2, 3).unwrap();
        let land = LabelGrid::new(spec, Task::Land, vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0], vec![true; 6]).unwrap();
        let held = stratified_holdout(&land, 1, 4).unwrap();
        assert_eq!(held.iter().filter(|&&h| h).count(), 2);
        assert!(!held[5]);
        assert_eq!(held[..3].iter().filter(|&&h| h).count(), 1);
        assert_eq!(stratified_holdout(&land, 1, 4).unwrap(), held);
    }

    #[test]
    fn scheme_must_match_heads() {
        let (land, _) = grids(vec![true; 3]);
        let bad = LabelScheme { bd: DiscretizationSpec { lower: 0.0, upper: 1.0, levels: 10 }, ..Default::default() };
        assert!(sample_records(&[&land], &bad, 0).is_err());
        assert!(sample_records(&[&land, &land], &LabelScheme::default(), 0).is_err());
    }
}
