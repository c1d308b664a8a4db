//! Regular cell grids and per-cell label layers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{bail, Error, Result};
use crate::geolabel::geometry::Rect;
use crate::task::Task;

/// Default cell size: 200 pixels at 1.2 m.
pub const DEFAULT_CELL_SIZE: f64 = 240.0;

/// Cell `(i, j)` spans `[x0 + j·s, x0 + (j+1)·s) × [y0 + i·s, y0 + (i+1)·s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, rows: usize, cols: usize) -> Result<Self> {
        let spec = GridSpec { origin_x, origin_y, cell_size, rows, cols };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid at the origin with the default cell size.
    pub fn with_dims(rows: usize, cols: usize) -> Result<Self> {
        Self::new(0.0, 0.0, DEFAULT_CELL_SIZE, rows, cols)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            bail!(InvalidArgument, "cell size must be positive, got {}", self.cell_size);
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            bail!(InvalidArgument, "grid origin must be finite");
        }
        if self.rows == 0 || self.cols == 0 {
            bail!(InvalidArgument, "grid needs at least one row and column, got {}x{}", self.rows, self.cols);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn cell_of(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn cell_rect(&self, row: usize, col: usize) -> Rect<f64> {
        let s = self.cell_size;
        Rect::new(
            self.origin_x + col as f64 * s,
            self.origin_y + row as f64 * s,
            self.origin_x + (col + 1) as f64 * s,
            self.origin_y + (row + 1) as f64 * s,
        )
    }

    pub fn extent(&self) -> Rect<f64> {
        Rect::new(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.cols as f64 * self.cell_size,
            self.origin_y + self.rows as f64 * self.cell_size,
        )
    }

    /// Inclusive-exclusive row and column ranges of cells that may overlap `bbox`.
    pub fn cells_overlapping(&self, bbox: &Rect<f64>) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = ((lo - origin) / self.cell_size).floor().max(0.0);
            let b = ((hi - origin) / self.cell_size).floor() + 1.0;
            let a = (a as usize).min(n);
            let b = if b <= 0.0 { 0 } else { (b as usize).min(n) };
            a..b.max(a)
        };
        (
            span(bbox.min_y, bbox.max_y, self.origin_y, self.rows),
            span(bbox.min_x, bbox.max_x, self.origin_x, self.cols),
        )
    }

    pub fn same_cells(&self, other: &GridSpec) -> bool {
        self == other
    }

    /// `key=value` lines for `origin_x`, `origin_y`, `cell_size`, `rows`, `cols`.
    pub fn to_text(&self) -> String {
        format!(
            "origin_x={:?}\norigin_y={:?}\ncell_size={:?}\nrows={}\ncols={}\n",
            self.origin_x, self.origin_y, self.cell_size, self.rows, self.cols
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = GridSpec { origin_x: 0.0, origin_y: 0.0, cell_size: DEFAULT_CELL_SIZE, rows: 0, cols: 0 };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let real = || value.parse::<f64>().map_err(|e| Error::Format(format!("{key}: {e}")));
            let count = || value.parse::<usize>().map_err(|e| Error::Format(format!("{key}: {e}")));
            match key {
                "origin_x" => spec.origin_x = real()?,
                "origin_y" => spec.origin_y = real()?,
                "cell_size" => spec.cell_size = real()?,
                "rows" => spec.rows = count()?,
                "cols" => spec.cols = count()?,
                _ => bail!(Format, "unknown grid key {key:?}"),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// One label layer over a grid. Values are class indices for LAND and
/// physical values otherwise; masked cells hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelGrid {
    pub spec: GridSpec,
    pub kind: Task,
    values: Vec<f64>,
    mask: Vec<bool>,
}

/// Inclusive value range of a layer after clamping.
pub fn value_range(kind: Task) -> (f64, f64) {
    match kind {
        Task::Land => (0.0, (crate::task::LandUse::COUNT - 1) as f64),
        Task::Bd => (0.0, 1.0),
        Task::Far => (0.0, 10.0),
        Task::Pop => (0.0, 7500.0),
    }
}

impl LabelGrid {
    pub fn new(spec: GridSpec, kind: Task, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() || mask.len() != spec.len() {
            bail!(
                ShapeMismatch,
                "grid {}x{} needs {} cells, got {} values and {} mask flags",
                spec.rows,
                spec.cols,
                spec.len(),
                values.len(),
                mask.len()
            );
        }
        let (lo, hi) = value_range(kind);
        for (i, (&v, &m)) in values.iter().zip(&mask).enumerate() {
            if !m {
                continue;
            }
            if !(v >= lo && v <= hi) {
                bail!(InvalidArgument, "{kind} value {v} at cell {i} outside [{lo}, {hi}]");
            }
            if kind == Task::Land && v.fract() != 0.0 {
                bail!(InvalidArgument, "land value {v} at cell {i} is not a class index");
            }
        }
        let values = values.into_iter().zip(&mask).map(|(v, &m)| if m { v } else { 0.0 }).collect();
        Ok(LabelGrid { spec, kind, values, mask })
    }

    /// Grid with every cell masked.
    pub fn masked(spec: GridSpec, kind: Task) -> Self {
        LabelGrid { spec, kind, values: vec![0.0; spec.len()], mask: vec![false; spec.len()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.spec.index(row, col);
        self.mask[i].then_some(self.values[i])
    }

    pub fn get_index(&self, index: usize) -> Option<f64> {
        self.mask[index].then_some(self.values[index])
    }

    pub fn class_at(&self, index: usize) -> Option<usize> {
        self.get_index(index).map(|v| v as usize)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Replaces the grid geometry, keeping values; the cell counts must match.
    pub fn with_spec(mut self, spec: GridSpec) -> Result<Self> {
        if spec.rows != self.spec.rows || spec.cols != self.spec.cols {
            bail!(
                ShapeMismatch,
                "grid is {}x{}, new spec is {}x{}",
                self.spec.rows,
                self.spec.cols,
                spec.rows,
                spec.cols
            );
        }
        spec.validate()?;
        self.spec = spec;
        Ok(self)
    }

    /// Jointly valid cells of two layers on the same grid.
    pub fn joint_cells<'a>(&'a self, other: &'a LabelGrid) -> Result<impl Iterator<Item = (usize, f64, f64)> + 'a> {
        if !self.spec.same_cells(&other.spec) {
            bail!(ShapeMismatch, "layers are on different grids");
        }
        Ok((0..self.spec.len()).filter_map(move |i| Some((i, self.get_index(i)?, other.get_index(i)?))))
    }

    /// CSV with header `row,col,value,mask`; masked cells have an empty value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value,mask\n");
        for i in 0..self.spec.len() {
            let (r, c) = self.spec.cell_of(i);
            if self.mask[i] {
                let _ = writeln!(out, "{r},{c},{},1", format_value(self.values[i], self.kind));
            } else {
                let _ = writeln!(out, "{r},{c},,0");
            }
        }
        out
    }

    /// Parses the CSV layout written by [`LabelGrid::to_csv`]. Grid geometry
    /// other than the cell counts is not stored; the default origin and cell
    /// size are used (see [`LabelGrid::with_spec`]).
    pub fn from_csv(text: &str, kind: Task) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("row,col,value,mask") => {}
            other => bail!(Format, "expected header row,col,value,mask, got {:?}", other.unwrap_or("")),
        }
        let mut cells = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                bail!(Format, "line {}: expected 4 fields, got {}", n + 2, fields.len());
            }
            let parse_usize =
                |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Format(format!("line {}: {e}", n + 2)));
            let (r, c) = (parse_usize(fields[0])?, parse_usize(fields[1])?);
            let valid = match fields[3].trim() {
                "1" => true,
                "0" => false,
                m => bail!(Format, "line {}: mask must be 0 or 1, got {m:?}", n + 2),
            };
            let value = if valid {
                fields[2].trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", n + 2)))?
            } else if fields[2].trim().is_empty() {
                0.0
            } else {
                bail!(Format, "line {}: masked cell carries a value", n + 2);
            };
            cells.push((r, c, value, valid));
        }
        let Some(&(last_r, last_c, _, _)) = cells.last() else {
            bail!(Format, "grid CSV has no cells");
        };
        let (rows, cols) = (last_r + 1, last_c + 1);
        if cells.len() != rows * cols {
            bail!(Format, "expected {} cells for a {rows}x{cols} grid, got {}", rows * cols, cells.len());
        }
        let spec = GridSpec::with_dims(rows, cols)?;
        let mut values = Vec::with_capacity(cells.len());
        let mut mask = Vec::with_capacity(cells.len());
        for (i, (r, c, v, m)) in cells.into_iter().enumerate() {
            if (r, c) != spec.cell_of(i) {
                bail!(Format, "cells must be listed row-major; cell {i} is ({r},{c})");
            }
            values.push(v);
            mask.push(m);
        }
        LabelGrid::new(spec, kind, values, mask)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path, kind: Task) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, kind).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Shortest decimal that parses back to the same f64; class indices as integers.
fn format_value(v: f64, kind: Task) -> String {
    if kind == Task::Land {
        format!("{}", v as usize)
    } else {
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_geometry() {
        let g = GridSpec::new(100.0, 50.0, 240.0, 2, 3).unwrap();
        assert_eq!(g.cell_rect(1, 2), Rect::new(580.0, 290.0, 820.0, 530.0));
        assert_eq!(g.cell_of(4), (1, 1));
        assert_eq!(g.index(1, 1), 4);
        let (rows, cols) = g.cells_overlapping(&Rect::new(300.0, 60.0, 350.0, 300.0));
        assert_eq!((rows, cols), (0..2, 0..2));
        let (rows, cols) = g.cells_overlapping(&Rect::new(-500.0, -500.0, -400.0, -400.0));
        assert!(rows.is_empty() && cols.is_empty());
        assert!(GridSpec::new(0.0, 0.0, 0.0, 1, 1).is_err());
        assert!(GridSpec::with_dims(0, 1).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        let g = GridSpec::new(-12.5, 1e6 / 3.0, 240.0, 7, 9).unwrap();
        assert_eq!(GridSpec::from_text(&g.to_text()).unwrap(), g);
        assert!(GridSpec::from_text("rows=2\ncols=2\nfoo=1\n").is_err());
        assert!(GridSpec::from_text("rows=2\n").is_err());
    }

    #[test]
    fn csv_round_trip_with_mask() {
        let spec = GridSpec::with_dims(2, 2).unwrap();
        let g = LabelGrid::new(spec, Task::Bd, vec![0.1, 0.0, 1.0 / 3.0, 0.75], vec![true, false, true, true]).unwrap();
        let text = g.to_csv();
        assert!(text.contains("0,1,,0\n"));
        assert_eq!(LabelGrid::from_csv(&text, Task::Bd).unwrap(), g);
    }

    #[test]
    fn rejects_out_of_range_and_bad_csv() {
        let spec = GridSpec::with_dims(1, 2).unwrap();
        assert!(LabelGrid::new(spec, Task::Bd, vec![1.5, 0.0], vec![true, true]).is_err());
        assert!(LabelGrid::new(spec, Task::Land, vec![2.5, 0.0], vec![true, true]).is_err());
        assert!(LabelGrid::new(spec, Task::Bd, vec![1.5, 0.0], vec![false, true]).is_ok());
        assert!(LabelGrid::from_csv("row,col,value,mask\n0,1,0.5,1\n", Task::Bd).is_err());
        assert!(LabelGrid::from_csv("r,c\n", Task::Bd).is_err());
        assert!(LabelGrid::from_csv("row,col,value,mask\n0,0,0.5,1\n0,1,0.2,0\n", Task::Bd).is_err());
    }
}
