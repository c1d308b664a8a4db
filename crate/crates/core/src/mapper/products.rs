//! Map products on disk: one CSV per layer, the grid geometry, a land-use
//! index image (PGM) and a colorized land-use image (PPM).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{bail, Error, Result};
use crate::geolabel::{GridSpec, LabelGrid};
use crate::mapper::predict::MapProduct;
use crate::task::{LandUse, Task};

pub const GRID_FILE: &str = "grid.txt";
pub const LAND_INDEX_FILE: &str = "land_index.pgm";
pub const LAND_COLOR_FILE: &str = "land.ppm";
/// Index and color written for masked cells.
pub const MASKED_INDEX: u8 = 255;
pub const MASKED_COLOR: [u8; 3] = [255, 255, 255];

pub fn layer_file(task: Task) -> String {
    format!("{}.csv", task.name())
}

/// Binary PGM with one pixel per cell holding the class index.
pub fn land_index_pgm(land: &LabelGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", land.spec.cols, land.spec.rows).into_bytes();
    out.extend((0..land.spec.len()).map(|i| land.class_at(i).map_or(MASKED_INDEX, |c| c as u8)));
    out
}

/// Binary PPM with `scale`×`scale` pixels per cell in the class color.
pub fn land_color_ppm(land: &LabelGrid, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (rows, cols) = (land.spec.rows, land.spec.cols);
    let mut out = format!("P6\n{} {}\n255\n", cols * scale, rows * scale).into_bytes();
    for r in 0..rows {
        let line: Vec<u8> = (0..cols)
            .flat_map(|c| {
                let color = land
                    .class_at(land.spec.index(r, c))
                    .and_then(LandUse::from_index)
                    .map_or(MASKED_COLOR, LandUse::color);
                std::iter::repeat_n(color, scale).flatten()
            })
            .collect();
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

/// Writes all product files into `dir`, creating it if needed. On failure
/// every file written so far is removed.
pub fn write_products(product: &MapProduct, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![(dir.join(GRID_FILE), product.spec().to_text().into_bytes())];
    for task in Task::ALL {
        files.push((dir.join(layer_file(task)), product.layer(task).to_csv().into_bytes()));
    }
    files.push((dir.join(LAND_INDEX_FILE), land_index_pgm(&product.land)));
    files.push((dir.join(LAND_COLOR_FILE), land_color_ppm(&product.land, 1)));
    let mut written = Vec::new();
    for (path, bytes) in &files {
        if let Err(e) = write_file(path, bytes) {
            let _ = fs::remove_file(path);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(())
}

/// Reads the layer CSVs and grid geometry written by [`write_products`].
pub fn read_products(dir: &Path) -> Result<MapProduct> {
    let spec_path = dir.join(GRID_FILE);
    let spec = GridSpec::from_text(&fs::read_to_string(&spec_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", spec_path.display())))?;
    let read = |task| LabelGrid::read_csv(&dir.join(layer_file(task)), task)?.with_spec(spec);
    MapProduct::new(read(Task::Land)?, read(Task::Bd)?, read(Task::Far)?, read(Task::Pop)?)
}

/// Parses a binary PGM written by [`land_index_pgm`] into `(rows, cols, indices)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            bail!(Format, "truncated PGM header");
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let body = &bytes[(pos + 1).min(bytes.len())..];
    let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("PGM header: {e}")));
    if fields[0] != "P5" || fields[3] != "255" {
        bail!(Format, "expected an 8-bit binary PGM");
    }
    let (cols, rows) = (num(&fields[1])?, num(&fields[2])?);
    if body.len() != rows * cols {
        bail!(Format, "PGM body has {} bytes, expected {}", body.len(), rows * cols);
    }
    Ok((rows, cols, body.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn product(mask: Vec<bool>) -> MapProduct {
        let spec = GridSpec::new(100.0, 200.0, 240.0, 2, 3).unwrap();
        let g = |task, v: Vec<f64>| LabelGrid::new(spec, task, v, mask.clone()).unwrap();
        MapProduct::new(
            g(Task::Land, vec![0.0, 3.0, 3.0, 12.0, 9.0, 0.0]),
            g(Task::Bd, vec![0.02, 0.5, 0.1 + 0.2, 0.98, 0.06, 0.14]),
            g(Task::Far, vec![0.15625, 4.0, 9.84375, 0.0, 1.0 / 3.0, 2.2]),
            g(Task::Pop, vec![93.75, 7406.25, 1000.0, 0.0, 3000.0, 12.5]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for p in [product(vec![true; 6]), product(vec![true, false, true, true, false, true])] {
            write_products(&p, dir.path()).unwrap();
            assert_eq!(read_products(dir.path()).unwrap(), p);
        }
        let csv = fs::read_to_string(dir.path().join("bd.csv")).unwrap();
        assert!(csv.contains("0,1,,0\n"));
    }

    #[test]
    fn index_image_values() {
        let p = product(vec![true; 6]);
        let (rows, cols, idx) = parse_pgm(&land_index_pgm(&p.land)).unwrap();
        assert_eq!((rows, cols), (2, 3));
        assert_eq!(idx, vec![0, 3, 3, 12, 9, 0]);
        assert_eq!(idx.iter().collect::<HashSet<_>>().len(), 4);
        let ppm = land_color_ppm(&p.land, 2);
        assert!(ppm.starts_with(b"P6\n6 4\n255\n"));
        assert_eq!(ppm.len(), 11 + 6 * 4 * 3);
        assert_eq!(&ppm[11..14], &LandUse::Commercial.color());
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        // a directory where the PPM should go makes the last write fail
        fs::create_dir(dir.path().join(LAND_COLOR_FILE)).unwrap();
        assert!(write_products(&product(vec![true; 6]), dir.path()).is_err());
        let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(left, vec![std::ffi::OsString::from(LAND_COLOR_FILE)]);
    }
}
