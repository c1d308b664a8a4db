//! Agreement of continuous layers.

use crate::error::{bail, Result};
use crate::geolabel::LabelGrid;

fn pairs(a: &LabelGrid, b: &LabelGrid) -> Result<Vec<(f64, f64)>> {
    let v: Vec<(f64, f64)> = a.joint_cells(b)?.map(|(_, x, y)| (x, y)).collect();
    if v.is_empty() {
        bail!(Data, "no cell is valid in both {} layers", a.kind);
    }
    Ok(v)
}

/// Mean absolute difference over jointly valid cells.
pub fn mae(predicted: &LabelGrid, reference: &LabelGrid) -> Result<f64> {
    Ok(mae_of(&pairs(predicted, reference)?))
}

pub fn mae_of(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / pairs.len() as f64
}

/// Sample correlation over jointly valid cells; `None` for fewer than two
/// cells or a constant layer.
pub fn pearson_r(predicted: &LabelGrid, reference: &LabelGrid) -> Result<Option<f64>> {
    Ok(pearson_of(&pairs(predicted, reference)?))
}

pub fn pearson_of(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (da, db) = (a - ma, b - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
