//! Land-use composition and per-class density summaries.

use std::fmt::Write as _;

use crate::error::{bail, Result};
use crate::geolabel::LabelGrid;
use crate::metrics::format_percent;
use crate::task::{LandUse, Task};

/// Fraction of valid cells in each class, in class-index order.
pub fn class_ratios(land: &LabelGrid) -> Result<[f64; LandUse::COUNT]> {
    if land.kind != Task::Land {
        bail!(InvalidArgument, "class ratios need a land-use layer, got {}", land.kind);
    }
    let mut counts = [0usize; LandUse::COUNT];
    (0..land.spec.len()).filter_map(|i| land.class_at(i)).for_each(|c| counts[c] += 1);
    let total: usize = counts.iter().sum();
    if total == 0 {
        bail!(Data, "land-use layer has no valid cells");
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

/// `class,<label>...` with one percentage column per ratio set.
pub fn ratio_table_csv(labels: &[&str], ratios: &[[f64; LandUse::COUNT]]) -> String {
    let mut out = format!("class,{}\n", labels.join(","));
    for c in LandUse::ALL {
        let cols: Vec<String> = ratios.iter().map(|r| format_percent(r[c.index()])).collect();
        let _ = writeln!(out, "{},{}", c.slug(), cols.join(","));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassDensity {
    pub class: LandUse,
    pub cells: usize,
    pub mean_bd: Option<f64>,
    pub mean_far: Option<f64>,
}

/// Mean BD and FAR over the valid cells of each land-use class.
pub fn mean_density_by_class(land: &LabelGrid, bd: &LabelGrid, far: &LabelGrid) -> Result<Vec<ClassDensity>> {
    if land.kind != Task::Land || bd.kind != Task::Bd || far.kind != Task::Far {
        bail!(InvalidArgument, "expected land, bd and far layers");
    }
    if !land.spec.same_cells(&bd.spec) || !land.spec.same_cells(&far.spec) {
        bail!(ShapeMismatch, "layers are on different grids");
    }
    let mut sums = [(0usize, 0.0, 0usize, 0.0, 0usize); LandUse::COUNT];
    for i in 0..land.spec.len() {
        let Some(c) = land.class_at(i) else { continue };
        let s = &mut sums[c];
        s.0 += 1;
        if let Some(v) = bd.get_index(i) {
            s.1 += v;
            s.2 += 1;
        }
        if let Some(v) = far.get_index(i) {
            s.3 += v;
            s.4 += 1;
        }
    }
    Ok(LandUse::ALL
        .iter()
        .zip(sums)
        .map(|(&class, (cells, bd_sum, bd_n, far_sum, far_n))| ClassDensity {
            class,
            cells,
            mean_bd: (bd_n > 0).then(|| bd_sum / bd_n as f64),
            mean_far: (far_n > 0).then(|| far_sum / far_n as f64),
        })
        .collect())
}

/// `class,cells,mean_bd,mean_far`; absent classes have empty means.
pub fn density_table_csv(rows: &[ClassDensity]) -> String {
    let mut out = String::from("class,cells,mean_bd,mean_far\n");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.class.slug(), r.cells, fmt(r.mean_bd), fmt(r.mean_far));
    }
    out
}
