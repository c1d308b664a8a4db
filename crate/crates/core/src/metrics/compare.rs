//! Change analysis between two map products.

use std::fmt::Write as _;

use crate::error::{bail, Result};
use crate::mapper::MapProduct;
use crate::metrics::landuse::class_ratios;
use crate::metrics::regression::{mae_of, pearson_of};
use crate::task::{LandUse, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerComparison {
    pub task: Task,
    pub mae: f64,
    pub pearson_r: Option<f64>,
    /// `(value_a, value_b)` of every jointly valid cell, row-major.
    pub scatter: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangeReport {
    pub ratios_a: [f64; LandUse::COUNT],
    pub ratios_b: [f64; LandUse::COUNT],
    pub layers: Vec<LayerComparison>,
    /// Per cell: whether both land-use labels agree; `None` unless valid in both.
    pub agreement: Vec<Option<bool>>,
}

impl ChangeReport {
    /// `b − a` per class.
    pub fn ratio_deltas(&self) -> [f64; LandUse::COUNT] {
        std::array::from_fn(|k| self.ratios_b[k] - self.ratios_a[k])
    }

    pub fn agreement_rate(&self) -> Option<f64> {
        let valid: Vec<bool> = self.agreement.iter().flatten().copied().collect();
        (!valid.is_empty()).then(|| valid.iter().filter(|&&a| a).count() as f64 / valid.len() as f64)
    }

    pub fn layer(&self, task: Task) -> Option<&LayerComparison> {
        self.layers.iter().find(|l| l.task == task)
    }

    /// `layer,mae,pearson_r` for the continuous layers, then the agreement rate.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("layer,mae,pearson_r\n");
        for l in &self.layers {
            let r = l.pearson_r.map(|r| format!("{r:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.6},{r}", l.task, l.mae);
        }
        let rate = self.agreement_rate().map(crate::metrics::format_percent).unwrap_or_default();
        let _ = writeln!(out, "land_agreement_percent,{rate},");
        out
    }

    /// Row-major `row,col,agree` with an empty value where either map is masked.
    pub fn agreement_csv(&self, cols: usize) -> String {
        let mut out = String::from("row,col,agree\n");
        for (i, a) in self.agreement.iter().enumerate() {
            let v = a.map(|a| if a { "1" } else { "0" }).unwrap_or("");
            let _ = writeln!(out, "{},{},{v}", i / cols, i % cols);
        }
        out
    }
}

/// CSV `value_a,value_b`.
pub fn scatter_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("value_a,value_b\n");
    for (a, b) in points {
        let _ = writeln!(out, "{a:?},{b:?}");
    }
    out
}

pub fn compare_products(a: &MapProduct, b: &MapProduct) -> Result<ChangeReport> {
    if !a.spec().same_cells(b.spec()) {
        bail!(ShapeMismatch, "products are on different grids");
    }
    let ratios_a = class_ratios(&a.land)?;
    let ratios_b = class_ratios(&b.land)?;
    let mut layers = Vec::new();
    for task in [Task::Bd, Task::Far, Task::Pop] {
        let scatter: Vec<(f64, f64)> = a.layer(task).joint_cells(b.layer(task))?.map(|(_, x, y)| (x, y)).collect();
        if scatter.is_empty() {
            bail!(Data, "no cell is valid in both {task} layers");
        }
        layers.push(LayerComparison { task, mae: mae_of(&scatter), pearson_r: pearson_of(&scatter), scatter });
    }
    let agreement = (0..a.spec().len())
        .map(|i| Some(a.land.class_at(i)? == b.land.class_at(i)?))
        .collect();
    Ok(ChangeReport { ratios_a, ratios_b, layers, agreement })
}
