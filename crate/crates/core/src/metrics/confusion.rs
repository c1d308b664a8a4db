//! Error matrices and the accuracy measures derived from them.

use std::fmt::Write as _;

use crate::error::{bail, Error, Result};
use crate::geolabel::LabelGrid;
use crate::task::{LandUse, Task};

/// Square count matrix; rows are classified, columns are reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    names: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(names: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        let k = names.len();
        if k == 0 || counts.len() != k * k {
            bail!(ShapeMismatch, "{k} classes need {} counts, got {}", k * k, counts.len());
        }
        if counts.iter().sum::<u64>() == 0 {
            bail!(InvalidArgument, "confusion matrix is empty");
        }
        Ok(ConfusionMatrix { names, counts })
    }

    pub fn land_use(counts: Vec<u64>) -> Result<Self> {
        Self::new(LandUse::ALL.iter().map(|c| c.slug().to_string()).collect(), counts)
    }

    pub fn classes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, classified: usize, reference: usize) -> u64 {
        self.counts[classified * self.classes() + reference]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.get(i, i)).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.chunks(self.classes()).map(|r| r.iter().sum()).collect()
    }

    pub fn column_totals(&self) -> Vec<u64> {
        let k = self.classes();
        (0..k).map(|j| (0..k).map(|i| self.get(i, j)).sum()).collect()
    }

    /// CSV with a header of class names and one `name,counts...` row per class.
    pub fn to_csv(&self) -> String {
        let mut out = format!("classified\\reference,{}\n", self.names.join(","));
        for (name, row) in self.names.iter().zip(self.counts.chunks(self.classes())) {
            let row: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{name},{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty confusion matrix CSV".into()))?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut counts = Vec::with_capacity(names.len() * names.len());
        let mut rows = 0;
        for (n, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let name = fields.next().unwrap_or("").trim();
            if names.get(n).map(String::as_str) != Some(name) {
                bail!(Format, "row {} is {name:?}, expected {:?}", n + 1, names.get(n));
            }
            let row: Vec<u64> = fields
                .map(|f| f.trim().parse::<u64>().map_err(|e| Error::Format(format!("row {name}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != names.len() {
                bail!(Format, "row {name} has {} counts, expected {}", row.len(), names.len());
            }
            counts.extend(row);
            rows += 1;
        }
        if rows != names.len() {
            bail!(Format, "matrix has {rows} rows for {} classes", names.len());
        }
        Self::new(names, counts)
    }
}

/// Counts (predicted, reference) class pairs over jointly valid cells.
pub fn confusion_matrix(predicted: &LabelGrid, reference: &LabelGrid) -> Result<ConfusionMatrix> {
    if predicted.kind != Task::Land || reference.kind != Task::Land {
        bail!(InvalidArgument, "confusion matrices need land-use layers");
    }
    let k = LandUse::COUNT;
    let mut counts = vec![0u64; k * k];
    for (_, p, r) in predicted.joint_cells(reference)? {
        counts[p as usize * k + r as usize] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        bail!(Data, "no cell is valid in both land-use layers");
    }
    ConfusionMatrix::land_use(counts)
}

/// Accuracy figures of an error matrix, plus optional regression scores.
/// Per-class accuracies are `None` for classes with an empty row or column.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub overall_accuracy: f64,
    pub kappa: f64,
    pub users_accuracy: Vec<Option<f64>>,
    pub producers_accuracy: Vec<Option<f64>>,
    pub mae: Option<f64>,
    pub pearson_r: Option<f64>,
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

impl MetricsReport {
    pub fn mean_users_accuracy(&self) -> Option<f64> {
        mean_defined(&self.users_accuracy)
    }

    pub fn mean_producers_accuracy(&self) -> Option<f64> {
        mean_defined(&self.producers_accuracy)
    }

    /// `class,users_accuracy,producers_accuracy` in percent, then summary rows.
    pub fn to_csv(&self, names: &[String]) -> String {
        let pct = |v: Option<f64>| v.map(crate::metrics::format_percent).unwrap_or_default();
        let mut out = String::from("class,users_accuracy,producers_accuracy\n");
        for (k, name) in names.iter().enumerate() {
            let _ = writeln!(out, "{name},{},{}", pct(self.users_accuracy[k]), pct(self.producers_accuracy[k]));
        }
        let _ = writeln!(out, "mean,{},{}", pct(self.mean_users_accuracy()), pct(self.mean_producers_accuracy()));
        let _ = writeln!(out, "overall_accuracy,{},", crate::metrics::format_percent(self.overall_accuracy));
        let _ = writeln!(out, "kappa,{:.4},", self.kappa);
        out
    }
}

/// OA, per-class UA and PA, and Cohen's kappa.
pub fn accuracy_report(cm: &ConfusionMatrix) -> MetricsReport {
    let n = cm.total() as f64;
    let rows = cm.row_totals();
    let cols = cm.column_totals();
    let p0 = cm.trace() as f64 / n;
    let pe: f64 = rows.iter().zip(&cols).map(|(&r, &c)| r as f64 * c as f64).sum::<f64>() / (n * n);
    let kappa = if p0 == 1.0 { 1.0 } else { (p0 - pe) / (1.0 - pe) };
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    MetricsReport {
        overall_accuracy: p0,
        kappa,
        users_accuracy: (0..cm.classes()).map(|i| ratio(cm.get(i, i), rows[i])).collect(),
        producers_accuracy: (0..cm.classes()).map(|j| ratio(cm.get(j, j), cols[j])).collect(),
        mae: None,
        pearson_r: None,
    }
}
