//! Accuracy assessment, regression scores and change analysis.

mod compare;
mod confusion;
mod landuse;
mod regression;

pub use compare::{compare_products, scatter_csv, ChangeReport, LayerComparison};
pub use confusion::{accuracy_report, confusion_matrix, ConfusionMatrix, MetricsReport};
pub use landuse::{class_ratios, density_table_csv, mean_density_by_class, ratio_table_csv, ClassDensity};
pub use regression::{mae, mae_of, pearson_of, pearson_r};

/// Area of one 240 m cell in km².
pub const CELL_AREA_KM2: f64 = 0.0576;

/// Percentage with two decimals, rounding halves up.
pub fn format_percent(fraction: f64) -> String {
    format_fixed(fraction * 100.0, 2)
}

/// `value` with `decimals` digits, rounding halves away from zero. Values
/// within 1e-9 relative of a half are treated as exact halves.
pub fn format_fixed(value: f64, decimals: u32) -> String {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value.abs() * scale;
    let rounded = (scaled * (1.0 + 1e-9) + 0.5).floor();
    let sign = if value < 0.0 && rounded != 0.0 { "-" } else { "" };
    format!("{sign}{:.*}", decimals as usize, rounded / scale)
}

/// Persons per cell to persons per km².
pub fn per_km2(persons_per_cell: f64, cell_size_m: f64) -> f64 {
    persons_per_cell / (cell_size_m * cell_size_m / 1e6)
}
