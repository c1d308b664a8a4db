use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use megacity::geolabel::{
    building_density_grid, floor_area_ratio_grid, geojson, landuse_grid, materialize, population_grid,
    read_records, sample_records, stratified_holdout, synthesize_city, write_records, GridSpec, LabelGrid,
};
use megacity::mapper::{grid_for_raster, predict_products, products, read_products, write_products};
use megacity::mapper::{MapProduct, PredictOptions, RasterImage};
use megacity::metrics::{
    accuracy_report, class_ratios, compare_products, confusion_matrix, density_table_csv, format_percent, mae,
    mean_density_by_class, pearson_r, ratio_table_csv, scatter_csv, ConfusionMatrix,
};
use megacity::net::gradcheck::objective_suite;
use megacity::net::{load_checkpoint, save_checkpoint, train_stage1_with, train_stage2_with, Network, TrainReport};
use megacity::numerics::gradcheck::{op_suite, DEFAULT_EPSILON};
use megacity::{Error, Result, Scalar, Task};

use crate::config::{Precision, RunConfig};

pub const RASTER_FILE: &str = "raster.mcr";
pub const BUILDINGS_FILE: &str = "buildings.geojson";
pub const BLOCKS_FILE: &str = "blocks.geojson";
pub const LANDUSE_FILE: &str = "landuse.geojson";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const HOLDOUT_FILE: &str = "holdout.csv";

/// Multi-task land-use, density and population mapping from imagery.
#[derive(Parser, Debug)]
#[command(name = "megacity", version)]
pub struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for inference; 1 gives the reference evaluation order.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the effective configuration to this file before running.
    #[arg(long, global = true)]
    pub dump_config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic city: raster plus building, block and land-use polygons.
    Synth(SynthArgs),
    /// Derive per-cell label grids and the training sample list from a city directory.
    Labelgen(LabelgenArgs),
    /// First training stage (land use, building density, floor-area ratio).
    Train1(TrainArgs),
    /// Second training stage (adds population) starting from a checkpoint.
    Train2(TrainArgs),
    /// Predict the four map layers for every full tile of a raster.
    Infer(InferArgs),
    /// Accuracy of predicted layers against reference layers.
    Eval(EvalArgs),
    /// Change analysis between two sets of map layers.
    Compare(CompareArgs),
    /// Finite-difference check of every differentiable operation.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LabelgenArgs {
    /// City directory holding raster.mcr and the three GeoJSON layers.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cells per land-use class kept out of samples.csv and listed in holdout.csv.
    #[arg(long)]
    pub holdout_per_class: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub raster: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Starting checkpoint (train2 only; defaults to the configured checkpoint).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Output checkpoint; the loss history goes next to it as <name>.loss.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub raster: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted layers (as written by infer).
    #[arg(long, required_unless_present = "matrix", requires = "reference")]
    pub pred: Option<PathBuf>,
    /// Directory of reference layers (as written by labelgen).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Restrict the evaluation to the cells listed in this row,col CSV.
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Evaluate a stored error matrix CSV instead of two map directories.
    #[arg(long, conflicts_with_all = ["pred", "cells"])]
    pub matrix: Option<PathBuf>,
    /// Directory for the CSV reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    /// Sampled trunk weights per stage objective.
    #[arg(long, default_value_t = 4)]
    pub weights: usize,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    if let Some(path) = &cli.dump_config {
        fs::write(path, cfg.to_text())?;
    }
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Labelgen(a) => labelgen(&cfg, a),
        Command::Train1(a) => match cfg.precision {
            Precision::F32 => train::<f32>(&cfg, a, 1),
            Precision::F64 => train::<f64>(&cfg, a, 1),
        },
        Command::Train2(a) => match cfg.precision {
            Precision::F32 => train::<f32>(&cfg, a, 2),
            Precision::F64 => train::<f64>(&cfg, a, 2),
        },
        Command::Infer(a) => match cfg.precision {
            Precision::F32 => infer::<f32>(&cfg, a),
            Precision::F64 => infer::<f64>(&cfg, a),
        },
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Gradcheck(a) => gradcheck(&cfg, a),
    }
}

fn synth(cfg: &RunConfig, a: SynthArgs) -> Result<ExitCode> {
    let rows = a.rows.unwrap_or(cfg.synth_rows);
    let cols = a.cols.unwrap_or(cfg.synth_cols);
    let out = a.out.unwrap_or_else(|| cfg.city_dir.clone());
    let city = synthesize_city(cfg.seed, rows, cols)?;
    fs::create_dir_all(&out)?;
    city.raster.write(&out.join(RASTER_FILE))?;
    geojson::write_features(&out.join(BUILDINGS_FILE), &city.buildings)?;
    geojson::write_features(&out.join(BLOCKS_FILE), &city.blocks)?;
    geojson::write_features(&out.join(LANDUSE_FILE), &city.zones)?;
    println!(
        "synthetic city {rows}x{cols} cells ({}x{} px), {} buildings, {} blocks -> {}",
        city.raster.height(),
        city.raster.width(),
        city.buildings.len(),
        city.blocks.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn labelgen(cfg: &RunConfig, a: LabelgenArgs) -> Result<ExitCode> {
    let input = a.input.unwrap_or_else(|| cfg.city_dir.clone());
    let out = a.out.unwrap_or_else(|| cfg.labels_dir.clone());
    let per_class = a.holdout_per_class.unwrap_or(cfg.holdout_per_class);
    let raster = RasterImage::read(&input.join(RASTER_FILE))?;
    let spec = grid_for_raster(&raster)?;
    let buildings = geojson::read_features(&input.join(BUILDINGS_FILE))?;
    let blocks = geojson::read_features(&input.join(BLOCKS_FILE))?;
    let zones = geojson::read_features(&input.join(LANDUSE_FILE))?;
    let outcomes = [
        landuse_grid(&zones, &spec)?,
        building_density_grid(&buildings, &spec)?,
        floor_area_ratio_grid(&buildings, &spec)?,
        population_grid(&blocks, &spec)?,
    ];
    for w in outcomes.iter().flat_map(|o| &o.warnings) {
        log::warn!("{w}");
    }
    let [land, bd, far, pop] = outcomes.map(|o| o.grid);
    let held = if per_class > 0 { stratified_holdout(&land, per_class, cfg.seed)? } else { vec![false; spec.len()] };
    let records: Vec<_> = sample_records(&[&land, &bd, &far, &pop], &cfg.scheme, cfg.seed)?
        .into_iter()
        .filter(|r| !held[spec.index(r.row, r.col)])
        .collect();
    let product = MapProduct::new(land, bd, far, pop)?;
    write_products(&product, &out)?;
    write_records(&out.join(SAMPLES_FILE), &records)?;
    if per_class > 0 {
        let mut text = String::from("row,col\n");
        for i in (0..spec.len()).filter(|&i| held[i]) {
            let (r, c) = spec.cell_of(i);
            text.push_str(&format!("{r},{c}\n"));
        }
        fs::write(out.join(HOLDOUT_FILE), text)?;
    }
    println!(
        "{}x{} cells, {} samples, {} held-out cells -> {}",
        spec.rows,
        spec.cols,
        records.len(),
        held.iter().filter(|&&h| h).count(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.csv")
}

fn train<T: Scalar>(cfg: &RunConfig, a: TrainArgs, stage: u8) -> Result<ExitCode> {
    let raster_path = a.raster.unwrap_or_else(|| cfg.city_dir.join(RASTER_FILE));
    let labels = a.labels.unwrap_or_else(|| cfg.labels_dir.clone());
    let out = a.out.unwrap_or_else(|| cfg.checkpoint.clone());
    let mut tc = cfg.train_config();
    if let Some(e) = a.epochs {
        if stage == 1 {
            tc.stage1_epochs = e;
        } else {
            tc.stage2_epochs = e;
        }
    }
    let raster = RasterImage::read(&raster_path)?;
    let spec = GridSpec::from_text(&fs::read_to_string(labels.join(products::GRID_FILE))?)?;
    let mut records = read_records(&labels.join(SAMPLES_FILE))?;
    if stage == 1 {
        records.retain(|r| r.label.task != Task::Pop);
    }
    let samples = materialize::<T>(&raster, &spec, &records)?;
    let mut net: Network<T> = if stage == 1 {
        if a.init.is_some() {
            return Err(Error::InvalidArgument("train1 starts from a fresh network; --init is for train2".into()));
        }
        Network::build(&cfg.network, cfg.seed)?
    } else {
        load_checkpoint(a.init.as_deref().unwrap_or(&cfg.checkpoint), &cfg.network)?
    };
    let print = |epoch: usize, loss: f64| println!("stage {stage} epoch {epoch}: loss {loss:.6}");
    let report: TrainReport = if stage == 1 {
        train_stage1_with(&mut net, &samples, &tc, print)?
    } else {
        train_stage2_with(&mut net, &samples, &tc, print)?
    };
    save_checkpoint(&net, &out)?;
    let mut history = String::from("epoch,loss\n");
    for (e, l) in report.epoch_losses.iter().enumerate() {
        history.push_str(&format!("{e},{l:?}\n"));
    }
    fs::write(history_path(&out), history)?;
    println!("trained on {} samples, checkpoint -> {}", samples.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn infer<T: Scalar>(cfg: &RunConfig, a: InferArgs) -> Result<ExitCode> {
    let checkpoint = a.checkpoint.unwrap_or_else(|| cfg.checkpoint.clone());
    let raster_path = a.raster.unwrap_or_else(|| cfg.city_dir.join(RASTER_FILE));
    let out = a.out.unwrap_or_else(|| cfg.products_dir.clone());
    let net: Network<T> = load_checkpoint(&checkpoint, &cfg.network)?;
    let raster = RasterImage::read(&raster_path)?;
    let spec = grid_for_raster(&raster)?;
    let options = PredictOptions {
        decoding: cfg.decoding,
        keep_distributions: false,
        threads: NonZeroUsize::new(cfg.threads).unwrap_or(NonZeroUsize::MIN),
        scheme: cfg.scheme,
    };
    let product = predict_products(&net, &raster, &spec, &options)?;
    write_products(&product, &out)?;
    println!("{} cells predicted -> {}", product.land.valid_count(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn read_cells(path: &Path, spec: &GridSpec) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path)?;
    let mut keep = vec![false; spec.len()];
    for (n, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("{}: line {}: expected row,col", path.display(), n + 1));
        let (r, c) = line.trim().split_once(',').ok_or_else(bad)?;
        let (r, c): (usize, usize) = (r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
        if r >= spec.rows || c >= spec.cols {
            return Err(bad());
        }
        keep[spec.index(r, c)] = true;
    }
    Ok(keep)
}

fn restrict(grid: &LabelGrid, keep: &[bool]) -> Result<LabelGrid> {
    let mask = grid.mask().iter().zip(keep).map(|(&m, &k)| m && k).collect();
    LabelGrid::new(grid.spec, grid.kind, grid.values().to_vec(), mask)
}

fn write_report(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn print_accuracy(cm: &ConfusionMatrix, out: Option<&Path>) -> Result<()> {
    let report = accuracy_report(cm);
    println!("cells: {}", cm.total());
    println!("overall accuracy: {}%", format_percent(report.overall_accuracy));
    println!("kappa: {:.4}", report.kappa);
    write_report(out, "confusion.csv", &cm.to_csv())?;
    write_report(out, "accuracy.csv", &report.to_csv(cm.names()))
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let out = a.out.as_deref();
    if let Some(path) = &a.matrix {
        let cm = ConfusionMatrix::from_csv(&fs::read_to_string(path)?)?;
        print_accuracy(&cm, out)?;
        return Ok(ExitCode::SUCCESS);
    }
    let pred = read_products(a.pred.as_deref().expect("required by clap"))?;
    let reference = read_products(a.reference.as_deref().expect("required by clap"))?;
    if !pred.spec().same_cells(reference.spec()) {
        return Err(Error::ShapeMismatch("predicted and reference layers are on different grids".into()));
    }
    let keep = match &a.cells {
        Some(path) => read_cells(path, pred.spec())?,
        None => vec![true; pred.spec().len()],
    };
    let layer = |p: &MapProduct, t| restrict(p.layer(t), &keep);
    print_accuracy(&confusion_matrix(&layer(&pred, Task::Land)?, &layer(&reference, Task::Land)?)?, out)?;
    let mut regression = String::from("layer,mae,pearson_r\n");
    for task in [Task::Bd, Task::Far, Task::Pop] {
        let (p, r) = (layer(&pred, task)?, layer(&reference, task)?);
        let m = mae(&p, &r)?;
        let corr = pearson_r(&p, &r)?;
        let corr_text = corr.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
        println!("{task}: mae {m:.6}, r {corr_text}");
        regression.push_str(&format!("{task},{m:?},{}\n", corr.map(|v| format!("{v:?}")).unwrap_or_default()));
    }
    write_report(out, "regression.csv", &regression)?;
    let densities = mean_density_by_class(&layer(&pred, Task::Land)?, &layer(&pred, Task::Bd)?, &layer(&pred, Task::Far)?)?;
    write_report(out, "density_by_class.csv", &density_table_csv(&densities))?;
    let ratios = [class_ratios(&layer(&pred, Task::Land)?)?, class_ratios(&layer(&reference, Task::Land)?)?];
    write_report(out, "class_ratios.csv", &ratio_table_csv(&["predicted", "reference"], &ratios))?;
    Ok(ExitCode::SUCCESS)
}

fn compare(a: CompareArgs) -> Result<ExitCode> {
    let pa = read_products(&a.a)?;
    let pb = read_products(&a.b)?;
    let report = compare_products(&pa, &pb)?;
    fs::create_dir_all(&a.out)?;
    let mut ratios = ratio_table_csv(&["a", "b"], &[report.ratios_a, report.ratios_b]);
    ratios = ratios
        .lines()
        .zip(std::iter::once(None).chain(report.ratio_deltas().map(Some)))
        .map(|(line, d)| match d {
            None => format!("{line},delta\n"),
            Some(d) => format!("{line},{}\n", format_percent(d)),
        })
        .collect();
    fs::write(a.out.join("ratios.csv"), ratios)?;
    fs::write(a.out.join("summary.csv"), report.summary_csv())?;
    fs::write(a.out.join("agreement.csv"), report.agreement_csv(pa.spec().cols))?;
    for l in &report.layers {
        fs::write(a.out.join(format!("scatter_{}.csv", l.task)), scatter_csv(&l.scatter))?;
        let r = l.pearson_r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
        println!("{}: mae {:.6}, r {r}", l.task, l.mae);
    }
    let rate = report.agreement_rate().map(format_percent).unwrap_or_else(|| "undefined".into());
    println!("land-use agreement: {rate}%");
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(cfg: &RunConfig, a: GradcheckArgs) -> Result<ExitCode> {
    let mut reports = op_suite(cfg.seed, a.epsilon);
    reports.extend(objective_suite(&cfg.network, cfg.seed, a.weights, a.epsilon)?.into_iter().map(|(r, _)| r));
    let mut ok = true;
    for r in &reports {
        let pass = r.passes(a.threshold);
        ok &= pass;
        println!("{:<24} max relative error {:.3e}  {}", r.name, r.max_rel_error, if pass { "PASS" } else { "FAIL" });
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
