//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use megacity::geolabel::{DiscretizationSpec, LabelScheme};
use megacity::mapper::Decoding;
use megacity::net::{ConvSpec, NetworkConfig, PoolSpec, TrainConfig};
use megacity::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// Every setting of a run. All keys have defaults, so an empty file is valid.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub precision: Precision,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub scheme: LabelScheme,
    pub decoding: Decoding,
    pub synth_rows: usize,
    pub synth_cols: usize,
    pub holdout_per_class: usize,
    pub city_dir: PathBuf,
    pub labels_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub products_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            precision: Precision::F32,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            scheme: LabelScheme::default(),
            decoding: Decoding::ArgmaxMidpoint,
            synth_rows: 8,
            synth_cols: 8,
            holdout_per_class: 0,
            city_dir: "city".into(),
            labels_dir: "labels".into(),
            checkpoint: "model.mck".into(),
            products_dir: "products".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Format(format!("{key}: cannot parse {value:?}: {e}")))
}

fn conv_mut<'a>(net: &'a mut NetworkConfig, name: &str) -> Option<&'a mut ConvSpec> {
    Some(match name {
        "stage1" => &mut net.stage1,
        "stage2" => &mut net.stage2,
        "stage3a" => &mut net.stage3[0],
        "stage3b" => &mut net.stage3[1],
        "stage4a" => &mut net.stage4[0],
        "stage4b" => &mut net.stage4[1],
        _ => return None,
    })
}

fn pool_mut<'a>(net: &'a mut NetworkConfig, name: &str) -> Option<&'a mut PoolSpec> {
    Some(match name {
        "pool1" => &mut net.pool1,
        "pool2" => &mut net.pool2,
        "pool3" => &mut net.pool3,
        "avgpool" => &mut net.avgpool,
        _ => return None,
    })
}

fn bins_mut<'a>(scheme: &'a mut LabelScheme, name: &str) -> Option<&'a mut DiscretizationSpec> {
    Some(match name {
        "bd" => &mut scheme.bd,
        "far" => &mut scheme.far,
        "pop" => &mut scheme.pop,
        _ => return None,
    })
}

const CONVS: [&str; 6] = ["stage1", "stage2", "stage3a", "stage3b", "stage4a", "stage4b"];
const POOLS: [&str; 4] = ["pool1", "pool2", "pool3", "avgpool"];
const BINS: [&str; 3] = ["bd", "far", "pop"];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Format(format!("precision must be f32 or f64, got {value:?}"))),
                }
            }
            "decoding" => {
                self.decoding = match value {
                    "argmax" => Decoding::ArgmaxMidpoint,
                    "expected" => Decoding::Expected,
                    _ => return Err(Error::Format(format!("decoding must be argmax or expected, got {value:?}"))),
                }
            }
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.base_lr" => t.base_lr = parse(key, value)?,
            "train.lr_decay" => t.lr_decay_per_epoch = parse(key, value)?,
            "train.momentum" => t.momentum = parse(key, value)?,
            "train.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.stage2_trunk_lr" => t.stage2_trunk_lr = parse(key, value)?,
            "train.stage2_head2_lr" => t.stage2_head2_lr = parse(key, value)?,
            "train.stage1_epochs" => t.stage1_epochs = parse(key, value)?,
            "train.stage2_epochs" => t.stage2_epochs = parse(key, value)?,
            "net.input_channels" => self.network.input_channels = parse(key, value)?,
            "net.tile_size" => self.network.tile_size = parse(key, value)?,
            "synth.rows" => self.synth_rows = parse(key, value)?,
            "synth.cols" => self.synth_cols = parse(key, value)?,
            "labels.holdout_per_class" => self.holdout_per_class = parse(key, value)?,
            "paths.city" => self.city_dir = value.into(),
            "paths.labels" => self.labels_dir = value.into(),
            "paths.checkpoint" => self.checkpoint = value.into(),
            "paths.products" => self.products_dir = value.into(),
            _ => return self.set_nested(key, value),
        }
        Ok(())
    }

    fn set_nested(&mut self, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::Format(format!("unknown config key {key:?}"));
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["net", layer, field] => {
                if let Some(c) = conv_mut(&mut self.network, layer) {
                    match *field {
                        "size" => c.size = parse(key, value)?,
                        "filters" => c.filters = parse(key, value)?,
                        "padding" => c.padding = parse(key, value)?,
                        _ => return Err(unknown()),
                    }
                } else if let Some(p) = pool_mut(&mut self.network, layer) {
                    match *field {
                        "region" => p.region = parse(key, value)?,
                        "stride" => p.stride = parse(key, value)?,
                        _ => return Err(unknown()),
                    }
                } else {
                    return Err(unknown());
                }
            }
            ["bins", task, field] => {
                let b = bins_mut(&mut self.scheme, task).ok_or_else(unknown)?;
                match *field {
                    "lower" => b.lower = parse(key, value)?,
                    "upper" => b.upper = parse(key, value)?,
                    "levels" => b.levels = parse(key, value)?,
                    _ => return Err(unknown()),
                }
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let mut e: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("threads".into(), self.threads.to_string()),
            ("precision".into(), if self.precision == Precision::F32 { "f32" } else { "f64" }.into()),
            ("decoding".into(), if self.decoding == Decoding::Expected { "expected" } else { "argmax" }.into()),
            ("train.batch_size".into(), t.batch_size.to_string()),
            ("train.base_lr".into(), format!("{:?}", t.base_lr)),
            ("train.lr_decay".into(), format!("{:?}", t.lr_decay_per_epoch)),
            ("train.momentum".into(), format!("{:?}", t.momentum)),
            ("train.weight_decay".into(), format!("{:?}", t.weight_decay)),
            ("train.stage2_trunk_lr".into(), format!("{:?}", t.stage2_trunk_lr)),
            ("train.stage2_head2_lr".into(), format!("{:?}", t.stage2_head2_lr)),
            ("train.stage1_epochs".into(), t.stage1_epochs.to_string()),
            ("train.stage2_epochs".into(), t.stage2_epochs.to_string()),
            ("net.input_channels".into(), self.network.input_channels.to_string()),
            ("net.tile_size".into(), self.network.tile_size.to_string()),
        ];
        let mut net = self.network.clone();
        for name in CONVS {
            let c = *conv_mut(&mut net, name).expect("known layer");
            e.push((format!("net.{name}.size"), c.size.to_string()));
            e.push((format!("net.{name}.filters"), c.filters.to_string()));
            e.push((format!("net.{name}.padding"), c.padding.to_string()));
        }
        for name in POOLS {
            let p = *pool_mut(&mut net, name).expect("known pool");
            e.push((format!("net.{name}.region"), p.region.to_string()));
            e.push((format!("net.{name}.stride"), p.stride.to_string()));
        }
        let mut scheme = self.scheme;
        for name in BINS {
            let b = *bins_mut(&mut scheme, name).expect("known layer");
            e.push((format!("bins.{name}.lower"), format!("{:?}", b.lower)));
            e.push((format!("bins.{name}.upper"), format!("{:?}", b.upper)));
            e.push((format!("bins.{name}.levels"), b.levels.to_string()));
        }
        e.extend([
            ("synth.rows".into(), self.synth_rows.to_string()),
            ("synth.cols".into(), self.synth_cols.to_string()),
            ("labels.holdout_per_class".into(), self.holdout_per_class.to_string()),
            ("paths.city".into(), self.city_dir.display().to_string()),
            ("paths.labels".into(), self.labels_dir.display().to_string()),
            ("paths.checkpoint".into(), self.checkpoint.display().to_string()),
            ("paths.products".into(), self.products_dir.display().to_string()),
        ]);
        e
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies `key = value` lines over the defaults; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        self.network.validate()?;
        self.train.validate()?;
        self.scheme.validate()
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }
}
