//! Per-cell inference over a raster.

use std::num::NonZeroUsize;

use crate::error::{bail, Result};
use crate::geolabel::{GridSpec, LabelGrid, LabelScheme};
use crate::mapper::raster::RasterImage;
use crate::mapper::tiling::{extract_window, tile_layout};
use crate::net::{HeadOutputs, Network};
use crate::scalar::Scalar;
use crate::task::Task;

/// How a categorical head becomes a point value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Decoding {
    /// Midpoint of the most probable bin.
    #[default]
    ArgmaxMidpoint,
    /// Probability-weighted mean of the bin midpoints.
    Expected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictOptions {
    pub decoding: Decoding,
    pub keep_distributions: bool,
    pub threads: NonZeroUsize,
    pub scheme: LabelScheme,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            decoding: Decoding::default(),
            keep_distributions: false,
            threads: NonZeroUsize::MIN,
            scheme: LabelScheme::default(),
        }
    }
}

/// Head distributions of one cell, indexed like [`Task::ALL`].
#[derive(Clone, Debug, PartialEq)]
pub struct CellDistributions {
    pub probs: [Vec<f64>; 4],
}

/// The four map layers on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MapProduct {
    pub land: LabelGrid,
    pub bd: LabelGrid,
    pub far: LabelGrid,
    pub pop: LabelGrid,
    pub distributions: Option<Vec<Option<CellDistributions>>>,
}

impl MapProduct {
    pub fn new(land: LabelGrid, bd: LabelGrid, far: LabelGrid, pop: LabelGrid) -> Result<Self> {
        for (task, g) in [(Task::Land, &land), (Task::Bd, &bd), (Task::Far, &far), (Task::Pop, &pop)] {
            if g.kind != task {
                bail!(InvalidArgument, "{task} layer holds {} values", g.kind);
            }
            if !g.spec.same_cells(&land.spec) {
                bail!(ShapeMismatch, "{task} layer is on a different grid");
            }
        }
        Ok(MapProduct { land, bd, far, pop, distributions: None })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.land.spec
    }

    pub fn layer(&self, task: Task) -> &LabelGrid {
        match task {
            Task::Land => &self.land,
            Task::Bd => &self.bd,
            Task::Far => &self.far,
            Task::Pop => &self.pop,
        }
    }
}

fn point_value(task: Task, probs: &[f64], options: &PredictOptions) -> Result<f64> {
    let class = crate::net::argmax(probs);
    match (task, options.decoding) {
        (Task::Land, _) | (_, Decoding::ArgmaxMidpoint) => options.scheme.decode(task, class),
        (_, Decoding::Expected) => {
            let mut value = 0.0;
            for (k, p) in probs.iter().enumerate() {
                value += p * options.scheme.decode(task, k)?;
            }
            Ok(value)
        }
    }
}

fn cell_distributions<T: Scalar>(heads: &HeadOutputs<T>) -> CellDistributions {
    let probs = Task::ALL.map(|t| heads.at(t, 0, 0).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect());
    CellDistributions { probs }
}

/// Predicts every raster-covered cell of `spec`; uncovered cells are masked.
/// The result does not depend on the thread count.
pub fn predict_products<T: Scalar>(
    net: &Network<T>,
    raster: &RasterImage,
    spec: &GridSpec,
    options: &PredictOptions,
) -> Result<MapProduct> {
    if net.normalization.is_none() {
        bail!(InvalidArgument, "network has no input normalization statistics; load a trained checkpoint");
    }
    options.scheme.validate()?;
    let layout = tile_layout(raster, spec)?;
    let cells: Vec<usize> = (0..spec.len()).filter(|&i| layout.covered[i]).collect();
    let size = net.config().tile_size;

    let predict = |i: usize| -> Result<(usize, CellDistributions)> {
        let (y, x) = layout.window(i).expect("covered cell");
        let tile = extract_window::<T>(raster, y, x, size);
        let (heads, _) = net.forward(&tile)?;
        Ok((i, cell_distributions(&heads)))
    };
    let threads = options.threads.get().min(cells.len().max(1));
    let results: Vec<Result<(usize, CellDistributions)>> = if threads <= 1 {
        cells.iter().map(|&i| predict(i)).collect()
    } else {
        let chunk = cells.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = cells
                .chunks(chunk)
                .map(|part| s.spawn(|| part.iter().map(|&i| predict(i)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("inference worker panicked")).collect()
        })
    };

    let n = spec.len();
    let mut values = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut mask = vec![false; n];
    let mut dists: Vec<Option<CellDistributions>> = vec![None; n];
    for r in results {
        let (i, d) = r?;
        for (k, task) in Task::ALL.into_iter().enumerate() {
            values[k][i] = point_value(task, &d.probs[k], options)?;
        }
        mask[i] = true;
        if options.keep_distributions {
            dists[i] = Some(d);
        }
    }
    let [land, bd, far, pop] = values;
    let layer = |task, v| LabelGrid::new(*spec, task, v, mask.clone());
    let mut product = MapProduct::new(
        layer(Task::Land, land)?,
        layer(Task::Bd, bd)?,
        layer(Task::Far, far)?,
        layer(Task::Pop, pop)?,
    )?;
    if options.keep_distributions {
        product.distributions = Some(dists);
    }
    Ok(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::raster::{GeoTransform, PixelData};
    use crate::mapper::tiling::grid_for_raster;
    use crate::net::{NetworkConfig, Normalization};

    fn raster() -> RasterImage {
        let (h, w) = (400, 450);
        let data = (0..h * w * 3).map(|i| ((i * 7919) % 256) as u8).collect();
        RasterImage::new(h, w, 3, PixelData::U8(data), GeoTransform::default()).unwrap()
    }

    fn net(zero: bool) -> Network<f32> {
        let mut net = Network::build(&NetworkConfig::default(), 3).unwrap();
        if zero {
            net.params_mut().for_each(|p| p.value.iter_mut().for_each(|v| *v = 0.0));
        }
        net.normalization = Some(Normalization { mean: vec![128.0; 3], std: vec![64.0; 3] });
        net
    }

    #[test]
    fn zero_network_predicts_first_bins() {
        let r = raster();
        let spec = grid_for_raster(&r).unwrap();
        let p = predict_products(&net(true), &r, &spec, &PredictOptions::default()).unwrap();
        assert_eq!(p.land.values(), &[0.0; 4]);
        assert_eq!(p.bd.values(), &[0.02; 4]);
        assert_eq!(p.far.values(), &[0.15625; 4]);
        assert_eq!(p.pop.values(), &[93.75; 4]);
        let expected = PredictOptions { decoding: Decoding::Expected, ..Default::default() };
        let e = predict_products(&net(true), &r, &spec, &expected).unwrap();
        assert!((e.bd.get(0, 0).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let r = raster();
        let spec = GridSpec::new(0.0, 0.0, 240.0, 2, 3).unwrap();
        let n = net(false);
        let one = PredictOptions { keep_distributions: true, ..Default::default() };
        let three = PredictOptions { threads: NonZeroUsize::new(3).unwrap(), ..one };
        let a = predict_products(&n, &r, &spec, &one).unwrap();
        let b = predict_products(&n, &r, &spec, &three).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.land.valid_count(), 4);
        assert_eq!(a.land.get(0, 2), None);
        let d = a.distributions.as_ref().unwrap();
        assert!(d[2].is_none());
        let probs = &d[0].as_ref().unwrap().probs;
        assert_eq!(probs.iter().map(Vec::len).collect::<Vec<_>>(), vec![13, 25, 32, 40]);
    }

    #[test]
    fn needs_normalization() {
        let r = raster();
        let spec = grid_for_raster(&r).unwrap();
        let mut n = net(true);
        n.normalization = None;
        assert!(predict_products(&n, &r, &spec, &PredictOptions::default()).is_err());
    }
}
