use super::conv::output_extent;
use super::tensor::{Shape, Tensor};
use crate::error::{bail, Result};
use crate::scalar::Scalar;

fn pooled_shape(input: Shape, region: usize, stride: usize) -> Result<Shape> {
    match (
        output_extent(input.height, 0, region, stride),
        output_extent(input.width, 0, region, stride),
    ) {
        (Some(h), Some(w)) => Ok(Shape::new(h, w, input.channels)),
        _ => bail!(
            ShapeMismatch,
            "pooling region {region} (stride {stride}) does not fit a {input} input"
        ),
    }
}

/// Which input element produced each max-pool output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndex {
    pub input_shape: Shape,
    /// Flat input offset per output element.
    pub indices: Vec<u32>,
}

/// Max over each `region x region` window. Ties resolve to the first element
/// in row-major window order.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, region: usize, stride: usize) -> Result<(Tensor<T>, PoolIndex)> {
    let in_shape = input.shape();
    let out = pooled_shape(in_shape, region, stride)?;
    let c = in_shape.channels;
    let data = input.data();
    let mut values = vec![T::neg_infinity(); out.len()];
    let mut indices = vec![0u32; out.len()];
    for oy in 0..out.height {
        for ox in 0..out.width {
            let base = (oy * out.width + ox) * c;
            let best = &mut values[base..base + c];
            let arg = &mut indices[base..base + c];
            for dy in 0..region {
                for dx in 0..region {
                    let start = ((oy * stride + dy) * in_shape.width + ox * stride + dx) * c;
                    for ch in 0..c {
                        let v = data[start + ch];
                        if v > best[ch] || (dy == 0 && dx == 0) {
                            best[ch] = v;
                            arg[ch] = (start + ch) as u32;
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::from_raw(out, values), PoolIndex { input_shape: in_shape, indices }))
}

pub fn maxpool2d_backward<T: Scalar>(grad_out: &Tensor<T>, index: &PoolIndex) -> Result<Tensor<T>> {
    if grad_out.data().len() != index.indices.len() {
        bail!(ShapeMismatch, "gradient does not match the pooling record");
    }
    let mut grad = Tensor::zeros(index.input_shape.height, index.input_shape.width, index.input_shape.channels);
    let g = grad.data_mut();
    for (&i, &v) in index.indices.iter().zip(grad_out.data()) {
        g[i as usize] += v;
    }
    Ok(grad)
}

/// Arithmetic mean over each window.
pub fn avgpool2d<T: Scalar>(input: &Tensor<T>, region: usize, stride: usize) -> Result<Tensor<T>> {
    let in_shape = input.shape();
    let out = pooled_shape(in_shape, region, stride)?;
    let c = in_shape.channels;
    let data = input.data();
    let norm = T::one() / T::of((region * region) as f64);
    let mut values = vec![T::zero(); out.len()];
    for oy in 0..out.height {
        for ox in 0..out.width {
            let acc = &mut values[(oy * out.width + ox) * c..][..c];
            for dy in 0..region {
                for dx in 0..region {
                    let start = ((oy * stride + dy) * in_shape.width + ox * stride + dx) * c;
                    for (a, &v) in acc.iter_mut().zip(&data[start..start + c]) {
                        *a += v;
                    }
                }
            }
            acc.iter_mut().for_each(|a| *a *= norm);
        }
    }
    Ok(Tensor::from_raw(out, values))
}

pub fn avgpool2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input_shape: Shape,
    region: usize,
    stride: usize,
) -> Result<Tensor<T>> {
    let out = pooled_shape(input_shape, region, stride)?;
    if grad_out.shape() != out {
        bail!(ShapeMismatch, "gradient {} does not match pooled {out}", grad_out.shape());
    }
    let c = input_shape.channels;
    let norm = T::one() / T::of((region * region) as f64);
    let mut grad = Tensor::zeros(input_shape.height, input_shape.width, c);
    let g = grad.data_mut();
    for oy in 0..out.height {
        for ox in 0..out.width {
            let go = grad_out.pixel(oy, ox);
            for dy in 0..region {
                for dx in 0..region {
                    let start = ((oy * stride + dy) * input_shape.width + ox * stride + dx) * c;
                    for (d, &v) in g[start..start + c].iter_mut().zip(go) {
                        *d += v * norm;
                    }
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_sizes() {
        let (o, _) = maxpool2d(&Tensor::<f64>::zeros(196, 196, 2), 7, 4).unwrap();
        assert_eq!((o.height(), o.width()), (48, 48));
        let (o, _) = maxpool2d(&Tensor::<f64>::zeros(46, 46, 1), 3, 2).unwrap();
        assert_eq!((o.height(), o.width()), (22, 22));
        let o = avgpool2d(&Tensor::<f64>::zeros(10, 10, 128), 10, 1).unwrap();
        assert_eq!(o.shape(), Shape::new(1, 1, 128));
        let o = avgpool2d(&Tensor::<f64>::zeros(11, 11, 128), 10, 1).unwrap();
        assert_eq!(o.shape(), Shape::new(2, 2, 128));
    }

    #[test]
    fn max_of_four() {
        let t = Tensor::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (o, idx) = maxpool2d(&t, 2, 2).unwrap();
        assert_eq!(o.data(), &[4.0]);
        assert_eq!(idx.indices, vec![3]);
    }

    #[test]
    fn ties_route_to_first_maximum() {
        let t = Tensor::from_vec(2, 2, 1, vec![0.0, 5.0, 5.0, 5.0]).unwrap();
        let (_, idx) = maxpool2d(&t, 2, 2).unwrap();
        assert_eq!(idx.indices, vec![1]);
        let g = maxpool2d_backward(&Tensor::filled(1, 1, 1, 1.0), &idx).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_values_are_pooled() {
        let t = Tensor::from_vec(2, 2, 1, vec![-4.0, -3.0, -2.0, -9.0]).unwrap();
        let (o, _) = maxpool2d(&t, 2, 1).unwrap();
        assert_eq!(o.data(), &[-2.0]);
    }

    #[test]
    fn oversized_region_rejected() {
        assert!(maxpool2d(&Tensor::<f64>::zeros(3, 5, 1), 4, 1).is_err());
        assert!(avgpool2d(&Tensor::<f64>::zeros(5, 3, 1), 4, 1).is_err());
    }

    #[test]
    fn constant_average() {
        let o = avgpool2d(&Tensor::filled(6, 6, 3, 2.5f64), 3, 2).unwrap();
        assert!(o.data().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn average_gradient_is_uniform() {
        let g = avgpool2d_backward(&Tensor::filled(1, 1, 1, 4.0), Shape::new(2, 2, 1), 2, 1).unwrap();
        assert_eq!(g.data(), &[1.0; 4]);
    }
}
