//! Single- and multi-scale prediction of the fused edge map.

use log::warn;

use crate::error::{Error, Result};
use crate::maps::EdgeMap;
use crate::model::{Network, MIN_INPUT_SIZE};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_SCALES: [f64; 3] = [0.5, 1.0, 1.5];

/// The fused edge probability map at input resolution.
pub fn predict<T: Scalar>(net: &Network<T>, image: &Tensor<T>) -> Result<EdgeMap> {
    Ok(net.forward(image)?.fused)
}

/// Side length for scale `s`: unchanged at `s == 1`, otherwise rounded to
/// the nearest even integer.
pub fn scaled_len(len: usize, s: f64) -> usize {
    if s == 1.0 {
        len
    } else {
        2 * (len as f64 * s / 2.0).round() as usize
    }
}

/// Resizes a `[1, C, H, W]` tensor with align-corners bilinear interpolation.
pub fn resize_image<T: Scalar>(image: &Tensor<T>, oh: usize, ow: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = image.dims4()?;
    let data = ops::resize_bilinear_forward(n * c, (h, w), (oh, ow), image.data());
    Tensor::new(vec![n, c, oh, ow], data)
}

pub fn resize_map(map: &EdgeMap, oh: usize, ow: usize) -> EdgeMap {
    let data = ops::resize_bilinear_forward(1, (map.height, map.width), (oh, ow), &map.data);
    EdgeMap {
        height: oh,
        width: ow,
        data,
    }
}

/// Mean over `scales` of the prediction on the rescaled image, each resized
/// back to the input size. Scales whose rescaled image would be smaller than
/// the network minimum are skipped with a warning.
pub fn predict_multiscale<T: Scalar>(net: &Network<T>, image: &Tensor<T>, scales: &[f64]) -> Result<EdgeMap> {
    let (_, _, h, w) = image.dims4()?;
    if let Some(&s) = scales.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {s}")));
    }
    let mut sum: Option<EdgeMap> = None;
    let mut used = 0usize;
    for &s in scales {
        let (sh, sw) = (scaled_len(h, s), scaled_len(w, s));
        if sh < MIN_INPUT_SIZE || sw < MIN_INPUT_SIZE {
            warn!("skipping scale {s}: {sh}x{sw} is below the minimum input size");
            continue;
        }
        let map = if (sh, sw) == (h, w) {
            predict(net, image)?
        } else {
            resize_map(&predict(net, &resize_image(image, sh, sw)?)?, h, w)
        };
        match sum.as_mut() {
            None => sum = Some(map),
            Some(acc) => acc.data.iter_mut().zip(&map.data).for_each(|(a, b)| *a += b),
        }
        used += 1;
    }
    let mut mean = sum.ok_or_else(|| {
        Error::InputTooSmall {
            height: h,
            width: w,
            min: MIN_INPUT_SIZE,
        }
    })?;
    if used > 1 {
        let k = used as f64;
        mean.data.iter_mut().for_each(|v| *v /= k);
    }
    Ok(mean)
}
