//! Single-channel 2-D maps: edge probabilities, grayscale planes, labels and bit masks.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Row-major single-channel map of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

/// Per-pixel edge probability in `[0, 1]`.
pub type EdgeMap = Plane;

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "{}x{} plane needs {} values, got {}",
                height,
                width,
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at `(y, x)` with coordinates clamped into the map.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x)
    }

    /// Bilinear sample at fractional coordinates, clamped to the border.
    pub fn sample(&self, y: f64, x: f64) -> f64 {
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x1) * fx;
        let bot = self.get(y1, x0) * (1.0 - fx) + self.get(y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, |y, x| self.get(x, y))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Takes plane `(0, channel)` of a `[1, C, H, W]` tensor.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>, channel: usize) -> Result<Self> {
        let (_, c, h, w) = t.dims4()?;
        if channel >= c {
            return Err(Error::Shape(format!("channel {channel} out of {c}")));
        }
        let plane = &t.data()[channel * h * w..(channel + 1) * h * w];
        Ok(Self {
            height: h,
            width: w,
            data: plane.iter().map(|v| v.as_f64()).collect(),
        })
    }

    /// Pixels with value `>= threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMap {
        BinaryMap {
            height: self.height,
            width: self.width,
            bits: self.data.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

/// Channel-mean grayscale of a `[1, 3, H, W]` image tensor.
pub fn grayscale<T: Scalar>(image: &Tensor<T>) -> Result<Plane> {
    let (_, c, h, w) = image.dims4()?;
    let plane = h * w;
    let d = image.data();
    Ok(Plane {
        height: h,
        width: w,
        data: (0..plane)
            .map(|i| (0..c).map(|ch| d[ch * plane + i].as_f64()).sum::<f64>() / c as f64)
            .collect(),
    })
}

/// Ground-truth edge annotation: annotator consensus scaled to `0..=255`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub height: usize,
    pub width: usize,
    pub values: Vec<u8>,
}

impl GroundTruth {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "{}x{} ground truth needs {} values, got {}",
                height,
                width,
                height * width,
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// Edge pixels: `v >= threshold`.
    pub fn binarize(&self, threshold: u8) -> BinaryMap {
        BinaryMap {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl BinaryMap {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `(y, x)` of every set pixel in row-major order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }
}
