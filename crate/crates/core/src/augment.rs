//! Geometric data augmentation: scaling, rotation with interior crop, flipping.
//!
//! Every variant applies the same transform to the image (bilinear) and to the
//! ground truth (nearest neighbour, so label classes are preserved). The order
//! is scale, then rotate, then flip.

use crate::maps::GroundTruth;
use crate::ops;
use crate::tensor::Tensor;

/// Variants whose crop falls below this side length are dropped.
pub const MIN_CROP: usize = 16;

/// An aligned training pair: `[1, 3, H, W]` image in `[0, 1]` and its labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub gt: GroundTruth,
}

impl Sample {
    pub fn size(&self) -> (usize, usize) {
        (self.gt.height, self.gt.width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flip {
    None,
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub scale: f64,
    pub rotation_deg: f64,
    pub flip: Flip,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        scale: 1.0,
        rotation_deg: 0.0,
        flip: Flip::None,
    };
}

/// Enumerates transforms as scales × flips × rotations (rotation fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentPlan {
    pub rotations_deg: Vec<f64>,
    pub flips: Vec<Flip>,
    pub scales: Vec<f64>,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        Self::full()
    }
}

impl AugmentPlan {
    /// 16 rotations in 22.5° steps, with and without a horizontal flip, at
    /// scales 0.5, 1.0 and 1.5: 96 variants.
    pub fn full() -> Self {
        Self {
            rotations_deg: (0..16).map(|k| k as f64 * 22.5).collect(),
            flips: vec![Flip::None, Flip::Horizontal],
            scales: vec![0.5, 1.0, 1.5],
        }
    }

    pub fn identity() -> Self {
        Self {
            rotations_deg: vec![0.0],
            flips: vec![Flip::None],
            scales: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.rotations_deg.len() * self.flips.len() * self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transform(&self, index: usize) -> Transform {
        let nr = self.rotations_deg.len();
        let nf = self.flips.len();
        Transform {
            rotation_deg: self.rotations_deg[index % nr],
            flip: self.flips[(index / nr) % nf],
            scale: self.scales[index / (nr * nf)],
        }
    }

    pub fn transforms(&self) -> impl Iterator<Item = Transform> + '_ {
        (0..self.len()).map(|i| self.transform(i))
    }
}

/// All variants of `sample` under `plan`, in enumeration order, minus dropped ones.
pub fn augment(sample: &Sample, plan: &AugmentPlan) -> Vec<Sample> {
    plan.transforms().filter_map(|t| apply(sample, &t)).collect()
}

/// Applies one transform; `None` when the resulting crop is below [`MIN_CROP`].
pub fn apply(sample: &Sample, t: &Transform) -> Option<Sample> {
    let mut out = if t.scale == 1.0 {
        sample.clone()
    } else {
        scale(sample, t.scale)?
    };
    if t.rotation_deg.rem_euclid(360.0) != 0.0 {
        out = rotate_crop(&out, t.rotation_deg)?;
    }
    if t.flip == Flip::Horizontal {
        out = flip_horizontal(&out);
    }
    let (h, w) = out.size();
    (h >= MIN_CROP && w >= MIN_CROP).then_some(out)
}

pub fn flip_horizontal(sample: &Sample) -> Sample {
    let (h, w) = sample.size();
    let img = sample.image.data();
    let mut data = Vec::with_capacity(img.len());
    for c in 0..3 {
        for y in 0..h {
            let row = &img[(c * h + y) * w..(c * h + y + 1) * w];
            data.extend(row.iter().rev());
        }
    }
    let mut values = Vec::with_capacity(h * w);
    for y in 0..h {
        values.extend(sample.gt.values[y * w..(y + 1) * w].iter().rev());
    }
    Sample {
        image: Tensor::new(vec![1, 3, h, w], data).expect("same size"),
        gt: GroundTruth::new(h, w, values).expect("same size"),
    }
}

fn scale(sample: &Sample, s: f64) -> Option<Sample> {
    let (h, w) = sample.size();
    let oh = ((h as f64 * s).round() as usize).max(1);
    let ow = ((w as f64 * s).round() as usize).max(1);
    if oh < MIN_CROP || ow < MIN_CROP {
        return None;
    }
    let data = ops::resize_bilinear_forward(3, (h, w), (oh, ow), sample.image.data());
    let ty = ops::align_corners_table(h, oh);
    let tx = ops::align_corners_table(w, ow);
    let nearest = |(i0, i1, f): (usize, usize, f64)| if f < 0.5 { i0 } else { i1 };
    let mut values = Vec::with_capacity(oh * ow);
    for &ry in &ty {
        let sy = nearest(ry);
        for &rx in &tx {
            values.push(sample.gt.get(sy, nearest(rx)));
        }
    }
    Some(Sample {
        image: Tensor::new(vec![1, 3, oh, ow], data).ok()?,
        gt: GroundTruth::new(oh, ow, values).ok()?,
    })
}

/// Largest axis-aligned rectangle `(width, height)` inside a `w × h`
/// rectangle rotated by `angle` radians.
pub fn largest_interior_rect(w: f64, h: f64, angle: f64) -> (f64, f64) {
    if w <= 0.0 || h <= 0.0 {
        return (0.0, 0.0);
    }
    let width_is_longer = w >= h;
    let (long, short) = if width_is_longer { (w, h) } else { (h, w) };
    let (sin_a, cos_a) = (angle.sin().abs(), angle.cos().abs());
    if short <= 2.0 * sin_a * cos_a * long || (sin_a - cos_a).abs() < 1e-10 {
        // half-constrained: two corners touch the longer sides
        let x = 0.5 * short;
        if width_is_longer {
            (x / sin_a, x / cos_a)
        } else {
            (x / cos_a, x / sin_a)
        }
    } else {
        let cos_2a = cos_a * cos_a - sin_a * sin_a;
        ((w * cos_a - h * sin_a) / cos_2a, (h * cos_a - w * sin_a) / cos_2a)
    }
}

fn rotate_crop(sample: &Sample, degrees: f64) -> Option<Sample> {
    let (h, w) = sample.size();
    let theta = degrees.to_radians();
    // work on pixel-centre extents so every sample stays inside the source
    let (rw, rh) = largest_interior_rect((w - 1) as f64, (h - 1) as f64, theta);
    let ow = (rw + 1e-9).floor() as usize + 1;
    let oh = (rh + 1e-9).floor() as usize + 1;
    if oh < MIN_CROP || ow < MIN_CROP {
        return None;
    }
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let (ocy, ocx) = ((oh - 1) as f64 / 2.0, (ow - 1) as f64 / 2.0);
    let (s, c) = theta.sin_cos();
    let src_of = |v: usize, u: usize| {
        let (dy, dx) = (v as f64 - ocy, u as f64 - ocx);
        (cy - s * dx + c * dy, cx + c * dx + s * dy)
    };

    let img = sample.image.data();
    let mut data = vec![0f32; 3 * oh * ow];
    let mut values = Vec::with_capacity(oh * ow);
    for v in 0..oh {
        for u in 0..ow {
            let (sy, sx) = src_of(v, u);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (fy, fx) = ((sy - y0 as f64) as f32, (sx - x0 as f64) as f32);
            for ch in 0..3 {
                let p = &img[ch * h * w..(ch + 1) * h * w];
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                data[(ch * oh + v) * ow + u] = top * (1.0 - fy) + bot * fy;
            }
            let ny = (sy.round() as usize).min(h - 1);
            let nx = (sx.round() as usize).min(w - 1);
            values.push(sample.gt.get(ny, nx));
        }
    }
    Some(Sample {
        image: Tensor::new(vec![1, 3, oh, ow], data).ok()?,
        gt: GroundTruth::new(oh, ow, values).ok()?,
    })
}
