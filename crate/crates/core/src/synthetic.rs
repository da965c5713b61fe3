//! Synthetic shapes: anti-aliased flat-colored circles and convex polygons on
//! a flat background, with exact one-pixel boundary labels.
//!
//! Pixel `(y, x)` covers `[y, y+1) × [x, x+1)`. Its region is the topmost shape
//! containing its centre. Wherever two 4-neighbours belong to different
//! regions, the pixel on the brighter side is labelled 255; everything else is
//! 0. Image colors come from 4×4 supersampling, so edges fall between pixel
//! centres with partial-coverage values.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::Sample;
use crate::error::{Error, Result};
use crate::io;
use crate::maps::GroundTruth;
use crate::tensor::Tensor;

pub const DEFAULT_SIZE: usize = 96;
pub const DEFAULT_COUNT: usize = 8;
const SUPERSAMPLE: usize = 4;
/// Minimum difference in mean intensity between any two regions.
const MIN_CONTRAST: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { cy: f64, cx: f64, r: f64 },
    /// Convex polygon, vertices `(y, x)` in counter-clockwise screen order.
    Polygon(Vec<(f64, f64)>),
}

impl Shape {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        match self {
            Shape::Circle { cy, cx, r } => (y - cy).powi(2) + (x - cx).powi(2) < r * r,
            Shape::Polygon(v) => {
                let n = v.len();
                let side = |i: usize| {
                    let (ay, ax) = v[i];
                    let (by, bx) = v[(i + 1) % n];
                    (bx - ax) * (y - ay) - (by - ay) * (x - ax)
                };
                let first = side(0);
                (0..n).all(|i| {
                    let s = side(i);
                    s != 0.0 && s.signum() == first.signum()
                })
            }
        }
    }

    /// Axis-aligned rectangle `[y0, y1) × [x0, x1)`.
    pub fn rect(y0: f64, x0: f64, y1: f64, x1: f64) -> Self {
        Shape::Polygon(vec![(y0, x0), (y1, x0), (y1, x1), (y0, x1)])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub height: usize,
    pub width: usize,
    pub background: [f64; 3],
    /// Painted in order; later shapes cover earlier ones.
    pub shapes: Vec<(Shape, [f64; 3])>,
}

fn brightness(c: &[f64; 3]) -> f64 {
    (c[0] + c[1] + c[2]) / 3.0
}

impl Scene {
    /// Index into `shapes` plus one of the topmost shape at a point; 0 is background.
    fn region(&self, y: f64, x: f64) -> usize {
        self.shapes
            .iter()
            .rposition(|(s, _)| s.contains(y, x))
            .map_or(0, |i| i + 1)
    }

    fn color(&self, region: usize) -> &[f64; 3] {
        if region == 0 {
            &self.background
        } else {
            &self.shapes[region - 1].1
        }
    }

    pub fn render(&self) -> Sample {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0f32; 3 * h * w];
        let step = 1.0 / SUPERSAMPLE as f64;
        let weight = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let py = y as f64 + (sy as f64 + 0.5) * step;
                        let px = x as f64 + (sx as f64 + 0.5) * step;
                        let c = self.color(self.region(py, px));
                        for k in 0..3 {
                            acc[k] += c[k] * weight;
                        }
                    }
                }
                for k in 0..3 {
                    // quantize as an 8-bit file would
                    data[(k * h + y) * w + x] = ((acc[k] * 255.0).round() / 255.0) as f32;
                }
            }
        }

        let labels: Vec<usize> = (0..h * w)
            .map(|i| self.region((i / w) as f64 + 0.5, (i % w) as f64 + 0.5))
            .collect();
        let mut values = vec![0u8; h * w];
        for y in 0..h {
            for x in 0..w {
                let here = labels[y * w + x];
                let neighbours = [(0isize, 1isize), (1, 0), (0, -1), (-1, 0)];
                let on_edge = neighbours.iter().any(|&(dy, dx)| {
                    let (ny, nx) = (y as isize + dy, x as isize + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        return false;
                    }
                    let there = labels[ny as usize * w + nx as usize];
                    there != here && brightness(self.color(here)) > brightness(self.color(there))
                });
                if on_edge {
                    values[y * w + x] = 255;
                }
            }
        }
        Sample {
            image: Tensor::new(vec![1, 3, h, w], data).expect("sizes agree"),
            gt: GroundTruth::new(h, w, values).expect("sizes agree"),
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng, others: &[[f64; 3]]) -> [f64; 3] {
    loop {
        let base: f64 = rng.random_range(0.1..0.9);
        let c = [0, 1, 2].map(|_| (base + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0));
        if others.iter().all(|o| (brightness(o) - brightness(&c)).abs() >= MIN_CONTRAST) {
            return c;
        }
    }
}

/// A random scene of one to three shapes kept away from the image border.
pub fn random_scene(rng: &mut ChaCha8Rng, size: usize) -> Scene {
    let s = size as f64;
    let margin = 4.0;
    let background = random_color(rng, &[]);
    let mut colors = vec![background];
    let count = rng.random_range(1..=3);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.random_range(0.12 * s..0.28 * s);
        let cy = rng.random_range(margin + r..s - margin - r);
        let cx = rng.random_range(margin + r..s - margin - r);
        let shape = if rng.random_bool(0.4) {
            Shape::Circle { cy, cx, r }
        } else {
            let n = rng.random_range(3..=6);
            let phase = rng.random_range(0.0..TAU);
            Shape::Polygon(
                (0..n)
                    .map(|k| {
                        let a = phase + TAU * k as f64 / n as f64;
                        (cy + r * a.sin(), cx + r * a.cos())
                    })
                    .collect(),
            )
        };
        let color = random_color(rng, &colors);
        colors.push(color);
        shapes.push((shape, color));
    }
    Scene {
        height: size,
        width: size,
        background,
        shapes,
    }
}

/// `count` rendered scenes from a ChaCha8 stream seeded with `seed`.
pub fn make_synthetic(count: usize, size: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_scene(&mut rng, size).render()).collect()
}

/// Writes `images/NNN.png`, `gt/NNN.png` and a `manifest.txt` with relative
/// paths under `dir`; returns the manifest path.
pub fn write_synthetic(dir: &Path, count: usize, size: usize, seed: u64) -> Result<PathBuf> {
    if size < crate::model::MIN_INPUT_SIZE {
        return Err(Error::InvalidConfig(format!("image size {size} is below the network minimum")));
    }
    let mut manifest = String::from("# synthetic shapes: image<TAB>ground truth\n");
    for (i, s) in make_synthetic(count, size, seed).iter().enumerate() {
        let img = format!("images/{i:03}.png");
        let gt = format!("gt/{i:03}.png");
        io::save_image(&s.image, &dir.join(&img))?;
        io::save_gt(&s.gt, &dir.join(&gt))?;
        manifest.push_str(&format!("{img}\t{gt}\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
