//! Directional gradient kernels and the Sobel baseline detector.

use std::f64::consts::PI;

use crate::maps::{EdgeMap, Plane};

/// Horizontal Sobel operator (responds to intensity increasing with x).
pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
/// Vertical Sobel operator, the transpose of [`SOBEL_X`].
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalKernel {
    /// Radians in `[0, 2π)`.
    pub angle: f64,
    pub weights: [[f64; 3]; 3],
}

impl DirectionalKernel {
    /// Steered Sobel pair: `cos(angle)·Sx + sin(angle)·Sy`.
    pub fn steered(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // snap so axis angles reproduce the Sobel pair exactly
        let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
        let (s, c) = (snap(s), snap(c));
        let mut weights = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                weights[i][j] = c * SOBEL_X[i][j] + s * SOBEL_Y[i][j];
            }
        }
        Self { angle, weights }
    }

    /// Correlation response at `(y, x)` with replicated borders.
    pub fn response(&self, image: &Plane, y: usize, x: usize) -> f64 {
        correlate3(image, &self.weights, y, x)
    }
}

/// `count` kernels at angles `2πk / count`.
pub fn directional_bank(count: usize) -> Vec<DirectionalKernel> {
    assert!(count >= 1, "directional bank needs at least one kernel");
    (0..count)
        .map(|k| DirectionalKernel::steered(2.0 * PI * k as f64 / count as f64))
        .collect()
}

fn correlate3(image: &Plane, k: &[[f64; 3]; 3], y: usize, x: usize) -> f64 {
    let mut acc = 0.0;
    for (i, row) in k.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                acc += w * image.get_clamped(y as isize + i as isize - 1, x as isize + j as isize - 1);
            }
        }
    }
    acc
}

/// Sobel gradient magnitude normalized by its maximum over the image.
/// A flat image yields an all-zero map.
pub fn sobel_detect(image: &Plane) -> EdgeMap {
    // difference form so flat regions cancel exactly
    let mut mag = Plane::from_fn(image.height, image.width, |y, x| {
        let p = |dy: isize, dx: isize| image.get_clamped(y as isize + dy, x as isize + dx);
        let gx = (p(-1, 1) - p(-1, -1)) + 2.0 * (p(0, 1) - p(0, -1)) + (p(1, 1) - p(1, -1));
        let gy = (p(1, -1) - p(-1, -1)) + 2.0 * (p(1, 0) - p(-1, 0)) + (p(1, 1) - p(-1, 1));
        gx.hypot(gy)
    });
    let max = mag.max();
    if max > 0.0 {
        mag.data.iter_mut().for_each(|v| *v /= max);
    } else {
        mag.data.iter_mut().for_each(|v| *v = 0.0);
    }
    mag
}
