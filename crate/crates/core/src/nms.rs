//! Edge thinning by non-maximum suppression along the local edge normal.
//!
//! The normal comes from central differences of a Gaussian-smoothed copy of
//! the map (σ = 1, 5×5 window, replicated borders).

use crate::maps::{EdgeMap, Plane};

pub const SMOOTHING_SIGMA: f64 = 1.0;
pub const SMOOTHING_RADIUS: usize = 2;

/// Per-pixel normal angle `atan2(∂y, ∂x)` and gradient magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Orientation {
    pub angle: Plane,
    pub magnitude: Plane,
}

fn gaussian_taps() -> [f64; 2 * SMOOTHING_RADIUS + 1] {
    let mut taps = [0.0; 2 * SMOOTHING_RADIUS + 1];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - SMOOTHING_RADIUS as f64;
        *t = (-d * d / (2.0 * SMOOTHING_SIGMA * SMOOTHING_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable Gaussian blur with replicated borders.
pub fn smooth(map: &Plane) -> Plane {
    let taps = gaussian_taps();
    let r = SMOOTHING_RADIUS as isize;
    let rows = Plane::from_fn(map.height, map.width, |y, x| {
        (-r..=r)
            .map(|d| taps[(d + r) as usize] * map.get_clamped(y as isize, x as isize + d))
            .sum()
    });
    Plane::from_fn(map.height, map.width, |y, x| {
        (-r..=r)
            .map(|d| taps[(d + r) as usize] * rows.get_clamped(y as isize + d, x as isize))
            .sum()
    })
}

pub fn estimate_orientation(map: &EdgeMap) -> Orientation {
    let s = smooth(map);
    let (h, w) = (map.height, map.width);
    let mut angle = Plane::zeros(h, w);
    let mut magnitude = Plane::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let (yi, xi) = (y as isize, x as isize);
            let gx = 0.5 * (s.get_clamped(yi, xi + 1) - s.get_clamped(yi, xi - 1));
            let gy = 0.5 * (s.get_clamped(yi + 1, xi) - s.get_clamped(yi - 1, xi));
            angle.data[y * w + x] = gy.atan2(gx);
            magnitude.data[y * w + x] = gx.hypot(gy);
        }
    }
    Orientation { angle, magnitude }
}

/// Keeps a pixel (unchanged) iff it is `>=` both bilinear samples one pixel
/// away along its normal; every other pixel becomes 0.
pub fn nms_thin(map: &EdgeMap) -> EdgeMap {
    let o = estimate_orientation(map);
    thin_with(map, &o.angle)
}

/// [`nms_thin`] with a precomputed normal-angle field.
pub fn thin_with(map: &EdgeMap, angle: &Plane) -> EdgeMap {
    let mut out = Plane::zeros(map.height, map.width);
    for y in 0..map.height {
        for x in 0..map.width {
            let v = map.get(y, x);
            if v == 0.0 {
                continue;
            }
            let (dy, dx) = angle.get(y, x).sin_cos();
            let (fy, fx) = (y as f64, x as f64);
            let ahead = map.sample(fy + dy, fx + dx);
            let behind = map.sample(fy - dy, fx - dx);
            if v >= ahead && v >= behind {
                out.data[y * map.width + x] = v;
            }
        }
    }
    out
}
