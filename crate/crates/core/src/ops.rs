//! Forward and backward kernels for the operator set recorded on the tape.
//!
//! Everything here works on flat row-major slices; shape bookkeeping lives in
//! [`crate::tape`].

use crate::scalar::{axpy, dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        out_len(self.height, self.kernel, self.stride, self.dilation, self.padding)
    }

    pub fn out_width(&self) -> usize {
        out_len(self.width, self.kernel, self.stride, self.dilation, self.padding)
    }

    /// Offset of tap `i` relative to the (strided) output position.
    fn tap_offset(&self, i: usize) -> isize {
        (i * self.dilation) as isize - self.padding as isize
    }
}

fn out_len(len: usize, kernel: usize, stride: usize, dilation: usize, padding: usize) -> usize {
    let span = dilation * (kernel - 1) + 1;
    if len + 2 * padding < span {
        0
    } else {
        (len + 2 * padding - span) / stride + 1
    }
}

/// Output positions `o` in `[lo, hi)` with `0 <= o * stride + offset < in_len`.
fn valid_range(offset: isize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    let last = in_len as isize - offset - 1;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let lo = lo.max(0) as usize;
    let hi = (hi as usize).min(out_len);
    (lo, hi.max(lo))
}

pub fn conv2d_forward<T: Scalar>(g: &ConvGeometry, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let (h, w, k) = (g.height, g.width, g.kernel);
    let in_plane = h * w;
    let out_plane = oh * ow;
    let mut out = vec![T::zero(); g.batch * g.out_channels * out_plane];
    for n in 0..g.batch {
        for o in 0..g.out_channels {
            let dst = &mut out[(n * g.out_channels + o) * out_plane..][..out_plane];
            dst.iter_mut().for_each(|v| *v = bias[o]);
            for c in 0..g.in_channels {
                let src = &input[(n * g.in_channels + c) * in_plane..][..in_plane];
                for i in 0..k {
                    let dy = g.tap_offset(i);
                    let (y0, y1) = valid_range(dy, g.stride, h, oh);
                    for j in 0..k {
                        let wv = weight[((o * g.in_channels + c) * k + i) * k + j];
                        if wv == T::zero() {
                            continue;
                        }
                        let dx = g.tap_offset(j);
                        let (x0, x1) = valid_range(dx, g.stride, w, ow);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = (oy * g.stride) as isize + dy;
                            let row = iy as usize * w;
                            let out_row = &mut dst[oy * ow + x0..oy * ow + x1];
                            if g.stride == 1 {
                                let ix0 = (x0 as isize + dx) as usize;
                                axpy(wv, &src[row + ix0..row + ix0 + (x1 - x0)], out_row);
                            } else {
                                for (t, v) in out_row.iter_mut().enumerate() {
                                    let ix = ((x0 + t) * g.stride) as isize + dx;
                                    *v += wv * src[row + ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a conv2d with respect to (input, weight, bias).
/// `grad_input` is skipped when `want_input` is false.
pub fn conv2d_backward<T: Scalar>(
    g: &ConvGeometry,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    want_input: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let (h, w, k) = (g.height, g.width, g.kernel);
    let in_plane = h * w;
    let out_plane = oh * ow;
    let mut grad_input = want_input.then(|| vec![T::zero(); input.len()]);
    let mut grad_weight = vec![T::zero(); weight.len()];
    let mut grad_bias = vec![T::zero(); g.out_channels];

    for n in 0..g.batch {
        for o in 0..g.out_channels {
            let go = &grad_out[(n * g.out_channels + o) * out_plane..][..out_plane];
            grad_bias[o] += go.iter().copied().sum::<T>();
            for c in 0..g.in_channels {
                let src_off = (n * g.in_channels + c) * in_plane;
                let src = &input[src_off..src_off + in_plane];
                for i in 0..k {
                    let dy = g.tap_offset(i);
                    let (y0, y1) = valid_range(dy, g.stride, h, oh);
                    for j in 0..k {
                        let dx = g.tap_offset(j);
                        let (x0, x1) = valid_range(dx, g.stride, w, ow);
                        if x0 >= x1 {
                            continue;
                        }
                        let widx = ((o * g.in_channels + c) * k + i) * k + j;
                        let wv = weight[widx];
                        let mut acc = T::zero();
                        for oy in y0..y1 {
                            let iy = (oy * g.stride) as isize + dy;
                            let row = iy as usize * w;
                            let go_row = &go[oy * ow + x0..oy * ow + x1];
                            if g.stride == 1 {
                                let ix0 = (x0 as isize + dx) as usize;
                                let span = row + ix0..row + ix0 + (x1 - x0);
                                acc += dot(go_row, &src[span.clone()]);
                                if let Some(gi) = grad_input.as_mut() {
                                    let gi = &mut gi[src_off..src_off + in_plane];
                                    axpy(wv, go_row, &mut gi[span]);
                                }
                            } else {
                                for (t, &gv) in go_row.iter().enumerate() {
                                    let ix = (((x0 + t) * g.stride) as isize + dx) as usize;
                                    acc += gv * src[row + ix];
                                    if let Some(gi) = grad_input.as_mut() {
                                        gi[src_off + row + ix] += wv * gv;
                                    }
                                }
                            }
                        }
                        grad_weight[widx] += acc;
                    }
                }
            }
        }
    }
    (grad_input, grad_weight, grad_bias)
}

/// 2×2 max pooling with stride 2; trailing odd rows/columns form truncated windows.
/// Returns the pooled values and, per output, the flat index of the selected input
/// (first maximum in row-major order).
pub fn max_pool_2x2_forward<T: Scalar>(
    planes: usize,
    h: usize,
    w: usize,
    input: &[T],
) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = base + 2 * oy * w + 2 * ox;
                let mut best = input[best_idx];
                for y in 2 * oy..(2 * oy + 2).min(h) {
                    for x in 2 * ox..(2 * ox + 2).min(w) {
                        let idx = base + y * w + x;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                arg.push(best_idx);
            }
        }
    }
    (out, arg)
}

/// Per-axis align-corners interpolation table: `(lower index, upper index, upper weight)`.
pub fn align_corners_table(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    (0..out_len)
        .map(|o| {
            let src = if out_len > 1 {
                (o * (in_len - 1)) as f64 / (out_len - 1) as f64
            } else {
                0.0
            };
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn resize_bilinear_forward<T: Scalar>(
    planes: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    input: &[T],
) -> Vec<T> {
    if (h, w) == (oh, ow) {
        return input.to_vec();
    }
    let ty = align_corners_table(h, oh);
    let tx = align_corners_table(w, ow);
    let mut out = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let src = &input[p * h * w..(p + 1) * h * w];
        for &(y0, y1, fy) in &ty {
            let fy = T::of(fy);
            for &(x0, x1, fx) in &tx {
                let fx = T::of(fx);
                let top = src[y0 * w + x0] * (T::one() - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (T::one() - fx) + src[y1 * w + x1] * fx;
                out.push(top * (T::one() - fy) + bot * fy);
            }
        }
    }
    out
}

pub fn resize_bilinear_backward<T: Scalar>(
    planes: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    grad_out: &[T],
) -> Vec<T> {
    if (h, w) == (oh, ow) {
        return grad_out.to_vec();
    }
    let ty = align_corners_table(h, oh);
    let tx = align_corners_table(w, ow);
    let mut gin = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let gi = &mut gin[p * h * w..(p + 1) * h * w];
        let go = &grad_out[p * oh * ow..(p + 1) * oh * ow];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            let fy = T::of(fy);
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let fx = T::of(fx);
                let g = go[oy * ow + ox];
                gi[y0 * w + x0] += g * (T::one() - fy) * (T::one() - fx);
                gi[y0 * w + x1] += g * (T::one() - fy) * fx;
                gi[y1 * w + x0] += g * fy * (T::one() - fx);
                gi[y1 * w + x1] += g * fy * fx;
            }
        }
    }
    gin
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_range_covers_in_bounds_positions() {
        for stride in 1..4 {
            for offset in -5isize..5 {
                let (lo, hi) = valid_range(offset, stride, 7, 9);
                for o in 0..9 {
                    let pos = (o * stride) as isize + offset;
                    let inside = (0..7).contains(&pos);
                    assert_eq!(inside, (lo..hi).contains(&o), "s={stride} off={offset} o={o}");
                }
            }
        }
    }

    #[test]
    fn output_length_same_padding() {
        assert_eq!(out_len(10, 3, 1, 2, 2), 10);
        assert_eq!(out_len(10, 3, 2, 1, 1), 5);
        assert_eq!(out_len(2, 3, 1, 4, 0), 0);
    }

    #[test]
    fn align_corners_endpoints_hit_source_corners() {
        let t = align_corners_table(4, 7);
        assert_eq!(t[0], (0, 1, 0.0));
        assert_eq!(t[6].0, 3);
        assert_eq!(t[6].2, 0.0);
        assert_eq!(align_corners_table(5, 1), vec![(0, 1, 0.0)]);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
    }
}
