//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation as it is evaluated. Records are
//! appended in evaluation order, so inputs always precede outputs and the
//! backward pass is a single reverse sweep. Leaves created from tensors with
//! `requires_grad` set receive their gradient in the tensor's own `grad`
//! buffer; gradients accumulate across calls to [`Tape::backward`].

use crate::error::{Error, Result};
use crate::ops::{self, ConvGeometry};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Supervision class of one pixel in a balanced cross-entropy term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelClass {
    Negative,
    Ignored,
    Positive,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    MaxPool2x2 {
        input: Var,
        argmax: Vec<usize>,
    },
    ResizeBilinear {
        input: Var,
        planes: usize,
        from: (usize, usize),
        to: (usize, usize),
    },
    Sigmoid {
        input: Var,
    },
    Relu {
        input: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    ConcatChannels {
        inputs: Vec<Var>,
    },
    Crop {
        input: Var,
        from: (usize, usize),
        to: (usize, usize),
    },
    Sum {
        input: Var,
    },
    WeightedSum {
        input: Var,
        coeffs: Vec<T>,
    },
    BalancedBce {
        logits: Var,
        classes: Vec<PixelClass>,
        alpha: T,
        beta: T,
    },
}

impl<T> Op<T> {
    fn kind(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2x2 { .. } => "max_pool_2x2",
            Op::ResizeBilinear { .. } => "resize_bilinear",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Relu { .. } => "relu",
            Op::Add { .. } => "add",
            Op::ConcatChannels { .. } => "concat_channels",
            Op::Crop { .. } => "crop",
            Op::Sum { .. } => "sum",
            Op::WeightedSum { .. } => "weighted_sum",
            Op::BalancedBce { .. } => "balanced_bce",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d {
                input,
                weight,
                bias,
                ..
            } => vec![*input, *weight, *bias],
            Op::MaxPool2x2 { input, .. }
            | Op::ResizeBilinear { input, .. }
            | Op::Sigmoid { input }
            | Op::Relu { input }
            | Op::Crop { input, .. }
            | Op::Sum { input }
            | Op::WeightedSum { input, .. } => vec![*input],
            Op::BalancedBce { logits, .. } => vec![*logits],
            Op::Add { a, b } => vec![*a, *b],
            Op::ConcatChannels { inputs } => inputs.clone(),
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(op kind, input ids, output id)` for every record, in evaluation order.
    pub fn records(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(id, n)| (n.op.kind(), n.op.inputs().iter().map(|v| v.0).collect(), id))
            .collect()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a leaf by previous backward passes.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    /// Records a leaf. Its gradient is tracked iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, mut tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.requires_grad();
        if needs_grad {
            // re-arm so a fresh buffer exists
            tensor.set_requires_grad(true);
        }
        self.push(tensor, Op::Leaf, needs_grad)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Zero-padded 2-D convolution (cross-correlation) with dilation and stride.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> Result<Var> {
        let (n, cin, h, w) = self.value(input).dims4()?;
        let (cout, wcin, kh, kw) = self.value(weight).dims4()?;
        if wcin != cin {
            return Err(Error::Shape(format!(
                "conv2d: input has {cin} channels, weight expects {wcin}"
            )));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::Shape(format!(
                "conv2d: kernel must be square and odd, got {kh}x{kw}"
            )));
        }
        if self.value(bias).shape() != [cout] {
            return Err(Error::Shape(format!(
                "conv2d: bias shape {:?} does not match {cout} output channels",
                self.value(bias).shape()
            )));
        }
        if stride == 0 || dilation == 0 {
            return Err(Error::Shape("conv2d: stride and dilation must be >= 1".into()));
        }
        let geom = ConvGeometry {
            batch: n,
            in_channels: cin,
            out_channels: cout,
            height: h,
            width: w,
            kernel: kh,
            stride,
            dilation,
            padding,
        };
        let (oh, ow) = (geom.out_height(), geom.out_width());
        if oh == 0 || ow == 0 {
            return Err(Error::Shape(format!(
                "conv2d: {h}x{w} input too small for kernel {kh} dilation {dilation}"
            )));
        }
        let data = ops::conv2d_forward(
            &geom,
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let value = Tensor::new(vec![n, cout, oh, ow], data)?;
        let needs = self.needs(&[input, weight, bias]);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
            needs,
        ))
    }

    /// "Same" convolution: stride 1, padding `dilation * (k - 1) / 2`.
    pub fn conv2d_same(&mut self, input: Var, weight: Var, bias: Var, dilation: usize) -> Result<Var> {
        let k = self.value(weight).shape().get(2).copied().unwrap_or(1);
        self.conv2d(input, weight, bias, 1, dilation, dilation * (k.saturating_sub(1)) / 2)
    }

    pub fn max_pool_2x2(&mut self, input: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        if h < 2 || w < 2 {
            return Err(Error::Shape(format!("max_pool_2x2: input {h}x{w} below 2x2")));
        }
        let (data, argmax) = ops::max_pool_2x2_forward(n * c, h, w, self.value(input).data());
        let value = Tensor::new(vec![n, c, h.div_ceil(2), w.div_ceil(2)], data)?;
        let needs = self.needs(&[input]);
        Ok(self.push(value, Op::MaxPool2x2 { input, argmax }, needs))
    }

    /// Align-corners bilinear resampling to `out_h × out_w`.
    pub fn resize_bilinear(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        if out_h == 0 || out_w == 0 {
            return Err(Error::Shape("resize_bilinear: output size must be >= 1".into()));
        }
        let data =
            ops::resize_bilinear_forward(n * c, (h, w), (out_h, out_w), self.value(input).data());
        let value = Tensor::new(vec![n, c, out_h, out_w], data)?;
        let needs = self.needs(&[input]);
        Ok(self.push(
            value,
            Op::ResizeBilinear {
                input,
                planes: n * c,
                from: (h, w),
                to: (out_h, out_w),
            },
            needs,
        ))
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| ops::sigmoid(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(&[input]);
        self.push(value, Op::Sigmoid { input }, needs)
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(&[input]);
        self.push(value, Op::Relu { input }, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape(format!(
                "add: shapes {:?} and {:?} differ",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    /// Stacks 4-D tensors along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Shape("concat_channels: no inputs".into()))?;
        let (n, _, h, w) = self.value(*first).dims4()?;
        let mut total_c = 0;
        for &v in inputs {
            let (vn, vc, vh, vw) = self.value(v).dims4()?;
            if (vn, vh, vw) != (n, h, w) {
                return Err(Error::Shape(format!(
                    "concat_channels: {:?} incompatible with [{n}, _, {h}, {w}]",
                    self.value(v).shape()
                )));
            }
            total_c += vc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * total_c * plane);
        for b in 0..n {
            for &v in inputs {
                let t = self.value(v);
                let c = t.shape()[1];
                data.extend_from_slice(&t.data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let value = Tensor::new(vec![n, total_c, h, w], data)?;
        let needs = self.needs(inputs);
        Ok(self.push(
            value,
            Op::ConcatChannels {
                inputs: inputs.to_vec(),
            },
            needs,
        ))
    }

    /// Keeps the top-left `out_h × out_w` window.
    pub fn crop(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(input).dims4()?;
        if out_h > h || out_w > w || out_h == 0 || out_w == 0 {
            return Err(Error::Shape(format!(
                "crop: cannot take {out_h}x{out_w} from {h}x{w}"
            )));
        }
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(n * c * out_h * out_w);
        for p in 0..n * c {
            for y in 0..out_h {
                let row = p * h * w + y * w;
                data.extend_from_slice(&src[row..row + out_w]);
            }
        }
        let value = Tensor::new(vec![n, c, out_h, out_w], data)?;
        let needs = self.needs(&[input]);
        Ok(self.push(
            value,
            Op::Crop {
                input,
                from: (h, w),
                to: (out_h, out_w),
            },
            needs,
        ))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s: T = self.value(input).data().iter().copied().sum();
        let needs = self.needs(&[input]);
        self.push(Tensor::scalar(s), Op::Sum { input }, needs)
    }

    /// `Σ coeffs[i] * x[i]` with constant coefficients.
    pub fn weighted_sum(&mut self, input: Var, coeffs: Vec<T>) -> Result<Var> {
        let x = self.value(input);
        if coeffs.len() != x.numel() {
            return Err(Error::Shape(format!(
                "weighted_sum: {} coefficients for {} elements",
                coeffs.len(),
                x.numel()
            )));
        }
        let s: T = x.data().iter().zip(&coeffs).map(|(&a, &c)| a * c).sum();
        let needs = self.needs(&[input]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { input, coeffs }, needs))
    }

    /// Class-balanced binary cross-entropy on logits:
    /// `Σ_neg alpha·softplus(z) + Σ_pos beta·softplus(−z)`, ignored pixels contribute 0.
    pub fn balanced_bce(
        &mut self,
        logits: Var,
        classes: Vec<PixelClass>,
        alpha: T,
        beta: T,
    ) -> Result<Var> {
        let z = self.value(logits);
        if classes.len() != z.numel() {
            return Err(Error::Shape(format!(
                "balanced_bce: {} labels for {} logits",
                classes.len(),
                z.numel()
            )));
        }
        let mut loss = T::zero();
        for (&zi, class) in z.data().iter().zip(&classes) {
            match class {
                PixelClass::Negative => loss += alpha * ops::softplus(zi),
                PixelClass::Positive => loss += beta * ops::softplus(-zi),
                PixelClass::Ignored => {}
            }
        }
        let needs = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BalancedBce {
                logits,
                classes,
                alpha,
                beta,
            },
            needs,
        ))
    }

    /// Propagates `d loss / d x` to every leaf that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).numel() != 1 {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    self.nodes[id].value.accumulate_grad(&g);
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    geom,
                } => {
                    let want_input = self.nodes[input.0].needs_grad;
                    let (gi, gw, gb) = ops::conv2d_backward(
                        geom,
                        self.value(*input).data(),
                        self.value(*weight).data(),
                        &g,
                        want_input,
                    );
                    if let Some(gi) = gi {
                        emit(*input, gi, &mut grads);
                    }
                    if self.nodes[weight.0].needs_grad {
                        emit(*weight, gw, &mut grads);
                    }
                    if self.nodes[bias.0].needs_grad {
                        emit(*bias, gb, &mut grads);
                    }
                }
                Op::MaxPool2x2 { input, argmax } => {
                    let mut gi = vec![T::zero(); self.value(*input).numel()];
                    for (&src, &gv) in argmax.iter().zip(&g) {
                        gi[src] += gv;
                    }
                    emit(*input, gi, &mut grads);
                }
                Op::ResizeBilinear {
                    input,
                    planes,
                    from,
                    to,
                } => {
                    let gi = ops::resize_bilinear_backward(*planes, *from, *to, &g);
                    emit(*input, gi, &mut grads);
                }
                Op::Sigmoid { input } => {
                    let out = node.value.data();
                    let gi = out
                        .iter()
                        .zip(&g)
                        .map(|(&s, &gv)| gv * s * (T::one() - s))
                        .collect();
                    emit(*input, gi, &mut grads);
                }
                Op::Relu { input } => {
                    let x = self.value(*input).data();
                    let gi = x
                        .iter()
                        .zip(&g)
                        .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                        .collect();
                    emit(*input, gi, &mut grads);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a.0].needs_grad {
                        emit(a, g.clone(), &mut grads);
                    }
                    if self.nodes[b.0].needs_grad {
                        emit(b, g, &mut grads);
                    }
                }
                Op::ConcatChannels { inputs } => {
                    let (n, total_c, h, w) = node.value.dims4()?;
                    let plane = h * w;
                    let mut offset = 0;
                    for &v in inputs {
                        let c = self.value(v).shape()[1];
                        if self.nodes[v.0].needs_grad {
                            let mut gi = Vec::with_capacity(n * c * plane);
                            for b in 0..n {
                                let start = (b * total_c + offset) * plane;
                                gi.extend_from_slice(&g[start..start + c * plane]);
                            }
                            emit(v, gi, &mut grads);
                        }
                        offset += c;
                    }
                }
                Op::Crop { input, from, to } => {
                    let (h, w) = *from;
                    let (oh, ow) = *to;
                    let planes = self.value(*input).numel() / (h * w);
                    let mut gi = vec![T::zero(); planes * h * w];
                    for p in 0..planes {
                        for y in 0..oh {
                            let dst = p * h * w + y * w;
                            let src = (p * oh + y) * ow;
                            gi[dst..dst + ow].copy_from_slice(&g[src..src + ow]);
                        }
                    }
                    emit(*input, gi, &mut grads);
                }
                Op::Sum { input } => {
                    let gi = vec![g[0]; self.value(*input).numel()];
                    emit(*input, gi, &mut grads);
                }
                Op::WeightedSum { input, coeffs } => {
                    let gi = coeffs.iter().map(|&c| c * g[0]).collect();
                    emit(*input, gi, &mut grads);
                }
                Op::BalancedBce {
                    logits,
                    classes,
                    alpha,
                    beta,
                } => {
                    let z = self.value(*logits).data();
                    let gi = z
                        .iter()
                        .zip(classes)
                        .map(|(&zi, class)| {
                            let s = ops::sigmoid(zi);
                            let d = match class {
                                PixelClass::Negative => *alpha * s,
                                PixelClass::Positive => *beta * (s - T::one()),
                                PixelClass::Ignored => T::zero(),
                            };
                            d * g[0]
                        })
                        .collect();
                    emit(*logits, gi, &mut grads);
                }
            }
        }
        Ok(())
    }
}

fn emit<T: Scalar>(v: Var, delta: Vec<T>, grads: &mut [Option<Vec<T>>]) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(&delta).for_each(|(e, d)| *e += *d),
        slot @ None => *slot = Some(delta),
    }
}
