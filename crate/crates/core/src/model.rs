//! TIN1 / TIN2 network graphs.
//!
//! Both variants are assembled from three kinds of blocks:
//!
//! - **Feature Extractor**: a 3×3 convolution followed by ReLU. The first one
//!   (`fe1`) is initialized from the directional gradient bank.
//! - **Enrichment**: parallel dilated 3×3 convolutions over the same input whose
//!   outputs are summed, then ReLU.
//! - **Summarizer**: a 1×1 convolution to 8 channels. Each Summarizer also feeds
//!   a 1×1 side head producing one supervised side output.
//!
//! TIN1 chains two Feature Extractors, runs each through its own
//! Enrichment/Summarizer pair, adds the two Summarizer outputs and fuses them
//! with a 1×1 convolution. TIN2 appends a second, 64-filter stage that runs on
//! the max-pooled output of the first; its Summarizer features and side logits
//! are bilinearly upsampled back to full resolution and the final map fuses the
//! concatenated stage features.
//!
//! All heads emit logits; probabilities are obtained with a sigmoid.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernels::directional_bank;
use crate::maps::EdgeMap;
use crate::ops;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Smallest input side accepted by [`Network::forward`].
pub const MIN_INPUT_SIZE: usize = 16;
/// Channels of every Summarizer output.
pub const SUMMARIZER_CHANNELS: usize = 8;
/// Filters in the first stage's Feature Extractors.
pub const STAGE1_FILTERS: usize = 16;
/// Filters in TIN2's second-stage Feature Extractors.
pub const STAGE2_FILTERS: usize = 64;
/// Standard deviation of the Gaussian used for every weight except `fe1`.
pub const INIT_STD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Tin1,
    Tin2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Tin1 => "tin1",
            Variant::Tin2 => "tin2",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Variant::Tin1 => 1,
            Variant::Tin2 => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            1 => Some(Variant::Tin1),
            2 => Some(Variant::Tin2),
            _ => None,
        }
    }

    /// Number of supervised side outputs (not counting the fused map).
    pub fn side_output_count(self) -> usize {
        match self {
            Variant::Tin1 => 2,
            Variant::Tin2 => 4,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tin1" => Ok(Variant::Tin1),
            "tin2" => Ok(Variant::Tin2),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

/// Shape of one Enrichment block: parallel dilated branches with a shared output width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrichmentSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation_rates: Vec<usize>,
}

impl EnrichmentSpec {
    pub const DEFAULT_RATES: [usize; 4] = [1, 2, 4, 8];
    pub const DEFAULT_OUT: usize = 32;

    pub fn new(in_channels: usize, out_channels: usize, dilation_rates: Vec<usize>) -> Result<Self> {
        let spec = Self {
            in_channels,
            out_channels,
            dilation_rates,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Four branches at rates {1, 2, 4, 8}, 32 output channels.
    pub fn with_defaults(in_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels: Self::DEFAULT_OUT,
            dilation_rates: Self::DEFAULT_RATES.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dilation_rates.is_empty() {
            return Err(Error::InvalidConfig("enrichment needs at least one branch".into()));
        }
        if self.dilation_rates.contains(&0) {
            return Err(Error::InvalidConfig("dilation rates must be positive".into()));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidConfig("enrichment channels must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
    },
    Relu,
    Sigmoid,
    MaxPool2x2,
    UpsampleBilinear,
    Add,
    Concat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerDesc {
    pub name: String,
    pub kind: LayerKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T: Scalar = f32> {
    pub name: String,
    pub tensor: Tensor<T>,
}

/// Maps produced by one forward pass, all at input resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkOutput {
    pub side: Vec<EdgeMap>,
    pub fused: EdgeMap,
}

/// Logit handles recorded on a tape by [`Network::record`].
#[derive(Clone, Debug)]
pub struct RecordedGraph {
    /// One handle per parameter, in [`Network::params`] order.
    pub params: Vec<Var>,
    pub side_logits: Vec<Var>,
    pub fused_logit: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T: Scalar = f32> {
    variant: Variant,
    enrichments: Vec<EnrichmentSpec>,
    layers: Vec<LayerDesc>,
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

/// TIN1 with the given Enrichment (shared by both Feature Extractors).
pub fn build_tin1<T: Scalar>(enrichment: EnrichmentSpec) -> Result<Network<T>> {
    Network::build(Variant::Tin1, vec![enrichment])
}

/// TIN2 with separate Enrichment shapes for the 16- and 64-filter stages.
pub fn build_tin2<T: Scalar>(enrichment1: EnrichmentSpec, enrichment2: EnrichmentSpec) -> Result<Network<T>> {
    Network::build(Variant::Tin2, vec![enrichment1, enrichment2])
}

impl<T: Scalar> Network<T> {
    /// Builds the graph with all parameters zeroed; see [`Network::init_params`].
    pub fn build(variant: Variant, enrichments: Vec<EnrichmentSpec>) -> Result<Self> {
        let expected = match variant {
            Variant::Tin1 => 1,
            Variant::Tin2 => 2,
        };
        if enrichments.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{} takes {expected} enrichment spec(s), got {}",
                variant.name(),
                enrichments.len()
            )));
        }
        for e in &enrichments {
            e.validate()?;
        }
        if enrichments[0].in_channels != STAGE1_FILTERS {
            return Err(Error::InvalidConfig(format!(
                "stage-1 enrichment must take {STAGE1_FILTERS} channels, got {}",
                enrichments[0].in_channels
            )));
        }
        if variant == Variant::Tin2 && enrichments[1].in_channels != STAGE2_FILTERS {
            return Err(Error::InvalidConfig(format!(
                "stage-2 enrichment must take {STAGE2_FILTERS} channels, got {}",
                enrichments[1].in_channels
            )));
        }

        let mut net = Self {
            variant,
            enrichments,
            layers: Vec::new(),
            params: Vec::new(),
            index: HashMap::new(),
        };
        let e1 = net.enrichments[0].clone();
        net.add_stage(1, 3, STAGE1_FILTERS, &e1);
        if variant == Variant::Tin1 {
            net.add_layer("fuse.add", LayerKind::Add);
            net.add_conv("fuse", SUMMARIZER_CHANNELS, 1, 1, 1);
        } else {
            let e2 = net.enrichments[1].clone();
            net.add_layer("pool", LayerKind::MaxPool2x2);
            net.add_stage(3, STAGE1_FILTERS, STAGE2_FILTERS, &e2);
            net.add_layer("side3.upsample", LayerKind::UpsampleBilinear);
            net.add_layer("side4.upsample", LayerKind::UpsampleBilinear);
            net.add_layer("stage1.add", LayerKind::Add);
            net.add_layer("stage2.add", LayerKind::Add);
            net.add_layer("stage2.upsample", LayerKind::UpsampleBilinear);
            net.add_layer("fuse.concat", LayerKind::Concat);
            net.add_conv("fuse", 2 * SUMMARIZER_CHANNELS, 1, 1, 1);
        }
        net.add_layer("fuse.sigmoid", LayerKind::Sigmoid);
        Ok(net)
    }

    /// Two Feature Extractors (`fe{first}`, `fe{first+1}`), each with its own
    /// Enrichment, Summarizer and side head.
    fn add_stage(&mut self, first: usize, in_channels: usize, filters: usize, e: &EnrichmentSpec) {
        self.add_conv(&format!("fe{first}"), in_channels, filters, 3, 1);
        self.add_layer(&format!("fe{first}.relu"), LayerKind::Relu);
        self.add_conv(&format!("fe{}", first + 1), filters, filters, 3, 1);
        self.add_layer(&format!("fe{}.relu", first + 1), LayerKind::Relu);
        for i in [first, first + 1] {
            for (b, &rate) in e.dilation_rates.iter().enumerate() {
                self.add_conv(&format!("enrich{i}.b{b}"), filters, e.out_channels, 3, rate);
            }
            self.add_layer(&format!("enrich{i}.sum"), LayerKind::Add);
            self.add_layer(&format!("enrich{i}.relu"), LayerKind::Relu);
            self.add_conv(&format!("summ{i}"), e.out_channels, SUMMARIZER_CHANNELS, 1, 1);
            self.add_conv(&format!("side{i}"), SUMMARIZER_CHANNELS, 1, 1, 1);
            self.add_layer(&format!("side{i}.sigmoid"), LayerKind::Sigmoid);
        }
    }

    fn add_layer(&mut self, name: &str, kind: LayerKind) {
        self.layers.push(LayerDesc {
            name: name.to_string(),
            kind,
        });
    }

    fn add_conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, dilation: usize) {
        self.add_layer(
            name,
            LayerKind::Conv {
                in_channels: cin,
                out_channels: cout,
                kernel: k,
                dilation,
            },
        );
        for (suffix, shape) in [("weight", vec![cout, cin, k, k]), ("bias", vec![cout])] {
            let full = format!("{name}.{suffix}");
            self.index.insert(full.clone(), self.params.len());
            self.params.push(Parameter {
                name: full,
                tensor: Tensor::zeros(&shape),
            });
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn enrichments(&self) -> &[EnrichmentSpec] {
        &self.enrichments
    }

    pub fn layers(&self) -> &[LayerDesc] {
        &self.layers
    }

    pub fn params(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Parameter<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn side_output_count(&self) -> usize {
        self.variant.side_output_count()
    }

    /// Total scalar count over all parameter tensors (weights and biases).
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// `fe1` ← directional bank spread over RGB (each channel gets weights/3);
    /// other weights ← N(0, 0.01²) from a ChaCha8 stream seeded with `seed`;
    /// biases ← 0.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let bank = directional_bank(STAGE1_FILTERS);
        for p in &mut self.params {
            let data = p.tensor.data_mut();
            if p.name.ends_with(".bias") {
                data.iter_mut().for_each(|v| *v = T::zero());
            } else if p.name == "fe1.weight" {
                // [16, 3, 3, 3]
                for (o, kernel) in bank.iter().enumerate() {
                    for c in 0..3 {
                        for i in 0..3 {
                            for j in 0..3 {
                                data[((o * 3 + c) * 3 + i) * 3 + j] = T::of(kernel.weights[i][j] / 3.0);
                            }
                        }
                    }
                }
            } else {
                data.iter_mut().for_each(|v| *v = T::of(normal.sample(&mut rng)));
            }
        }
    }

    pub fn zero_params(&mut self) {
        for p in &mut self.params {
            p.tensor.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.zero_grad();
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            variant: self.variant,
            enrichments: self.enrichments.clone(),
            layers: self.layers.clone(),
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    tensor: p.tensor.cast(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Records the forward graph for `image` (`[1, 3, H, W]`) on `tape`.
    ///
    /// With `with_grad` set, parameter leaves track gradients; afterwards
    /// [`Network::accumulate_grads`] moves them into the parameters.
    pub fn record(&self, tape: &mut Tape<T>, image: &Tensor<T>, with_grad: bool) -> Result<RecordedGraph> {
        let (n, c, h, w) = image.dims4()?;
        if n != 1 || c != 3 {
            return Err(Error::Shape(format!(
                "expected a [1, 3, H, W] image, got {:?}",
                image.shape()
            )));
        }
        let min = if self.variant == Variant::Tin2 { 2 } else { 1 };
        if h < min || w < min {
            return Err(Error::InputTooSmall {
                height: h,
                width: w,
                min,
            });
        }
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                let mut t = p.tensor.clone();
                t.set_requires_grad(with_grad);
                tape.leaf(t)
            })
            .collect();
        let mut g = GraphBuilder {
            tape,
            net: self,
            params: &params,
        };
        let (side_logits, fused_logit) = match self.variant {
            Variant::Tin1 => {
                let x = g.tape.leaf(image.clone());
                let st = g.stage(1, x)?;
                let sum = g.tape.add(st.summaries[0], st.summaries[1])?;
                let fused = g.conv("fuse", sum, 1)?;
                (st.side_logits.to_vec(), fused)
            }
            Variant::Tin2 => {
                let padded = pad_reflect_to_even(image)?;
                let (ph, pw) = (padded.shape()[2], padded.shape()[3]);
                let x = g.tape.leaf(padded);
                let st1 = g.stage(1, x)?;
                let pooled = g.tape.max_pool_2x2(st1.last_features)?;
                let st2 = g.stage(3, pooled)?;
                let mut sides = st1.side_logits.to_vec();
                for s in st2.side_logits {
                    sides.push(g.tape.resize_bilinear(s, ph, pw)?);
                }
                let sum1 = g.tape.add(st1.summaries[0], st1.summaries[1])?;
                let sum2 = g.tape.add(st2.summaries[0], st2.summaries[1])?;
                let sum2 = g.tape.resize_bilinear(sum2, ph, pw)?;
                let cat = g.tape.concat_channels(&[sum1, sum2])?;
                let fused = g.conv("fuse", cat, 1)?;
                if (ph, pw) != (h, w) {
                    for s in &mut sides {
                        *s = g.tape.crop(*s, h, w)?;
                    }
                    (sides, g.tape.crop(fused, h, w)?)
                } else {
                    (sides, fused)
                }
            }
        };
        Ok(RecordedGraph {
            params,
            side_logits,
            fused_logit,
        })
    }

    /// Adds the leaf gradients from a backward pass into the parameters.
    pub fn accumulate_grads(&mut self, tape: &Tape<T>, graph: &RecordedGraph) {
        for (p, &v) in self.params.iter_mut().zip(&graph.params) {
            if let Some(g) = tape.grad(v) {
                p.tensor.accumulate_grad(g);
            }
        }
    }

    /// Side and fused edge maps for a `[1, 3, H, W]` image with finite values.
    pub fn forward(&self, image: &Tensor<T>) -> Result<NetworkOutput> {
        let (_, _, h, w) = image.dims4()?;
        if h < MIN_INPUT_SIZE || w < MIN_INPUT_SIZE {
            return Err(Error::InputTooSmall {
                height: h,
                width: w,
                min: MIN_INPUT_SIZE,
            });
        }
        if !image.all_finite() {
            return Err(Error::NonFinite("input image".into()));
        }
        let mut tape = Tape::new();
        let graph = self.record(&mut tape, image, false)?;
        let side = graph
            .side_logits
            .iter()
            .map(|&v| logits_to_map(tape.value(v)))
            .collect::<Result<Vec<_>>>()?;
        let fused = logits_to_map(tape.value(graph.fused_logit))?;
        Ok(NetworkOutput { side, fused })
    }

    /// Layer table followed by the parameter total.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variant: {}", self.variant.name());
        let _ = writeln!(out, "{:<18} {:<10} {:>12} {:>10}", "layer", "kind", "shape", "params");
        for layer in &self.layers {
            let (kind, shape, count) = match &layer.kind {
                LayerKind::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    dilation,
                } => {
                    let count: usize = ["weight", "bias"]
                        .iter()
                        .filter_map(|s| self.param(&format!("{}.{s}", layer.name)))
                        .map(|p| p.tensor.numel())
                        .sum();
                    let shape = if *dilation > 1 {
                        format!("{in_channels}->{out_channels} {kernel}x{kernel} d{dilation}")
                    } else {
                        format!("{in_channels}->{out_channels} {kernel}x{kernel}")
                    };
                    ("conv", shape, count)
                }
                LayerKind::Relu => ("relu", String::new(), 0),
                LayerKind::Sigmoid => ("sigmoid", String::new(), 0),
                LayerKind::MaxPool2x2 => ("maxpool", "2x2".into(), 0),
                LayerKind::UpsampleBilinear => ("upsample", "bilinear".into(), 0),
                LayerKind::Add => ("add", String::new(), 0),
                LayerKind::Concat => ("concat", String::new(), 0),
            };
            let _ = writeln!(out, "{:<18} {:<10} {:>12} {:>10}", layer.name, kind, shape, count);
        }
        let _ = writeln!(out, "total parameters: {}", self.param_count());
        out
    }
}

struct Stage {
    last_features: Var,
    summaries: [Var; 2],
    side_logits: [Var; 2],
}

struct GraphBuilder<'a, T: Scalar> {
    tape: &'a mut Tape<T>,
    net: &'a Network<T>,
    params: &'a [Var],
}

impl<T: Scalar> GraphBuilder<'_, T> {
    fn var(&self, name: &str) -> Var {
        self.params[self.net.index[name]]
    }

    fn conv(&mut self, layer: &str, x: Var, dilation: usize) -> Result<Var> {
        let w = self.var(&format!("{layer}.weight"));
        let b = self.var(&format!("{layer}.bias"));
        self.tape.conv2d_same(x, w, b, dilation)
    }

    fn enrichment(&mut self, index: usize, x: Var) -> Result<Var> {
        let spec = if index <= 2 {
            &self.net.enrichments[0]
        } else {
            &self.net.enrichments[1]
        };
        let rates = spec.dilation_rates.clone();
        let mut acc: Option<Var> = None;
        for (b, rate) in rates.into_iter().enumerate() {
            let y = self.conv(&format!("enrich{index}.b{b}"), x, rate)?;
            acc = Some(match acc {
                None => y,
                Some(a) => self.tape.add(a, y)?,
            });
        }
        Ok(self.tape.relu(acc.expect("at least one branch")))
    }

    fn stage(&mut self, first: usize, x: Var) -> Result<Stage> {
        let fa = self.conv(&format!("fe{first}"), x, 1)?;
        let fa = self.tape.relu(fa);
        let fb = self.conv(&format!("fe{}", first + 1), fa, 1)?;
        let fb = self.tape.relu(fb);
        let mut summaries = [fa; 2];
        let mut side_logits = [fa; 2];
        for (slot, (i, f)) in [(first, fa), (first + 1, fb)].into_iter().enumerate() {
            let e = self.enrichment(i, f)?;
            let s = self.conv(&format!("summ{i}"), e, 1)?;
            summaries[slot] = s;
            side_logits[slot] = self.conv(&format!("side{i}"), s, 1)?;
        }
        Ok(Stage {
            last_features: fb,
            summaries,
            side_logits,
        })
    }
}

/// Reflect-pads the bottom/right edge of a `[N, C, H, W]` tensor by one pixel
/// where needed so both sides are even.
pub fn pad_reflect_to_even<T: Scalar>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = t.dims4()?;
    let (ph, pw) = (h + h % 2, w + w % 2);
    if (ph, pw) == (h, w) {
        return Ok(t.clone());
    }
    let reflect = |i: usize, len: usize| if i < len { i } else { 2 * len - 2 - i };
    let src = t.data();
    let mut data = Vec::with_capacity(n * c * ph * pw);
    for p in 0..n * c {
        for y in 0..ph {
            let sy = reflect(y, h);
            for x in 0..pw {
                data.push(src[p * h * w + sy * w + reflect(x, w)]);
            }
        }
    }
    Tensor::new(vec![n, c, ph, pw], data)
}

/// Sigmoid of a `[1, 1, H, W]` logit tensor, evaluated in double precision.
pub fn logits_to_map<T: Scalar>(logits: &Tensor<T>) -> Result<EdgeMap> {
    let mut map = EdgeMap::from_tensor(logits, 0)?;
    map.data.iter_mut().for_each(|v| *v = ops::sigmoid(*v));
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tin1() -> Network<f64> {
        build_tin1(EnrichmentSpec::with_defaults(16)).unwrap()
    }

    #[test]
    fn tin1_default_param_count() {
        let net = tin1();
        assert_eq!(net.param_count(), 40_443);
        assert_eq!(net.side_output_count(), 2);
    }

    #[test]
    fn fe1_and_summarizer_counts() {
        let net = tin1();
        let count = |layer: &str| {
            net.param(&format!("{layer}.weight")).unwrap().tensor.numel()
                + net.param(&format!("{layer}.bias")).unwrap().tensor.numel()
        };
        assert_eq!(count("fe1"), 448);
        assert_eq!(count("summ1"), 264);
    }

    #[test]
    fn parameter_names_are_unique() {
        let net: Network<f32> = build_tin2(
            EnrichmentSpec::with_defaults(16),
            EnrichmentSpec::with_defaults(64),
        )
        .unwrap();
        let mut names: Vec<_> = net.params().iter().map(|p| p.name.clone()).collect();
        let before = names.len();
        names.sort();
        names.dedup();
        assert_eq!(before, names.len());
    }

    #[test]
    fn rejects_wrong_enrichment_input() {
        assert!(build_tin1::<f32>(EnrichmentSpec::with_defaults(8)).is_err());
        assert!(build_tin2::<f32>(
            EnrichmentSpec::with_defaults(16),
            EnrichmentSpec::with_defaults(16)
        )
        .is_err());
        assert!(EnrichmentSpec::new(16, 32, vec![]).is_err());
        assert!(EnrichmentSpec::new(16, 32, vec![1, 0]).is_err());
    }

    #[test]
    fn fe1_channel0_is_sobel_x_over_three() {
        let mut net = tin1();
        net.init_params(7);
        let w = net.param("fe1.weight").unwrap().tensor.data();
        let sobel = crate::kernels::SOBEL_X;
        for c in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(w[(c * 3 + i) * 3 + j], sobel[i][j] / 3.0);
                }
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let mut a = tin1();
        let mut b = tin1();
        a.init_params(42);
        b.init_params(42);
        assert_eq!(a, b);
        for p in a.params().iter().filter(|p| p.name.ends_with(".bias")) {
            assert!(p.tensor.data().iter().all(|&v| v == 0.0));
        }
        let mut c = tin1();
        c.init_params(43);
        assert_ne!(a, c);
    }

    #[test]
    fn init_weight_statistics() {
        let mut net = tin1();
        net.init_params(1);
        let samples: Vec<f64> = net
            .params()
            .iter()
            .filter(|p| p.name.ends_with(".weight") && p.name != "fe1.weight")
            .flat_map(|p| p.tensor.data().to_vec())
            .collect();
        assert!(samples.len() >= 10_000);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.2 * INIT_STD, "mean {mean}");
        assert!((std - INIT_STD).abs() < 0.2 * INIT_STD, "std {std}");
    }

    #[test]
    fn zero_params_give_half_everywhere() {
        let net = tin1();
        let img = Tensor::from_fn(&[1, 3, 16, 20], |i| (i % 7) as f64 / 7.0);
        let out = net.forward(&img).unwrap();
        assert_eq!(out.side.len(), 2);
        for m in out.side.iter().chain([&out.fused]) {
            assert_eq!((m.height, m.width), (16, 20));
            assert!(m.data.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn forward_rejects_small_and_non_finite_input() {
        let net = tin1();
        assert!(matches!(
            net.forward(&Tensor::zeros(&[1, 3, 8, 32])),
            Err(Error::InputTooSmall { .. })
        ));
        let mut img = Tensor::zeros(&[1, 3, 16, 16]);
        img.data_mut()[5] = f64::NAN;
        assert!(matches!(net.forward(&img), Err(Error::NonFinite(_))));
    }

    #[test]
    fn reflect_padding_to_even() {
        let t = Tensor::<f64>::new(vec![1, 1, 3, 3], (0..9).map(|v| v as f64).collect()).unwrap();
        let p = pad_reflect_to_even(&t).unwrap();
        assert_eq!(p.shape(), &[1, 1, 4, 4]);
        // last column reflects column 1, last row reflects row 1
        assert_eq!(&p.data()[0..4], &[0.0, 1.0, 2.0, 1.0]);
        assert_eq!(&p.data()[12..16], &[3.0, 4.0, 5.0, 4.0]);
    }

    #[test]
    fn summary_lists_total() {
        let s = tin1().summary();
        assert!(s.contains("total parameters: 40443"));
        assert!(s.contains("enrich1.b3"));
    }
}
