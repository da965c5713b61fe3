//! Class-balanced cross-entropy with an ignore band.
//!
//! Ground-truth values `v` split pixels into negatives (`v == 0`), ignored
//! weak edges (`0 < v < threshold`) and positives (`v >= threshold`). With
//! `Y+` positives and `Y-` negatives (`Y = Y+ + Y-`), negatives are weighted by
//! `alpha = gamma * Y+ / Y` and positives by `beta = Y- / Y`; the per-pixel loss
//! is `-alpha * ln(1 - p)` or `-beta * ln(p)`. Weights are computed per image.
//!
//! Two evaluation paths exist: probability-space functions over [`EdgeMap`]s,
//! and tape operations over logits (softplus form) used for training.

use crate::error::{Error, Result};
use crate::maps::{EdgeMap, GroundTruth};
use crate::model::RecordedGraph;
use crate::scalar::Scalar;
use crate::tape::{PixelClass, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub threshold: u8,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 1.1,
            threshold: 64,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.threshold == 0 {
            return Err(Error::InvalidConfig("threshold must be in 1..=255".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn classify(v: u8, threshold: u8) -> PixelClass {
    if v == 0 {
        PixelClass::Negative
    } else if v < threshold {
        PixelClass::Ignored
    } else {
        PixelClass::Positive
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub positives: usize,
    pub negatives: usize,
    pub ignored: usize,
}

pub fn class_counts(gt: &GroundTruth, threshold: u8) -> ClassCounts {
    let mut c = ClassCounts::default();
    for &v in &gt.values {
        match classify(v, threshold) {
            PixelClass::Negative => c.negatives += 1,
            PixelClass::Ignored => c.ignored += 1,
            PixelClass::Positive => c.positives += 1,
        }
    }
    c
}

/// `(alpha, beta)` from class counts; ignored pixels are excluded from `Y`.
pub fn weights_from_counts(positives: usize, negatives: usize, gamma: f64) -> Result<(f64, f64)> {
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels {
            positives,
            negatives,
        });
    }
    let y = (positives + negatives) as f64;
    Ok((gamma * positives as f64 / y, negatives as f64 / y))
}

pub fn class_weights(gt: &GroundTruth, cfg: &LossConfig) -> Result<(f64, f64)> {
    let c = class_counts(gt, cfg.threshold);
    weights_from_counts(c.positives, c.negatives, cfg.gamma)
}

/// Loss of one pixel with prediction `p` and label `v`.
#[inline]
pub fn pixel_loss(p: f64, v: u8, alpha: f64, beta: f64, threshold: u8) -> f64 {
    match classify(v, threshold) {
        PixelClass::Negative => -alpha * (-p).ln_1p(),
        PixelClass::Ignored => 0.0,
        PixelClass::Positive => -beta * p.ln(),
    }
}

fn check_same_size(pred: &EdgeMap, gt: &GroundTruth) -> Result<()> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    Ok(())
}

/// Summed pixel loss with explicit class weights.
pub fn map_loss_weighted(pred: &EdgeMap, gt: &GroundTruth, alpha: f64, beta: f64, threshold: u8) -> Result<f64> {
    check_same_size(pred, gt)?;
    Ok(pred
        .data
        .iter()
        .zip(&gt.values)
        .map(|(&p, &v)| pixel_loss(p, v, alpha, beta, threshold))
        .sum())
}

pub fn map_loss(pred: &EdgeMap, gt: &GroundTruth, cfg: &LossConfig) -> Result<f64> {
    check_same_size(pred, gt)?;
    let (alpha, beta) = class_weights(gt, cfg)?;
    map_loss_weighted(pred, gt, alpha, beta, cfg.threshold)
}

/// Sum of the side-output losses plus the fused-output loss.
pub fn total_loss(side: &[EdgeMap], fused: &EdgeMap, gt: &GroundTruth, cfg: &LossConfig) -> Result<f64> {
    let mut total = map_loss(fused, gt, cfg)?;
    for s in side {
        total += map_loss(s, gt, cfg)?;
    }
    Ok(total)
}

/// Records the balanced loss of a `[1, 1, H, W]` logit map.
pub fn record_map_loss<T: Scalar>(tape: &mut Tape<T>, logits: Var, gt: &GroundTruth, cfg: &LossConfig) -> Result<Var> {
    let (_, _, h, w) = tape.value(logits).dims4()?;
    if (h, w) != (gt.height, gt.width) {
        return Err(Error::Shape(format!(
            "logits {h}x{w} vs ground truth {}x{}",
            gt.height, gt.width
        )));
    }
    let (alpha, beta) = class_weights(gt, cfg)?;
    let classes = gt.values.iter().map(|&v| classify(v, cfg.threshold)).collect();
    tape.balanced_bce(logits, classes, T::of(alpha), T::of(beta))
}

/// Records the total loss over side logits and the fused logit.
pub fn record_total_loss<T: Scalar>(
    tape: &mut Tape<T>,
    side_logits: &[Var],
    fused_logit: Var,
    gt: &GroundTruth,
    cfg: &LossConfig,
) -> Result<Var> {
    let mut total = None;
    for &logit in side_logits.iter().chain(std::iter::once(&fused_logit)) {
        let term = record_map_loss(tape, logit, gt, cfg)?;
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok(total.expect("fused term always present"))
}

/// [`record_total_loss`] over every output of a recorded network graph.
pub fn record_graph_loss<T: Scalar>(
    tape: &mut Tape<T>,
    graph: &RecordedGraph,
    gt: &GroundTruth,
    cfg: &LossConfig,
) -> Result<Var> {
    record_total_loss(tape, &graph.side_logits, graph.fused_logit, gt, cfg)
}
