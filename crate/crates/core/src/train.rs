//! SGD with momentum and weight decay, a step learning-rate schedule, and the
//! epoch loop over (optionally augmented) samples.

use std::fmt::Write as _;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{self, AugmentPlan, Sample};
use crate::error::{Error, Result};
use crate::loss::{self, LossConfig};
use crate::model::{Network, Parameter};
use crate::scalar::Scalar;
use crate::tape::Tape;

/// How training samples are expanded into variants each epoch.
#[derive(Clone, Debug, PartialEq)]
pub enum Augmentation {
    /// Train on the samples as given.
    Off,
    /// Every variant of every sample, every epoch.
    All(AugmentPlan),
    /// One variant per sample per epoch, drawn from the seeded stream.
    Sampled(AugmentPlan),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub augmentation: Augmentation,
    /// Invoke the checkpoint callback every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-2,
            weight_decay: 5e-4,
            momentum: 0.9,
            epochs: 120,
            lr_drop_every: 10,
            lr_drop_factor: 10.0,
            batch_size: 1,
            seed: 0,
            augmentation: Augmentation::All(AugmentPlan::full()),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lr0", self.lr0)?;
        positive("lr_drop_factor", self.lr_drop_factor)?;
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.lr_drop_every == 0 {
            return Err(Error::InvalidConfig("lr_drop_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// `lr0 / factor^⌊epoch / every⌋`
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let drops = (epoch / cfg.lr_drop_every.max(1)) as i32;
    cfg.lr0 / cfg.lr_drop_factor.powi(drops)
}

/// Momentum buffers, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity<T: Scalar = f32> {
    buffers: Vec<Vec<T>>,
}

impl<T: Scalar> Velocity<T> {
    pub fn zeros_like(params: &[Parameter<T>]) -> Self {
        Self {
            buffers: params.iter().map(|p| vec![T::zero(); p.tensor.numel()]).collect(),
        }
    }

    pub fn buffers(&self) -> &[Vec<T>] {
        &self.buffers
    }
}

/// One SGD update over all parameters, then zeroes their gradients.
///
/// `g' = g + wd·w; v ← m·v − lr·g'; w ← w + v`. If any gradient is
/// non-finite nothing is updated and [`Error::NonFinite`] is returned.
pub fn sgd_step<T: Scalar>(
    params: &mut [Parameter<T>],
    velocity: &mut Velocity<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    assert_eq!(params.len(), velocity.buffers.len(), "velocity does not match parameters");
    for p in params.iter() {
        if let Some(g) = p.tensor.grad() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
    }
    let (lr, m, wd) = (T::of(lr), T::of(momentum), T::of(weight_decay));
    for (p, v) in params.iter_mut().zip(&mut velocity.buffers) {
        let grad: Vec<T> = match p.tensor.grad() {
            Some(g) => g.to_vec(),
            None => vec![T::zero(); p.tensor.numel()],
        };
        for ((w, vi), g) in p.tensor.data_mut().iter_mut().zip(v.iter_mut()).zip(grad) {
            let g = g + wd * *w;
            *vi = m * *vi - lr * g;
            *w += *vi;
        }
        p.tensor.zero_grad();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0-based epoch index.
    pub epoch: usize,
    /// Mean total loss over the samples trained on this epoch.
    pub mean_loss: f64,
    pub lr: f64,
    /// Samples skipped for degenerate labels.
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    /// One `epoch<TAB>mean_loss<TAB>lr<TAB>skipped` line per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.epochs {
            writeln!(out, "{}\t{}\t{}\t{}", r.epoch, r.mean_loss, r.lr, r.skipped).unwrap();
        }
        out
    }

    pub fn mean_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.mean_loss).collect()
    }
}

/// Forward, loss and backward for one sample; gradients are added into `net`
/// scaled by `scale`. Returns the total loss.
pub fn accumulate_sample_grads(
    net: &mut Network<f32>,
    sample: &Sample,
    loss_cfg: &LossConfig,
    scale: f32,
) -> Result<f64> {
    // checked first so degenerate samples cost no forward pass
    loss::class_weights(&sample.gt, loss_cfg)?;
    let mut tape = Tape::new();
    let graph = net.record(&mut tape, &sample.image, true)?;
    let total = loss::record_graph_loss(&mut tape, &graph, &sample.gt, loss_cfg)?;
    let value = tape.value(total).item()?.as_f64();
    if !value.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    tape.backward(total)?;
    for (p, &v) in net.params_mut().iter_mut().zip(&graph.params) {
        if let Some(g) = tape.grad(v) {
            if scale == 1.0 {
                p.tensor.accumulate_grad(g);
            } else {
                let scaled: Vec<f32> = g.iter().map(|&x| x * scale).collect();
                p.tensor.accumulate_grad(&scaled);
            }
        }
    }
    Ok(value)
}

/// Trains `net` in place.
///
/// Each epoch visits every (sample, variant) pair once in a seeded shuffled
/// order. Gradients are averaged over `batch_size` consecutive pairs before
/// each step. `on_checkpoint(epoch, net)` runs after every
/// `checkpoint_every`-th epoch.
pub fn train(
    net: &mut Network<f32>,
    samples: &[Sample],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut on_checkpoint: impl FnMut(usize, &Network<f32>) -> Result<()>,
) -> Result<TrainingLog> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    for p in net.params_mut() {
        p.tensor.set_requires_grad(true);
        p.tensor.zero_grad();
    }
    let mut velocity = Velocity::zeros_like(net.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let order = epoch_order(samples.len(), &cfg.augmentation, &mut rng);
        let (mut loss_sum, mut trained, mut skipped, mut pending) = (0.0, 0usize, 0usize, 0usize);
        let scale = 1.0 / cfg.batch_size as f32;

        for (si, variant) in order {
            let owned;
            let sample = match (&cfg.augmentation, variant) {
                (Augmentation::All(plan) | Augmentation::Sampled(plan), Some(k)) => {
                    match augment::apply(&samples[si], &plan.transform(k)) {
                        Some(s) => {
                            owned = s;
                            &owned
                        }
                        None => continue,
                    }
                }
                _ => &samples[si],
            };
            match accumulate_sample_grads(net, sample, loss_cfg, scale) {
                Ok(l) => {
                    loss_sum += l;
                    trained += 1;
                    pending += 1;
                }
                Err(Error::DegenerateLabels { positives, negatives }) => {
                    debug!("skipping sample {si} ({positives} positives, {negatives} negatives)");
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
            if pending == cfg.batch_size {
                sgd_step(net.params_mut(), &mut velocity, lr, cfg.momentum, cfg.weight_decay)?;
                pending = 0;
            }
        }
        if pending > 0 {
            // the trailing partial batch was scaled by 1/batch_size; rescale to its mean
            let fix = cfg.batch_size as f32 / pending as f32;
            for p in net.params_mut() {
                if let Some(g) = p.tensor.grad_mut() {
                    g.iter_mut().for_each(|v| *v *= fix);
                }
            }
            sgd_step(net.params_mut(), &mut velocity, lr, cfg.momentum, cfg.weight_decay)?;
        }

        let mean_loss = if trained > 0 { loss_sum / trained as f64 } else { f64::NAN };
        info!("epoch {epoch}: mean loss {mean_loss:.6}, lr {lr:e}, skipped {skipped}");
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss,
            lr,
            skipped,
        });
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            on_checkpoint(epoch, net)?;
        }
    }
    for p in net.params_mut() {
        p.tensor.set_requires_grad(false);
    }
    Ok(log)
}

/// Shuffled `(sample index, variant index)` pairs for one epoch.
fn epoch_order(n: usize, aug: &Augmentation, rng: &mut ChaCha8Rng) -> Vec<(usize, Option<usize>)> {
    let mut order: Vec<(usize, Option<usize>)> = match aug {
        Augmentation::Off => (0..n).map(|i| (i, None)).collect(),
        Augmentation::All(plan) => (0..n)
            .flat_map(|i| (0..plan.len()).map(move |k| (i, Some(k))))
            .collect(),
        Augmentation::Sampled(plan) => (0..n).map(|i| (i, Some(rng.random_range(0..plan.len())))).collect(),
    };
    order.shuffle(rng);
    order
}
