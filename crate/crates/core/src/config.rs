//! Line-oriented `key=value` configuration overriding training and loss defaults.
//!
//! Recognized keys: `lr0`, `weight_decay`, `momentum`, `epochs`,
//! `lr_drop_every`, `lr_drop_factor`, `batch_size`, `seed`,
//! `checkpoint_every`, `augment` (`full`, `sampled` or `none`), `gamma`,
//! `threshold`. Blank lines and `#` comments are ignored.

use std::path::Path;
use std::str::FromStr;

use crate::augment::AugmentPlan;
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::train::{Augmentation, TrainConfig};

pub const SEED_ENV: &str = "TIN_SEED";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub loss: LossConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.loss.validate()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for {key}"))
        }
        let t = &mut self.train;
        match key {
            "lr0" => t.lr0 = num(key, value)?,
            "weight_decay" => t.weight_decay = num(key, value)?,
            "momentum" => t.momentum = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "lr_drop_every" => t.lr_drop_every = num(key, value)?,
            "lr_drop_factor" => t.lr_drop_factor = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "checkpoint_every" => t.checkpoint_every = num(key, value)?,
            "augment" => {
                t.augmentation = match value {
                    "full" => Augmentation::All(AugmentPlan::full()),
                    "sampled" => Augmentation::Sampled(AugmentPlan::full()),
                    "none" => Augmentation::Off,
                    _ => return Err(format!("augment must be full, sampled or none, got `{value}`")),
                }
            }
            "gamma" => self.loss.gamma = num(key, value)?,
            "threshold" => self.loss.threshold = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Replaces the seed when `value` (the `TIN_SEED` variable) is set.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.train.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
        }
        Ok(())
    }
}

pub fn parse_config(text: &str, source: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
        cfg.set(key.trim(), value.trim()).map_err(err)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}
