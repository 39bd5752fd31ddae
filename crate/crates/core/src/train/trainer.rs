use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::PatchDataset;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParameterSet, RecurrentUNet};
use crate::transfer::TrainableMask;

use super::adam::{grad_norm, Adam};
use super::schedule::{schedule_with_phases, shuffled_schedule, ScheduledBatch};

pub const PRETRAIN_LR: f64 = 1e-3;
pub const FINETUNE_LR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub pos_weight: f64,
    pub seed: u64,
    pub curriculum: bool,
    /// Visible-step counts used as curriculum phases; empty means `1..=T`.
    pub early_step_set: Vec<usize>,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 4,
            learning_rate: PRETRAIN_LR,
            pos_weight: 1.0,
            seed: 0,
            curriculum: true,
            early_step_set: Vec::new(),
            clip_norm: 5.0,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn finetune() -> Self {
        Self {
            learning_rate: FINETUNE_LR,
            ..Self::default()
        }
    }

    pub fn validate(&self, time_steps: usize) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.pos_weight >= 0.0) {
            return Err(Error::Config("pos_weight must be >= 0".into()));
        }
        if let Some(&t) = self.early_step_set.iter().find(|&&t| t == 0 || t > time_steps) {
            return Err(Error::Config(format!("curriculum phase {t} outside 1..={time_steps}")));
        }
        Ok(())
    }

    fn phases(&self, time_steps: usize) -> Vec<usize> {
        if self.early_step_set.is_empty() {
            (1..=time_steps).collect()
        } else {
            self.early_step_set.clone()
        }
    }

    /// Batches of one epoch.
    pub fn epoch_schedule(&self, n_samples: usize, time_steps: usize, epoch: usize) -> Vec<ScheduledBatch> {
        let seed = self.seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(epoch as u64);
        let phases = self.phases(time_steps);
        if self.curriculum {
            schedule_with_phases(n_samples, self.batch_size, &phases, seed)
        } else {
            shuffled_schedule(n_samples, self.batch_size, time_steps, phases.len(), seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub phase: usize,
    pub batch: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub final_fingerprint: String,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    /// Means over the first and last `frac` of steps.
    pub fn head_tail_means(&self, frac: f64) -> (f64, f64) {
        let l = self.losses();
        let k = ((l.len() as f64 * frac).ceil() as usize).clamp(1, l.len().max(1));
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (mean(&l[..k.min(l.len())]), mean(&l[l.len().saturating_sub(k)..]))
    }

    /// One JSON object per step.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for s in &self.steps {
            let line = serde_json::to_string(s).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Fits `params` to `dataset`, updating only parameters flagged in `mask`.
///
/// Deterministic for a fixed `cfg.seed`: the batch schedule and every dropout
/// mask derive from it.
pub fn train(
    model: &ModelConfig,
    params: &ParameterSet,
    mask: &TrainableMask,
    dataset: &PatchDataset,
    cfg: &TrainConfig,
) -> Result<(ParameterSet, TrainHistory)> {
    if dataset.is_empty() {
        return Err(Error::Argument("training dataset is empty".into()));
    }
    cfg.validate(model.time_steps)?;
    let net = RecurrentUNet::new(model.clone())?;
    net.check_params(params)?;
    let d = dataset.dims;
    if d.t != model.time_steps || d.c != model.in_channels || d.h != model.patch_size || d.w != model.patch_size {
        return Err(Error::Config(format!(
            "dataset [T={}, C={}, {}x{}] does not fit model [T={}, C={}, {}x{}]",
            d.t, d.c, d.h, d.w, model.time_steps, model.in_channels, model.patch_size, model.patch_size
        )));
    }
    let trainable = mask.aligned(params)?;
    let mut params = params.clone();
    let mut history = TrainHistory::default();
    if !trainable.iter().any(|&t| t) {
        history.final_fingerprint = params.fingerprint();
        return Ok((params, history));
    }
    let mut opt = Adam::new(&params, cfg.learning_rate);
    let mut step = 0usize;
    'epochs: for epoch in 0..cfg.epochs {
        for (b, sched) in cfg.epoch_schedule(dataset.len(), model.time_steps, epoch).iter().enumerate() {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let (batch, labels) = dataset.batch(&sched.indices, sched.t_avail)?;
            let dropout_seed = cfg.seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
            let (loss, grad) = net.loss_and_grad(&params, &batch, &labels, cfg.pos_weight, Some(dropout_seed))?;
            let norm = grad_norm(&grad, &trainable);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            let scale = if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };
            opt.step(&mut params, &grad, &trainable, scale);
            history.steps.push(StepRecord {
                step,
                epoch,
                phase: sched.t_avail,
                batch: b,
                loss,
                grad_norm: norm,
            });
            log::debug!("step {step} epoch {epoch} t={} loss {loss:.5}", sched.t_avail);
            step += 1;
        }
    }
    if !params.is_finite() {
        return Err(Error::Divergence {
            step,
            loss: f64::NAN,
        });
    }
    history.final_fingerprint = params.fingerprint();
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic_dataset, SynthSpec};
    use crate::data::SplitTag;
    use crate::model::Group;

    fn data(n: usize) -> PatchDataset {
        let spec = SynthSpec {
            n_patches: n,
            patch_size: 16,
            field_size: (4, 8),
            ..SynthSpec::source_rice()
        }
        .with_features(&["VH"])
        .unwrap();
        generate_synthetic_dataset(&spec, 2).unwrap()
    }

    fn model() -> ModelConfig {
        ModelConfig {
            in_channels: 1,
            base_channels: 2,
            patch_size: 16,
            ..ModelConfig::desk_scale()
        }
    }

    fn quick(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 2,
            seed,
            early_step_set: vec![4, 8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn frozen_group_is_bitwise_unchanged() {
        let cfg = model();
        let mut p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        // A zero head blocks every gradient below it.
        p0.get_mut("decoder.head.weight").unwrap().values.iter_mut().for_each(|v| *v = 0.5);
        let mask = TrainableMask::from_fn(&p0, |_, g, _| g == Group::Encoder);
        let (p1, h) = train(&cfg, &p0, &mask, &data(4), &quick(0)).unwrap();
        assert_eq!(h.steps.len(), 4);
        for (path, p) in p0.iter() {
            let q = p1.get(path).unwrap();
            let same = p.values.iter().zip(&q.values).all(|(a, b)| a.to_bits() == b.to_bits());
            if p.group == Group::Decoder {
                assert!(same, "{path} changed");
            }
        }
        assert!(!p0.bitwise_eq(&p1));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let mask = TrainableMask::all(&p0, true);
        let d = data(4);
        let (a, ha) = train(&cfg, &p0, &mask, &d, &quick(3)).unwrap();
        let (b, hb) = train(&cfg, &p0, &mask, &d, &quick(3)).unwrap();
        assert!(a.bitwise_eq(&b));
        assert_eq!(ha, hb);
        let (c, _) = train(&cfg, &p0, &mask, &d, &quick(4)).unwrap();
        assert!(!a.bitwise_eq(&c));
    }

    #[test]
    fn phases_follow_chronological_order() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let (_, h) = train(&cfg, &p0, &TrainableMask::all(&p0, true), &data(4), &quick(0)).unwrap();
        let phases: Vec<usize> = h.steps.iter().map(|s| s.phase).collect();
        assert_eq!(phases, vec![4, 4, 8, 8]);
    }

    #[test]
    fn all_frozen_returns_input() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let (p1, h) = train(&cfg, &p0, &TrainableMask::all(&p0, false), &data(2), &quick(0)).unwrap();
        assert!(p0.bitwise_eq(&p1));
        assert!(h.steps.is_empty());
    }

    #[test]
    fn rejects_empty_and_mismatched_data() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let mask = TrainableMask::all(&p0, true);
        let empty = data(2).subset(&[], SplitTag::Train);
        assert!(matches!(train(&cfg, &p0, &mask, &empty, &quick(0)), Err(Error::Argument(_))));
        let two = generate_synthetic_dataset(
            &SynthSpec {
                n_patches: 2,
                patch_size: 16,
                field_size: (4, 8),
                ..SynthSpec::source_rice()
            },
            0,
        )
        .unwrap();
        assert!(matches!(train(&cfg, &p0, &mask, &two, &quick(0)), Err(Error::Config(_))));
    }

    #[test]
    fn max_steps_caps_training() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let tc = TrainConfig {
            max_steps: Some(3),
            epochs: 5,
            ..quick(0)
        };
        let (_, h) = train(&cfg, &p0, &TrainableMask::all(&p0, true), &data(4), &tc).unwrap();
        assert_eq!(h.steps.len(), 3);
    }

    #[test]
    fn history_jsonl_has_one_line_per_step() {
        let cfg = model();
        let p0 = RecurrentUNet::new(cfg.clone()).unwrap().init(1).unwrap();
        let (_, h) = train(&cfg, &p0, &TrainableMask::all(&p0, true), &data(2), &quick(0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        h.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), h.steps.len());
        let first: StepRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, h.steps[0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate(8).is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate(8).is_err());
        assert!(TrainConfig { early_step_set: vec![9], ..TrainConfig::default() }.validate(8).is_err());
        assert!(TrainConfig::finetune().validate(8).is_ok());
        assert_eq!(TrainConfig::finetune().learning_rate, FINETUNE_LR);
    }
}
