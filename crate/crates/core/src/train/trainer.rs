use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neural::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Rewritten whenever the validation loss strictly improves.
    pub checkpoint_path: Option<PathBuf>,
    pub checkpoint_meta: CheckpointMeta,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_path: None,
            checkpoint_meta: CheckpointMeta::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.adam.learning_rate >= 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad learning rate {}", self.adam.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Whether this epoch's parameters became the checkpoint.
    pub checkpointed: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// `epoch,train_loss,val_loss,checkpointed`. Wall time is left out so two
    /// runs with the same seed give identical bytes; see [`TrainLog::timing_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,checkpointed\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:e},{:e},{}", e.epoch, e.train_loss, e.val_loss, e.checkpointed as u8);
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("epoch,wall_time_s\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:.3}", e.epoch, e.wall_time.as_secs_f64());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Loss or gradient became non-finite during this epoch; training stopped
    /// and the best earlier checkpoint was kept.
    Diverged { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch, not the last one.
    pub model: Model,
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub status: TrainStatus,
}

/// Trains on `train`, scoring the validation MSE on `val` after every epoch.
pub fn train(model: Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let batch = cfg.batch_size.max(1);
    train_with_validator(model, train, cfg, |m, _| m.evaluate_mse(&val.x, val.y.view(), batch.max(256)))
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

/// Like [`train`], with the per-epoch monitored value supplied by `validator`
/// (called with the current model and the 1-based epoch).
pub fn train_with_validator(
    mut model: Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut validator: impl FnMut(&Model, usize) -> Result<f64>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<Checkpoint> = None;
    let mut status = TrainStatus::Completed;

    'epochs: for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let b = data.select(idx);
            let lg = match model.loss_and_grad(&b.x, b.y.view(), &mut rng) {
                Ok(lg) if lg.total().is_finite() => lg,
                Ok(_) => {
                    status = TrainStatus::Diverged { epoch };
                    break 'epochs;
                }
                Err(e) if is_divergence(&e) => {
                    status = TrainStatus::Diverged { epoch };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            total += lg.total() * idx.len() as f64;
            match adam_step(&mut model.params, &lg.grads, &mut adam, &cfg.adam) {
                Ok(()) => {}
                Err(e) if is_divergence(&e) => {
                    status = TrainStatus::Diverged { epoch };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let val_loss = match validator(&model, epoch) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                status = TrainStatus::Diverged { epoch };
                break;
            }
            Err(e) if is_divergence(&e) => {
                status = TrainStatus::Diverged { epoch };
                break;
            }
            Err(e) => return Err(e),
        };
        let improved = best.as_ref().is_none_or(|b| val_loss < b.monitor);
        if improved {
            let ck = Checkpoint::from_model(&model, epoch, val_loss, cfg.checkpoint_meta.clone());
            if let Some(path) = &cfg.checkpoint_path {
                ck.save(path)?;
            }
            best = Some(ck);
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: total / data.len() as f64,
            val_loss,
            checkpointed: improved,
            wall_time: start.elapsed(),
        });
    }

    let checkpoint = best.ok_or_else(|| Error::NonFinite("training diverged before the first checkpoint".into()))?;
    model.params.clone_from(&checkpoint.params);
    Ok(TrainOutcome {
        model,
        checkpoint,
        log,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{miniature, Activation, LayerSpec, ModelKind, ModelSpec, Shape, Tensor};
    use ndarray::Array2;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 5), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, 1), |(i, _)| 0.5 * x[[i, 0]] - 0.3 * x[[i, 3]] + 0.1);
        let actual = y.column(0).to_vec();
        Dataset::new(Tensor::Flat(x), y, actual).unwrap()
    }

    fn tiny_mlp(seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Model::init(miniature(ModelKind::DenseMlp, 4, 1), &mut rng).unwrap()
    }

    #[test]
    fn injected_losses_pick_epoch_two() {
        let data = toy(40, 1);
        let losses = [0.5, 0.3, 0.4];
        let mut snapshots = Vec::new();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train_with_validator(tiny_mlp(2), &data, &cfg, |m, e| {
            snapshots.push(m.params.clone());
            Ok(losses[e - 1])
        })
        .unwrap();
        assert_eq!(out.checkpoint.epoch, 2);
        assert_eq!(out.checkpoint.monitor, 0.3);
        assert_eq!(out.model.params, snapshots[1]);
        assert_ne!(snapshots[1], snapshots[2]);
        let flags: Vec<bool> = out.log.epochs.iter().map(|e| e.checkpointed).collect();
        assert_eq!(flags, [true, true, false]);
    }

    #[test]
    fn ties_keep_the_earlier_epoch() {
        let data = toy(20, 1);
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train_with_validator(tiny_mlp(2), &data, &cfg, |_, _| Ok(1.0)).unwrap();
        assert_eq!(out.checkpoint.epoch, 1);
    }

    #[test]
    fn single_epoch_checkpoints_that_epoch() {
        let data = toy(20, 3);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let out = train(tiny_mlp(1), &data, &toy(10, 4), &cfg).unwrap();
        assert_eq!(out.checkpoint.epoch, 1);
        assert_eq!(out.log.epochs.len(), 1);
    }

    #[test]
    fn checkpoint_file_tracks_best_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("best.ckpt");
        let data = toy(30, 5);
        let losses = [0.9, 0.2, 0.7, 0.25];
        let cfg = TrainConfig {
            epochs: 4,
            checkpoint_path: Some(path.clone()),
            ..TrainConfig::default()
        };
        let out = train_with_validator(tiny_mlp(3), &data, &cfg, |_, e| Ok(losses[e - 1])).unwrap();
        let disk = Checkpoint::load(&path).unwrap();
        assert_eq!(disk.epoch, 2);
        assert_eq!(disk, out.checkpoint);
    }

    #[test]
    fn same_seed_same_log_bytes() {
        let run = || {
            let cfg = TrainConfig {
                epochs: 3,
                seed: 11,
                ..TrainConfig::default()
            };
            train(tiny_mlp(4), &toy(50, 6), &toy(10, 7), &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let model = tiny_mlp(9);
        let before = model.params.clone();
        let cfg = TrainConfig {
            epochs: 2,
            adam: AdamConfig {
                learning_rate: 0.0,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train(model, &toy(40, 1), &toy(10, 2), &cfg).unwrap();
        for (a, b) in out.model.params.iter().zip(&before) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn divergence_keeps_last_good_checkpoint() {
        let data = toy(20, 1);
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let losses = [0.4, 0.2, f64::NAN, 0.1, 0.1];
        let out = train_with_validator(tiny_mlp(1), &data, &cfg, |_, e| Ok(losses[e - 1])).unwrap();
        assert_eq!(out.status, TrainStatus::Diverged { epoch: 3 });
        assert_eq!(out.checkpoint.epoch, 2);
        assert_eq!(out.log.epochs.len(), 2);

        let out = train_with_validator(tiny_mlp(1), &data, &cfg, |_, _| Ok(f64::INFINITY));
        assert!(matches!(out, Err(Error::NonFinite(_))));
    }

    #[test]
    fn exploding_learning_rate_is_reported_as_divergence() {
        let data = toy(40, 1);
        let spec = ModelSpec {
            kind: ModelKind::DenseMlp,
            input: Shape::Flat(5),
            layers: vec![LayerSpec::dense(1, Activation::Linear)],
        };
        let model = Model::init(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut big = data.clone();
        big.y.mapv_inplace(|v| v * 1e200);
        let cfg = TrainConfig {
            epochs: 50,
            adam: AdamConfig {
                learning_rate: 1e150,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train(model, &big, &big, &cfg);
        match out {
            Ok(o) => assert!(matches!(o.status, TrainStatus::Diverged { .. })),
            Err(e) => assert!(matches!(e, Error::NonFinite(_))),
        }
    }

    /// The MSE term is compared; the L2 term on the first four layers has a
    /// floor of its own.
    #[test]
    fn mlp_learns_linear_toy() {
        let data = toy(64, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::init(miniature(ModelKind::DenseMlp, 16, 1), &mut rng).unwrap();
        let initial = model.evaluate_mse(&data.x, data.y.view(), 64).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = train(model, &data, &data, &cfg).unwrap();
        let last = out.model.evaluate_mse(&data.x, data.y.view(), 64).unwrap();
        assert!(last < 0.01 * initial, "{last} vs {initial}");
    }

    #[test]
    fn bad_config_rejected() {
        let data = toy(10, 1);
        for cfg in [
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(train(tiny_mlp(1), &data, &data, &cfg), Err(Error::Config(_))));
        }
    }
}
