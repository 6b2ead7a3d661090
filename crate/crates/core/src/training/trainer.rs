use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Frame, FrameSource};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Exec};
use crate::numerics::{Gradients, Graph, Var};
use crate::task::Task;
use crate::transformer::{ForwardMode, TransformerModel};

use super::adam::{Adam, AdamConfig};
use super::loss::{gesture_loss, trajectory_loss};
use super::schedule::lr_schedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_warmup")]
    pub warmup_steps: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Global gradient-norm clip; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub exec: Exec,
}

fn default_batch() -> usize {
    64
}

fn default_warmup() -> usize {
    2000
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    /// Batch 64, warmup 2000 and 15 / 40 / 50 epochs depending on the task.
    pub fn for_task(task: Task) -> Self {
        let epochs = match task {
            Task::Recognition => 15,
            Task::GesturePrediction => 40,
            Task::TrajectoryPrediction => 50,
        };
        Self {
            task,
            batch_size: default_batch(),
            epochs,
            warmup_steps: default_warmup(),
            adam: AdamConfig::default(),
            seed: 0,
            shuffle: true,
            grad_clip: None,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.warmup_steps == 0 {
            return Err(Error::Config(
                "batch_size, epochs and warmup_steps must be positive".into(),
            ));
        }
        let AdamConfig { beta1, beta2, eps } = self.adam;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
            return Err(Error::Config(format!(
                "invalid Adam settings beta1={beta1} beta2={beta2} eps={eps}"
            )));
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!(
                    "grad_clip must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-frame loss over the batch.
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossCurve {
    pub steps: Vec<StepRecord>,
    /// Mean per-frame training loss of each epoch.
    pub epochs: Vec<f64>,
}

impl LossCurve {
    /// Tab-separated `step epoch lr loss`, one row per optimizer step.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tepoch\tlr\tloss\n");
        for r in &self.steps {
            writeln!(out, "{}\t{}\t{:e}\t{:e}", r.step, r.epoch, r.lr, r.loss).unwrap();
        }
        out
    }

    pub fn final_epoch_loss(&self) -> Option<f64> {
        self.epochs.last().copied()
    }
}

/// Task loss of one frame, with teacher forcing.
pub fn frame_loss(
    model: &TransformerModel,
    g: &mut Graph,
    frame: &Frame,
    mode: ForwardMode,
) -> Result<Var> {
    let out = model.forward(g, &frame.enc_in, &frame.dec_in, mode)?;
    let target = g.constant(frame.target.clone());
    if frame.task.is_gesture() {
        gesture_loss(g, out, target)
    } else {
        trajectory_loss(g, out, target)
    }
}

/// Mean loss and mean parameter gradient over `indices`. Per-frame work is
/// spread by `exec`; the sum is taken in index order.
pub fn batch_gradients<S: FrameSource + ?Sized>(
    model: &TransformerModel,
    frames: &S,
    indices: &[usize],
    dropout_seed: Option<u64>,
    exec: Exec,
) -> Result<(f64, Gradients)> {
    let per_frame = exec.try_map_range(indices.len(), |k| {
        let i = indices[k];
        let frame = frames.frame(i);
        let mode = match dropout_seed {
            Some(s) => ForwardMode::Train {
                seed: derive_seed(s, i as u64),
            },
            None => ForwardMode::Eval,
        };
        let mut g = Graph::with_params(model.params());
        let loss = frame_loss(model, &mut g, &frame, mode)?;
        let value = g.value(loss).item();
        Ok::<_, Error>((value, g.backward(loss)?))
    })?;
    let mut total = Gradients::zeros_like(model.params());
    let mut loss = 0.0;
    for (l, g) in &per_frame {
        loss += l;
        total.add_assign(g);
    }
    let n = indices.len().max(1) as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

/// Frame visiting order for `epoch` (0-based).
pub fn epoch_order(n: usize, cfg: &TrainConfig, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);
    }
    order
}

/// Trains `model` in place for `cfg.epochs` epochs and returns the loss curve.
///
/// Every epoch visits every frame once; the last batch may be short.
pub fn train<S: FrameSource + ?Sized>(
    model: &mut TransformerModel,
    frames: &S,
    cfg: &TrainConfig,
) -> Result<LossCurve> {
    cfg.validate()?;
    model.config().validate_for(cfg.task)?;
    if frames.is_empty() {
        return Err(Error::Data("no training frames".into()));
    }
    let first = frames.frame(0);
    if first.task != cfg.task {
        return Err(Error::Contract(format!(
            "frames are for {}, training config is for {}",
            first.task, cfg.task
        )));
    }
    drop(first);

    let d_dec = model.config().d_dec;
    let mut adam = Adam::new(cfg.adam, model.params());
    let mut curve = LossCurve::default();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(frames.len(), cfg, epoch);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let lr = lr_schedule(step, d_dec, cfg.warmup_steps)?;
            let dropout_seed = derive_seed(cfg.seed ^ 0x5eed_d409, step as u64);
            let (loss, mut grads) =
                batch_gradients(model, frames, batch, Some(dropout_seed), cfg.exec)?;
            let norm = grads.norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Numeric {
                    step,
                    detail: format!("loss {loss}, gradient norm {norm} (epoch {epoch})"),
                });
            }
            if let Some(clip) = cfg.grad_clip {
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam.step(model.params_mut(), &grads, lr);
            epoch_sum += loss * batch.len() as f64;
            curve.steps.push(StepRecord {
                step,
                epoch,
                lr,
                loss,
            });
        }
        let mean = epoch_sum / frames.len() as f64;
        log::info!(
            "{} epoch {}/{}: loss {mean:.5}",
            cfg.task,
            epoch + 1,
            cfg.epochs
        );
        curve.epochs.push(mean);
    }
    Ok(curve)
}
