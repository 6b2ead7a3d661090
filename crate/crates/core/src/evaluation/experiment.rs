use serde::{Deserialize, Serialize};

use crate::dataio::{
    prepare_trials, FrameSet, FrameSource, ShiftIn, Standardizer, TrialRecord, WindowSpec,
};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::inference::{infer_frames, FramePrediction, ModelCard, TrainedModel};
use crate::task::{Arm, Task};
use crate::training::{train, LossCurve, TrainConfig};
use crate::transformer::{ModelConfig, TransformerModel};

use super::metrics::{summarize, Metrics};

const TAG_MODEL: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_INFER: u64 = 3;
const TAG_SHIFT_IN: u64 = 4;

/// Everything needed to train and evaluate one task.
///
/// `seed` is the only source of randomness: the seeds inside `model` and
/// `train` are replaced by values derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub task: Task,
    #[serde(default)]
    pub arm: Arm,
    pub rate_hz: u32,
    /// Training windows.
    pub window: WindowSpec,
    /// Stride of evaluation windows.
    #[serde(default = "one")]
    pub eval_stride: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// Seeds used for one model (one fold, one grid cell, one training run).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub model: u64,
    pub train: u64,
    pub infer: u64,
}

impl RunSeeds {
    pub fn derive(seed: u64, run: u64) -> Self {
        let base = derive_seed(seed, run);
        Self {
            model: derive_seed(base, TAG_MODEL),
            train: derive_seed(base, TAG_TRAIN),
            infer: derive_seed(base, TAG_INFER),
        }
    }
}

impl Experiment {
    /// The task's reference architecture and schedule.
    pub fn for_task(task: Task, rate_hz: u32, t_obs: usize, t_pred: usize) -> Self {
        Self {
            task,
            arm: Arm::Psm,
            rate_hz,
            window: WindowSpec::new(t_obs, t_pred),
            eval_stride: 1,
            model: ModelConfig::for_task(task),
            train: TrainConfig::for_task(task),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.task != self.task {
            return Err(Error::Config(format!(
                "train.task is {}, experiment task is {}",
                self.train.task, self.task
            )));
        }
        if self.rate_hz == 0 || self.eval_stride == 0 {
            return Err(Error::Config(
                "rate_hz and eval_stride must be positive".into(),
            ));
        }
        self.window.validate(self.task)?;
        self.model.validate_for(self.task)?;
        self.train.validate()?;
        let longest = self.window.t_obs.max(self.window.t_pred);
        if longest > self.model.max_len {
            return Err(Error::Config(format!(
                "window of {longest} samples exceeds max_len {}",
                self.model.max_len
            )));
        }
        Ok(())
    }

    /// Arm selection and resampling.
    pub fn prepare(&self, raw: &[TrialRecord]) -> Result<Vec<TrialRecord>> {
        prepare_trials(raw, self.arm, self.rate_hz)
    }

    fn eval_window(&self) -> WindowSpec {
        WindowSpec {
            stride: self.eval_stride,
            ..self.window.clone()
        }
    }

    fn train_window(&self, seeds: &RunSeeds) -> WindowSpec {
        let mut w = self.window.clone();
        if let ShiftIn::Uniform { .. } = w.shift_in {
            w.shift_in = ShiftIn::Uniform {
                seed: derive_seed(seeds.train, TAG_SHIFT_IN),
            };
        }
        w
    }

    /// Standardizes with statistics of `trials` and builds training frames.
    pub fn training_frames(
        &self,
        trials: &[TrialRecord],
        seeds: &RunSeeds,
    ) -> Result<(Standardizer, FrameSet)> {
        let std = Standardizer::fit(trials)?;
        let z = trials
            .iter()
            .map(|t| std.apply(t))
            .collect::<Result<Vec<_>>>()?;
        let frames = FrameSet::new(z, self.task, self.train_window(seeds))?;
        Ok((std, frames))
    }

    pub fn eval_frames(&self, trials: &[TrialRecord], std: &Standardizer) -> Result<FrameSet> {
        let z = trials
            .iter()
            .map(|t| std.apply(t))
            .collect::<Result<Vec<_>>>()?;
        FrameSet::new(z, self.task, self.eval_window())
    }

    /// Trains a fresh model on `frames` (already standardized with `std`).
    pub fn fit_frames<S: FrameSource + ?Sized>(
        &self,
        frames: &S,
        std: Standardizer,
        seeds: &RunSeeds,
        subjects: Vec<String>,
    ) -> Result<(TrainedModel, LossCurve)> {
        let model_cfg = ModelConfig {
            seed: seeds.model,
            ..self.model.clone()
        };
        let train_cfg = TrainConfig {
            seed: seeds.train,
            ..self.train.clone()
        };
        let mut model = TransformerModel::new(model_cfg.clone())?;
        let curve = train(&mut model, frames, &train_cfg)?;
        let mut card = ModelCard::new(
            self.arm,
            self.rate_hz,
            self.train_window(seeds),
            model_cfg,
            train_cfg,
            std,
        );
        card.provenance.train_subjects = subjects;
        card.provenance.n_frames = frames.len();
        card.provenance.optimizer_steps = curve.steps.len();
        card.provenance.final_epoch_loss = curve.final_epoch_loss().unwrap_or(f64::NAN);
        Ok((TrainedModel { card, model }, curve))
    }

    /// Standardizer fit, framing and training on prepared trials.
    pub fn fit(
        &self,
        trials: &[TrialRecord],
        seeds: &RunSeeds,
    ) -> Result<(TrainedModel, LossCurve)> {
        self.validate()?;
        let (std, frames) = self.training_frames(trials, seeds)?;
        if frames.is_empty() {
            return Err(Error::Data(
                "training trials are shorter than one window".into(),
            ));
        }
        let subjects = frames.subjects().into_iter().map(String::from).collect();
        self.fit_frames(&frames, std, seeds, subjects)
    }

    /// Predictions and metrics of `model` on prepared `trials`.
    pub fn evaluate(
        &self,
        model: &TrainedModel,
        trials: &[TrialRecord],
        seeds: &RunSeeds,
    ) -> Result<(Vec<FramePrediction>, Metrics)> {
        let frames = self.eval_frames(trials, &model.card.standardizer)?;
        if frames.is_empty() {
            return Err(Error::Data(
                "evaluation trials are shorter than one window".into(),
            ));
        }
        let preds = infer_frames(model, &frames, seeds.infer, self.train.exec)?;
        let metrics = summarize(&preds)?;
        Ok((preds, metrics))
    }
}
