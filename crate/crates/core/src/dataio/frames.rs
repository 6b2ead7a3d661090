//! Sliding-window frames for the three tasks.
//!
//! With `K` the (arm-selected) kinematics, `G` the labels, `P` the
//! end-effector positions and `t` the window start:
//!
//! | task        | encoder input            | decoder input                          | target                 |
//! |-------------|--------------------------|----------------------------------------|------------------------|
//! | recognition | `K[t, t+To)`             | start row, then `onehot(G)[t, t+To-1)` | `onehot(G)[t, t+To)`   |
//! | gesture     | `K[t, t+To)`             | `onehot(G)[t, t+To)`                   | `onehot(G)[t+To, +Tp)` |
//! | trajectory  | `[K, onehot(G)][t, t+To)`| row j: `[P[t+j], onehot(G[t+To+j])]`   | `P[t+To, +Tp)`         |
//!
//! The two prediction tasks require `To == Tp`.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::numerics::Tensor;
use crate::task::{Task, ARM_FEATURES, N_GESTURES, POSITION_DIMS};

use super::trial::{TrialRecord, POSITION_COLUMNS};

pub fn one_hot(g: usize) -> Result<Tensor> {
    if g >= N_GESTURES {
        return Err(Error::Data(format!("gesture {g} outside 0..{N_GESTURES}")));
    }
    let mut t = Tensor::zeros(&[N_GESTURES]);
    t.data_mut()[g] = 1.0;
    Ok(t)
}

/// `[labels.len() × 16]` one-hot rows. Labels are assumed in range.
pub fn one_hot_rows(labels: &[u8]) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), N_GESTURES]);
    for (i, &g) in labels.iter().enumerate() {
        t.row_mut(i)[g as usize] = 1.0;
    }
    t
}

/// First decoder row for teacher-forced recognition training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShiftIn {
    #[default]
    Zeros,
    /// Uniform `[0, 1)` entries, drawn per window from `seed` and the window start.
    Uniform { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Observation window in samples.
    pub t_obs: usize,
    /// Prediction window in samples (ignored for recognition).
    pub t_pred: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub shift_in: ShiftIn,
}

fn default_stride() -> usize {
    1
}

impl WindowSpec {
    pub fn new(t_obs: usize, t_pred: usize) -> Self {
        Self {
            t_obs,
            t_pred,
            stride: 1,
            shift_in: ShiftIn::Zeros,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if self.t_obs == 0 || self.stride == 0 {
            return Err(Error::Config("t_obs and stride must be positive".into()));
        }
        if task != Task::Recognition && self.t_obs != self.t_pred {
            return Err(Error::Config(format!(
                "{task} requires t_obs == t_pred, got {} and {}",
                self.t_obs, self.t_pred
            )));
        }
        Ok(())
    }

    /// Samples a window covers.
    pub fn span(&self, task: Task) -> usize {
        match task {
            Task::Recognition => self.t_obs,
            _ => self.t_obs + self.t_pred,
        }
    }

    /// Window starts for a trial of `len` samples; empty when too short.
    pub fn starts(&self, task: Task, len: usize) -> impl Iterator<Item = usize> {
        let span = self.span(task);
        let last = len.checked_sub(span);
        (0..last.map_or(0, |l| l + 1)).step_by(self.stride.max(1))
    }

    pub fn count(&self, task: Task, len: usize) -> usize {
        match len.checked_sub(self.span(task)) {
            Some(l) => l / self.stride + 1,
            None => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FrameOrigin {
    pub subject: String,
    pub trial: String,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub task: Task,
    pub enc_in: Tensor,
    pub dec_in: Tensor,
    pub target: Tensor,
    pub origin: FrameOrigin,
}

impl Frame {
    /// Ground-truth labels of a gesture target (argmax of the one-hot rows).
    pub fn target_labels(&self) -> Vec<usize> {
        self.target.argmax_rows()
    }
}

fn check_trial(trial: &TrialRecord) -> Result<()> {
    if trial.arm.is_none() || trial.kinematics.cols() != ARM_FEATURES {
        return Err(Error::Config(format!(
            "trial {}: frames need arm-selected kinematics ({ARM_FEATURES} columns)",
            trial.trial_id
        )));
    }
    Ok(())
}

/// Builds the frame starting at `start`. The caller guarantees the window
/// fits inside the trial.
pub fn frame_at(trial: &TrialRecord, task: Task, spec: &WindowSpec, start: usize) -> Frame {
    let (to, tp) = (spec.t_obs, spec.t_pred);
    let k = &trial.kinematics;
    let g = &trial.gestures;
    let origin = FrameOrigin {
        subject: trial.subject_id.clone(),
        trial: trial.trial_id.clone(),
        start,
    };
    match task {
        Task::Recognition => {
            let target = one_hot_rows(&g[start..start + to]);
            let mut dec = Tensor::zeros(&[to, N_GESTURES]);
            if let ShiftIn::Uniform { seed } = spec.shift_in {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, start as u64));
                dec.row_mut(0)
                    .iter_mut()
                    .for_each(|v| *v = rng.random::<f64>());
            }
            for j in 1..to {
                dec.row_mut(j).copy_from_slice(target.row(j - 1));
            }
            Frame {
                task,
                enc_in: k.rows_range(start, to),
                dec_in: dec,
                target,
                origin,
            }
        }
        Task::GesturePrediction => Frame {
            task,
            enc_in: k.rows_range(start, to),
            dec_in: one_hot_rows(&g[start..start + to]),
            target: one_hot_rows(&g[start + to..start + to + tp]),
            origin,
        },
        Task::TrajectoryPrediction => {
            let width_enc = ARM_FEATURES + N_GESTURES;
            let mut enc = Tensor::zeros(&[to, width_enc]);
            for i in 0..to {
                let row = enc.row_mut(i);
                row[..ARM_FEATURES].copy_from_slice(k.row(start + i));
                row[ARM_FEATURES + g[start + i] as usize] = 1.0;
            }
            let width_dec = POSITION_DIMS + N_GESTURES;
            let mut dec = Tensor::zeros(&[tp, width_dec]);
            let mut target = Tensor::zeros(&[tp, POSITION_DIMS]);
            for j in 0..tp {
                let now = k.row(start + j);
                let future = k.row(start + to + j);
                let row = dec.row_mut(j);
                for (c, &col) in POSITION_COLUMNS.iter().enumerate() {
                    row[c] = now[col];
                }
                row[POSITION_DIMS + g[start + to + j] as usize] = 1.0;
                let trow = target.row_mut(j);
                for (c, &col) in POSITION_COLUMNS.iter().enumerate() {
                    trow[c] = future[col];
                }
            }
            Frame {
                task,
                enc_in: enc,
                dec_in: dec,
                target,
                origin,
            }
        }
    }
}

/// All frames of one trial. A trial shorter than the window yields no frames.
pub fn make_frames(trial: &TrialRecord, task: Task, spec: &WindowSpec) -> Result<Vec<Frame>> {
    spec.validate(task)?;
    check_trial(trial)?;
    Ok(spec
        .starts(task, trial.len())
        .map(|s| frame_at(trial, task, spec, s))
        .collect())
}

/// Indexed access to frames, materialized or generated on demand.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn frame(&self, i: usize) -> Cow<'_, Frame>;

    fn origin(&self, i: usize) -> FrameOrigin {
        self.frame(i).origin.clone()
    }
}

impl FrameSource for [Frame] {
    fn len(&self) -> usize {
        <[Frame]>::len(self)
    }

    fn frame(&self, i: usize) -> Cow<'_, Frame> {
        Cow::Borrowed(&self[i])
    }
}

impl FrameSource for Vec<Frame> {
    fn len(&self) -> usize {
        <[Frame]>::len(self)
    }

    fn frame(&self, i: usize) -> Cow<'_, Frame> {
        Cow::Borrowed(&self[i])
    }
}

/// Lazily materialized frames over a set of trials.
///
/// Only `(trial, start)` pairs are stored; tensors are cut when a frame is
/// requested, so stride-1 windows over long recordings stay cheap.
#[derive(Clone, Debug)]
pub struct FrameSet {
    trials: Vec<TrialRecord>,
    task: Task,
    spec: WindowSpec,
    index: Vec<(usize, usize)>,
}

impl FrameSet {
    pub fn new(trials: Vec<TrialRecord>, task: Task, spec: WindowSpec) -> Result<Self> {
        spec.validate(task)?;
        let mut index = Vec::new();
        for (ti, t) in trials.iter().enumerate() {
            check_trial(t)?;
            index.extend(spec.starts(task, t.len()).map(|s| (ti, s)));
        }
        Ok(Self {
            trials,
            task,
            spec,
            index,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    /// `(trial index, window start)` of frame `i`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        self.index[i]
    }

    /// Subjects contributing at least one frame.
    pub fn subjects(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self
            .index
            .iter()
            .map(|&(t, _)| self.trials[t].subject_id.as_str())
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

impl FrameSource for FrameSet {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn frame(&self, i: usize) -> Cow<'_, Frame> {
        let (t, s) = self.index[i];
        Cow::Owned(frame_at(&self.trials[t], self.task, &self.spec, s))
    }

    fn origin(&self, i: usize) -> FrameOrigin {
        let (t, s) = self.index[i];
        FrameOrigin {
            subject: self.trials[t].subject_id.clone(),
            trial: self.trials[t].trial_id.clone(),
            start: s,
        }
    }
}

/// A view of selected frames of another source, in the given order.
pub struct Subset<'a, S: FrameSource + ?Sized> {
    inner: &'a S,
    indices: Vec<usize>,
}

impl<'a, S: FrameSource + ?Sized> Subset<'a, S> {
    pub fn new(inner: &'a S, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= inner.len()) {
            return Err(Error::Contract(format!(
                "frame index {bad} out of range for {} frames",
                inner.len()
            )));
        }
        Ok(Self { inner, indices })
    }
}

impl<S: FrameSource + ?Sized> FrameSource for Subset<'_, S> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn frame(&self, i: usize) -> Cow<'_, Frame> {
        self.inner.frame(self.indices[i])
    }

    fn origin(&self, i: usize) -> FrameOrigin {
        self.inner.origin(self.indices[i])
    }
}
