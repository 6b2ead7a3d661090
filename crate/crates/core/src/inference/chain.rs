//! Recognition → gesture prediction → trajectory prediction.
//!
//! Each stage takes an arm-selected kinematics window in physical units
//! (`[T_obs × 38]`) and standardizes it itself, so the three models may come
//! from different training runs as long as rate and window agree.

use crate::dataio::{one_hot_rows, TrialRecord, POSITION_COLUMNS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::Tensor;
use crate::task::{Task, ARM_FEATURES};

use super::card::TrainedModel;
use super::decode::{predict_gestures, predict_trajectory, recognize};

pub trait Stage: Sync {
    fn rate_hz(&self) -> u32;
    fn t_obs(&self) -> usize;
}

pub trait Recognizer: Stage {
    fn recognize(&self, kinematics: &Tensor, seed: u64) -> Result<Vec<usize>>;
}

pub trait GesturePredictor: Stage {
    fn predict_gestures(&self, kinematics: &Tensor, current: &[usize]) -> Result<Vec<usize>>;
}

pub trait TrajectoryPredictor: Stage {
    /// Future positions in meters, `[T_pred × 6]`.
    fn predict_positions(
        &self,
        kinematics: &Tensor,
        current: &[usize],
        future: &[usize],
    ) -> Result<Tensor>;
}

fn labels_u8(labels: &[usize]) -> Result<Vec<u8>> {
    labels
        .iter()
        .map(|&g| {
            u8::try_from(g)
                .ok()
                .filter(|&g| (g as usize) < crate::task::N_GESTURES)
                .ok_or_else(|| Error::Data(format!("gesture {g} out of range")))
        })
        .collect()
}

impl TrainedModel {
    fn standardize_window(&self, kinematics: &Tensor) -> Result<Tensor> {
        let (t, c) = kinematics.dims2()?;
        if c != ARM_FEATURES || t != self.card.window.t_obs {
            return Err(Error::shape(
                "chain window",
                format!(
                    "expected [{} × {ARM_FEATURES}], got {:?}",
                    self.card.window.t_obs,
                    kinematics.shape()
                ),
            ));
        }
        let trial = TrialRecord {
            subject_id: String::new(),
            trial_id: "window".into(),
            rate_hz: self.card.rate_hz,
            kinematics: kinematics.clone(),
            gestures: vec![0; t],
            arm: Some(self.card.arm),
        };
        Ok(self.card.standardizer.apply(&trial)?.kinematics)
    }
}

impl Stage for TrainedModel {
    fn rate_hz(&self) -> u32 {
        self.card.rate_hz
    }

    fn t_obs(&self) -> usize {
        self.card.window.t_obs
    }
}

impl Recognizer for TrainedModel {
    fn recognize(&self, kinematics: &Tensor, seed: u64) -> Result<Vec<usize>> {
        self.expect_task(Task::Recognition)?;
        let z = self.standardize_window(kinematics)?;
        Ok(recognize(self, &z, seed)?.labels)
    }
}

impl GesturePredictor for TrainedModel {
    fn predict_gestures(&self, kinematics: &Tensor, current: &[usize]) -> Result<Vec<usize>> {
        self.expect_task(Task::GesturePrediction)?;
        let z = self.standardize_window(kinematics)?;
        let dec = one_hot_rows(&labels_u8(current)?);
        Ok(predict_gestures(self, &z, &dec)?.labels)
    }
}

impl TrajectoryPredictor for TrainedModel {
    fn predict_positions(
        &self,
        kinematics: &Tensor,
        current: &[usize],
        future: &[usize],
    ) -> Result<Tensor> {
        self.expect_task(Task::TrajectoryPrediction)?;
        let z = self.standardize_window(kinematics)?;
        let enc = Tensor::concat_cols(&[&z, &one_hot_rows(&labels_u8(current)?)])?;
        let pos = z.select_columns(&POSITION_COLUMNS);
        let dec = Tensor::concat_cols(&[&pos, &one_hot_rows(&labels_u8(future)?)])?;
        let out = predict_trajectory(self, &enc, &dec)?;
        Ok(self.card.standardizer.unscale_positions(&out.positions))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    /// Recognized labels over the observation window.
    pub current: Vec<usize>,
    /// Predicted labels over the prediction window.
    pub future: Vec<usize>,
    /// Predicted positions in meters.
    pub trajectory: Tensor,
}

pub struct Chain<'a> {
    recognizer: &'a dyn Recognizer,
    predictor: &'a dyn GesturePredictor,
    trajectory: &'a dyn TrajectoryPredictor,
}

impl<'a> Chain<'a> {
    /// Fails unless all three stages share rate and window length.
    pub fn new(
        recognizer: &'a dyn Recognizer,
        predictor: &'a dyn GesturePredictor,
        trajectory: &'a dyn TrajectoryPredictor,
    ) -> Result<Self> {
        let stages: [(&str, &dyn Stage); 3] = [
            ("recognizer", recognizer),
            ("gesture predictor", predictor),
            ("trajectory predictor", trajectory),
        ];
        let (rate, t) = (recognizer.rate_hz(), recognizer.t_obs());
        for (name, s) in &stages[1..] {
            if s.rate_hz() != rate || s.t_obs() != t {
                return Err(Error::Config(format!(
                    "{name} runs at {} Hz with T_obs {}, recognizer at {rate} Hz with T_obs {t}",
                    s.rate_hz(),
                    s.t_obs()
                )));
            }
        }
        Ok(Self {
            recognizer,
            predictor,
            trajectory,
        })
    }

    pub fn rate_hz(&self) -> u32 {
        self.recognizer.rate_hz()
    }

    pub fn t_obs(&self) -> usize {
        self.recognizer.t_obs()
    }

    pub fn run(&self, kinematics: &Tensor, seed: u64) -> Result<ChainResult> {
        let current = self.recognizer.recognize(kinematics, seed)?;
        let future = self.predictor.predict_gestures(kinematics, &current)?;
        let trajectory = self
            .trajectory
            .predict_positions(kinematics, &current, &future)?;
        Ok(ChainResult {
            current,
            future,
            trajectory,
        })
    }

    /// Runs every window; `seeds[i]` seeds window `i`.
    pub fn run_all(
        &self,
        windows: &[Tensor],
        seeds: &[u64],
        exec: Exec,
    ) -> Result<Vec<ChainResult>> {
        if windows.len() != seeds.len() {
            return Err(Error::Contract(format!(
                "{} windows but {} seeds",
                windows.len(),
                seeds.len()
            )));
        }
        exec.try_map_range(windows.len(), |i| self.run(&windows[i], seeds[i]))
    }
}
