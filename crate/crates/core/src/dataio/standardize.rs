use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::trial::{TrialRecord, POSITION_COLUMNS};

/// Per-column z-scoring fitted on training trials only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Columns with (near-)zero spread get unit scale.
    pub fn fit(trials: &[TrialRecord]) -> Result<Self> {
        let Some(first) = trials.first() else {
            return Err(Error::Data(
                "cannot fit a standardizer on zero trials".into(),
            ));
        };
        let cols = first.kinematics.cols();
        let mut sum = vec![0.0; cols];
        let mut n = 0usize;
        for t in trials {
            if t.kinematics.cols() != cols {
                return Err(Error::Data(format!(
                    "trial {} has {} columns, expected {cols}",
                    t.trial_id,
                    t.kinematics.cols()
                )));
            }
            for i in 0..t.len() {
                sum.iter_mut()
                    .zip(t.kinematics.row(i))
                    .for_each(|(s, v)| *s += v);
            }
            n += t.len();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; cols];
        for t in trials {
            for i in 0..t.len() {
                for (j, v) in t.kinematics.row(i).iter().enumerate() {
                    sq[j] += (v - mean[j]).powi(2);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(cols: usize) -> Self {
        Self {
            mean: vec![0.0; cols],
            std: vec![1.0; cols],
        }
    }

    pub fn apply(&self, trial: &TrialRecord) -> Result<TrialRecord> {
        let k = &trial.kinematics;
        if k.cols() != self.mean.len() {
            return Err(Error::Data(format!(
                "standardizer has {} columns, trial {} has {}",
                self.mean.len(),
                trial.trial_id,
                k.cols()
            )));
        }
        let c = k.cols();
        let data = k
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % c]) / self.std[i % c])
            .collect();
        Ok(TrialRecord {
            kinematics: Tensor::new(k.shape().to_vec(), data)?,
            ..trial.clone()
        })
    }

    /// Maps standardized `[T × 6]` positions back to physical units.
    pub fn unscale_positions(&self, z: &Tensor) -> Tensor {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for (j, &col) in POSITION_COLUMNS.iter().enumerate() {
                let v = &mut out.row_mut(i)[j];
                *v = *v * self.std[col] + self.mean[col];
            }
        }
        out
    }
}
