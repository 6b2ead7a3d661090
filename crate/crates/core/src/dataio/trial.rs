use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::task::{Arm, ARM_FEATURES, BLOCK_FEATURES, N_GESTURES, RAW_COLUMNS};

use super::kinematics::parse_kinematics;
use super::transcript::parse_transcript;

/// Column offsets of the end-effector positions inside a 38-column arm
/// block: left xyz then right xyz.
pub const POSITION_COLUMNS: [usize; 6] = [
    0,
    1,
    2,
    BLOCK_FEATURES,
    BLOCK_FEATURES + 1,
    BLOCK_FEATURES + 2,
];

/// One recorded trial: synchronized kinematics and per-sample gesture labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub subject_id: String,
    pub trial_id: String,
    pub rate_hz: u32,
    /// `[L × 76]` raw, or `[L × 38]` once an arm pair has been selected.
    pub kinematics: Tensor,
    /// Gesture class per sample, `0..16`.
    pub gestures: Vec<u8>,
    /// Set once [`TrialRecord::select_arm`] has been applied.
    pub arm: Option<Arm>,
}

impl TrialRecord {
    pub fn new(
        subject_id: impl Into<String>,
        trial_id: impl Into<String>,
        rate_hz: u32,
        kinematics: Tensor,
        gestures: Vec<u8>,
    ) -> Result<Self> {
        let rec = Self {
            subject_id: subject_id.into(),
            trial_id: trial_id.into(),
            rate_hz,
            kinematics,
            gestures,
            arm: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Reads a kinematics file and its transcript.
    pub fn load(
        subject_id: &str,
        trial_id: &str,
        rate_hz: u32,
        kinematics: &Path,
        transcript: &Path,
    ) -> Result<Self> {
        let k = parse_kinematics(kinematics)?;
        let g = parse_transcript(transcript, k.rows())?;
        Self::new(subject_id, trial_id, rate_hz, k, g)
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.kinematics.dims2()?;
        if rows != self.gestures.len() {
            return Err(Error::Data(format!(
                "trial {}: {rows} kinematic rows but {} gesture labels",
                self.trial_id,
                self.gestures.len()
            )));
        }
        let want = if self.arm.is_some() {
            ARM_FEATURES
        } else {
            RAW_COLUMNS
        };
        if cols != want {
            return Err(Error::Data(format!(
                "trial {}: {cols} kinematic columns, expected {want}",
                self.trial_id
            )));
        }
        if let Some(g) = self.gestures.iter().find(|&&g| g as usize >= N_GESTURES) {
            return Err(Error::Data(format!(
                "trial {}: gesture label {g} outside 0..{N_GESTURES}",
                self.trial_id
            )));
        }
        if self.rate_hz == 0 {
            return Err(Error::Data(format!(
                "trial {}: zero sample rate",
                self.trial_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gestures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gestures.is_empty()
    }

    /// Keeps samples `0, factor, 2·factor, …`, giving `⌊L / factor⌋` rows.
    /// Labels are decimated identically so they stay aligned.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor < 1 {
            return Err(Error::Config("downsample factor must be at least 1".into()));
        }
        if self.rate_hz as usize % factor != 0 {
            return Err(Error::Config(format!(
                "cannot downsample {} Hz by a factor of {factor}",
                self.rate_hz
            )));
        }
        let keep: Vec<usize> = (0..self.len() / factor).map(|i| i * factor).collect();
        if keep.is_empty() {
            return Err(Error::Data(format!(
                "trial {} has {} samples, too short to downsample by {factor}",
                self.trial_id,
                self.len()
            )));
        }
        let cols = self.kinematics.cols();
        let mut data = Vec::with_capacity(keep.len() * cols);
        for &r in &keep {
            data.extend_from_slice(self.kinematics.row(r));
        }
        Ok(Self {
            subject_id: self.subject_id.clone(),
            trial_id: self.trial_id.clone(),
            rate_hz: self.rate_hz / factor as u32,
            kinematics: Tensor::new(vec![keep.len(), cols], data)?,
            gestures: keep.iter().map(|&r| self.gestures[r]).collect(),
            arm: self.arm,
        })
    }

    /// Resamples to `rate_hz` by decimation.
    pub fn at_rate(&self, rate_hz: u32) -> Result<Self> {
        if rate_hz == 0 || self.rate_hz % rate_hz != 0 {
            return Err(Error::Config(format!(
                "cannot resample {} Hz to {rate_hz} Hz by decimation",
                self.rate_hz
            )));
        }
        self.downsample((self.rate_hz / rate_hz) as usize)
    }

    /// Keeps the 38 columns of one manipulator pair.
    pub fn select_arm(&self, arm: Arm) -> Result<Self> {
        if let Some(have) = self.arm {
            if have == arm {
                return Ok(self.clone());
            }
            return Err(Error::Config(format!(
                "trial {} already reduced to {have}, cannot select {arm}",
                self.trial_id
            )));
        }
        let cols: Vec<usize> = (arm.first_column()..arm.first_column() + ARM_FEATURES).collect();
        Ok(Self {
            kinematics: self.kinematics.select_columns(&cols),
            arm: Some(arm),
            ..self.clone()
        })
    }

    /// `[L × 6]` end-effector positions of the selected pair.
    pub fn positions(&self) -> Result<Tensor> {
        if self.arm.is_none() {
            return Err(Error::Config(format!(
                "trial {}: select an arm pair before reading positions",
                self.trial_id
            )));
        }
        Ok(self.kinematics.select_columns(&POSITION_COLUMNS))
    }
}

/// Selects `arm` and resamples every trial to `rate_hz`.
pub fn prepare_trials(trials: &[TrialRecord], arm: Arm, rate_hz: u32) -> Result<Vec<TrialRecord>> {
    trials
        .iter()
        .map(|t| t.select_arm(arm)?.at_rate(rate_hz))
        .collect()
}
