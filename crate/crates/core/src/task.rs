use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of gesture classes: G1..G15 plus 0 for unannotated samples.
pub const N_GESTURES: usize = 16;
/// Kinematic features per manipulator (position 3, rotation 9, linear
/// velocity 3, angular velocity 3, gripper 1).
pub const BLOCK_FEATURES: usize = 19;
/// Features for one manipulator pair (left + right).
pub const ARM_FEATURES: usize = 2 * BLOCK_FEATURES;
/// Columns in a raw kinematics file (MTM-L, MTM-R, PSM-L, PSM-R).
pub const RAW_COLUMNS: usize = 4 * BLOCK_FEATURES;
/// Predicted trajectory width: xyz of the left and right end-effectors.
pub const POSITION_DIMS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Recognition,
    GesturePrediction,
    TrajectoryPrediction,
}

impl Task {
    pub const ALL: [Task; 3] = [
        Task::Recognition,
        Task::GesturePrediction,
        Task::TrajectoryPrediction,
    ];

    /// `(d_enc, d_dec, d_out)` for this task's wiring.
    pub const fn dims(self) -> (usize, usize, usize) {
        match self {
            Task::Recognition | Task::GesturePrediction => (ARM_FEATURES, N_GESTURES, N_GESTURES),
            Task::TrajectoryPrediction => (
                ARM_FEATURES + N_GESTURES,
                POSITION_DIMS + N_GESTURES,
                POSITION_DIMS,
            ),
        }
    }

    pub const fn is_gesture(self) -> bool {
        !matches!(self, Task::TrajectoryPrediction)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Task::Recognition => "recognition",
            Task::GesturePrediction => "gesture-prediction",
            Task::TrajectoryPrediction => "trajectory-prediction",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// Which manipulator pair feeds the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Surgeon-side master manipulators, raw columns 0..38.
    Mtm,
    /// Patient-side manipulators, raw columns 38..76.
    #[default]
    Psm,
}

impl Arm {
    pub const fn first_column(self) -> usize {
        match self {
            Arm::Mtm => 0,
            Arm::Psm => ARM_FEATURES,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Mtm => "mtm",
            Arm::Psm => "psm",
        })
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mtm" => Ok(Arm::Mtm),
            "psm" => Ok(Arm::Psm),
            _ => Err(Error::Config(format!(
                "unknown arm {s:?} (expected mtm or psm)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_dims_follow_feature_layout() {
        assert_eq!(Task::Recognition.dims(), (38, 16, 16));
        assert_eq!(Task::GesturePrediction.dims(), (38, 16, 16));
        assert_eq!(Task::TrajectoryPrediction.dims(), (54, 22, 6));
    }

    #[test]
    fn names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("segmentation".parse::<Task>().is_err());
        assert_eq!("PSM".parse::<Arm>().unwrap(), Arm::Psm);
    }
}
