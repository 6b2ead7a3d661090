use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Task;

/// Hyperparameters of the encoder-decoder network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder and decoder layers (each stack has this many).
    pub n_layers: usize,
    pub heads_enc: usize,
    pub heads_dec: usize,
    pub d_enc: usize,
    pub d_dec: usize,
    pub d_out: usize,
    /// Feed-forward hidden width for both stacks. When absent each stack
    /// uses 4 × its own model width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ff: Option<usize>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_dropout() -> f64 {
    0.1
}

fn default_max_len() -> usize {
    512
}

impl ModelConfig {
    fn with_shape(task: Task, n_layers: usize, heads_enc: usize, heads_dec: usize) -> Self {
        let (d_enc, d_dec, d_out) = task.dims();
        Self {
            n_layers,
            heads_enc,
            heads_dec,
            d_enc,
            d_dec,
            d_out,
            d_ff: None,
            dropout_p: default_dropout(),
            max_len: default_max_len(),
            seed: 0,
        }
    }

    /// N = 1, one encoder head, one decoder head.
    pub fn recognition() -> Self {
        Self::with_shape(Task::Recognition, 1, 1, 1)
    }

    /// N = 4, one encoder head, four decoder heads.
    pub fn gesture_prediction() -> Self {
        Self::with_shape(Task::GesturePrediction, 4, 1, 4)
    }

    /// N = 1, six encoder heads, eleven decoder heads.
    pub fn trajectory_prediction() -> Self {
        Self::with_shape(Task::TrajectoryPrediction, 1, 6, 11)
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Recognition => Self::recognition(),
            Task::GesturePrediction => Self::gesture_prediction(),
            Task::TrajectoryPrediction => Self::trajectory_prediction(),
        }
    }

    pub fn d_ff_enc(&self) -> usize {
        self.d_ff.unwrap_or(4 * self.d_enc)
    }

    pub fn d_ff_dec(&self) -> usize {
        self.d_ff.unwrap_or(4 * self.d_dec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("heads_enc", self.heads_enc),
            ("heads_dec", self.heads_dec),
            ("d_enc", self.d_enc),
            ("d_dec", self.d_dec),
            ("d_out", self.d_out),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.d_ff == Some(0) {
            return Err(Error::Config("d_ff must be positive".into()));
        }
        if self.d_enc % self.heads_enc != 0 {
            return Err(Error::Config(format!(
                "d_enc = {} is not divisible by h_enc = {}",
                self.d_enc, self.heads_enc
            )));
        }
        if self.d_dec % self.heads_dec != 0 {
            return Err(Error::Config(format!(
                "d_dec = {} is not divisible by h_dec = {}",
                self.d_dec, self.heads_dec
            )));
        }
        if self.d_enc % 2 != 0 || self.d_dec % 2 != 0 {
            return Err(Error::Config(format!(
                "positional encoding needs even widths, got d_enc = {}, d_dec = {}",
                self.d_enc, self.d_dec
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p = {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// Checks that the widths match the feature layout of `task`.
    pub fn validate_for(&self, task: Task) -> Result<()> {
        self.validate()?;
        let want = task.dims();
        let got = (self.d_enc, self.d_dec, self.d_out);
        if got != want {
            return Err(Error::Config(format!(
                "{task} needs (d_enc, d_dec, d_out) = {want:?}, config has {got:?}"
            )));
        }
        Ok(())
    }

    /// Number of scalar parameters implied by the config.
    ///
    /// ```text
    /// attn(d)    = 4d² + 4d                 (q, k, v, output projections with bias)
    /// ff(d, f)   = 2df + f + d
    /// norm(d)    = 2d
    /// encoder    = attn(de) + ff(de, fe) + 2·norm(de)
    /// decoder    = 2·attn(dd) + ff(dd, fd) + 3·norm(dd)
    /// total      = N·(encoder + decoder) + (de·dd + dd) + (dd·do + do)
    /// ```
    pub fn parameter_count(&self) -> usize {
        let attn = |d: usize| 4 * d * d + 4 * d;
        let ff = |d: usize, f: usize| 2 * d * f + f + d;
        let norm = |d: usize| 2 * d;
        let (de, dd, dout) = (self.d_enc, self.d_dec, self.d_out);
        let enc = attn(de) + ff(de, self.d_ff_enc()) + 2 * norm(de);
        let dec = 2 * attn(dd) + ff(dd, self.d_ff_dec()) + 3 * norm(dd);
        self.n_layers * (enc + dec) + de * dd + dd + dd * dout + dout
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for task in Task::ALL {
            ModelConfig::for_task(task).validate_for(task).unwrap();
        }
    }

    #[test]
    fn divisibility_is_enforced() {
        let mut c = ModelConfig::trajectory_prediction();
        c.heads_dec = 7;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("22") && err.contains('7'), "{err}");
    }

    #[test]
    fn odd_width_rejected() {
        let mut c = ModelConfig::recognition();
        c.d_enc = 37;
        c.heads_enc = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn wrong_task_widths_rejected() {
        assert!(ModelConfig::recognition()
            .validate_for(Task::TrajectoryPrediction)
            .is_err());
    }
}
