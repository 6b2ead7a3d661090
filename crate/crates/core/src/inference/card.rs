use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{Standardizer, WindowSpec};
use crate::error::{Error, Result};
use crate::task::{Arm, Task};
use crate::training::TrainConfig;
use crate::transformer::{ModelConfig, TransformerModel};

pub const CARD_FORMAT: &str = "kintrans-model-card/1";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CARD_FILE: &str = "model-card.toml";

/// Where a model came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Subjects whose trials were used for training.
    pub train_subjects: Vec<String>,
    pub n_frames: usize,
    pub optimizer_steps: usize,
    pub final_epoch_loss: f64,
    #[serde(default)]
    pub dataset: String,
}

/// Text sidecar describing everything needed to rebuild and use a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub format: String,
    pub task: Task,
    pub arm: Arm,
    pub rate_hz: u32,
    pub window: WindowSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub standardizer: Standardizer,
    pub provenance: Provenance,
    /// Choices the reference description leaves open.
    pub notes: Vec<String>,
}

/// The modelling choices every card records.
pub fn default_notes(model: &ModelConfig, window: &WindowSpec) -> Vec<String> {
    vec![
        format!(
            "feed-forward width {} (encoder) / {} (decoder)",
            model.d_ff_enc(),
            model.d_ff_dec()
        ),
        format!("dropout {} on sublayer outputs and inputs", model.dropout_p),
        "post-layer-norm residual blocks; encoder output projection after the full encoder stack"
            .into(),
        "Glorot-uniform weights, zero biases, unit layer-norm gains".into(),
        "kinematic features z-scored with training-fold statistics".into(),
        format!("training shift-in row: {:?}", window.shift_in),
        "recognition inference start vector R ~ U[0,1)^16, redrawn per window from a derived seed"
            .into(),
        "predicted gestures re-fed as one-hot argmax".into(),
        "learning rate d_dec^-0.5 * min(step^-0.5, step * warmup^-1.5)".into(),
        "partial final batches are used; no gradient clipping unless configured".into(),
    ]
}

impl ModelCard {
    pub fn new(
        arm: Arm,
        rate_hz: u32,
        window: WindowSpec,
        model: ModelConfig,
        train: TrainConfig,
        standardizer: Standardizer,
    ) -> Self {
        let notes = default_notes(&model, &window);
        Self {
            format: CARD_FORMAT.into(),
            task: train.task,
            arm,
            rate_hz,
            window,
            model,
            train,
            standardizer,
            provenance: Provenance::default(),
            notes,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serializing model card: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let card: Self =
            toml::from_str(text).map_err(|e| Error::Checkpoint(format!("model card: {e}")))?;
        if card.format != CARD_FORMAT {
            return Err(Error::Checkpoint(format!(
                "model card format {:?}, expected {CARD_FORMAT:?}",
                card.format
            )));
        }
        Ok(card)
    }
}

/// A checkpoint together with its card.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub card: ModelCard,
    pub model: TransformerModel,
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.card.task
    }

    pub fn expect_task(&self, task: Task) -> Result<()> {
        if self.card.task != task {
            return Err(Error::Config(format!(
                "model was trained for {}, not {task}",
                self.card.task
            )));
        }
        Ok(())
    }

    /// Writes `model.ckpt` and `model-card.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        let card = dir.join(CARD_FILE);
        self.model.save(&ckpt)?;
        fs::write(&card, self.card.to_toml()?).map_err(|e| Error::io(&card, e))?;
        Ok((ckpt, card))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let card_path = dir.join(CARD_FILE);
        let text = fs::read_to_string(&card_path).map_err(|e| Error::io(&card_path, e))?;
        let card = ModelCard::from_toml(&text)?;
        let model = TransformerModel::load(card.model.clone(), &dir.join(CHECKPOINT_FILE))?;
        Ok(Self { card, model })
    }
}
