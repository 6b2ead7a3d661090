use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{FrameSource, Subset, TrialRecord};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::inference::infer_frames;
use crate::transformer::ModelConfig;

use super::experiment::{Experiment, RunSeeds};
use super::metrics::{summarize, Metrics};

/// Values to try for each architecture knob. Every combination is run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_layers: Vec<usize>,
    pub heads_enc: Vec<usize>,
    pub heads_dec: Vec<usize>,
    #[serde(default)]
    pub dropout_p: Vec<f64>,
    /// Fraction of frames used for training; the rest validates.
    #[serde(default = "default_split")]
    pub train_fraction: f64,
}

fn default_split() -> f64 {
    0.7
}

impl GridSpec {
    /// Every combination applied to `base`, in lexicographic order.
    pub fn expand(&self, base: &ModelConfig) -> Result<Vec<ModelConfig>> {
        if self.n_layers.is_empty() || self.heads_enc.is_empty() || self.heads_dec.is_empty() {
            return Err(Error::Config("grid has an empty axis".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let dropouts = if self.dropout_p.is_empty() {
            vec![base.dropout_p]
        } else {
            self.dropout_p.clone()
        };
        let mut out = Vec::new();
        for &n in &self.n_layers {
            for &he in &self.heads_enc {
                for &hd in &self.heads_dec {
                    for &p in &dropouts {
                        out.push(ModelConfig {
                            n_layers: n,
                            heads_enc: he,
                            heads_dec: hd,
                            dropout_p: p,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n_layers: usize,
    pub heads_enc: usize,
    pub heads_dec: usize,
    pub dropout_p: f64,
    /// `None` when the combination violates a shape constraint.
    pub metrics: Option<Metrics>,
    pub note: String,
}

impl GridRow {
    pub fn score(&self) -> f64 {
        self.metrics
            .as_ref()
            .map_or(f64::NEG_INFINITY, Metrics::score)
    }
}

/// Ranked grid results, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
}

impl GridReport {
    pub fn best(&self) -> Option<&GridRow> {
        self.rows.first().filter(|r| r.metrics.is_some())
    }

    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("rank\tn_layers\theads_enc\theads_dec\tdropout_p\tmetric\tvalue\tnote\n");
        for (i, r) in self.rows.iter().enumerate() {
            let (name, value) = match &r.metrics {
                Some(Metrics::Gesture { accuracy }) => ("accuracy", format!("{accuracy:.6}")),
                Some(Metrics::Trajectory(t)) => (
                    "mean_d_mae_mm",
                    format!("{:.6}", (t.mae[3] + t.mae[7]) / 2.0),
                ),
                None => ("-", "-".into()),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{name}\t{value}\t{}",
                i + 1,
                r.n_layers,
                r.heads_enc,
                r.heads_dec,
                r.dropout_p,
                r.note
            )
            .unwrap();
        }
        out
    }
}

/// Indices of frames whose `(trial, start)` is (or is not) in `keys`.
fn select<S: FrameSource + ?Sized>(
    frames: &S,
    keys: &HashSet<(String, usize)>,
    inside: bool,
) -> Vec<usize> {
    (0..frames.len())
        .filter(|&i| {
            let o = frames.origin(i);
            keys.contains(&(o.trial, o.start)) == inside
        })
        .collect()
}

/// Trains every grid cell on a shuffled frame-level split of all trials
/// and ranks by validation score. Invalid combinations are kept as
/// unscored rows at the bottom.
pub fn gridsearch(raw: &[TrialRecord], exp: &Experiment, grid: &GridSpec) -> Result<GridReport> {
    let configs = grid.expand(&exp.model)?;
    let trials = exp.prepare(raw)?;
    let split_seeds = RunSeeds::derive(exp.seed, u64::MAX);
    let (std, frames) = exp.training_frames(&trials, &split_seeds)?;
    let val_all = exp.eval_frames(&trials, &std)?;
    if frames.len() < 2 || val_all.len() < 2 {
        return Err(Error::Data(
            "too few frames for a train/validation split".into(),
        ));
    }
    // Split by window start so a training window never reappears as a
    // validation window.
    let mut starts: Vec<(String, usize)> = (0..val_all.len())
        .map(|i| {
            let o = val_all.origin(i);
            (o.trial, o.start)
        })
        .collect();
    starts.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(exp.seed, 0x5_9117));
    starts.shuffle(&mut rng);
    let n_train = ((starts.len() as f64) * grid.train_fraction).round() as usize;
    let train_keys: HashSet<(String, usize)> = starts[..n_train].iter().cloned().collect();
    let train_idx = select(&frames, &train_keys, true);
    let val_idx = select(&val_all, &train_keys, false);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Data(
            "train/validation split left one side empty".into(),
        ));
    }
    let train_set = Subset::new(&frames, train_idx)?;
    let val_set = Subset::new(&val_all, val_idx)?;
    let subjects: Vec<String> = frames.subjects().into_iter().map(String::from).collect();

    let mut rows = Vec::with_capacity(configs.len());
    for (k, cfg) in configs.into_iter().enumerate() {
        let mut row = GridRow {
            n_layers: cfg.n_layers,
            heads_enc: cfg.heads_enc,
            heads_dec: cfg.heads_dec,
            dropout_p: cfg.dropout_p,
            metrics: None,
            note: String::new(),
        };
        if let Err(e) = cfg.validate_for(exp.task) {
            log::warn!("grid cell {k} skipped: {e}");
            row.note = e.to_string();
            rows.push(row);
            continue;
        }
        let cell = Experiment {
            model: cfg,
            ..exp.clone()
        };
        let seeds = RunSeeds::derive(exp.seed, k as u64);
        let (model, _) = cell.fit_frames(&train_set, std.clone(), &seeds, subjects.clone())?;
        let preds = infer_frames(&model, &val_set, seeds.infer, exp.train.exec)?;
        let m = summarize(&preds)?;
        log::info!(
            "grid cell ({}, {}, {}): score {:.4}",
            row.n_layers,
            row.heads_enc,
            row.heads_dec,
            m.score()
        );
        row.metrics = Some(m);
        rows.push(row);
    }
    rows.sort_by(|a, b| b.score().total_cmp(&a.score()));
    Ok(GridReport { rows })
}
