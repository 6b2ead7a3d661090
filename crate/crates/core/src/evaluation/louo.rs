use std::collections::BTreeSet;

use crate::dataio::{FrameSource, TrialRecord};
use crate::error::{Error, Result};
use crate::inference::{FramePrediction, TrainedModel};
use crate::training::LossCurve;

use super::experiment::{Experiment, RunSeeds};
use super::metrics::Metrics;
use super::report::{EvalReport, FoldRow};

/// One held-out subject.
#[derive(Clone, Debug)]
pub struct Fold {
    pub subject: String,
    pub seeds: RunSeeds,
    pub train_subjects: Vec<String>,
    pub model: TrainedModel,
    pub loss: LossCurve,
    pub predictions: Vec<FramePrediction>,
    pub metrics: Metrics,
}

#[derive(Clone, Debug)]
pub struct LouoOutcome {
    pub report: EvalReport,
    pub folds: Vec<Fold>,
}

fn subjects_of<S: FrameSource + ?Sized>(frames: &S) -> BTreeSet<String> {
    (0..frames.len())
        .map(|i| frames.origin(i).subject)
        .collect()
}

/// Leave-one-user-out cross-validation over `raw` trials (76 columns, any
/// rate divisible by the experiment rate).
///
/// Subjects whose trials yield no evaluation frames are skipped with a
/// warning. Fold `k` uses seeds derived from the experiment seed and `k`.
pub fn louo(raw: &[TrialRecord], exp: &Experiment) -> Result<LouoOutcome> {
    exp.validate()?;
    let trials = exp.prepare(raw)?;
    let all: BTreeSet<String> = trials.iter().map(|t| t.subject_id.clone()).collect();
    let mut usable = Vec::new();
    for s in &all {
        let mine: Vec<TrialRecord> = trials
            .iter()
            .filter(|t| &t.subject_id == s)
            .cloned()
            .collect();
        let n: usize = mine
            .iter()
            .map(|t| exp.window.count(exp.task, t.len()))
            .sum();
        if n == 0 {
            log::warn!("subject {s}: no trial is long enough for one window, skipped");
        } else {
            usable.push(s.clone());
        }
    }
    if usable.len() < 2 {
        return Err(Error::Config(format!(
            "leave-one-user-out needs at least 2 subjects with data, found {}",
            usable.len()
        )));
    }

    let mut folds = Vec::with_capacity(usable.len());
    for (k, subject) in usable.iter().enumerate() {
        let seeds = RunSeeds::derive(exp.seed, k as u64);
        let (train_trials, test_trials): (Vec<TrialRecord>, Vec<TrialRecord>) = trials
            .iter()
            .filter(|t| usable.contains(&t.subject_id))
            .cloned()
            .partition(|t| &t.subject_id != subject);
        let (std, train_frames) = exp.training_frames(&train_trials, &seeds)?;
        let test_frames = exp.eval_frames(&test_trials, &std)?;
        let train_subjects = subjects_of(&train_frames);
        let test_subjects = subjects_of(&test_frames);
        if let Some(s) = train_subjects.intersection(&test_subjects).next() {
            return Err(Error::Contract(format!(
                "fold {subject}: subject {s} appears in both training and test frames"
            )));
        }
        log::info!(
            "fold {}/{} (held out {subject}): {} training frames, {} test frames",
            k + 1,
            usable.len(),
            train_frames.len(),
            test_frames.len()
        );
        let train_subjects: Vec<String> = train_subjects.into_iter().collect();
        let (model, loss) = exp.fit_frames(&train_frames, std, &seeds, train_subjects.clone())?;
        let (predictions, metrics) = exp.evaluate(&model, &test_trials, &seeds)?;
        folds.push(Fold {
            subject: subject.clone(),
            seeds,
            train_subjects,
            model,
            loss,
            predictions,
            metrics,
        });
    }

    let rows = folds
        .iter()
        .map(|f| FoldRow {
            subject: f.subject.clone(),
            frames: f.predictions.len(),
            metrics: f.metrics.clone(),
        })
        .collect();
    let report = EvalReport::new(exp.task, rows)?;
    Ok(LouoOutcome { report, folds })
}
