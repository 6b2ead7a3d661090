use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor};
use crate::task::{Task, N_GESTURES, POSITION_DIMS};
use crate::transformer::{ForwardMode, TransformerModel};

use super::card::TrainedModel;

/// Per-step class probabilities and their argmax labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionResult {
    pub probs: Tensor,
    pub labels: Vec<usize>,
}

impl RecognitionResult {
    fn from_logits(logits: &Tensor) -> Self {
        let probs = softmax_rows(logits);
        let labels = probs.argmax_rows();
        Self { probs, labels }
    }
}

/// Predicted end-effector positions, left xyz then right xyz per row.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryResult {
    pub positions: Tensor,
}

pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// The random first decoder row `R ∈ [0, 1)^16`.
pub fn start_vector(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..N_GESTURES).map(|_| rng.random::<f64>()).collect()
}

fn check_rows(what: &str, t: &Tensor, cols: usize) -> Result<usize> {
    let (r, c) = t.dims2()?;
    if c != cols || r == 0 {
        return Err(Error::shape(
            what,
            format!("expected [T × {cols}] with T ≥ 1, got {:?}", t.shape()),
        ));
    }
    Ok(r)
}

/// Recurrent decoding. The encoder runs once; iteration `j` feeds
/// `[R, ĝ_1 … ĝ_{j−1}]` and reads output row `j − 1`.
///
/// Also returns, for every iteration, the argmax of all rows decoded so far,
/// which lets callers check that earlier labels are never revised.
pub fn recognize_traced(
    model: &TransformerModel,
    enc_in: &Tensor,
    seed: u64,
) -> Result<(RecognitionResult, Vec<Vec<usize>>)> {
    let cfg = model.config();
    if cfg.d_dec != N_GESTURES || cfg.d_out != N_GESTURES {
        return Err(Error::Config(format!(
            "recognition needs d_dec = d_out = {N_GESTURES}, model has {} / {}",
            cfg.d_dec, cfg.d_out
        )));
    }
    let t = check_rows("encoder input", enc_in, cfg.d_enc)?;
    let memory = {
        let mut g = Graph::with_params(model.params());
        let m = model.encode(&mut g, enc_in, ForwardMode::Eval)?;
        g.value(m).clone()
    };
    let mut dec = Tensor::zeros(&[t, N_GESTURES]);
    dec.row_mut(0).copy_from_slice(&start_vector(seed));
    let mut logits = Tensor::zeros(&[t, N_GESTURES]);
    let mut trace = Vec::with_capacity(t);
    for j in 1..=t {
        let mut g = Graph::with_params(model.params());
        let mem = g.constant(memory.clone());
        let out = model.decode(&mut g, mem, &dec.rows_range(0, j), ForwardMode::Eval)?;
        let out = g.value(out);
        trace.push(out.argmax_rows());
        let row = out.row(j - 1);
        logits.row_mut(j - 1).copy_from_slice(row);
        if j < t {
            let best = out.rows_range(j - 1, 1).argmax_rows()[0];
            let next = dec.row_mut(j);
            next.fill(0.0);
            next[best] = 1.0;
        }
    }
    Ok((RecognitionResult::from_logits(&logits), trace))
}

pub fn recognize(model: &TrainedModel, enc_in: &Tensor, seed: u64) -> Result<RecognitionResult> {
    model.expect_task(Task::Recognition)?;
    Ok(recognize_traced(&model.model, enc_in, seed)?.0)
}

/// Single forward pass over the current gesture sequence.
pub fn predict_gestures(
    model: &TrainedModel,
    enc_in: &Tensor,
    dec_in: &Tensor,
) -> Result<RecognitionResult> {
    model.expect_task(Task::GesturePrediction)?;
    let cfg = model.model.config();
    check_rows("encoder input", enc_in, cfg.d_enc)?;
    check_rows("decoder input", dec_in, N_GESTURES)?;
    Ok(RecognitionResult::from_logits(
        &model.model.predict(enc_in, dec_in)?,
    ))
}

/// Single forward pass; positions come back in the model's (standardized)
/// feature space.
pub fn predict_trajectory(
    model: &TrainedModel,
    enc_in: &Tensor,
    dec_in: &Tensor,
) -> Result<TrajectoryResult> {
    model.expect_task(Task::TrajectoryPrediction)?;
    let cfg = model.model.config();
    check_rows("encoder input", enc_in, cfg.d_enc)?;
    check_rows("decoder input", dec_in, POSITION_DIMS + N_GESTURES)?;
    let positions = model.model.predict(enc_in, dec_in)?;
    if !positions.all_finite() {
        return Err(Error::Numeric {
            step: 0,
            detail: "non-finite trajectory prediction".into(),
        });
    }
    Ok(TrajectoryResult { positions })
}
