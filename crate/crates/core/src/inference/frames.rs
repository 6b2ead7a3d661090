use std::fmt::Write as _;

use crate::dataio::{Frame, FrameOrigin, FrameSource};
use crate::error::Result;
use crate::exec::{derive_seed, Exec};
use crate::numerics::Tensor;
use crate::task::Task;

use super::card::TrainedModel;
use super::decode::{predict_gestures, predict_trajectory, recognize};

#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    Labels(Vec<usize>),
    /// `[T × 6]` positions in meters.
    Positions(Tensor),
}

/// Model output for one frame next to its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePrediction {
    pub origin: FrameOrigin,
    pub predicted: Output,
    pub truth: Output,
    /// Last observed position row (meters), trajectory frames only.
    pub last_observed: Option<Vec<f64>>,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for the recognition start vector of one window. It depends only on
/// where the window comes from, so results do not depend on frame order.
pub fn window_seed(seed: u64, origin: &FrameOrigin) -> u64 {
    let trial = derive_seed(
        seed,
        fnv1a(&origin.subject) ^ fnv1a(&origin.trial).rotate_left(17),
    );
    derive_seed(trial, origin.start as u64)
}

pub fn infer_frame(model: &TrainedModel, frame: &Frame, seed: u64) -> Result<FramePrediction> {
    let origin = frame.origin.clone();
    match frame.task {
        Task::Recognition => {
            let r = recognize(model, &frame.enc_in, window_seed(seed, &origin))?;
            Ok(FramePrediction {
                origin,
                predicted: Output::Labels(r.labels),
                truth: Output::Labels(frame.target_labels()),
                last_observed: None,
            })
        }
        Task::GesturePrediction => {
            let r = predict_gestures(model, &frame.enc_in, &frame.dec_in)?;
            Ok(FramePrediction {
                origin,
                predicted: Output::Labels(r.labels),
                truth: Output::Labels(frame.target_labels()),
                last_observed: None,
            })
        }
        Task::TrajectoryPrediction => {
            let r = predict_trajectory(model, &frame.enc_in, &frame.dec_in)?;
            let s = &model.card.standardizer;
            let observed = frame.dec_in.select_columns(&[0, 1, 2, 3, 4, 5]);
            let observed = s.unscale_positions(&observed);
            Ok(FramePrediction {
                origin,
                predicted: Output::Positions(s.unscale_positions(&r.positions)),
                truth: Output::Positions(s.unscale_positions(&frame.target)),
                last_observed: Some(observed.row(observed.rows() - 1).to_vec()),
            })
        }
    }
}

/// Runs inference over every frame, in frame order.
pub fn infer_frames<S: FrameSource + ?Sized>(
    model: &TrainedModel,
    frames: &S,
    seed: u64,
    exec: Exec,
) -> Result<Vec<FramePrediction>> {
    exec.try_map_range(frames.len(), |i| infer_frame(model, &frames.frame(i), seed))
}

/// Tab-separated table, one row per predicted step.
///
/// Gesture tasks: `subject trial t step predicted truth`.
/// Trajectory: `subject trial t step` then predicted and true `x1 y1 z1 x2 y2 z2` in meters.
pub fn predictions_tsv(preds: &[FramePrediction]) -> String {
    let mut out = String::new();
    let positional = preds
        .first()
        .is_some_and(|p| matches!(p.predicted, Output::Positions(_)));
    if positional {
        out.push_str("subject\ttrial\tt\tstep\tx1\ty1\tz1\tx2\ty2\tz2\ttrue_x1\ttrue_y1\ttrue_z1\ttrue_x2\ttrue_y2\ttrue_z2\n");
    } else {
        out.push_str("subject\ttrial\tt\tstep\tpredicted\ttruth\n");
    }
    for p in preds {
        let o = &p.origin;
        match (&p.predicted, &p.truth) {
            (Output::Labels(a), Output::Labels(b)) => {
                for (k, (x, y)) in a.iter().zip(b).enumerate() {
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{k}\t{x}\t{y}",
                        o.subject, o.trial, o.start
                    )
                    .unwrap();
                }
            }
            (Output::Positions(a), Output::Positions(b)) => {
                for k in 0..a.rows() {
                    write!(out, "{}\t{}\t{}\t{k}", o.subject, o.trial, o.start).unwrap();
                    for v in a.row(k).iter().chain(b.row(k)) {
                        write!(out, "\t{v:.6}").unwrap();
                    }
                    out.push('\n');
                }
            }
            _ => unreachable!("prediction and truth always share a kind"),
        }
    }
    out
}
