use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{FramePrediction, Output};

pub const MM_PER_M: f64 = 1000.0;

/// Fraction of steps where the labels agree.
pub fn frame_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predicted labels for {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("accuracy of an empty frame".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-frame accuracies.
pub fn dataset_accuracy(per_frame: &[f64]) -> Result<f64> {
    mean(per_frame)
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Contract("mean of no values".into()));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Contract(format!(
            "series lengths differ: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Contract("error metric over zero samples".into()));
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let s: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let s: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / y.len() as f64)
}

/// Distance from the camera-frame origin.
pub fn distance(xyz: &[f64]) -> f64 {
    xyz.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Column labels of the trajectory tables: per arm `x y z d`.
pub const TRAJECTORY_COLUMNS: [&str; 8] = ["x1", "y1", "z1", "d1", "x2", "y2", "z2", "d2"];

/// Trajectory errors in millimeters on the final prediction step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    /// Ordered as [`TRAJECTORY_COLUMNS`].
    pub rmse: [f64; 8],
    pub mae: [f64; 8],
    /// Mean distance per arm between the last observed and the true final
    /// position.
    pub displacement: [f64; 2],
    /// Mean Euclidean error per arm between predicted and true final position.
    pub position_error: [f64; 2],
    /// MAE of `d` per prediction step, averaged over both arms.
    pub d_mae_per_step: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metrics {
    Gesture { accuracy: f64 },
    Trajectory(TrajectoryMetrics),
}

impl Metrics {
    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Metrics::Gesture { accuracy } => Some(*accuracy),
            Metrics::Trajectory(_) => None,
        }
    }

    pub fn trajectory(&self) -> Option<&TrajectoryMetrics> {
        match self {
            Metrics::Trajectory(t) => Some(t),
            Metrics::Gesture { .. } => None,
        }
    }

    /// Higher is better: accuracy, or minus the mean `d` MAE.
    pub fn score(&self) -> f64 {
        match self {
            Metrics::Gesture { accuracy } => *accuracy,
            Metrics::Trajectory(t) => -(t.mae[3] + t.mae[7]) / 2.0,
        }
    }

    /// Element-wise mean over folds.
    pub fn average(all: &[Metrics]) -> Result<Metrics> {
        let Some(first) = all.first() else {
            return Err(Error::Contract("no folds to average".into()));
        };
        match first {
            Metrics::Gesture { .. } => {
                let accs: Option<Vec<f64>> = all.iter().map(Metrics::accuracy).collect();
                let accs = accs.ok_or_else(|| Error::Contract("mixed metric kinds".into()))?;
                Ok(Metrics::Gesture {
                    accuracy: mean(&accs)?,
                })
            }
            Metrics::Trajectory(_) => {
                let ts: Option<Vec<&TrajectoryMetrics>> =
                    all.iter().map(Metrics::trajectory).collect();
                let ts = ts.ok_or_else(|| Error::Contract("mixed metric kinds".into()))?;
                let n = ts.len() as f64;
                let avg = |f: &dyn Fn(&TrajectoryMetrics) -> f64| {
                    ts.iter().map(|t| f(t)).sum::<f64>() / n
                };
                let steps = ts.iter().map(|t| t.d_mae_per_step.len()).min().unwrap_or(0);
                Ok(Metrics::Trajectory(TrajectoryMetrics {
                    rmse: std::array::from_fn(|i| avg(&|t| t.rmse[i])),
                    mae: std::array::from_fn(|i| avg(&|t| t.mae[i])),
                    displacement: std::array::from_fn(|i| avg(&|t| t.displacement[i])),
                    position_error: std::array::from_fn(|i| avg(&|t| t.position_error[i])),
                    d_mae_per_step: (0..steps).map(|k| avg(&|t| t.d_mae_per_step[k])).collect(),
                }))
            }
        }
    }
}

/// Metrics over a set of frame predictions (one fold).
pub fn summarize(preds: &[FramePrediction]) -> Result<Metrics> {
    let Some(first) = preds.first() else {
        return Err(Error::Data("no predictions to evaluate".into()));
    };
    match first.predicted {
        Output::Labels(_) => {
            let accs = preds
                .iter()
                .map(|p| match (&p.predicted, &p.truth) {
                    (Output::Labels(a), Output::Labels(b)) => frame_accuracy(a, b),
                    _ => Err(Error::Contract("mixed prediction kinds".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Metrics::Gesture {
                accuracy: dataset_accuracy(&accs)?,
            })
        }
        Output::Positions(_) => trajectory_metrics(preds).map(Metrics::Trajectory),
    }
}

fn trajectory_metrics(preds: &[FramePrediction]) -> Result<TrajectoryMetrics> {
    // cols[c] holds (truth, predicted) series of column c in mm.
    let mut truth: [Vec<f64>; 8] = Default::default();
    let mut pred: [Vec<f64>; 8] = Default::default();
    let mut disp = [Vec::new(), Vec::new()];
    let mut pos_err = [Vec::new(), Vec::new()];
    let mut per_step: Vec<Vec<f64>> = Vec::new();
    for p in preds {
        let (Output::Positions(a), Output::Positions(b)) = (&p.predicted, &p.truth) else {
            return Err(Error::Contract("mixed prediction kinds".into()));
        };
        let last = a.rows() - 1;
        let (pa, tb) = (a.row(last), b.row(last));
        for arm in 0..2 {
            let pr = &pa[arm * 3..arm * 3 + 3];
            let tr = &tb[arm * 3..arm * 3 + 3];
            for k in 0..3 {
                truth[arm * 4 + k].push(tr[k] * MM_PER_M);
                pred[arm * 4 + k].push(pr[k] * MM_PER_M);
            }
            truth[arm * 4 + 3].push(distance(tr) * MM_PER_M);
            pred[arm * 4 + 3].push(distance(pr) * MM_PER_M);
            let diff: Vec<f64> = pr.iter().zip(tr).map(|(x, y)| x - y).collect();
            pos_err[arm].push(distance(&diff) * MM_PER_M);
            if let Some(obs) = &p.last_observed {
                let moved: Vec<f64> = tr
                    .iter()
                    .zip(&obs[arm * 3..arm * 3 + 3])
                    .map(|(x, y)| x - y)
                    .collect();
                disp[arm].push(distance(&moved) * MM_PER_M);
            }
        }
        if per_step.len() < a.rows() {
            per_step.resize(a.rows(), Vec::new());
        }
        for k in 0..a.rows() {
            let (pk, tk) = (a.row(k), b.row(k));
            let e = ((distance(&pk[..3]) - distance(&tk[..3])).abs()
                + (distance(&pk[3..]) - distance(&tk[3..])).abs())
                / 2.0;
            per_step[k].push(e * MM_PER_M);
        }
    }
    let mut rmse_v = [0.0; 8];
    let mut mae_v = [0.0; 8];
    for c in 0..8 {
        rmse_v[c] = rmse(&truth[c], &pred[c])?;
        mae_v[c] = mae(&truth[c], &pred[c])?;
    }
    let opt_mean = |xs: &[f64]| {
        if xs.is_empty() {
            f64::NAN
        } else {
            mean(xs).unwrap()
        }
    };
    Ok(TrajectoryMetrics {
        rmse: rmse_v,
        mae: mae_v,
        displacement: [opt_mean(&disp[0]), opt_mean(&disp[1])],
        position_error: [opt_mean(&pos_err[0]), opt_mean(&pos_err[1])],
        d_mae_per_step: per_step.iter().map(|s| opt_mean(s)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FrameOrigin;
    use crate::numerics::Tensor;

    #[test]
    fn accuracy_examples() {
        let truth = vec![3usize; 30];
        let mut pred = truth.clone();
        pred[..3].fill(0);
        assert!((frame_accuracy(&pred, &truth).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(frame_accuracy(&truth, &truth).unwrap(), 1.0);
        assert!((dataset_accuracy(&[0.5, 1.0]).unwrap() - 0.75).abs() < 1e-12);
        assert!(frame_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn error_examples() {
        let y = [1.0, 2.0];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        let y_hat = [-2.0, 6.0];
        assert!((mae(&y, &y_hat).unwrap() - 3.5).abs() < 1e-12);
        assert!((rmse(&y, &y_hat).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        let same = [2.0, 3.0, 4.0];
        let shifted = [2.5, 3.5, 4.5];
        assert!((rmse(&same, &shifted).unwrap() - mae(&same, &shifted).unwrap()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn meters_become_millimeters() {
        let origin = FrameOrigin {
            subject: "a".into(),
            trial: "a1".into(),
            start: 0,
        };
        let truth =
            Tensor::from_rows(&[vec![0.0; 6], vec![0.01, 0.0, 0.0, 0.0, 0.0, 0.0]]).unwrap();
        let mut predicted = truth.clone();
        predicted.row_mut(1)[0] = 0.013;
        let p = FramePrediction {
            origin,
            predicted: Output::Positions(predicted),
            truth: Output::Positions(truth),
            last_observed: Some(vec![0.0; 6]),
        };
        let m = summarize(&[p]).unwrap();
        let t = m.trajectory().unwrap();
        assert!((t.mae[0] - 3.0).abs() < 1e-9);
        assert!((t.mae[3] - 3.0).abs() < 1e-9);
        assert!((t.displacement[0] - 10.0).abs() < 1e-9);
        assert!((t.position_error[0] - 3.0).abs() < 1e-9);
        assert_eq!(t.mae[4], 0.0);
        assert_eq!(t.d_mae_per_step.len(), 2);
    }
}
