use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Task;

use super::metrics::{Metrics, TRAJECTORY_COLUMNS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub subject: String,
    /// Evaluation frames in the fold.
    pub frames: usize,
    pub metrics: Metrics,
}

/// Per-fold metrics and their unweighted mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub folds: Vec<FoldRow>,
    pub aggregate: Metrics,
}

impl EvalReport {
    pub fn new(task: Task, folds: Vec<FoldRow>) -> Result<Self> {
        let all: Vec<Metrics> = folds.iter().map(|f| f.metrics.clone()).collect();
        let aggregate = Metrics::average(&all)?;
        for f in &folds {
            if f.metrics.accuracy().is_some() != task.is_gesture() {
                return Err(Error::Contract(format!(
                    "fold {} metrics do not match task {task}",
                    f.subject
                )));
            }
        }
        Ok(Self {
            task,
            folds,
            aggregate,
        })
    }

    fn rows(&self) -> impl Iterator<Item = (&str, String, &Metrics)> {
        self.folds
            .iter()
            .map(|f| (f.subject.as_str(), f.frames.to_string(), &f.metrics))
            .chain(std::iter::once(("mean", "-".to_string(), &self.aggregate)))
    }

    /// Machine-readable table. Gesture tasks: `subject frames accuracy`.
    /// Trajectory: an RMSE and an MAE row per fold with columns
    /// `x1 y1 z1 d1 x2 y2 z2 d2` in millimeters, followed by the mean
    /// displacement and mean Euclidean final-step error per arm.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if self.task.is_gesture() {
            out.push_str("subject\tframes\taccuracy\n");
            for (s, n, m) in self.rows() {
                writeln!(out, "{s}\t{n}\t{:.6}", m.accuracy().unwrap_or(f64::NAN)).unwrap();
            }
        } else {
            out.push_str("subject\tframes\tmetric");
            for c in TRAJECTORY_COLUMNS {
                write!(out, "\t{c}").unwrap();
            }
            out.push_str("\tdisp1\tdisp2\terr1\terr2\n");
            for (s, n, m) in self.rows() {
                let t = m.trajectory().expect("trajectory metrics");
                for (name, vals) in [("RMSE", &t.rmse), ("MAE", &t.mae)] {
                    write!(out, "{s}\t{n}\t{name}").unwrap();
                    for v in vals {
                        write!(out, "\t{v:.4}").unwrap();
                    }
                    for v in t.displacement.iter().chain(&t.position_error) {
                        write!(out, "\t{v:.4}").unwrap();
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Aligned table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{} (leave-one-user-out, {} folds)\n",
            self.task,
            self.folds.len()
        );
        if self.task.is_gesture() {
            writeln!(out, "{:<10} {:>8} {:>10}", "subject", "frames", "accuracy").unwrap();
            for (s, n, m) in self.rows() {
                let acc = m.accuracy().unwrap_or(f64::NAN) * 100.0;
                writeln!(out, "{s:<10} {n:>8} {acc:>9.2}%").unwrap();
            }
        } else {
            write!(out, "{:<10} {:>8} {:<6}", "subject", "frames", "").unwrap();
            for c in TRAJECTORY_COLUMNS {
                write!(out, " {c:>8}").unwrap();
            }
            out.push_str("   (mm)\n");
            for (s, n, m) in self.rows() {
                let t = m.trajectory().expect("trajectory metrics");
                for (name, vals) in [("RMSE", &t.rmse), ("MAE", &t.mae)] {
                    write!(out, "{s:<10} {n:>8} {name:<6}").unwrap();
                    for v in vals {
                        write!(out, " {v:>8.3}").unwrap();
                    }
                    out.push('\n');
                }
            }
            let a = self.aggregate.trajectory().expect("trajectory metrics");
            writeln!(
                out,
                "mean displacement per window: {:.3} / {:.3} mm; final-step position error: {:.3} / {:.3} mm",
                a.displacement[0], a.displacement[1], a.position_error[0], a.position_error[1]
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gesture(subject: &str, acc: f64) -> FoldRow {
        FoldRow {
            subject: subject.into(),
            frames: 10,
            metrics: Metrics::Gesture { accuracy: acc },
        }
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let r = EvalReport::new(
            Task::Recognition,
            vec![gesture("A", 0.5), gesture("B", 0.75), gesture("C", 1.0)],
        )
        .unwrap();
        assert!((r.aggregate.accuracy().unwrap() - 0.75).abs() < 1e-12);
        let tsv = r.to_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.ends_with("mean\t-\t0.750000\n"));
        assert!(r.to_table().contains("75.00%"));
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        assert!(EvalReport::new(Task::TrajectoryPrediction, vec![gesture("A", 0.5)]).is_err());
    }
}
