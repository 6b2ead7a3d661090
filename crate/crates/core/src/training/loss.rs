use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var};

/// Categorical cross-entropy of softmaxed `logits` against one-hot rows,
/// summed over time steps.
pub fn gesture_loss(g: &mut Graph, logits: Var, target: Var) -> Result<Var> {
    g.cross_entropy_with_logits(logits, target)
}

/// Per-step Euclidean distance between predicted and true positions,
/// summed over time steps.
pub fn trajectory_loss(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    if g.shape(pred) != g.shape(target) {
        return Err(Error::shape(
            "trajectory_loss",
            format!("{:?} vs {:?}", g.shape(pred), g.shape(target)),
        ));
    }
    let diff = g.sub(pred, target)?;
    let norms = g.row_norm(diff)?;
    Ok(g.sum(norms))
}

/// Value-only [`gesture_loss`].
pub fn gesture_loss_value(logits: &Tensor, target: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let (l, t) = (g.constant(logits.clone()), g.constant(target.clone()));
    let loss = gesture_loss(&mut g, l, t)?;
    Ok(g.value(loss).item())
}

/// Value-only [`trajectory_loss`].
pub fn trajectory_loss_value(pred: &Tensor, target: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let (p, t) = (g.constant(pred.clone()), g.constant(target.clone()));
    let loss = trajectory_loss(&mut g, p, t)?;
    Ok(g.value(loss).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::one_hot_rows;

    #[test]
    fn uniform_logits_cost_ln16() {
        let l = Tensor::zeros(&[1, 16]);
        let v = gesture_loss_value(&l, &one_hot_rows(&[4])).unwrap();
        assert!((v - 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_cost_nothing() {
        let mut l = Tensor::zeros(&[1, 16]);
        l.row_mut(0)[7] = 1e3;
        assert!(gesture_loss_value(&l, &one_hot_rows(&[7])).unwrap() < 1e-12);
    }

    #[test]
    fn gesture_loss_sums_steps() {
        let l = Tensor::from_fn(&[2, 16], |i| (i as f64 * 0.3).sin());
        let y = one_hot_rows(&[3, 9]);
        let total = gesture_loss_value(&l, &y).unwrap();
        let a = gesture_loss_value(&l.rows_range(0, 1), &y.rows_range(0, 1)).unwrap();
        let b = gesture_loss_value(&l.rows_range(1, 1), &y.rows_range(1, 1)).unwrap();
        assert!((total - a - b).abs() < 1e-12);
    }

    #[test]
    fn trajectory_loss_cases() {
        let t = Tensor::zeros(&[1, 6]);
        assert_eq!(trajectory_loss_value(&t, &t).unwrap(), 0.0);
        let p = Tensor::from_rows(&[vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!((trajectory_loss_value(&p, &t).unwrap() - 5.0).abs() < 1e-12);
        let p2 = Tensor::from_rows(&[vec![6.0, 8.0, 0.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!((trajectory_loss_value(&p2, &t).unwrap() - 10.0).abs() < 1e-12);
        assert!(trajectory_loss_value(&Tensor::zeros(&[2, 6]), &t).is_err());
    }
}
