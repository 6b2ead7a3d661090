use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataio::{make_frames, one_hot_rows, Standardizer, TrialRecord, WindowSpec};
use crate::numerics::Tensor;
use crate::task::{Arm, Task, RAW_COLUMNS};
use crate::training::{train, TrainConfig};
use crate::transformer::{ModelConfig, TransformerModel};

fn untrained(task: Task, rate: u32, t: usize, seed: u64) -> TrainedModel {
    let cfg = ModelConfig {
        seed,
        ..ModelConfig::for_task(task)
    };
    let card = ModelCard::new(
        Arm::Psm,
        rate,
        WindowSpec::new(t, t),
        cfg.clone(),
        TrainConfig::for_task(task),
        Standardizer::identity(38),
    );
    TrainedModel {
        card,
        model: TransformerModel::new(cfg).unwrap(),
    }
}

fn random(r: usize, c: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[r, c], |_| rng.random_range(-1.0..1.0))
}

#[test]
fn recognition_emits_one_label_per_step() {
    let m = untrained(Task::Recognition, 30, 30, 1);
    let r = recognize(&m, &random(30, 38, 2), 5).unwrap();
    assert_eq!(r.labels.len(), 30);
    assert_eq!(r.probs.shape(), &[30, 16]);
    for i in 0..30 {
        assert!((r.probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(r.labels, r.probs.argmax_rows());
    assert_eq!(r, recognize(&m, &random(30, 38, 2), 5).unwrap());
}

#[test]
fn recognition_is_prefix_stable() {
    for seed in 0..5 {
        let m = untrained(Task::Recognition, 30, 12, seed);
        let (r, trace) = recognize_traced(&m.model, &random(12, 38, seed + 10), seed).unwrap();
        assert_eq!(trace.len(), 12);
        for (j, step) in trace.iter().enumerate() {
            assert_eq!(step.len(), j + 1);
            assert_eq!(&step[..], &r.labels[..=j]);
        }
    }
}

#[test]
fn wrong_task_is_rejected() {
    let m = untrained(Task::GesturePrediction, 10, 10, 1);
    assert!(matches!(
        recognize(&m, &random(10, 38, 1), 0),
        Err(crate::Error::Config(_))
    ));
    let r = untrained(Task::Recognition, 30, 10, 1);
    assert!(predict_gestures(&r, &random(10, 38, 1), &one_hot_rows(&[0; 10])).is_err());
}

#[test]
fn constant_input_recognizer_outputs_class_zero() {
    let k = Tensor::zeros(&[60, RAW_COLUMNS]);
    let trial = TrialRecord::new("Z", "Z1", 30, k, vec![0; 60])
        .unwrap()
        .select_arm(Arm::Psm)
        .unwrap();
    let frames = make_frames(
        &trial,
        Task::Recognition,
        &WindowSpec::new(10, 10).with_stride(5),
    )
    .unwrap();
    let mut m = untrained(Task::Recognition, 30, 10, 4);
    let cfg = TrainConfig {
        batch_size: 4,
        epochs: 10,
        warmup_steps: 10,
        ..TrainConfig::for_task(Task::Recognition)
    };
    train(&mut m.model, &frames, &cfg).unwrap();
    for seed in 0..3 {
        let r = recognize(&m, &Tensor::zeros(&[10, 38]), seed).unwrap();
        assert_eq!(r.labels, vec![0; 10]);
    }
}

#[test]
fn gesture_prediction_is_single_shot() {
    let m = untrained(Task::GesturePrediction, 10, 10, 3);
    let enc = random(10, 38, 7);
    let dec = one_hot_rows(&[1, 1, 2, 2, 2, 3, 3, 3, 3, 4]);
    let r = predict_gestures(&m, &enc, &dec).unwrap();
    assert_eq!(r.labels.len(), 10);
    for i in 0..10 {
        assert!((r.probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for j in 0..9 {
        let mut d2 = dec.clone();
        for i in j + 1..10 {
            d2.row_mut(i).fill(0.0);
            d2.row_mut(i)[15] = 1.0;
        }
        let r2 = predict_gestures(&m, &enc, &d2).unwrap();
        for i in 0..=j {
            for (a, b) in r.probs.row(i).iter().zip(r2.probs.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn trajectory_prediction_shape_and_determinism() {
    let m = untrained(Task::TrajectoryPrediction, 10, 10, 2);
    let enc = random(10, 54, 1);
    let dec = random(10, 22, 2);
    let a = predict_trajectory(&m, &enc, &dec).unwrap();
    assert_eq!(a.positions.shape(), &[10, 6]);
    assert_eq!(a, predict_trajectory(&m, &enc, &dec).unwrap());
    assert!(predict_trajectory(&m, &enc, &random(10, 21, 2)).is_err());
}

#[test]
fn card_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = untrained(Task::TrajectoryPrediction, 10, 10, 2);
    m.save(dir.path()).unwrap();
    let back = TrainedModel::load(dir.path()).unwrap();
    assert_eq!(back.card, m.card);
    assert_eq!(back.model.to_bytes(), m.model.to_bytes());
    let text = m.card.to_toml().unwrap().replace(CARD_FORMAT, "other/9");
    assert!(ModelCard::from_toml(&text).is_err());
}

/// Returns fixed labels, standing in for a perfect model.
struct Oracle {
    rate: u32,
    t: usize,
    current: Vec<usize>,
    future: Vec<usize>,
}

impl Stage for Oracle {
    fn rate_hz(&self) -> u32 {
        self.rate
    }
    fn t_obs(&self) -> usize {
        self.t
    }
}

impl Recognizer for Oracle {
    fn recognize(&self, _: &Tensor, _: u64) -> crate::Result<Vec<usize>> {
        Ok(self.current.clone())
    }
}

impl GesturePredictor for Oracle {
    fn predict_gestures(&self, _: &Tensor, _: &[usize]) -> crate::Result<Vec<usize>> {
        Ok(self.future.clone())
    }
}

#[test]
fn chain_with_oracles_matches_unchained() {
    let traj = untrained(Task::TrajectoryPrediction, 10, 10, 5);
    let oracle = Oracle {
        rate: 10,
        t: 10,
        current: vec![1, 1, 1, 2, 2, 2, 2, 3, 3, 3],
        future: vec![3, 3, 4, 4, 4, 4, 5, 5, 5, 5],
    };
    let chain = Chain::new(&oracle, &oracle, &traj).unwrap();
    let k = random(10, 38, 9);
    let out = chain.run(&k, 0).unwrap();
    let direct = traj
        .predict_positions(&k, &oracle.current, &oracle.future)
        .unwrap();
    assert_eq!(out.trajectory, direct);
    assert_eq!(out.current, oracle.current);
    assert_eq!(out.future, oracle.future);
}

#[test]
fn chain_rejects_rate_mismatch() {
    let rec = untrained(Task::Recognition, 30, 10, 1);
    let pred = untrained(Task::GesturePrediction, 10, 10, 1);
    let traj = untrained(Task::TrajectoryPrediction, 10, 10, 1);
    assert!(matches!(
        Chain::new(&rec, &pred, &traj),
        Err(crate::Error::Config(_))
    ));
    let rec10 = untrained(Task::Recognition, 10, 10, 1);
    let chain = Chain::new(&rec10, &pred, &traj).unwrap();
    let r = chain.run(&random(10, 38, 3), 1).unwrap();
    assert_eq!(r.current.len(), 10);
    assert_eq!(r.trajectory.shape(), &[10, 6]);
}
