use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::{Graph, Tensor};

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(&[rows, cols], |_| rng.random_range(-1.0..1.0))
}

fn no_dropout(mut c: ModelConfig) -> ModelConfig {
    c.dropout_p = 0.0;
    c
}

#[test]
fn recognition_output_shape() {
    let model = TransformerModel::new(ModelConfig::recognition()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = model
        .predict(&random(&mut rng, 30, 38), &random(&mut rng, 30, 16))
        .unwrap();
    assert_eq!(out.shape(), &[30, 16]);
}

#[test]
fn trajectory_output_shape() {
    let model = TransformerModel::new(ModelConfig::trajectory_prediction()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = model
        .predict(&random(&mut rng, 10, 54), &random(&mut rng, 10, 22))
        .unwrap();
    assert_eq!(out.shape(), &[10, 6]);
}

#[test]
fn encoder_and_decoder_lengths_may_differ() {
    let model = TransformerModel::new(ModelConfig::gesture_prediction()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = model
        .predict(&random(&mut rng, 12, 38), &random(&mut rng, 5, 16))
        .unwrap();
    assert_eq!(out.shape(), &[5, 16]);
}

#[test]
fn shape_errors_name_the_layer() {
    let model = TransformerModel::new(ModelConfig::recognition()).unwrap();
    let err = model
        .predict(&Tensor::zeros(&[30, 37]), &Tensor::zeros(&[30, 16]))
        .unwrap_err()
        .to_string();
    assert!(err.contains("encoder input"), "{err}");
    let err = model
        .predict(&Tensor::zeros(&[30, 38]), &Tensor::zeros(&[30, 22]))
        .unwrap_err()
        .to_string();
    assert!(err.contains("decoder input"), "{err}");
    let mut c = ModelConfig::recognition();
    c.max_len = 8;
    let model = TransformerModel::new(c).unwrap();
    assert!(model
        .predict(&Tensor::zeros(&[9, 38]), &Tensor::zeros(&[3, 16]))
        .is_err());
}

#[test]
fn zeroing_last_decoder_row_keeps_earlier_rows() {
    let model = TransformerModel::new(no_dropout(ModelConfig::recognition())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let enc = random(&mut rng, 30, 38);
    let dec = random(&mut rng, 30, 16);
    let base = model.predict(&enc, &dec).unwrap();
    let mut zeroed = dec.clone();
    zeroed.row_mut(29).fill(0.0);
    let out = model.predict(&enc, &zeroed).unwrap();
    for i in 0..29 {
        assert_eq!(base.row(i), out.row(i));
    }
    assert_ne!(base.row(29), out.row(29));
}

#[test]
fn parameter_counts_for_reference_configs() {
    // Hand-evaluated from the formula documented on `parameter_count`.
    let cases = [
        (ModelConfig::recognition(), 23_118),
        (ModelConfig::gesture_prediction(), 89_784),
        (ModelConfig::trajectory_prediction(), 45_204),
    ];
    for (cfg, want) in cases {
        assert_eq!(cfg.parameter_count(), want);
        let model = TransformerModel::new(cfg).unwrap();
        assert_eq!(model.params().num_scalars(), want);
    }
}

#[test]
fn checkpoint_round_trip_preserves_outputs_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let mut cfg = no_dropout(ModelConfig::trajectory_prediction());
    cfg.seed = 17;
    let model = TransformerModel::new(cfg.clone()).unwrap();
    model.save(&path).unwrap();

    let mut other = cfg.clone();
    other.seed = 18;
    let reloaded = TransformerModel::load(cfg.clone(), &path).unwrap();
    let fresh = TransformerModel::new(other).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let enc = random(&mut rng, 10, 54);
    let dec = random(&mut rng, 10, 22);
    let a = model.predict(&enc, &dec).unwrap();
    let b = reloaded.predict(&enc, &dec).unwrap();
    assert!(a
        .data()
        .iter()
        .zip(b.data())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, fresh.predict(&enc, &dec).unwrap());
    assert_eq!(model.to_bytes(), reloaded.to_bytes());
}

#[test]
fn train_mode_dropout_is_seeded() {
    let model = TransformerModel::new(ModelConfig::recognition()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let enc = random(&mut rng, 8, 38);
    let dec = random(&mut rng, 8, 16);
    let run = |mode| {
        let mut g = Graph::with_params(model.params());
        let out = model.forward(&mut g, &enc, &dec, mode).unwrap();
        g.value(out).clone()
    };
    let a = run(ForwardMode::Train { seed: 1 });
    assert_eq!(a, run(ForwardMode::Train { seed: 1 }));
    assert_ne!(a, run(ForwardMode::Train { seed: 2 }));
    assert_eq!(run(ForwardMode::Eval), run(ForwardMode::Eval));
    assert_ne!(a, run(ForwardMode::Eval));
}

#[test]
fn same_seed_same_weights() {
    let a = TransformerModel::new(ModelConfig::gesture_prediction()).unwrap();
    let b = TransformerModel::new(ModelConfig::gesture_prediction()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn encode_then_decode_matches_forward() {
    let model = TransformerModel::new(no_dropout(ModelConfig::recognition())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let enc = random(&mut rng, 6, 38);
    let dec = random(&mut rng, 6, 16);
    let mut g = Graph::with_params(model.params());
    let mem = model.encode(&mut g, &enc, ForwardMode::Eval).unwrap();
    let out = model.decode(&mut g, mem, &dec, ForwardMode::Eval).unwrap();
    assert_eq!(g.value(out), &model.predict(&enc, &dec).unwrap());
}
