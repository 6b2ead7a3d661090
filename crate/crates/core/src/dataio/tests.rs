use proptest::prelude::*;

use super::*;
use crate::numerics::Tensor;
use crate::task::{Arm, Task, N_GESTURES, RAW_COLUMNS};

fn trial(len: usize, labels: impl Fn(usize) -> u8) -> TrialRecord {
    let k = Tensor::from_fn(&[len, RAW_COLUMNS], |i| i as f64 * 0.001);
    TrialRecord::new("C", "C002", 30, k, (0..len).map(labels).collect())
        .unwrap()
        .select_arm(Arm::Psm)
        .unwrap()
}

#[test]
fn one_hot_basis() {
    for g in 0..N_GESTURES {
        let v = one_hot(g).unwrap();
        assert_eq!(v.data().iter().sum::<f64>(), 1.0);
        assert_eq!(v.data()[g], 1.0);
    }
    assert!(one_hot(16).is_err());
}

#[test]
fn frame_counts() {
    let t = trial(40, |i| (i % 5) as u8);
    let f = make_frames(&t, Task::Recognition, &WindowSpec::new(30, 30)).unwrap();
    assert_eq!(f.len(), 11);
    let t = trial(25, |_| 1);
    for task in [Task::GesturePrediction, Task::TrajectoryPrediction] {
        assert_eq!(
            make_frames(&t, task, &WindowSpec::new(10, 10))
                .unwrap()
                .len(),
            6
        );
    }
    let short = trial(5, |_| 0);
    assert!(
        make_frames(&short, Task::Recognition, &WindowSpec::new(10, 10))
            .unwrap()
            .is_empty()
    );
}

#[test]
fn prediction_windows_must_match() {
    let t = trial(40, |_| 0);
    assert!(make_frames(&t, Task::GesturePrediction, &WindowSpec::new(10, 5)).is_err());
    assert!(make_frames(&t, Task::Recognition, &WindowSpec::new(10, 5)).is_ok());
}

#[test]
fn raw_trials_are_rejected() {
    let k = Tensor::zeros(&[20, RAW_COLUMNS]);
    let raw = TrialRecord::new("C", "x", 30, k, vec![0; 20]).unwrap();
    assert!(make_frames(&raw, Task::Recognition, &WindowSpec::new(5, 5)).is_err());
}

#[test]
fn recognition_decoder_is_shifted_target() {
    let t = trial(20, |i| (i / 2) as u8 % 16);
    let f = &make_frames(&t, Task::Recognition, &WindowSpec::new(6, 6)).unwrap()[3];
    assert_eq!(f.enc_in.shape(), &[6, 38]);
    assert!(f.dec_in.row(0).iter().all(|&v| v == 0.0));
    for j in 1..6 {
        assert_eq!(f.dec_in.row(j), f.target.row(j - 1));
    }
    assert_eq!(f.target_labels(), vec![1, 2, 2, 3, 3, 4]);
}

#[test]
fn uniform_shift_in_is_seeded() {
    let t = trial(20, |_| 2);
    let mut spec = WindowSpec::new(6, 6);
    spec.shift_in = ShiftIn::Uniform { seed: 4 };
    let a = make_frames(&t, Task::Recognition, &spec).unwrap();
    let b = make_frames(&t, Task::Recognition, &spec).unwrap();
    assert_eq!(a, b);
    assert!(a[0].dec_in.row(0).iter().all(|&v| (0.0..1.0).contains(&v)));
    assert_ne!(a[0].dec_in.row(0), a[1].dec_in.row(0));
}

#[test]
fn gesture_prediction_layout() {
    let t = trial(30, |i| (i % 16) as u8);
    let f = &make_frames(&t, Task::GesturePrediction, &WindowSpec::new(5, 5)).unwrap()[2];
    assert_eq!(f.dec_in.argmax_rows(), vec![2, 3, 4, 5, 6]);
    assert_eq!(f.target_labels(), vec![7, 8, 9, 10, 11]);
}

#[test]
fn trajectory_layout() {
    let t = trial(30, |i| (i % 16) as u8);
    let f = &make_frames(&t, Task::TrajectoryPrediction, &WindowSpec::new(4, 4)).unwrap()[1];
    assert_eq!(f.enc_in.shape(), &[4, 54]);
    assert_eq!(f.dec_in.shape(), &[4, 22]);
    assert_eq!(f.target.shape(), &[4, 6]);
    let p = t.positions().unwrap();
    for j in 0..4 {
        assert_eq!(&f.dec_in.row(j)[..6], p.row(1 + j));
        assert_eq!(f.dec_in.row(j)[6 + (1 + 4 + j) % 16], 1.0);
        assert_eq!(f.target.row(j), p.row(1 + 4 + j));
        assert_eq!(&f.enc_in.row(j)[..38], t.kinematics.row(1 + j));
        assert_eq!(f.enc_in.row(j)[38 + (1 + j) % 16], 1.0);
    }
}

#[test]
fn frame_set_matches_eager_frames() {
    let a = trial(30, |i| (i / 4) as u8 % 16);
    let mut b = trial(22, |_| 3);
    b.subject_id = "D".into();
    let spec = WindowSpec::new(5, 5).with_stride(2);
    let set = FrameSet::new(
        vec![a.clone(), b.clone()],
        Task::GesturePrediction,
        spec.clone(),
    )
    .unwrap();
    let mut eager = make_frames(&a, Task::GesturePrediction, &spec).unwrap();
    eager.extend(make_frames(&b, Task::GesturePrediction, &spec).unwrap());
    assert_eq!(set.len(), eager.len());
    for (i, f) in eager.iter().enumerate() {
        assert_eq!(&*set.frame(i), f);
        assert_eq!(set.origin(i), f.origin);
    }
    assert_eq!(set.subjects(), vec!["C", "D"]);
}

fn naive_starts(len: usize, span: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 0;
    while t + span <= len {
        out.push(t);
        t += stride;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn counts_match_enumeration(len in 0usize..80, to in 1usize..20, stride in 1usize..5, task_i in 0usize..3) {
        let task = Task::ALL[task_i];
        let spec = WindowSpec::new(to, to).with_stride(stride);
        let t = trial(len, |i| (i % 16) as u8);
        let frames = make_frames(&t, task, &spec).unwrap();
        let want = naive_starts(len, spec.span(task), stride);
        prop_assert_eq!(frames.len(), want.len());
        prop_assert_eq!(spec.count(task, len), want.len());
        for (f, s) in frames.iter().zip(&want) {
            prop_assert_eq!(f.origin.start, *s);
            prop_assert_eq!(&f.origin.subject, &t.subject_id);
            prop_assert!(s + spec.span(task) <= len);
        }
    }

    #[test]
    fn overlapping_recognition_frames_reassemble(runs in prop::collection::vec((0u8..16, 3usize..12), 1..8), to in 1usize..8) {
        let labels: Vec<u8> = runs.iter().flat_map(|&(g, n)| std::iter::repeat_n(g, n)).collect();
        let len = labels.len();
        let t = trial(len, |i| labels[i]);
        let frames = make_frames(&t, Task::Recognition, &WindowSpec::new(to, to)).unwrap();
        let mut votes = vec![[0usize; 16]; len];
        for f in &frames {
            for (j, g) in f.target_labels().into_iter().enumerate() {
                votes[f.origin.start + j][g] += 1;
            }
        }
        for (i, v) in votes.iter().enumerate() {
            if v.iter().sum::<usize>() == 0 {
                continue;
            }
            let best = (0..16).max_by_key(|&g| (v[g], std::cmp::Reverse(g))).unwrap();
            prop_assert_eq!(best as u8, labels[i]);
        }
    }

    #[test]
    fn kinematics_round_trip(vals in prop::collection::vec(-1e3f64..1e3, RAW_COLUMNS * 2)) {
        let k = Tensor::new(vec![2, RAW_COLUMNS], vals).unwrap();
        let back = parse_kinematics_str(&format_kinematics(&k), std::path::Path::new("-")).unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn transcript_round_trip(labels in prop::collection::vec(0u8..16, 0..60)) {
        let text = format_transcript(&labels);
        let back = parse_transcript_str(&text, labels.len(), std::path::Path::new("-")).unwrap();
        prop_assert_eq!(back, labels);
    }
}
