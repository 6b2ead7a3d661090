use kintrans::dataio::{Manifest, WindowSpec};
use kintrans::evaluation::{louo, Experiment};
use kintrans::inference::{predictions_tsv, TrainedModel};
use kintrans::synthgen::{write_dataset, SynthConfig, Transitions};
use kintrans::{Exec, Task};

fn synth() -> SynthConfig {
    SynthConfig {
        n_subjects: 3,
        trials_per_subject: 1,
        length: 240,
        rate_hz: 30,
        n_classes: 4,
        transitions: Transitions::Cyclic,
        dwell: (20, 40),
        seed: 9,
        ..SynthConfig::default()
    }
}

fn quick(task: Task) -> Experiment {
    let mut exp = Experiment::for_task(task, 10, 5, 5);
    exp.window = WindowSpec::new(5, 5).with_stride(3);
    exp.eval_stride = 3;
    exp.train.epochs = 1;
    exp.train.batch_size = 16;
    exp
}

#[test]
fn dataset_on_disk_trains_saves_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&synth(), &data).unwrap();
    let raw = Manifest::open(&data)
        .unwrap()
        .load_trials(Exec::default())
        .unwrap();
    assert_eq!(raw.len(), 3);

    for task in Task::ALL {
        let exp = quick(task);
        let out = louo(&raw, &exp).unwrap();
        assert_eq!(out.folds.len(), 3);
        let rows_per_fold = if task.is_gesture() { 1 } else { 2 };
        assert_eq!(
            out.report.to_tsv().lines().count(),
            1 + rows_per_fold * (3 + 1)
        );

        let fold = &out.folds[0];
        let saved = dir.path().join(format!("{task}"));
        fold.model.save(&saved).unwrap();
        let loaded = TrainedModel::load(&saved).unwrap();
        assert_eq!(loaded.model.to_bytes(), fold.model.model.to_bytes());
        assert_eq!(loaded.card, fold.model.card);

        let held_out: Vec<_> = exp
            .prepare(&raw)
            .unwrap()
            .into_iter()
            .filter(|t| t.subject_id == fold.subject)
            .collect();
        let (again, metrics) = exp.evaluate(&loaded, &held_out, &fold.seeds).unwrap();
        assert_eq!(predictions_tsv(&again), predictions_tsv(&fold.predictions));
        assert_eq!(metrics, fold.metrics);
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&synth(), &data).unwrap();
    let raw = Manifest::open(&data)
        .unwrap()
        .load_trials(Exec::Sequential)
        .unwrap();
    let run = |exec| {
        let mut exp = quick(Task::GesturePrediction);
        exp.train.exec = exec;
        let out = louo(&raw, &exp).unwrap();
        let ckpts: Vec<_> = out.folds.iter().map(|f| f.model.model.to_bytes()).collect();
        (ckpts, out.report.to_tsv())
    };
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}
