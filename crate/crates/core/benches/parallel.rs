//! Sequential vs rayon execution of the per-frame hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kintrans::dataio::{TrialRecord, WindowSpec};
use kintrans::evaluation::{Experiment, RunSeeds};
use kintrans::inference::infer_frames;
use kintrans::synthgen::{generate, SynthConfig};
use kintrans::training::batch_gradients;
use kintrans::transformer::TransformerModel;
use kintrans::{Exec, Task};

fn setup(task: Task) -> (Experiment, Vec<TrialRecord>) {
    let raw = generate(&SynthConfig {
        n_subjects: 2,
        trials_per_subject: 1,
        length: 900,
        ..SynthConfig::default()
    })
    .unwrap();
    let (rate, t) = if task == Task::Recognition {
        (30, 30)
    } else {
        (10, 10)
    };
    let mut exp = Experiment::for_task(task, rate, t, t);
    exp.window = WindowSpec::new(t, t).with_stride(4);
    exp.eval_stride = 20;
    exp.train.epochs = 1;
    let trials = exp.prepare(&raw).unwrap();
    (exp, trials)
}

fn gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);
    for task in Task::ALL {
        let (exp, trials) = setup(task);
        let (_, frames) = exp
            .training_frames(&trials, &RunSeeds::derive(0, 0))
            .unwrap();
        let model = TransformerModel::new(exp.model.clone()).unwrap();
        let batch: Vec<usize> = (0..64).collect();
        for exec in [Exec::Sequential, Exec::Parallel] {
            group.bench_with_input(
                BenchmarkId::new(task.to_string(), format!("{exec:?}")),
                &exec,
                |b, &exec| {
                    b.iter(|| batch_gradients(&model, &frames, &batch, Some(1), exec).unwrap())
                },
            );
        }
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let mut group = c.benchmark_group("infer_frames");
    group.sample_size(10);
    for task in Task::ALL {
        let (exp, trials) = setup(task);
        let (model, _) = exp.fit(&trials, &RunSeeds::derive(0, 0)).unwrap();
        let eval = exp.eval_frames(&trials, &model.card.standardizer).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            group.bench_with_input(
                BenchmarkId::new(task.to_string(), format!("{exec:?}")),
                &exec,
                |b, &exec| b.iter(|| infer_frames(&model, &eval, 7, exec).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, gradients, inference);
criterion_main!(benches);
