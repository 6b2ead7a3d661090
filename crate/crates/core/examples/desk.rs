//! Leave-one-user-out run on a generated dataset.
//!
//! ```text
//! cargo run --release --example desk -- task=recognition epochs=15 stride=10
//! ```
//!
//! Keys: task, epochs, stride, eval_stride, warmup, batch, dropout, seed,
//! noise, subject_sigma.

use std::collections::HashMap;
use std::time::Instant;

use kintrans::dataio::WindowSpec;
use kintrans::evaluation::{louo, Experiment};
use kintrans::synthgen::{generate, SynthConfig, Transitions};
use kintrans::Task;

fn main() -> kintrans::Result<()> {
    let args: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| {
            a.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();
    let get = |k: &str, d: &str| args.get(k).cloned().unwrap_or_else(|| d.to_string());
    let task: Task = get("task", "recognition").parse()?;
    let (rate, t) = if task == Task::Recognition {
        (30, 30)
    } else {
        (10, 10)
    };
    let synth = SynthConfig {
        transitions: if task == Task::Recognition {
            Transitions::Uniform
        } else {
            Transitions::Cyclic
        },
        dwell: if task == Task::Recognition {
            (45, 90)
        } else {
            (54, 66)
        },
        noise_sigma: get("noise", "0.05").parse().unwrap(),
        subject_sigma: get("subject_sigma", "0.1").parse().unwrap(),
        seed: get("seed", "0").parse().unwrap(),
        ..SynthConfig::default()
    };
    let raw = generate(&synth)?;
    let mut exp = Experiment::for_task(task, rate, t, t);
    exp.window = WindowSpec::new(t, t).with_stride(get("stride", "10").parse().unwrap());
    exp.eval_stride = get("eval_stride", "10").parse().unwrap();
    exp.train.epochs = get("epochs", "15").parse().unwrap();
    exp.train.warmup_steps = get("warmup", "2000").parse().unwrap();
    exp.train.batch_size = get("batch", "64").parse().unwrap();
    exp.model.dropout_p = get("dropout", "0.1").parse().unwrap();
    exp.seed = synth.seed;
    let t0 = Instant::now();
    let out = louo(&raw, &exp)?;
    print!("{}", out.report.to_table());
    for f in &out.folds {
        println!(
            "{}: steps {} final loss {:.4}",
            f.subject,
            f.loss.steps.len(),
            f.loss.final_epoch_loss().unwrap_or(f64::NAN)
        );
    }
    if let Some(m) = out.report.aggregate.trajectory() {
        println!(
            "d MAE {:.3} {:.3} mm, displacement {:.3} {:.3} mm",
            m.mae[3], m.mae[7], m.displacement[0], m.displacement[1]
        );
    }
    println!("{:.1} s", t0.elapsed().as_secs_f64());
    Ok(())
}
