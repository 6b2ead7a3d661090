use std::fmt::Write as _;
use std::path::Path;

use kintrans::dataio::{
    prepare_trials, FrameSet, FrameSource, ShiftIn, WindowSpec, POSITION_COLUMNS,
};
use kintrans::evaluation::{gridsearch, louo, summarize, RunSeeds};
use kintrans::inference::{
    infer_frames, predictions_tsv, window_seed, Chain, FramePrediction, TrainedModel,
};
use kintrans::synthgen::write_dataset;
use kintrans::Task;

use crate::config::{Overrides, RunConfig};
use crate::output::{OutDir, RunManifest, SeedRecord, RUN_MANIFEST};
use crate::plot::{timeline_svg, timelines};
use crate::CliError;

pub struct Invocation<'a> {
    pub command: &'a str,
    pub config_path: &'a Path,
    pub config: RunConfig,
    pub flags: Overrides,
    pub overwrite: bool,
}

fn shift_in_seed(w: &WindowSpec) -> Option<u64> {
    match w.shift_in {
        ShiftIn::Uniform { seed } => Some(seed),
        ShiftIn::Zeros => None,
    }
}

fn label_offset(task: Task, window: &WindowSpec) -> usize {
    match task {
        Task::Recognition => 0,
        _ => window.t_obs,
    }
}

fn write_timelines(
    out: &OutDir,
    rel: &str,
    title: &str,
    preds: &[FramePrediction],
    task: Task,
    window: &WindowSpec,
) -> Result<(), CliError> {
    if task.is_gesture() {
        let lines = timelines(preds, label_offset(task, window));
        out.write(rel, timeline_svg(title, &lines))?;
    }
    Ok(())
}

impl Invocation<'_> {
    fn manifest(&self) -> RunManifest {
        RunManifest::new(self.command, self.config_path, self.config.seed())
    }

    pub fn run(&self) -> Result<(), CliError> {
        match self.command {
            "generate" => self.generate(),
            "train" => self.train(),
            "evaluate" => self.evaluate(),
            "infer" => self.infer(),
            "chain" => self.chain(),
            "gridsearch" => self.gridsearch(),
            other => Err(CliError::Usage(format!("unknown command {other}"))),
        }
    }

    fn generate(&self) -> Result<(), CliError> {
        let synth = self
            .config
            .synth
            .as_ref()
            .ok_or_else(|| CliError::Usage("generate needs a [synth] table".into()))?;
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let manifest = write_dataset(synth, &out.path(""))?;
        let mut run = self.manifest();
        run.seed = synth.seed;
        run.synth = Some(synth.clone());
        out.write_toml(RUN_MANIFEST, &run)?;
        println!(
            "wrote {} trials from {} subjects to {}",
            manifest.entries.len(),
            manifest.subjects().len(),
            out.path("").display()
        );
        Ok(())
    }

    fn train(&self) -> Result<(), CliError> {
        let exp = self.config.experiment()?;
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let (raw, source) = self.config.load_trials()?;
        let trials = exp.prepare(&raw)?;
        let seeds = RunSeeds::derive(exp.seed, 0);
        let (mut model, curve) = exp.fit(&trials, &seeds)?;
        model.card.provenance.dataset = source.clone();
        model.save(&out.path(""))?;
        out.write("loss.tsv", curve.to_tsv())?;
        let mut run = self.manifest();
        run.data = Some(source);
        run.seeds.push(SeedRecord::new(
            "train",
            &seeds,
            shift_in_seed(&model.card.window),
        ));
        run.experiment = Some(exp);
        out.write_toml(RUN_MANIFEST, &run)?;
        println!(
            "trained {} on {} frames in {} steps, final epoch loss {:.6}",
            model.task(),
            model.card.provenance.n_frames,
            model.card.provenance.optimizer_steps,
            model.card.provenance.final_epoch_loss
        );
        Ok(())
    }

    fn evaluate(&self) -> Result<(), CliError> {
        let exp = self.config.experiment()?;
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let (raw, source) = self.config.load_trials()?;
        let mut outcome = louo(&raw, &exp)?;
        let mut run = self.manifest();
        for fold in &mut outcome.folds {
            fold.model.card.provenance.dataset = source.clone();
            let dir = format!("folds/{}", fold.subject);
            fold.model.save(&out.path(&dir))?;
            out.write(format!("{dir}/loss.tsv"), fold.loss.to_tsv())?;
            out.write(
                format!("{dir}/predictions.tsv"),
                predictions_tsv(&fold.predictions),
            )?;
            write_timelines(
                &out,
                &format!("{dir}/timeline.svg"),
                &format!("{} held out: {}", exp.task, fold.subject),
                &fold.predictions,
                exp.task,
                &exp.window,
            )?;
            run.seeds.push(SeedRecord::new(
                format!("fold {}", fold.subject),
                &fold.seeds,
                shift_in_seed(&fold.model.card.window),
            ));
        }
        out.write("report.tsv", outcome.report.to_tsv())?;
        let table = outcome.report.to_table();
        out.write("report.txt", &table)?;
        run.data = Some(source);
        run.experiment = Some(exp);
        out.write_toml(RUN_MANIFEST, &run)?;
        print!("{table}");
        Ok(())
    }

    fn check_card(&self, model: &TrainedModel, what: &str) -> Result<(), CliError> {
        let card = &model.card;
        let f = &self.flags;
        let mismatch = |field: &str, want: String, have: String| {
            CliError::Usage(format!(
                "{what} was trained with {field} {have}, but {want} was requested"
            ))
        };
        if let Some(t) = f.task.or(self.config.task) {
            if t != card.task {
                return Err(mismatch("task", t.to_string(), card.task.to_string()));
            }
        }
        if let Some(a) = f.arm.or(self.config.arm) {
            if a != card.arm {
                return Err(mismatch("arm", a.to_string(), card.arm.to_string()));
            }
        }
        if let Some(r) = f.rate_hz.or(self.config.rate_hz) {
            if r != card.rate_hz {
                return Err(mismatch("rate", r.to_string(), card.rate_hz.to_string()));
            }
        }
        Ok(())
    }

    fn infer(&self) -> Result<(), CliError> {
        let spec =
            self.config.infer.as_ref().ok_or_else(|| {
                CliError::Usage("infer needs an [infer] table with `model`".into())
            })?;
        let model = TrainedModel::load(&spec.model)?;
        self.check_card(&model, "the model")?;
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let (raw, source) = self.config.load_trials()?;
        let card = &model.card;
        let trials = prepare_trials(&raw, card.arm, card.rate_hz)?;
        let z = trials
            .iter()
            .map(|t| card.standardizer.apply(t))
            .collect::<kintrans::Result<Vec<_>>>()?;
        let window = WindowSpec {
            stride: self.config.eval_stride.unwrap_or(1),
            ..card.window.clone()
        };
        let frames = FrameSet::new(z, card.task, window.clone())?;
        if frames.is_empty() {
            return Err(
                kintrans::Error::Data("no trial is long enough for one window".into()).into(),
            );
        }
        let seeds = RunSeeds::derive(self.config.seed(), 0);
        let preds = infer_frames(&model, &frames, seeds.infer, self.config.exec())?;
        let metrics = summarize(&preds)?;
        out.write("predictions.tsv", predictions_tsv(&preds))?;
        out.write_toml("metrics.toml", &metrics)?;
        let subjects: Vec<String> = frames.subjects().into_iter().map(String::from).collect();
        for s in &subjects {
            let mine: Vec<FramePrediction> = preds
                .iter()
                .filter(|p| &p.origin.subject == s)
                .cloned()
                .collect();
            write_timelines(
                &out,
                &format!("timelines/{s}.svg"),
                &format!("{} subject {s}", card.task),
                &mine,
                card.task,
                &window,
            )?;
        }
        let mut run = self.manifest();
        run.data = Some(source);
        run.seeds.push(SeedRecord::new("infer", &seeds, None));
        out.write_toml(RUN_MANIFEST, &run)?;
        match metrics.accuracy() {
            Some(a) => println!("{} frames, accuracy {:.2}%", preds.len(), 100.0 * a),
            None => {
                let t = metrics.trajectory().unwrap();
                println!(
                    "{} frames, d MAE {:.3} / {:.3} mm",
                    preds.len(),
                    t.mae[3],
                    t.mae[7]
                );
            }
        }
        Ok(())
    }

    fn chain(&self) -> Result<(), CliError> {
        let spec = self.config.chain.as_ref().ok_or_else(|| {
            CliError::Usage(
                "chain needs a [chain] table with recognizer, predictor and trajectory".into(),
            )
        })?;
        let rec = TrainedModel::load(&spec.recognizer)?;
        let pred = TrainedModel::load(&spec.predictor)?;
        let traj = TrainedModel::load(&spec.trajectory)?;
        rec.expect_task(Task::Recognition)?;
        pred.expect_task(Task::GesturePrediction)?;
        traj.expect_task(Task::TrajectoryPrediction)?;
        if rec.card.arm != pred.card.arm || rec.card.arm != traj.card.arm {
            return Err(
                kintrans::Error::Config("the three models use different arms".into()).into(),
            );
        }
        let chain = Chain::new(&rec, &pred, &traj)?;
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let (raw, source) = self.config.load_trials()?;
        let trials = prepare_trials(&raw, rec.card.arm, chain.rate_hz())?;
        let t_obs = chain.t_obs();
        let t_pred = pred.card.window.t_pred;
        let stride = self.config.eval_stride.unwrap_or(1);
        let seeds = RunSeeds::derive(self.config.seed(), 0);
        let mut windows = Vec::new();
        let mut origins = Vec::new();
        for (ti, t) in trials.iter().enumerate() {
            let mut start = 0;
            while start + t_obs + t_pred <= t.len() {
                windows.push(t.kinematics.rows_range(start, t_obs));
                origins.push((ti, start));
                start += stride;
            }
        }
        if windows.is_empty() {
            return Err(
                kintrans::Error::Data("no trial is long enough for one window".into()).into(),
            );
        }
        let window_seeds: Vec<u64> = origins
            .iter()
            .map(|&(ti, start)| {
                let t = &trials[ti];
                window_seed(
                    seeds.infer,
                    &kintrans::dataio::FrameOrigin {
                        subject: t.subject_id.clone(),
                        trial: t.trial_id.clone(),
                        start,
                    },
                )
            })
            .collect();
        let results = chain.run_all(&windows, &window_seeds, self.config.exec())?;
        let mut tsv = String::from(
            "subject\ttrial\tt\tstep\trecognized\ttrue_current\tpredicted\ttrue_future\tx1\ty1\tz1\tx2\ty2\tz2\ttrue_x1\ttrue_y1\ttrue_z1\ttrue_x2\ttrue_y2\ttrue_z2\n",
        );
        let (mut hit_now, mut hit_next, mut n_now, mut n_next) = (0usize, 0usize, 0usize, 0usize);
        for (&(ti, start), r) in origins.iter().zip(&results) {
            let t = &trials[ti];
            for k in 0..t_obs.max(t_pred) {
                let now = t.gestures[start + k] as usize;
                let next = t.gestures[start + t_obs + k] as usize;
                let cell = |v: Option<&usize>| v.map_or("-".to_string(), usize::to_string);
                write!(
                    tsv,
                    "{}\t{}\t{start}\t{k}\t{}\t{now}\t{}\t{next}",
                    t.subject_id,
                    t.trial_id,
                    cell(r.current.get(k)),
                    cell(r.future.get(k))
                )
                .unwrap();
                if let Some(&g) = r.current.get(k) {
                    hit_now += usize::from(g == now);
                    n_now += 1;
                }
                if let Some(&g) = r.future.get(k) {
                    hit_next += usize::from(g == next);
                    n_next += 1;
                }
                if k < r.trajectory.rows() {
                    for v in r.trajectory.row(k) {
                        write!(tsv, "\t{v:.6}").unwrap();
                    }
                    for &c in &POSITION_COLUMNS {
                        write!(tsv, "\t{:.6}", t.kinematics.at(start + t_obs + k, c)).unwrap();
                    }
                } else {
                    tsv.push_str(&"\t-".repeat(12));
                }
                tsv.push('\n');
            }
        }
        out.write("chain.tsv", tsv)?;
        let mut run = self.manifest();
        run.data = Some(source);
        run.seeds.push(SeedRecord::new("chain", &seeds, None));
        out.write_toml(RUN_MANIFEST, &run)?;
        println!(
            "{} windows: recognition {:.2}%, chained prediction {:.2}%",
            results.len(),
            100.0 * hit_now as f64 / n_now.max(1) as f64,
            100.0 * hit_next as f64 / n_next.max(1) as f64
        );
        Ok(())
    }

    fn gridsearch(&self) -> Result<(), CliError> {
        let grid = self
            .config
            .grid
            .as_ref()
            .ok_or_else(|| CliError::Usage("gridsearch needs a [grid] table".into()))?;
        let exp = self.config.experiment()?;
        let cells = grid.expand(&exp.model)?.len();
        let out = OutDir::prepare(self.config.out()?, self.overwrite)?;
        let (raw, source) = self.config.load_trials()?;
        let report = gridsearch(&raw, &exp, grid)?;
        let tsv = report.to_tsv();
        out.write("grid.tsv", &tsv)?;
        let mut run = self.manifest();
        run.data = Some(source);
        run.seeds.push(SeedRecord::new(
            "split",
            &RunSeeds::derive(exp.seed, u64::MAX),
            None,
        ));
        for k in 0..cells {
            run.seeds.push(SeedRecord::new(
                format!("cell {k}"),
                &RunSeeds::derive(exp.seed, k as u64),
                None,
            ));
        }
        run.experiment = Some(exp);
        out.write_toml(RUN_MANIFEST, &run)?;
        print!("{tsv}");
        Ok(())
    }
}
