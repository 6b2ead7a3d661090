//! Run configuration files.
//!
//! ```toml
//! schema = "kintrans-run/1"
//! task = "recognition"
//! rate_hz = 30
//! t_obs_s = 1.0
//! t_pred_s = 1.0
//! seed = 7
//! out = "runs/recognition"
//!
//! [data]
//! path = "data/synthetic"
//!
//! [model]
//! dropout_p = 0.1
//!
//! [train]
//! epochs = 15
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! When `[data]` is absent the `[synth]` table is generated in memory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kintrans::dataio::{Manifest, ShiftIn, TrialRecord, WindowSpec};
use kintrans::evaluation::{Experiment, GridSpec};
use kintrans::synthgen::{generate, SynthConfig};
use kintrans::training::AdamConfig;
use kintrans::{Arm, Exec, Task};

use crate::CliError;

pub const SCHEMA: &str = "kintrans-run/1";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub n_layers: Option<usize>,
    pub heads_enc: Option<usize>,
    pub heads_dec: Option<usize>,
    pub d_ff: Option<usize>,
    pub dropout_p: Option<f64>,
    pub max_len: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub warmup_steps: Option<usize>,
    pub grad_clip: Option<f64>,
    pub shuffle: Option<bool>,
    pub adam: Option<AdamConfig>,
    /// Spread per-frame work over threads (results are identical either way).
    pub parallel: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest file, directory with `manifest.tsv`, or JIGSAWS directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    /// Directory holding `model.ckpt` and `model-card.toml`.
    pub model: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub recognizer: PathBuf,
    pub predictor: PathBuf,
    pub trajectory: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    /// When present, must name the command being run.
    pub command: Option<String>,
    pub task: Option<Task>,
    pub arm: Option<Arm>,
    pub rate_hz: Option<u32>,
    pub t_obs_s: Option<f64>,
    pub t_pred_s: Option<f64>,
    /// Stride between training windows, in samples.
    pub stride: Option<usize>,
    /// Stride between evaluation windows, in samples.
    pub eval_stride: Option<usize>,
    pub shift_in: Option<ShiftIn>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<DataConfig>,
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
    pub grid: Option<GridSpec>,
    pub infer: Option<InferConfig>,
    pub chain: Option<ChainConfig>,
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub task: Option<Task>,
    pub arm: Option<Arm>,
    pub rate_hz: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `rate × seconds` as a whole number of samples.
pub fn samples(rate_hz: u32, seconds: f64, what: &str) -> Result<usize, CliError> {
    let x = rate_hz as f64 * seconds;
    let n = x.round();
    if !(seconds > 0.0) || (x - n).abs() > 1e-9 || n < 1.0 {
        return Err(usage(format!(
            "{what} = {seconds} s at {rate_hz} Hz is not a whole positive number of samples"
        )));
    }
    Ok(n as usize)
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| usage(format!("{}: {e}", origin.display())))?;
        if cfg.schema != SCHEMA {
            return Err(usage(format!(
                "{}: schema {:?} is not supported (expected {SCHEMA:?})",
                origin.display(),
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    /// Reads `path`, resolves relative paths and applies `flags`.
    pub fn load(path: &Path, command: &str, flags: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, path)?;
        if let Some(c) = &cfg.command {
            if c != command {
                return Err(usage(format!(
                    "config is for `{c}`, but `{command}` was requested"
                )));
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut cfg.data {
            rebase(&mut d.path);
        }
        if let Some(i) = &mut cfg.infer {
            rebase(&mut i.model);
        }
        if let Some(c) = &mut cfg.chain {
            rebase(&mut c.recognizer);
            rebase(&mut c.predictor);
            rebase(&mut c.trajectory);
        }
        if let Some(o) = &mut cfg.out {
            rebase(o);
        }
        cfg.task = flags.task.or(cfg.task);
        cfg.arm = flags.arm.or(cfg.arm);
        cfg.rate_hz = flags.rate_hz.or(cfg.rate_hz);
        cfg.seed = flags.seed.or(cfg.seed);
        if let Some(o) = &flags.out {
            cfg.out = Some(o.clone());
        }
        if let (Some(seed), Some(s)) = (flags.seed, &mut cfg.synth) {
            s.seed = seed;
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| usage("no output directory (set `out` or pass --out)"))
    }

    pub fn task(&self) -> Result<Task, CliError> {
        self.task
            .ok_or_else(|| usage("no task (set `task` or pass --task)"))
    }

    pub fn exec(&self) -> Exec {
        match self.train.parallel {
            Some(false) => Exec::Sequential,
            _ => Exec::default(),
        }
    }

    /// The experiment described by this file, with task defaults filled in.
    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let task = self.task()?;
        let rate = self.rate_hz.unwrap_or(match task {
            Task::Recognition => 30,
            _ => 10,
        });
        let t_obs = samples(rate, self.t_obs_s.unwrap_or(1.0), "t_obs_s")?;
        let t_pred = samples(rate, self.t_pred_s.unwrap_or(1.0), "t_pred_s")?;
        let mut exp = Experiment::for_task(task, rate, t_obs, t_pred);
        exp.arm = self.arm.unwrap_or_default();
        exp.seed = self.seed();
        exp.window = WindowSpec {
            stride: self.stride.unwrap_or(1),
            shift_in: self.shift_in.clone().unwrap_or_default(),
            ..WindowSpec::new(t_obs, t_pred)
        };
        exp.eval_stride = self.eval_stride.unwrap_or(1);

        let m = &self.model;
        let model = &mut exp.model;
        model.n_layers = m.n_layers.unwrap_or(model.n_layers);
        model.heads_enc = m.heads_enc.unwrap_or(model.heads_enc);
        model.heads_dec = m.heads_dec.unwrap_or(model.heads_dec);
        model.d_ff = m.d_ff.or(model.d_ff);
        model.dropout_p = m.dropout_p.unwrap_or(model.dropout_p);
        model.max_len = m.max_len.unwrap_or(model.max_len);

        let t = &self.train;
        let train = &mut exp.train;
        train.batch_size = t.batch_size.unwrap_or(train.batch_size);
        train.epochs = t.epochs.unwrap_or(train.epochs);
        train.warmup_steps = t.warmup_steps.unwrap_or(train.warmup_steps);
        train.grad_clip = t.grad_clip.or(train.grad_clip);
        train.shuffle = t.shuffle.unwrap_or(train.shuffle);
        train.adam = t.adam.clone().unwrap_or_else(|| train.adam.clone());
        train.exec = self.exec();

        exp.validate()?;
        Ok(exp)
    }

    /// Raw trials from `[data]` or, failing that, generated from `[synth]`.
    pub fn load_trials(&self) -> Result<(Vec<TrialRecord>, String), CliError> {
        if let Some(d) = &self.data {
            let manifest = Manifest::open(&d.path)?;
            let trials = manifest.load_trials(self.exec())?;
            return Ok((trials, d.path.display().to_string()));
        }
        if let Some(s) = &self.synth {
            let trials = generate(s)?;
            return Ok((trials, format!("synthetic (seed {})", s.seed)));
        }
        Err(usage("no data source (set [data] path or a [synth] table)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(extra: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(
            &format!("schema = \"{SCHEMA}\"\n{extra}"),
            Path::new("run.toml"),
        )
    }

    #[test]
    fn seconds_must_give_whole_samples() {
        assert_eq!(samples(30, 1.0, "t").unwrap(), 30);
        assert_eq!(samples(10, 0.5, "t").unwrap(), 5);
        assert!(samples(10, 0.25, "t").is_err());
        assert!(samples(30, 0.0, "t").is_err());
    }

    #[test]
    fn task_defaults_fill_the_experiment() {
        let e = parse("task = \"gesture-prediction\"")
            .unwrap()
            .experiment()
            .unwrap();
        assert_eq!(e.rate_hz, 10);
        assert_eq!((e.window.t_obs, e.window.t_pred), (10, 10));
        assert_eq!(
            (e.model.n_layers, e.model.heads_enc, e.model.heads_dec),
            (4, 1, 4)
        );
    }

    #[test]
    fn divisibility_is_checked() {
        let err = parse("task = \"trajectory-prediction\"\n[model]\nheads_dec = 7")
            .unwrap()
            .experiment()
            .unwrap_err();
        assert!(err.to_string().contains("d_dec = 22"), "{err}");
    }

    #[test]
    fn schema_and_unknown_fields_are_rejected() {
        assert!(RunConfig::parse("schema = \"other\"", Path::new("r")).is_err());
        assert!(parse("bogus = 1").is_err());
    }
}
