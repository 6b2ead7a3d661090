//! Deterministic synthetic trials in the on-disk kinematics/transcript format.
//!
//! Labels follow a semi-Markov chain: a class is held for a dwell drawn
//! uniformly from `dwell`, then the next class is drawn from the transition
//! row. Per arm block, positions relax toward a class-specific target with a
//! class-specific oscillation on top, and the velocity channels are the
//! finite-difference derivative of the clean positions. Rotation, angular
//! velocity and gripper channels carry class-specific offsets and sinusoids
//! whose phase restarts at each segment onset. Every subject gets a constant
//! per-channel offset, and every sample gets Gaussian noise.
//!
//! Both `noise_sigma` and `subject_sigma` are relative to each channel
//! group's typical amplitude ([`CHANNEL_SCALE`]).

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{format_kinematics, format_transcript, Manifest, ManifestEntry, TrialRecord};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Exec};
use crate::numerics::Tensor;
use crate::task::{BLOCK_FEATURES, N_GESTURES, RAW_COLUMNS};

/// Typical amplitude of each of the 19 block features: position (m),
/// rotation entries, linear velocity (m/s), angular velocity (rad/s),
/// gripper angle (rad).
pub const CHANNEL_SCALE: [f64; BLOCK_FEATURES] = [
    0.01, 0.01, 0.01, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.02, 0.02, 0.02, 0.5, 0.5, 0.5,
    0.3,
];

/// Rest position of each arm block (MTM left/right, PSM left/right) in meters.
const WORKSPACE: [[f64; 3]; 4] = [
    [-0.08, 0.03, -0.05],
    [0.08, 0.03, -0.05],
    [-0.06, 0.05, -0.12],
    [0.06, 0.05, -0.12],
];

const TAG_CLASSES: u64 = 0xc1a5;
const TAG_SUBJECT: u64 = 0x5b1e;
const TAG_LABELS: u64 = 0x1abe;
const TAG_NOISE: u64 = 0x0015e;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Transitions {
    /// Every other class equally likely.
    Uniform,
    /// `c → c + 1 (mod n)`.
    Cyclic,
    /// Explicit row-stochastic matrix.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    /// Samples per trial.
    pub length: usize,
    pub rate_hz: u32,
    /// Classes `0..n_classes` are used as gesture labels.
    pub n_classes: usize,
    pub transitions: Transitions,
    /// Inclusive dwell range in samples.
    pub dwell: (usize, usize),
    pub noise_sigma: f64,
    pub subject_sigma: f64,
    /// Position relaxation time constant in seconds.
    #[serde(default = "default_tau")]
    pub tau_s: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tau() -> f64 {
    0.5
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 4,
            trials_per_subject: 3,
            length: 3000,
            rate_hz: 30,
            n_classes: 8,
            transitions: Transitions::Uniform,
            dwell: (45, 90),
            noise_sigma: 0.05,
            subject_sigma: 0.1,
            tau_s: default_tau(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_classes;
        match &self.transitions {
            Transitions::Uniform => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if n == 1 {
                                1.0
                            } else if i == j {
                                0.0
                            } else {
                                1.0 / (n - 1) as f64
                            }
                        })
                        .collect()
                })
                .collect(),
            Transitions::Cyclic => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| f64::from(u8::from(j == (i + 1) % n)))
                        .collect()
                })
                .collect(),
            Transitions::Matrix { rows } => rows.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_subjects == 0 || self.trials_per_subject == 0 || self.length == 0 {
            return bad("n_subjects, trials_per_subject and length must be positive".into());
        }
        if self.rate_hz == 0 {
            return bad("rate_hz must be positive".into());
        }
        if self.n_classes == 0 || self.n_classes > N_GESTURES {
            return bad(format!("n_classes must be in 1..={N_GESTURES}"));
        }
        if self.dwell.0 < 1 || self.dwell.1 < self.dwell.0 {
            return bad(format!("invalid dwell range {:?}", self.dwell));
        }
        if !(self.noise_sigma >= 0.0 && self.subject_sigma >= 0.0 && self.tau_s > 0.0) {
            return bad("sigmas must be non-negative and tau_s positive".into());
        }
        let m = self.matrix();
        if m.len() != self.n_classes || m.iter().any(|r| r.len() != self.n_classes) {
            return bad(format!(
                "transition matrix must be {0} × {0}",
                self.n_classes
            ));
        }
        for (i, row) in m.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return bad(format!("transition row {i} has entries outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return bad(format!("transition row {i} sums to {s}, not 1"));
            }
        }
        Ok(())
    }

    pub fn subject_ids(&self) -> Vec<String> {
        (0..self.n_subjects)
            .map(|i| {
                if self.n_subjects <= 25 {
                    char::from(b'B' + i as u8).to_string()
                } else {
                    format!("S{:03}", i + 1)
                }
            })
            .collect()
    }
}

/// Stationary distribution of a row-stochastic matrix by power iteration
/// (averaged, so periodic chains converge too).
pub fn stationary_distribution(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut avg = vec![0.0; n];
    let iters = 20_000;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += p[i] * m[i][j];
            }
        }
        p = next;
        avg.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
    }
    avg.iter().map(|a| a / iters as f64).collect()
}

/// Class-specific waveform parameters, shared by all subjects.
struct ClassBank {
    /// `[class][block][axis]` position targets.
    targets: Vec<[[f64; 3]; 4]>,
    /// `[class][channel]` offset of the non-position channels (in units of the channel scale).
    offsets: Vec<[f64; RAW_COLUMNS]>,
    /// `[class][channel]` phase.
    phases: Vec<[f64; RAW_COLUMNS]>,
    /// Oscillation frequency per class in Hz.
    freq: Vec<f64>,
}

impl ClassBank {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_CLASSES));
        let mut targets = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        let mut freq = Vec::with_capacity(n);
        for c in 0..n {
            let mut t = [[0.0; 3]; 4];
            for (b, rest) in t.iter_mut().zip(&WORKSPACE) {
                for (v, r) in b.iter_mut().zip(rest) {
                    *v = r + rng.random_range(-0.04..0.04);
                }
            }
            targets.push(t);
            let mut o = [0.0; RAW_COLUMNS];
            let mut ph = [0.0; RAW_COLUMNS];
            for ch in 0..RAW_COLUMNS {
                o[ch] = rng.random_range(-1.0..1.0);
                ph[ch] = rng.random_range(0.0..TAU);
            }
            offsets.push(o);
            phases.push(ph);
            freq.push(0.4 + 1.2 * c as f64 / n.max(2) as f64);
        }
        Self {
            targets,
            offsets,
            phases,
            freq,
        }
    }
}

fn sample_labels(cfg: &SynthConfig, m: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(cfg.length);
    let mut c = rng.random_range(0..cfg.n_classes);
    while out.len() < cfg.length {
        let dwell = rng.random_range(cfg.dwell.0..=cfg.dwell.1);
        out.extend(std::iter::repeat_n(
            c as u8,
            dwell.min(cfg.length - out.len()),
        ));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = cfg.n_classes - 1;
        for (j, p) in m[c].iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        c = next;
    }
    out
}

/// Clean kinematics for a label sequence.
fn kinematics(cfg: &SynthConfig, bank: &ClassBank, labels: &[u8]) -> Vec<[f64; RAW_COLUMNS]> {
    let dt = 1.0 / cfg.rate_hz as f64;
    let alpha = 1.0 - (-dt / cfg.tau_s).exp();
    let c0 = labels[0] as usize;
    let mut base = bank.targets[c0];
    let mut prev = [[0.0; 3]; 4];
    let mut onset = 0;
    let mut rows = Vec::with_capacity(labels.len());
    for (s, &g) in labels.iter().enumerate() {
        let c = g as usize;
        if s > 0 && labels[s - 1] != g {
            onset = s;
        }
        let tau = (s - onset) as f64 * dt;
        let phase = TAU * bank.freq[c] * tau;
        let mut row = [0.0; RAW_COLUMNS];
        for b in 0..4 {
            let col = b * BLOCK_FEATURES;
            let mut pos = [0.0; 3];
            for k in 0..3 {
                if s > 0 {
                    base[b][k] += alpha * (bank.targets[c][b][k] - base[b][k]);
                }
                let wobble = 0.004 * (phase + bank.phases[c][col + k]).sin()
                    - 0.004 * bank.phases[c][col + k].sin();
                pos[k] = base[b][k] + wobble;
                row[col + k] = pos[k];
                row[col + 12 + k] = if s == 0 {
                    0.0
                } else {
                    (pos[k] - prev[b][k]) / dt
                };
            }
            prev[b] = pos;
            for f in (3..12).chain(15..19) {
                let ch = col + f;
                let scale = CHANNEL_SCALE[f];
                row[ch] = scale * (bank.offsets[c][ch] + 0.5 * (phase + bank.phases[c][ch]).sin());
            }
        }
        rows.push(row);
    }
    rows
}

/// Builds every trial in memory, subject by subject.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let m = cfg.matrix();
    let bank = ClassBank::new(cfg.n_classes, cfg.seed);
    let subjects = cfg.subject_ids();
    let jobs: Vec<(usize, usize)> = (0..cfg.n_subjects)
        .flat_map(|s| (0..cfg.trials_per_subject).map(move |k| (s, k)))
        .collect();
    Exec::default().try_map_range(jobs.len(), |j| {
        let (s, k) = jobs[j];
        let mut srng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_SUBJECT + s as u64));
        let offset: Vec<f64> = (0..RAW_COLUMNS)
            .map(|ch| {
                let z: f64 = srng.sample(rand_distr::StandardNormal);
                z * cfg.subject_sigma * CHANNEL_SCALE[ch % BLOCK_FEATURES]
            })
            .collect();
        let trial_seed = derive_seed(cfg.seed, (j as u64) << 8);
        let mut lrng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, TAG_LABELS));
        let labels = sample_labels(cfg, &m, &mut lrng);
        let clean = kinematics(cfg, &bank, &labels);
        let mut nrng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, TAG_NOISE));
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut data = Vec::with_capacity(cfg.length * RAW_COLUMNS);
        for row in &clean {
            for (ch, v) in row.iter().enumerate() {
                let noise = if cfg.noise_sigma > 0.0 {
                    unit.sample(&mut nrng) * cfg.noise_sigma * CHANNEL_SCALE[ch % BLOCK_FEATURES]
                } else {
                    0.0
                };
                data.push(v + offset[ch] + noise);
            }
        }
        let subject = &subjects[s];
        TrialRecord::new(
            subject.clone(),
            format!("{subject}{:03}", k + 1),
            cfg.rate_hz,
            Tensor::new(vec![cfg.length, RAW_COLUMNS], data)?,
            labels,
        )
    })
}

pub const CONFIG_ECHO: &str = "synth-config.toml";

/// Generates and writes `kinematics/`, `transcriptions/`, `manifest.tsv` and
/// a copy of the config into `dir`.
pub fn write_dataset(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let trials = generate(cfg)?;
    let kin_dir = dir.join("kinematics");
    let tr_dir = dir.join("transcriptions");
    for d in [&kin_dir, &tr_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut entries = Vec::with_capacity(trials.len());
    for t in &trials {
        let kp = kin_dir.join(format!("{}.txt", t.trial_id));
        let tp = tr_dir.join(format!("{}.txt", t.trial_id));
        fs::write(&kp, format_kinematics(&t.kinematics)).map_err(|e| Error::io(&kp, e))?;
        fs::write(&tp, format_transcript(&t.gestures)).map_err(|e| Error::io(&tp, e))?;
        entries.push(ManifestEntry {
            subject: t.subject_id.clone(),
            trial: t.trial_id.clone(),
            kinematics: kp,
            transcript: tp,
        });
    }
    let manifest = Manifest {
        rate_hz: cfg.rate_hz,
        entries,
    };
    manifest.write(&dir.join("manifest.tsv"))?;
    let echo = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Config(format!("serializing synth config: {e}")))?;
    let ep = dir.join(CONFIG_ECHO);
    fs::write(&ep, echo).map_err(|e| Error::io(&ep, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 1,
            trials_per_subject: 1,
            length: 200,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_dataset(&small(), a.path()).unwrap();
        write_dataset(&small(), b.path()).unwrap();
        for f in [
            "kinematics/B001.txt",
            "transcriptions/B001.txt",
            "manifest.tsv",
            CONFIG_ECHO,
        ] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn files_round_trip_through_dataio() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_subjects: 2,
            trials_per_subject: 2,
            length: 150,
            ..SynthConfig::default()
        };
        let manifest = write_dataset(&cfg, dir.path()).unwrap();
        let back = Manifest::read(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(back.entries.len(), 4);
        let loaded = back.load_trials(Exec::Sequential).unwrap();
        assert_eq!(loaded, generate(&cfg).unwrap());
        assert_eq!(manifest.subjects(), vec!["B", "C"]);
        let echo = fs::read_to_string(dir.path().join(CONFIG_ECHO)).unwrap();
        assert_eq!(toml::from_str::<SynthConfig>(&echo).unwrap(), cfg);
    }

    #[test]
    fn label_frequencies_match_stationary_distribution() {
        let rows = vec![
            vec![0.0, 0.6, 0.4, 0.0],
            vec![0.2, 0.0, 0.5, 0.3],
            vec![0.5, 0.25, 0.0, 0.25],
            vec![0.7, 0.1, 0.2, 0.0],
        ];
        let cfg = SynthConfig {
            n_subjects: 1,
            trials_per_subject: 1,
            length: 50_000,
            n_classes: 4,
            transitions: Transitions::Matrix { rows: rows.clone() },
            dwell: (2, 6),
            ..SynthConfig::default()
        };
        let t = &generate(&cfg).unwrap()[0];
        let pi = stationary_distribution(&rows);
        for (c, p) in pi.iter().enumerate() {
            let f = t.gestures.iter().filter(|&&g| g as usize == c).count() as f64 / 50_000.0;
            assert!((f - p).abs() <= 0.05 * p, "class {c}: {f} vs {p}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_row = SynthConfig {
            n_classes: 2,
            transitions: Transitions::Matrix {
                rows: vec![vec![0.5, 0.6], vec![1.0, 0.0]],
            },
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&bad_row), Err(Error::Config(_))));
        let bad_dwell = SynthConfig {
            dwell: (0, 3),
            ..SynthConfig::default()
        };
        assert!(bad_dwell.validate().is_err());
        let too_many = SynthConfig {
            n_classes: 17,
            ..SynthConfig::default()
        };
        assert!(too_many.validate().is_err());
    }

    #[test]
    fn noise_free_classes_are_separable() {
        let cfg = SynthConfig {
            n_subjects: 1,
            trials_per_subject: 1,
            length: 2000,
            noise_sigma: 0.0,
            subject_sigma: 0.0,
            ..SynthConfig::default()
        };
        let t = &generate(&cfg).unwrap()[0];
        // The rotation channels at a segment onset identify the class.
        let mut seen: Vec<(u8, Vec<f64>)> = Vec::new();
        for s in 0..t.len() {
            if s == 0 || t.gestures[s] != t.gestures[s - 1] {
                let sig: Vec<f64> = (3..12).map(|c| t.kinematics.at(s, c)).collect();
                for (g, other) in &seen {
                    if *g != t.gestures[s] {
                        assert_ne!(&sig, other);
                    }
                }
                seen.push((t.gestures[s], sig));
            }
        }
        assert!(seen.len() > 10);
    }

    #[test]
    fn velocity_matches_position_derivative() {
        let cfg = SynthConfig {
            subject_sigma: 0.0,
            ..small()
        };
        let t = &generate(&cfg).unwrap()[0];
        let dt = 1.0 / 30.0;
        for s in 1..t.len() {
            for (p, v) in [(0, 12), (1, 13), (2, 14), (57, 69)] {
                let d = (t.kinematics.at(s, p) - t.kinematics.at(s - 1, p)) / dt;
                assert!((d - t.kinematics.at(s, v)).abs() < 1e-9);
            }
        }
    }

    fn centroid_accuracy(train: &[&TrialRecord], test: &TrialRecord, n: usize) -> f64 {
        let mut sums = vec![vec![0.0; RAW_COLUMNS]; n];
        let mut counts = vec![0usize; n];
        for t in train {
            for s in 0..t.len() {
                let g = t.gestures[s] as usize;
                counts[g] += 1;
                sums[g]
                    .iter_mut()
                    .zip(t.kinematics.row(s))
                    .for_each(|(a, v)| *a += v);
            }
        }
        let scaled = |ch: usize, v: f64| v / CHANNEL_SCALE[ch % BLOCK_FEATURES];
        let hits = (0..test.len())
            .filter(|&s| {
                let best = (0..n)
                    .filter(|&c| counts[c] > 0)
                    .min_by(|&a, &b| {
                        let d = |c: usize| -> f64 {
                            test.kinematics
                                .row(s)
                                .iter()
                                .enumerate()
                                .map(|(ch, v)| {
                                    (scaled(ch, *v) - scaled(ch, sums[c][ch] / counts[c] as f64))
                                        .powi(2)
                                })
                                .sum()
                        };
                        d(a).total_cmp(&d(b))
                    })
                    .unwrap();
                best == test.gestures[s] as usize
            })
            .count();
        hits as f64 / test.len() as f64
    }

    #[test]
    fn subject_offsets_cost_held_out_accuracy() {
        let cfg = SynthConfig {
            n_subjects: 3,
            trials_per_subject: 2,
            length: 1500,
            noise_sigma: 0.2,
            subject_sigma: 3.0,
            ..SynthConfig::default()
        };
        let trials = generate(&cfg).unwrap();
        let (mut within, mut held_out) = (0.0, 0.0);
        for subject in cfg.subject_ids() {
            let own: Vec<&TrialRecord> =
                trials.iter().filter(|t| t.subject_id == subject).collect();
            let others: Vec<&TrialRecord> =
                trials.iter().filter(|t| t.subject_id != subject).collect();
            within += centroid_accuracy(&own[..1], own[1], cfg.n_classes);
            held_out += centroid_accuracy(&others, own[1], cfg.n_classes);
        }
        assert!(held_out < within, "held out {held_out} vs within {within}");
    }
}
