//! Dataset manifests.
//!
//! A manifest is a tab-separated index file:
//!
//! ```text
//! # kintrans manifest v1
//! rate_hz	30
//! subject	trial	kinematics	transcript
//! B	B001	kinematics/B001.txt	transcriptions/B001.txt
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Lines
//! starting with `#` after the header and blank lines are ignored.
//!
//! [`Manifest::from_jigsaws_dir`] builds the same index from an unpacked
//! JIGSAWS suturing directory (`kinematics/AllGestures/Suturing_B001.txt`
//! plus `transcriptions/Suturing_B001.txt`). Trials without a transcript are
//! skipped, as in the original release.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::trial::TrialRecord;

pub const MANIFEST_HEADER: &str = "# kintrans manifest v1";
const COLUMNS: &str = "subject\ttrial\tkinematics\ttranscript";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject: String,
    pub trial: String,
    pub kinematics: PathBuf,
    pub transcript: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub rate_hz: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MANIFEST_HEADER => {}
            _ => return Err(err(1, format!("expected header {MANIFEST_HEADER:?}"))),
        }
        let mut rate_hz = None;
        let mut seen_columns = false;
        let mut entries = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !seen_columns {
                match fields[..] {
                    ["rate_hz", r] => {
                        rate_hz = Some(
                            r.parse::<u32>()
                                .ok()
                                .filter(|&r| r > 0)
                                .ok_or_else(|| err(n, format!("bad rate {r:?}")))?,
                        );
                    }
                    ["subject", "trial", "kinematics", "transcript"] => seen_columns = true,
                    _ => return Err(err(n, format!("expected `rate_hz` or `{COLUMNS}`"))),
                }
                continue;
            }
            let [subject, trial, kin, tr] = fields[..] else {
                return Err(err(
                    n,
                    format!("expected 4 tab-separated fields, got {}", fields.len()),
                ));
            };
            if subject.is_empty() || trial.is_empty() {
                return Err(err(n, "empty subject or trial id".into()));
            }
            entries.push(ManifestEntry {
                subject: subject.into(),
                trial: trial.into(),
                kinematics: base.join(kin),
                transcript: base.join(tr),
            });
        }
        let rate_hz = rate_hz.ok_or_else(|| err(0, "missing rate_hz line".into()))?;
        if !seen_columns {
            return Err(err(0, "missing column header".into()));
        }
        Ok(Self { rate_hz, entries })
    }

    /// Serializes with paths made relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let mut out = format!("{MANIFEST_HEADER}\nrate_hz\t{}\n{COLUMNS}\n", self.rate_hz);
        let rel = |p: &Path| {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.subject,
                e.trial,
                rel(&e.kinematics),
                rel(&e.transcript)
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        fs::write(path, self.to_text(base)).map_err(|e| Error::io(path, e))
    }

    /// Indexes an unpacked JIGSAWS suturing directory (30 Hz).
    pub fn from_jigsaws_dir(dir: &Path) -> Result<Self> {
        let kin_dir = dir.join("kinematics").join("AllGestures");
        let tr_dir = dir.join("transcriptions");
        let listing = fs::read_dir(&kin_dir).map_err(|e| Error::io(&kin_dir, e))?;
        let mut entries = Vec::new();
        for item in listing {
            let item = item.map_err(|e| Error::io(&kin_dir, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".txt") else {
                continue;
            };
            let Some(trial) = stem.rsplit('_').next().filter(|t| t.len() > 1) else {
                continue;
            };
            let transcript = tr_dir.join(&name);
            if !transcript.is_file() {
                log::debug!("{name}: no transcript, skipped");
                continue;
            }
            entries.push(ManifestEntry {
                subject: trial[..1].to_string(),
                trial: trial.to_string(),
                kinematics: item.path(),
                transcript,
            });
        }
        if entries.is_empty() {
            return Err(Error::Data(format!(
                "no annotated trials under {}",
                dir.display()
            )));
        }
        entries.sort_by(|a, b| a.trial.cmp(&b.trial));
        Ok(Self {
            rate_hz: 30,
            entries,
        })
    }

    /// Opens either a manifest file or a JIGSAWS directory.
    pub fn open(path: &Path) -> Result<Self> {
        if path.is_dir() {
            let index = path.join("manifest.tsv");
            if index.is_file() {
                return Self::read(&index);
            }
            return Self::from_jigsaws_dir(path);
        }
        Self::read(path)
    }

    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.entries.iter().map(|e| e.subject.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Loads every trial, in manifest order.
    pub fn load_trials(&self, exec: Exec) -> Result<Vec<TrialRecord>> {
        exec.try_map_range(self.entries.len(), |i| {
            let e = &self.entries[i];
            TrialRecord::load(
                &e.subject,
                &e.trial,
                self.rate_hz,
                &e.kinematics,
                &e.transcript,
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_resolves_relative_paths() {
        let text = format!(
            "{MANIFEST_HEADER}\nrate_hz\t30\n{COLUMNS}\nB\tB001\tk/B001.txt\tt/B001.txt\n\n"
        );
        let m = Manifest::parse(&text, Path::new("/data"), Path::new("m.tsv")).unwrap();
        assert_eq!(m.rate_hz, 30);
        assert_eq!(m.entries[0].kinematics, Path::new("/data/k/B001.txt"));
        assert_eq!(
            m.to_text(Path::new("/data")),
            text.trim_end().to_string() + "\n"
        );
    }

    #[test]
    fn parse_rejects_malformed() {
        let p = Path::new("m.tsv");
        assert!(Manifest::parse("rate_hz\t30\n", Path::new("."), p).is_err());
        let no_rate = format!("{MANIFEST_HEADER}\n{COLUMNS}\n");
        assert!(Manifest::parse(&no_rate, Path::new("."), p).is_err());
        let short = format!("{MANIFEST_HEADER}\nrate_hz\t30\n{COLUMNS}\nB\tB001\tk.txt\n");
        let e = Manifest::parse(&short, Path::new("."), p).unwrap_err();
        assert!(e.to_string().contains("m.tsv:4"), "{e}");
    }
}
