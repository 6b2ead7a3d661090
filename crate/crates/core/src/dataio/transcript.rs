//! Gesture transcripts.
//!
//! One span per line: `start end G<k>` where `start`/`end` are 1-based,
//! inclusive sample indices at the recording rate and `k ∈ 1..=15`. Samples
//! not covered by any span get label 0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::task::N_GESTURES;

pub fn parse_transcript(path: &Path, len: usize) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_transcript_str(&text, len, path)
}

pub fn parse_transcript_str(text: &str, len: usize, origin: &Path) -> Result<Vec<u8>> {
    let mut labels = vec![0u8; len];
    let mut covered = vec![false; len];
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let [start, end, gesture] = toks[..] else {
            return Err(err(format!(
                "expected `start end G<k>`, got {:?}",
                line.trim()
            )));
        };
        let start: usize = start
            .parse()
            .map_err(|_| err(format!("bad start index {start:?}")))?;
        let end: usize = end
            .parse()
            .map_err(|_| err(format!("bad end index {end:?}")))?;
        let k: usize = gesture
            .strip_prefix('G')
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| err(format!("bad gesture token {gesture:?}")))?;
        if !(1..N_GESTURES).contains(&k) {
            return Err(err(format!("gesture G{k} outside G1..G{}", N_GESTURES - 1)));
        }
        if start < 1 || end < start || end > len {
            return Err(err(format!("span {start}..{end} outside samples 1..{len}")));
        }
        for s in start - 1..end {
            if covered[s] {
                return Err(err(format!(
                    "span {start}..{end} overlaps sample {}",
                    s + 1
                )));
            }
            covered[s] = true;
            labels[s] = k as u8;
        }
    }
    Ok(labels)
}

/// Writes maximal runs of nonzero labels as transcript lines.
pub fn format_transcript(labels: &[u8]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < labels.len() {
        let g = labels[i];
        let mut j = i;
        while j + 1 < labels.len() && labels[j + 1] == g {
            j += 1;
        }
        if g != 0 {
            writeln!(out, "{} {} G{g}", i + 1, j + 1).unwrap();
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, len: usize) -> Result<Vec<u8>> {
        parse_transcript_str(text, len, Path::new("t.txt"))
    }

    #[test]
    fn span_fill() {
        assert_eq!(parse("1 3 G2\n", 5).unwrap(), vec![2, 2, 2, 0, 0]);
        assert_eq!(parse("", 4).unwrap(), vec![0; 4]);
        assert_eq!(
            parse("2 2 G15 \n4 5 G1\n", 5).unwrap(),
            vec![0, 15, 0, 1, 1]
        );
    }

    #[test]
    fn rejects_bad_gestures_and_spans() {
        assert!(parse("1 3 G16\n", 5).is_err());
        assert!(parse("1 3 G0\n", 5).is_err());
        assert!(parse("1 3 X2\n", 5).is_err());
        assert!(parse("0 3 G2\n", 5).is_err());
        assert!(parse("3 6 G2\n", 5).is_err());
        assert!(parse("4 3 G2\n", 5).is_err());
        let err = parse("1 3 G2\n3 4 G5\n", 5).unwrap_err().to_string();
        assert!(err.contains("t.txt:2") && err.contains("overlaps"), "{err}");
    }

    #[test]
    fn format_inverts_parse() {
        let labels = vec![0, 3, 3, 3, 0, 0, 7, 7, 1, 1];
        let text = format_transcript(&labels);
        assert_eq!(parse(&text, labels.len()).unwrap(), labels);
    }
}
