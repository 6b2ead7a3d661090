use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::task::RAW_COLUMNS;

/// Reads a whitespace-separated kinematics file with 76 columns per row.
pub fn parse_kinematics(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kinematics_str(&text, path)
}

/// Parses kinematics text; `origin` is only used in error messages.
/// Blank lines are skipped.
pub fn parse_kinematics_str(text: &str, origin: &Path) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("not a number: {tok:?}"),
            })?;
            data.push(v);
        }
        let cols = data.len() - before;
        if cols != RAW_COLUMNS {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("expected {RAW_COLUMNS} columns, found {cols}"),
            });
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            msg: "no kinematic samples".into(),
        });
    }
    Tensor::new(vec![rows, RAW_COLUMNS], data)
}

/// Formats a `[L × 76]` matrix in the same layout. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn format_kinematics(k: &Tensor) -> String {
    let mut out = String::with_capacity(k.len() * 24);
    for i in 0..k.rows() {
        for (j, v) in k.row(i).iter().enumerate() {
            if j > 0 {
                out.push_str("   ");
            }
            write!(out, "{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, v: f64) -> String {
        vec![format!("{v}"); n].join(" ")
    }

    #[test]
    fn two_rows_parse() {
        let text = format!("{}\n{}\n", line(76, 0.5), line(76, -1.25));
        let k = parse_kinematics_str(&text, Path::new("x.txt")).unwrap();
        assert_eq!(k.shape(), &[2, 76]);
        assert_eq!(k.at(1, 75), -1.25);
    }

    #[test]
    fn ragged_row_reports_line() {
        let text = format!("{}\n{}\n{}\n", line(76, 0.0), line(76, 0.0), line(75, 0.0));
        let err = parse_kinematics_str(&text, Path::new("k.txt")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_numeric_token_reports_line() {
        let mut text = format!("{}\n", line(76, 0.0));
        text.push_str(&line(75, 1.0));
        text.push_str(" abc\n");
        let err = parse_kinematics_str(&text, Path::new("k.txt")).unwrap_err();
        assert!(err.to_string().contains("k.txt:2"), "{err}");
    }

    #[test]
    fn format_round_trips_exactly() {
        let k = Tensor::from_fn(&[3, 76], |i| (i as f64 * 0.37).sin() / 7.0);
        let back = parse_kinematics_str(&format_kinematics(&k), Path::new("-")).unwrap();
        assert_eq!(back, k);
    }
}
