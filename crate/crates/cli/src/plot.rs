//! Label timelines as standalone SVG: one predicted row above one
//! ground-truth row per trial, one colour per gesture class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use kintrans::inference::{FramePrediction, Output};

const PALETTE: [&str; 16] = [
    "#d9d9d9", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173",
];

/// Per-sample labels of one trial; `None` where no window covered the sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeline {
    pub trial: String,
    pub predicted: Vec<Option<usize>>,
    pub truth: Vec<Option<usize>>,
}

fn vote(counts: &[BTreeMap<usize, usize>]) -> Vec<Option<usize>> {
    counts
        .iter()
        .map(|c| {
            c.iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&g, _)| g)
        })
        .collect()
}

/// Reassembles overlapping window outputs into per-trial label rows by
/// majority vote. `offset` is the distance from window start to the first
/// labelled sample (0 for recognition, `T_obs` for prediction).
pub fn timelines(preds: &[FramePrediction], offset: usize) -> Vec<Timeline> {
    let mut acc: BTreeMap<String, (Vec<BTreeMap<usize, usize>>, Vec<BTreeMap<usize, usize>>)> =
        BTreeMap::new();
    for p in preds {
        let (Output::Labels(pred), Output::Labels(truth)) = (&p.predicted, &p.truth) else {
            continue;
        };
        let (pc, tc) = acc.entry(p.origin.trial.clone()).or_default();
        let start = p.origin.start + offset;
        let end = start + pred.len();
        if pc.len() < end {
            pc.resize(end, BTreeMap::new());
            tc.resize(end, BTreeMap::new());
        }
        for (k, (a, b)) in pred.iter().zip(truth).enumerate() {
            *pc[start + k].entry(*a).or_default() += 1;
            *tc[start + k].entry(*b).or_default() += 1;
        }
    }
    acc.into_iter()
        .map(|(trial, (pc, tc))| Timeline {
            trial,
            predicted: vote(&pc),
            truth: vote(&tc),
        })
        .collect()
}

fn row(out: &mut String, labels: &[Option<usize>], y: f64, x0: f64, scale: f64, h: f64) {
    let mut i = 0;
    while i < labels.len() {
        let g = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == g {
            j += 1;
        }
        if let Some(g) = g {
            writeln!(
                out,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{}"><title>G{g}: {i}-{}</title></rect>"#,
                x0 + i as f64 * scale,
                (j - i) as f64 * scale,
                PALETTE[g % PALETTE.len()],
                j - 1
            )
            .unwrap();
        }
        i = j;
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn timeline_svg(title: &str, lines: &[Timeline]) -> String {
    let width = 960.0;
    let label_w = 90.0;
    let (bar, gap) = (14.0, 10.0);
    let longest = lines
        .iter()
        .map(|l| l.predicted.len())
        .max()
        .unwrap_or(1)
        .max(1);
    let scale = (width - label_w - 10.0) / longest as f64;
    let height = 40.0 + lines.len() as f64 * (2.0 * bar + gap) + 30.0;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="10" y="20" font-size="14">{}</text>"#,
        escape(title)
    )
    .unwrap();
    let mut used = std::collections::BTreeSet::new();
    for (n, l) in lines.iter().enumerate() {
        let y = 40.0 + n as f64 * (2.0 * bar + gap);
        writeln!(
            out,
            r#"<text x="10" y="{:.2}">{} pred</text><text x="10" y="{:.2}">{} true</text>"#,
            y + bar - 3.0,
            escape(&l.trial),
            y + 2.0 * bar - 3.0,
            escape(&l.trial)
        )
        .unwrap();
        row(&mut out, &l.predicted, y, label_w, scale, bar - 1.0);
        row(&mut out, &l.truth, y + bar, label_w, scale, bar - 1.0);
        used.extend(l.predicted.iter().chain(&l.truth).flatten().copied());
    }
    let ly = height - 18.0;
    for (k, g) in used.iter().enumerate() {
        let x = 10.0 + k as f64 * 46.0;
        writeln!(
            out,
            r#"<rect x="{x}" y="{ly}" width="10" height="10" fill="{}"/><text x="{}" y="{}">G{g}</text>"#,
            PALETTE[g % PALETTE.len()],
            x + 13.0,
            ly + 9.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use kintrans::dataio::FrameOrigin;

    use super::*;

    fn pred(start: usize, p: Vec<usize>, t: Vec<usize>) -> FramePrediction {
        FramePrediction {
            origin: FrameOrigin {
                subject: "B".into(),
                trial: "B001".into(),
                start,
            },
            predicted: Output::Labels(p),
            truth: Output::Labels(t),
            last_observed: None,
        }
    }

    #[test]
    fn overlapping_windows_are_voted() {
        let preds = [
            pred(0, vec![1, 1, 2], vec![1, 1, 2]),
            pred(1, vec![1, 3, 2], vec![1, 2, 2]),
            pred(2, vec![2, 2, 2], vec![2, 2, 2]),
        ];
        let t = &timelines(&preds, 0)[0];
        assert_eq!(t.truth, vec![Some(1), Some(1), Some(2), Some(2), Some(2)]);
        assert_eq!(t.predicted[2], Some(2));
        let shifted = &timelines(&preds, 4)[0];
        assert_eq!(&shifted.truth[..4], &[None; 4]);
    }

    #[test]
    fn svg_has_one_rect_per_run() {
        let line = Timeline {
            trial: "B<1>".into(),
            predicted: vec![Some(1), Some(1), Some(2)],
            truth: vec![Some(1), None, Some(2)],
        };
        let svg = timeline_svg("fold B", &[line]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("B&lt;1&gt;"));
        // 2 predicted runs, 2 true runs, 2 legend swatches, 1 background.
        assert_eq!(svg.matches("<rect").count(), 7);
    }
}
