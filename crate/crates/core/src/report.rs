//! Markdown pivot of `results.csv`: one row per detector, ensemble type and
//! drift kind, one column per stream, cells `MTD(FA)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{ResultRow, RESULT_COLUMNS};
use crate::stream::fixtures::TABLE_COLUMNS;

fn fmt_fa(fa: f64) -> String {
    if fa.fract() == 0.0 {
        format!("{fa:.0}")
    } else {
        format!("{fa:.1}")
    }
}

/// `MTD(FA)` over a set of seeds; `-` when no seed detected anything.
pub fn cell(runs: &[&ResultRow]) -> String {
    let fa = runs.iter().map(|r| r.fa as f64).sum::<f64>() / runs.len().max(1) as f64;
    let mtds: Vec<f64> = runs.iter().filter_map(|r| r.mtd).collect();
    let mtd = if mtds.is_empty() {
        "-".to_string()
    } else {
        format!(
            "{:.0}",
            (mtds.iter().sum::<f64>() / mtds.len() as f64).round()
        )
    };
    format!("{mtd}({})", fmt_fa(fa))
}

fn kind_letter(kind: &str) -> &str {
    match kind {
        "abrupt" => "A",
        "gradual" => "G",
        other => other,
    }
}

pub fn render_report(rows: &[ResultRow]) -> String {
    let mut streams: Vec<&str> = TABLE_COLUMNS
        .iter()
        .copied()
        .filter(|c| rows.iter().any(|r| r.stream == *c))
        .collect();
    for r in rows {
        if !streams.contains(&r.stream.as_str()) {
            streams.push(&r.stream);
        }
    }
    let mut groups: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let g = (r.detector.as_str(), r.ensemble_type.as_str());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut cells: BTreeMap<(&str, &str, &str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((&r.detector, &r.ensemble_type, &r.drift_kind, &r.stream))
            .or_default()
            .push(r);
    }

    let mut out = String::new();
    let _ = write!(out, "| Detector | Drift |");
    for s in &streams {
        let _ = write!(out, " {s} |");
    }
    let _ = write!(out, "\n|---|---|");
    for _ in &streams {
        out.push_str("---|");
    }
    out.push('\n');
    for (det, ens) in groups {
        for kind in ["gradual", "abrupt"] {
            if !rows
                .iter()
                .any(|r| r.detector == det && r.ensemble_type == ens && r.drift_kind == kind)
            {
                continue;
            }
            let _ = write!(
                out,
                "| {det} ({}) | {} |",
                ens.to_uppercase(),
                kind_letter(kind)
            );
            for s in &streams {
                match cells.get(&(det, ens, kind, *s)) {
                    Some(runs) => {
                        let _ = write!(out, " {} |", cell(runs));
                    }
                    None => out.push_str("  |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Reads rows written by a run; a file without any bytes holds no rows.
pub fn load_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if let Some(missing) = RESULT_COLUMNS
        .iter()
        .find(|c| !headers.iter().any(|h| h == **c))
    {
        return Err(Error::config(
            format!("{}", path.display()),
            format!("results file is missing column `{missing}`"),
        ));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(stream: &str, kind: &str, mtd: Option<f64>, fa: usize) -> ResultRow {
        ResultRow {
            run_id: "r".into(),
            stream: stream.into(),
            detector: "disagreement".into(),
            ensemble_type: "mlp".into(),
            drift_kind: kind.into(),
            mtd,
            da: 1.0,
            fa,
            mean_acc: 0.9,
            seed: 0,
            config_json: "{}".into(),
        }
    }

    #[test]
    fn cells_follow_the_table_convention() {
        assert_eq!(cell(&[&row("SEA0", "abrupt", Some(365.0), 1)]), "365(1)");
        assert_eq!(cell(&[&row("SEA0", "abrupt", None, 0)]), "-(0)");
        let a = row("SEA0", "abrupt", Some(100.0), 1);
        let b = row("SEA0", "abrupt", None, 2);
        assert_eq!(cell(&[&a, &b]), "100(1.5)");
    }

    #[test]
    fn rows_per_kind_columns_in_table_order() {
        let rows = vec![
            row("Stagger", "abrupt", Some(10.0), 0),
            row("SEA0", "gradual", Some(20.0), 0),
            row("RBF", "abrupt", None, 3),
        ];
        let t = render_report(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "| Detector | Drift | RBF | SEA0 | Stagger |");
        assert_eq!(lines[2], "| disagreement (MLP) | G |  | 20(0) |  |");
        assert_eq!(lines[3], "| disagreement (MLP) | A | -(3) |  | 10(0) |");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn empty_input_gives_header_only() {
        assert_eq!(render_report(&[]), "| Detector | Drift |\n|---|---|\n");
    }
}
