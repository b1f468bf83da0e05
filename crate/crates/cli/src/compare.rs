use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;
use divgen_core::metrics::{DiversityReport, REPORT_METRICS};
use serde::Serialize;

use crate::output::write_json;
use crate::Failure;

/// Values this close count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Serialize)]
pub struct Column {
    pub label: String,
    pub file: String,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub metric: String,
    pub higher_is_better: bool,
    pub values: Vec<Option<f64>>,
    pub best: Vec<usize>,
    pub second: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub label: String,
    /// Explore call index.
    pub x: Vec<usize>,
    /// Fraction of tested instances rejected.
    pub y: Vec<f64>,
}

/// Indices holding the best and second-best distinct values.
fn rank(values: &[Option<f64>], higher: bool) -> (Vec<usize>, Vec<usize>) {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| if higher { b.total_cmp(a) } else { a.total_cmp(b) });
    distinct.dedup_by(|a, b| (*a - *b).abs() <= TIE_EPS);
    let at = |target: Option<&f64>| -> Vec<usize> {
        let Some(&t) = target else { return Vec::new() };
        values.iter().enumerate().filter(|(_, v)| v.is_some_and(|v| (v - t).abs() <= TIE_EPS)).map(|(i, _)| i).collect()
    };
    (at(distinct.first()), at(distinct.get(1)))
}

pub fn build(reports: &[(String, DiversityReport)]) -> Comparison {
    let methods: Vec<&str> = reports.iter().map(|(_, r)| r.method.as_str()).collect();
    let labels: Vec<String> = methods
        .iter()
        .enumerate()
        .map(|(i, m)| if methods.iter().filter(|x| *x == m).count() > 1 { format!("{m}#{}", i + 1) } else { m.to_string() })
        .collect();
    let columns = reports.iter().zip(labels).map(|((file, _), label)| Column { label, file: file.clone() }).collect();
    let rows = REPORT_METRICS
        .iter()
        .map(|&m| {
            let higher = m != "llm_calls";
            let values: Vec<Option<f64>> = reports.iter().map(|(_, r)| r.metric(m).map(|(v, _)| v)).collect();
            let (best, second) = rank(&values, higher);
            Row { metric: m.to_string(), higher_is_better: higher, values, best, second }
        })
        .collect();
    Comparison { columns, rows }
}

/// Text table: `**` marks the best value, `*` the second best, and `=` a
/// tie for best.
pub fn render(c: &Comparison) -> String {
    let width = c.columns.iter().map(|col| col.label.len()).max().unwrap_or(0).max(14);
    let mut s = format!("{:<12}", "metric");
    for col in &c.columns {
        let _ = write!(s, " {:>width$}", col.label);
    }
    s.push('\n');
    for row in &c.rows {
        let arrow = if row.higher_is_better { "^" } else { "v" };
        let _ = write!(s, "{:<12}", format!("{} {arrow}", row.metric));
        let tie = row.best.len() > 1;
        for (i, v) in row.values.iter().enumerate() {
            let mark = if row.best.contains(&i) {
                if tie { "**=" } else { "**" }
            } else if row.second.contains(&i) {
                "*"
            } else {
                ""
            };
            let cell = match v {
                Some(v) if row.metric == "llm_calls" => format!("{v:.0}{mark}"),
                Some(v) => format!("{v:.4}{mark}"),
                None => "-".into(),
            };
            let _ = write!(s, " {cell:>width$}");
        }
        s.push('\n');
    }
    s.push_str("** best, * second best, = tied; ^ higher is better, v lower is better\n");
    s
}

pub fn series(reports: &[(String, DiversityReport)], c: &Comparison) -> Vec<Series> {
    reports
        .iter()
        .zip(&c.columns)
        .filter_map(|((_, r), col)| {
            r.rejection_trace.as_ref().map(|t| Series { label: col.label.clone(), x: (0..t.len()).collect(), y: t.clone() })
        })
        .collect()
}

pub fn compare(paths: &[std::path::PathBuf], out: Option<&Path>) -> Result<u8, Failure> {
    if paths.len() < 2 {
        return Err(Failure::config(anyhow!("compare needs at least two reports")));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::config(anyhow!("reading {}: {e}", p.display())))?;
        let report: DiversityReport = serde_json::from_str(&text)
            .map_err(|e| Failure::config(anyhow!("{}: not a diversity report: {e}", p.display())))?;
        reports.push((p.display().to_string(), report));
    }
    let table = build(&reports);
    let text = render(&table);
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Failure::other)?;
        crate::output::write_atomic(&dir.join("comparison.txt"), text.as_bytes()).map_err(Failure::other)?;
        write_json(&dir.join("comparison.json"), &table).map_err(Failure::other)?;
        let s = series(&reports, &table);
        if !s.is_empty() {
            write_json(&dir.join("rejection_series.json"), &s).map_err(Failure::other)?;
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties_and_direction() {
        let v = [Some(1.0), Some(3.0), Some(3.0), Some(2.0)];
        assert_eq!(rank(&v, true), (vec![1, 2], vec![3]));
        assert_eq!(rank(&v, false), (vec![0], vec![3]));
        assert_eq!(rank(&[None, Some(1.0)], true), (vec![1], vec![]));
        assert_eq!(rank(&[Some(2.0), Some(2.0)], true), (vec![0, 1], vec![]));
    }
}
