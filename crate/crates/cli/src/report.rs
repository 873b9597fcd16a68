use std::collections::BTreeMap;
use std::io::Write;

use serde::Deserialize;

use mcpolicy::aggregate::TransformKind;

use crate::bench::{BenchError, REPORT_COLUMNS};
use crate::metrics::{fmt_opt, gap_closed, relative_difference};
use crate::run::Method;

/// One parsed row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub method: String,
    pub transform: String,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub optimality_cuts: usize,
    pub feasibility_cuts: usize,
    pub seed: u64,
    pub error: Option<String>,
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, BenchError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(BenchError::Config(format!("unexpected report header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for r in rd.deserialize() {
        let row: ReportRow = r?;
        row.method.parse::<Method>().map_err(|e| BenchError::Config(e.to_string()))?;
        row.transform.parse::<TransformKind>().map_err(|e| BenchError::Config(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub transform: TransformKind,
    pub runs: usize,
    pub mean_objective: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Mean over instances of the share of the HN–FH gap closed, anchored on the same method.
    pub mean_gap_closed: Option<f64>,
    /// Instances where the anchors tie and gap closed is undefined.
    pub degenerate: usize,
    /// Mean percent difference from `ex` under the same transform.
    pub mean_rel_diff_ex: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    // (method, transform, instance) -> objective, successful rows only
    let mut obj = BTreeMap::new();
    for r in rows {
        if let (Ok(m), Ok(t), Some(o)) = (r.method.parse::<Method>(), r.transform.parse::<TransformKind>(), r.objective) {
            if r.error.is_none() {
                obj.insert((m, t, r.instance.clone()), o);
            }
        }
    }
    let mut keys: Vec<(Method, TransformKind)> = Vec::new();
    for r in rows {
        if let (Ok(m), Ok(t)) = (r.method.parse::<Method>(), r.transform.parse::<TransformKind>()) {
            if !keys.contains(&(m, t)) {
                keys.push((m, t));
            }
        }
    }
    keys.sort_by_key(|&(m, t)| (m, TransformKind::ALL.iter().position(|&k| k == t)));
    keys.into_iter()
        .map(|(m, t)| {
            let mine: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.method == m.name() && r.transform == t.name() && r.error.is_none())
                .collect();
            let objs: Vec<f64> = mine.iter().filter_map(|r| r.objective).collect();
            let gaps: Vec<f64> = mine.iter().filter_map(|r| r.gap).collect();
            let mut closed = Vec::new();
            let mut degenerate = 0;
            let mut diffs = Vec::new();
            for r in &mine {
                let Some(o) = r.objective else { continue };
                let id = r.instance.clone();
                let hn = obj.get(&(m, TransformKind::Hn, id.clone()));
                let fh = obj.get(&(m, TransformKind::Fh, id.clone()));
                if let (Some(&hn), Some(&fh)) = (hn, fh) {
                    match gap_closed(hn, o, fh) {
                        Some(g) => closed.push(g),
                        None => degenerate += 1,
                    }
                }
                if let Some(&ex) = obj.get(&(Method::Ex, t, id)) {
                    if ex != 0.0 {
                        diffs.push(relative_difference(ex, o));
                    }
                }
            }
            SummaryRow {
                method: m,
                transform: t,
                runs: mine.len(),
                mean_objective: mean(&objs),
                mean_gap: mean(&gaps),
                mean_gap_closed: mean(&closed),
                degenerate,
                mean_rel_diff_ex: mean(&diffs),
            }
        })
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 8] =
    ["method", "transform", "runs", "objective", "gap", "gap_closed_pct", "gap_closed_undefined", "rel_diff_ex_pct"];

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            r.transform.name().to_string(),
            r.runs.to_string(),
            fmt_opt(r.mean_objective),
            fmt_opt(r.mean_gap),
            r.mean_gap_closed.map(crate::metrics::fmt_sig).unwrap_or_else(|| "—".into()),
            r.degenerate.to_string(),
            fmt_opt(r.mean_rel_diff_ex),
        ])?;
    }
    out.flush().map_err(|source| BenchError::Io { path: "<summary>".into(), source })?;
    Ok(())
}
