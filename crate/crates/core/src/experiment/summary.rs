use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::ResultRow;
use crate::analysis::{oracle_bound_compare, OracleFit, OraclePoint};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `key=value` pairs joined by `;`.
    pub group: String,
    pub count: usize,
    pub failures: usize,
    pub mean_frob_err_sq: f64,
    pub median_frob_err_sq: f64,
    pub std_frob_err_sq: f64,
    pub cone_pass_freq: f64,
    pub rsc_pass_freq: f64,
    pub dual_pass_freq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Records that could not be parsed.
    pub skipped: usize,
    /// Rate fit over group means when grouping by `t` yields three or more
    /// horizons.
    pub oracle_fit: Option<OracleFit>,
    pub summary_path: PathBuf,
    pub plot_path: PathBuf,
}

#[derive(Serialize)]
struct PlotRow {
    x: f64,
    y: f64,
    y_err: f64,
}

fn freq(flags: impl Iterator<Item = Option<bool>>) -> f64 {
    let v: Vec<bool> = flags.flatten().collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().filter(|b| **b).count() as f64 / v.len() as f64
    }
}

/// Groups successful rows by the given columns and writes
/// `<stem>_summary.csv` and `<stem>_plot.csv` next to the results file.
///
/// The plot file has one `(x, y, y_err)` row per group: `x` is the first
/// group key's value when numeric (else the group index), `y` the mean
/// squared error and `y_err` its standard error.
pub fn summarize(results_path: &Path, group_keys: &[String]) -> Result<Summary> {
    let mut rdr = csv::Reader::from_path(results_path)?;
    let headers = rdr.headers()?.clone();
    let key_idx: Vec<usize> = group_keys
        .iter()
        .map(|k| {
            headers
                .iter()
                .position(|h| h == k)
                .ok_or_else(|| Error::Config(format!("unknown group key {k:?}")))
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, (Vec<String>, Vec<ResultRow>)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut skipped = 0;
    for rec in rdr.records() {
        let Ok(rec) = rec else {
            skipped += 1;
            continue;
        };
        let Ok(row) = rec.deserialize::<ResultRow>(Some(&headers)) else {
            skipped += 1;
            continue;
        };
        let values: Vec<String> = key_idx.iter().map(|&i| rec[i].to_string()).collect();
        let label = group_keys
            .iter()
            .zip(&values)
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let entry = groups.entry(label.clone()).or_insert_with(|| {
            order.push(label.clone());
            (values, Vec::new())
        });
        entry.1.push(row);
    }

    let mut rows = Vec::new();
    let mut plot = Vec::new();
    let mut points = Vec::new();
    for (gi, label) in order.iter().enumerate() {
        let (values, members) = &groups[label];
        let ok: Vec<&ResultRow> = members.iter().filter(|r| r.is_ok()).collect();
        let errs: Vec<f64> = ok.iter().filter_map(|r| r.frob_err_sq).collect();
        let (mean, median, std) = if errs.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (stats::mean(&errs), stats::median(&errs), stats::std_dev(&errs))
        };
        rows.push(SummaryRow {
            group: label.clone(),
            count: ok.len(),
            failures: members.len() - ok.len(),
            mean_frob_err_sq: mean,
            median_frob_err_sq: median,
            std_frob_err_sq: std,
            cone_pass_freq: freq(ok.iter().map(|r| r.in_cone)),
            rsc_pass_freq: freq(ok.iter().map(|r| r.rsc_pass)),
            dual_pass_freq: freq(ok.iter().map(|r| r.dual_pass)),
        });
        let x = values.first().and_then(|v| v.parse::<f64>().ok()).unwrap_or(gi as f64);
        let y_err = if errs.is_empty() { f64::NAN } else { std / (errs.len() as f64).sqrt() };
        plot.push(PlotRow { x, y: mean, y_err });
        if let Some(first) = ok.first() {
            points.push(OraclePoint {
                d: first.d,
                r: first.r,
                s: first.s,
                t: first.t,
                gamma: first.gamma,
                delta_n: first.delta_n,
                mean_err_sq: mean,
            });
        }
    }

    let oracle_fit = if group_keys.iter().any(|k| k == "t") {
        oracle_bound_compare(&points).ok()
    } else {
        None
    };

    let stem = results_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    let dir = results_path.parent().unwrap_or_else(|| Path::new("."));
    let summary_path = dir.join(format!("{stem}_summary.csv"));
    let plot_path = dir.join(format!("{stem}_plot.csv"));
    let mut w = csv::Writer::from_path(&summary_path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(&plot_path)?;
    for p in &plot {
        w.serialize(p)?;
    }
    w.flush()?;

    Ok(Summary {
        rows,
        skipped,
        oracle_fit,
        summary_path,
        plot_path,
    })
}
