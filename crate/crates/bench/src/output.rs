use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use comet_core::solvers::{SolveResult, Termination};

use crate::config::ExperimentConfig;
use crate::experiment::{Cell, ExperimentReport};
use crate::verify::verify_bounds;

pub const CSV_HEADER: &str =
    "k,objective,gap,dist,L_k,lambda_k,alpha_k,prox_calls,grad_calls,elapsed_s";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Trace as CSV text: header plus one row per iteration, absent fields left empty.
pub fn csv_string(result: &SolveResult) -> String {
    let mut out = String::with_capacity(160 * (result.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.objective),
            fmt_opt(r.gap),
            fmt_opt(r.dist),
            fmt_f64(r.l_k),
            fmt_opt(r.lambda_k),
            fmt_opt(r.alpha_k),
            r.prox_calls,
            r.grad_calls,
            fmt_opt(r.elapsed_s),
        );
    }
    out
}

pub fn emit_csv(result: &SolveResult, path: &Path) -> Result<()> {
    fs::write(path, csv_string(result)).with_context(|| format!("writing {}", path.display()))
}

fn termination_name(t: &Termination) -> String {
    match t {
        Termination::ToleranceMet => "tolerance".into(),
        Termination::MaxIters => "max-iters".into(),
        Termination::Failed(why) => format!("failed: {why}"),
    }
}

/// One summary line per solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    /// First `k` whose distance to the reference is within the target.
    pub iters_to_target: Option<usize>,
    pub iterations: usize,
    pub final_gap: Option<f64>,
    pub final_dist: Option<f64>,
    pub prox_calls: u64,
    pub grad_calls: u64,
    pub wall_s: f64,
    pub status: String,
}

pub fn summary_rows(report: &ExperimentReport, target: f64) -> Vec<SummaryRow> {
    report
        .cells
        .iter()
        .map(|c: &Cell| match &c.result {
            Ok(r) => {
                let last = r.records.last();
                SummaryRow {
                    label: c.label.clone(),
                    iters_to_target: r.iterations_to_dist(target),
                    iterations: r.records.len(),
                    final_gap: last.and_then(|x| x.gap),
                    final_dist: last.and_then(|x| x.dist),
                    prox_calls: last.map_or(0, |x| x.prox_calls),
                    grad_calls: last.map_or(0, |x| x.grad_calls),
                    wall_s: c.wall_s,
                    status: termination_name(&r.termination),
                }
            }
            Err(e) => SummaryRow {
                label: c.label.clone(),
                iters_to_target: None,
                iterations: 0,
                final_gap: None,
                final_dist: None,
                prox_calls: 0,
                grad_calls: 0,
                wall_s: c.wall_s,
                status: format!("error: {e}"),
            },
        })
        .collect()
}

pub fn summary_table(rows: &[SummaryRow], target: f64) -> String {
    let sci = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
    let header = [
        "solver".to_string(),
        format!("iters(dist<={target:e})"),
        "iters".into(),
        "final_gap".into(),
        "final_dist".into(),
        "prox".into(),
        "grad".into(),
        "wall_s".into(),
        "status".into(),
    ];
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.iters_to_target.map_or("-".into(), |k| k.to_string()),
                r.iterations.to_string(),
                sci(r.final_gap),
                sci(r.final_dist),
                r.prox_calls.to_string(),
                r.grad_calls.to_string(),
                format!("{:.3}", r.wall_s),
                r.status.clone(),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.len());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 || i == 8 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn metadata_text(report: &ExperimentReport) -> String {
    report
        .built
        .metadata
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Writes `<label>.csv` per solver, `summary.txt`, `metadata.txt` and, when enabled,
/// `<label>.bounds.txt` for each COMET run. Returns the paths written.
pub fn write_outputs(report: &ExperimentReport, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for cell in &report.cells {
        if let Ok(r) = &cell.result {
            let path = dir.join(format!("{}.csv", cell.label));
            emit_csv(r, &path)?;
            written.push(path);
            if cfg.verify_bounds {
                let path = dir.join(format!("{}.bounds.txt", cell.label));
                let rep = verify_bounds(r, &report.built.problem, &cell.config);
                fs::write(&path, rep.to_string())
                    .with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
        }
    }
    let rows = summary_rows(report, cfg.target_dist);
    let path = dir.join("summary.txt");
    fs::write(&path, summary_table(&rows, cfg.target_dist))
        .with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    let path = dir.join("metadata.txt");
    fs::write(&path, metadata_text(report))
        .with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn table_is_aligned() {
        let row = SummaryRow {
            label: "comet-v1".into(),
            iters_to_target: Some(12),
            iterations: 40,
            final_gap: Some(1e-14),
            final_dist: None,
            prox_calls: 50,
            grad_calls: 50,
            wall_s: 0.25,
            status: "tolerance".into(),
        };
        let t = summary_table(&[row], 1e-6);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("solver"));
        assert!(lines[1].contains("comet-v1") && lines[1].contains(" 12 "));
    }
}
