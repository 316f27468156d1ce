use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::stats::{HistogramBin, SummaryStats};
use super::{binned_errors, mae, mape, BinnedError, EvalError};
use crate::dataset::hex_digest;

/// One model's predictions on the evaluation targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub name: String,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    /// `None` for models without a training phase.
    pub training_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub mae: f64,
    pub mape: f64,
    pub training_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub target_digest: String,
    pub n_targets: usize,
    /// Ascending by MAE, ties by name.
    pub rows: Vec<ReportRow>,
    /// Per-model binned error curves, in row order.
    pub curves: Vec<(String, Vec<BinnedError>)>,
}

/// SHA-256 of the targets' bit patterns.
pub fn target_digest(targets: &[f64]) -> String {
    let mut h = Sha256::new();
    for t in targets {
        h.update(t.to_bits().to_le_bytes());
    }
    hex_digest(&h.finalize())
}

pub fn compare_models(results: &[ModelResult], n_bins: usize) -> Result<EvalReport, EvalError> {
    let first = results.first().ok_or(EvalError::Empty)?;
    let expected = target_digest(&first.targets);
    let mut scored = Vec::with_capacity(results.len());
    for r in results {
        let found = target_digest(&r.targets);
        if found != expected {
            return Err(EvalError::InconsistentEvaluation {
                model: r.name.clone(),
                expected,
                found,
            });
        }
        let row = ReportRow {
            model: r.name.clone(),
            mae: mae(&r.predictions, &r.targets)?,
            mape: mape(&r.predictions, &r.targets)?,
            training_seconds: r.training_seconds,
        };
        scored.push((row, binned_errors(&r.predictions, &r.targets, n_bins)?));
    }
    scored.sort_by(|a, b| a.0.mae.total_cmp(&b.0.mae).then_with(|| a.0.model.cmp(&b.0.model)));
    let (rows, curves) = scored
        .into_iter()
        .map(|(row, curve)| {
            let name = row.model.clone();
            (row, (name, curve))
        })
        .unzip();
    Ok(EvalReport {
        target_digest: expected,
        n_targets: first.targets.len(),
        rows,
        curves,
    })
}

/// Aligned plain-text ranking table.
pub fn render_table(report: &EvalReport) -> String {
    let header = ["Model", "MAE", "MAPE (%)", "Training (s)"];
    let cells: Vec<[String; 4]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                format!("{:.4}", r.mae),
                format!("{:.2}", r.mape),
                r.training_seconds.map_or_else(|| "-".into(), |s| format!("{s:.1}")),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: [&str; 4]| {
        let _ = write!(out, "{:<w$}", cols[0], w = widths[0]);
        for (c, w) in cols[1..].iter().zip(&widths[1..]) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    };
    line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line([&rule[0], &rule[1], &rule[2], &rule[3]]);
    for row in &cells {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    let _ = writeln!(out, "\n{} test rows, targets {}", report.n_targets, &report.target_digest[..16]);
    out
}

fn slug(name: &str) -> String {
    let mut s = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('-') {
            s.push('-');
        }
    }
    s.trim_matches('-').to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// Writes `results.csv`, `table.txt` and one `curve_<model>.csv` per model
/// into `dir`, returning the paths written.
pub fn write_report(report: &EvalReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let results = dir.join("results.csv");
    write_table(
        &results,
        &["model", "mae", "mape", "training_seconds"],
        report.rows.iter().map(|r| {
            vec![
                r.model.clone(),
                r.mae.to_string(),
                r.mape.to_string(),
                opt(r.training_seconds),
            ]
        }),
    )?;
    written.push(results);

    let table = dir.join("table.txt");
    fs::write(&table, render_table(report))?;
    written.push(table);

    for (name, curve) in &report.curves {
        let path = dir.join(format!("curve_{}.csv", slug(name)));
        write_table(
            &path,
            &["lower", "upper", "mae", "mape", "count"],
            curve.iter().map(|b| {
                vec![
                    b.lower.to_string(),
                    b.upper.to_string(),
                    opt(b.mae),
                    opt(b.mape),
                    b.count.to_string(),
                ]
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

/// One `hist_<column>.csv` per column.
pub fn write_histograms(histograms: &[(String, Vec<HistogramBin>)], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    histograms
        .iter()
        .map(|(name, bins)| {
            let path = dir.join(format!("hist_{}.csv", slug(name)));
            write_table(
                &path,
                &["lower", "upper", "count"],
                bins.iter()
                    .map(|b| vec![b.lower.to_string(), b.upper.to_string(), b.count.to_string()]),
            )?;
            Ok(path)
        })
        .collect()
}

pub fn write_summaries(summaries: &[(String, SummaryStats)], path: &Path) -> io::Result<()> {
    write_table(
        path,
        &["column", "count", "mean", "std", "min", "25%", "50%", "75%", "max"],
        summaries.iter().map(|(name, s)| {
            let mut row = vec![name.clone(), s.count.to_string()];
            row.extend([s.mean, s.std, s.min, s.q25, s.q50, s.q75, s.max].map(|v| v.to_string()));
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(name: &str, offset: f64, seconds: Option<f64>) -> ModelResult {
        let targets = vec![1.0, 10.0, 100.0];
        ModelResult {
            name: name.into(),
            predictions: targets.iter().map(|t| t + offset).collect(),
            targets,
            training_seconds: seconds,
        }
    }

    #[test]
    fn single_perfect_model() {
        let r = compare_models(&[result("oracle", 0.0, Some(2.5))], 4).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!((r.rows[0].mae, r.rows[0].mape, r.rows[0].training_seconds), (0.0, 0.0, Some(2.5)));
    }

    #[test]
    fn sorted_by_mae_then_name() {
        let r = compare_models(
            &[result("worse", 2.0, None), result("b", 1.0, None), result("a", -1.0, None)],
            2,
        )
        .unwrap();
        let names: Vec<&str> = r.rows.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "worse"]);
        assert_eq!(r.curves[2].0, "worse");
    }

    #[test]
    fn mismatched_targets_are_inconsistent() {
        let mut other = result("other", 0.0, None);
        other.targets[0] = 1.5;
        let err = compare_models(&[result("base", 0.0, None), other], 2).unwrap_err();
        assert!(matches!(err, EvalError::InconsistentEvaluation { ref model, .. } if model == "other"));
        assert_eq!(compare_models(&[], 2), Err(EvalError::Empty));
    }

    #[test]
    fn table_and_files() {
        let r = compare_models(&[result("gbdt10", 0.5, Some(31.6)), result(super::super::BS_IMPLIED, 0.0, None)], 3)
            .unwrap();
        let table = render_table(&r);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[2].starts_with("black-scholes (implied vol)"));
        assert!(lines[3].contains("0.5000") && lines[3].ends_with("31.6"));
        assert_eq!(lines[2].len(), lines[3].len());

        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        assert!(dir.path().join("curve_black-scholes-implied-vol.csv").exists());
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().nth(1), Some("black-scholes (implied vol),0,0,"));
    }
}
