//! Metrics tables and charts.
//!
//! | file                | contents                                        |
//! |---------------------|-------------------------------------------------|
//! | `metrics.csv`       | `module,t_ws,auc_wocc,auc_ws`, one row a module |
//! | `ablation.csv`      | per-loop AUC of soft- and hard-label runs       |
//! | `thresholds.svg`    | `T_ws` per module                               |
//! | `auc.svg`           | final density and scorer AUC per module         |
//! | `loss.svg`          | per-loop density and scorer losses              |
//! | `ablation_auc.svg`  | per-loop AUC, soft vs hard labels               |

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uvad_core::eval::MetricSeries;
use uvad_core::orchestrator::RunRecord;

use crate::run_dir::{write_atomic, RunDir, ABLATION_FILE, METRICS_FILE};
use crate::svg::{LineChart, Series};

pub const THRESHOLD_CHART: &str = "thresholds.svg";
pub const AUC_CHART: &str = "auc.svg";
pub const LOSS_CHART: &str = "loss.svg";
pub const ABLATION_CHART: &str = "ablation_auc.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub module: usize,
    pub t_ws: usize,
    pub auc_wocc: f64,
    pub auc_ws: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `soft` or `hard`.
    pub mode: String,
    pub module: usize,
    #[serde(rename = "loop")]
    pub loop_index: usize,
    pub auc_wocc: Option<f64>,
    pub auc_ws: Option<f64>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    write_atomic(path, &bytes)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

pub fn metrics_rows(series: &MetricSeries) -> Vec<MetricsRow> {
    series
        .modules
        .iter()
        .map(|m| MetricsRow { module: m.module, t_ws: m.t_ws, auc_wocc: m.auc_wocc, auc_ws: m.auc_ws })
        .collect()
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path, rows, &["module", "t_ws", "auc_wocc", "auc_ws"])
}

pub fn read_metrics(dir: &RunDir) -> Result<Vec<MetricsRow>> {
    let path = dir.path(METRICS_FILE);
    if !path.is_file() {
        bail!("missing metrics: {} not found; run `uvad eval` on this run directory first", path.display());
    }
    read_csv(&path)
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    write_csv(path, rows, &["mode", "module", "loop", "auc_wocc", "auc_ws"])
}

pub fn read_ablation(path: &Path) -> Result<Vec<AblationRow>> {
    read_csv(path)
}

/// Per-loop rows of a run evaluated with a per-loop observer.
pub fn ablation_rows(mode: &str, record: &RunRecord) -> Vec<AblationRow> {
    record
        .modules
        .iter()
        .flat_map(|m| {
            m.loops.iter().map(move |l| AblationRow {
                mode: mode.to_string(),
                module: m.module,
                loop_index: l.loop_index,
                auc_wocc: l.auc_wocc,
                auc_ws: l.auc_ws,
            })
        })
        .collect()
}

/// Population standard deviation; `None` with fewer than two values.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn threshold_chart(record: &RunRecord) -> LineChart {
    LineChart {
        title: "Threshold per module".into(),
        x_label: "module".into(),
        y_label: "T_ws".into(),
        series: vec![Series {
            name: "T_ws".into(),
            points: record.thresholds.iter().enumerate().map(|(i, &t)| ((i + 1) as f64, t as f64)).collect(),
        }],
        y_range: None,
    }
}

pub fn auc_chart(rows: &[MetricsRow]) -> LineChart {
    let pts = |f: fn(&MetricsRow) -> f64| rows.iter().map(|r| (r.module as f64, f(r))).collect();
    LineChart {
        title: "AUC per module".into(),
        x_label: "module".into(),
        y_label: "AUC".into(),
        series: vec![
            Series { name: "wOCC".into(), points: pts(|r| r.auc_wocc) },
            Series { name: "WS".into(), points: pts(|r| r.auc_ws) },
        ],
        y_range: None,
    }
}

pub fn loss_chart(record: &RunRecord) -> LineChart {
    let loops: Vec<_> = record.modules.iter().flat_map(|m| m.loops.iter()).collect();
    LineChart {
        title: "Training loss per loop".into(),
        x_label: "loop (all modules)".into(),
        y_label: "loss".into(),
        series: vec![
            Series {
                name: "wOCC".into(),
                points: loops.iter().enumerate().map(|(i, l)| ((i + 1) as f64, l.wocc_loss)).collect(),
            },
            Series {
                name: "WS".into(),
                points: loops.iter().enumerate().filter_map(|(i, l)| l.ws_loss.map(|v| ((i + 1) as f64, v))).collect(),
            },
        ],
        y_range: None,
    }
}

pub fn ablation_chart(rows: &[AblationRow]) -> LineChart {
    let mut series = Vec::new();
    for (mode, label) in [("soft", "wOCC"), ("hard", "OCC")] {
        let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.mode == mode).collect();
        let pts = |f: fn(&AblationRow) -> Option<f64>| {
            mine.iter().enumerate().filter_map(|(i, r)| f(r).map(|v| ((i + 1) as f64, v))).collect()
        };
        series.push(Series { name: format!("{label} density"), points: pts(|r| r.auc_wocc) });
        series.push(Series { name: format!("{label} WS"), points: pts(|r| r.auc_ws) });
    }
    LineChart {
        title: "Per-loop AUC: soft vs hard labels".into(),
        x_label: "loop (first modules)".into(),
        y_label: "AUC".into(),
        series,
        y_range: None,
    }
}

#[derive(Debug, Default)]
pub struct ReportOutcome {
    pub written: Vec<PathBuf>,
    pub notices: Vec<String>,
}

/// Writes every chart the run directory has inputs for.
pub fn emit_report(dir: &RunDir) -> Result<ReportOutcome> {
    let record = dir.load()?;
    let rows = read_metrics(dir)?;
    let mut out = ReportOutcome::default();
    let mut emit = |name: &str, chart: LineChart| -> Result<()> {
        let path = dir.path(name);
        write_atomic(&path, chart.render().as_bytes())?;
        out.written.push(path);
        Ok(())
    };
    emit(THRESHOLD_CHART, threshold_chart(&record))?;
    emit(AUC_CHART, auc_chart(&rows))?;
    emit(LOSS_CHART, loss_chart(&record))?;
    let ablation = dir.path(ABLATION_FILE);
    if ablation.is_file() {
        emit(ABLATION_CHART, ablation_chart(&read_ablation(&ablation)?))?;
    } else {
        out.notices.push(format!(
            "no {} in {}: skipping {ABLATION_CHART} (run `uvad ablate` to produce it)",
            ABLATION_FILE,
            dir.root().display()
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_round_trip() {
        let tmp = std::env::temp_dir().join(format!("uvad-metrics-{}.csv", std::process::id()));
        let rows = vec![
            MetricsRow { module: 1, t_ws: 600, auc_wocc: 0.97, auc_ws: 0.99 },
            MetricsRow { module: 2, t_ws: 530, auc_wocc: 0.1 + 0.2, auc_ws: 1.0 },
        ];
        write_metrics(&tmp, &rows).unwrap();
        let text = std::fs::read_to_string(&tmp).unwrap();
        assert!(text.starts_with("module,t_ws,auc_wocc,auc_ws\n"));
        assert_eq!(read_csv::<MetricsRow>(&tmp).unwrap(), rows);
        std::fs::remove_file(tmp).unwrap();
    }

    #[test]
    fn std_dev_basics() {
        assert_eq!(std_dev(&[1.0]), None);
        assert!((std_dev(&[1.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
