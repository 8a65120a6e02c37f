use std::path::Path;

use crate::error::{HarnessError, Result};

pub const COLUMNS: [&str; 13] = [
    "task",
    "depth",
    "width",
    "N",
    "corruption",
    "threshold",
    "retrieved",
    "total",
    "rate",
    "mean_mse",
    "seconds",
    "seed",
    "params",
];

/// One line of `metrics.csv`. `params` lists the swept and per-model settings
/// that distinguish rows of the same task.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub task: String,
    pub depth: usize,
    pub width: usize,
    pub n: usize,
    pub corruption: String,
    pub threshold: f64,
    pub retrieved: usize,
    pub total: usize,
    pub rate: f64,
    pub mean_mse: f64,
    pub seconds: f64,
    pub seed: u64,
    pub params: String,
}

impl MetricsRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.depth.to_string(),
            self.width.to_string(),
            self.n.to_string(),
            self.corruption.clone(),
            format!("{:e}", self.threshold),
            self.retrieved.to_string(),
            self.total.to_string(),
            format!("{}", self.rate),
            format!("{:e}", self.mean_mse),
            format!("{:.3}", self.seconds),
            self.seed.to_string(),
            self.params.clone(),
        ]
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Config(format!("{other:?}")),
    })?;
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Highest rate, then lowest mean MSE, then lexicographically smallest params.
pub fn best_row<'a>(rows: impl Iterator<Item = &'a MetricsRow>) -> Option<&'a MetricsRow> {
    rows.min_by(|a, b| {
        b.rate
            .total_cmp(&a.rate)
            .then(a.mean_mse.total_cmp(&b.mean_mse))
            .then(a.params.cmp(&b.params))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(rate: f64, mse: f64, params: &str) -> MetricsRow {
        MetricsRow {
            task: "mhn".into(),
            depth: 1,
            width: 3,
            n: 3,
            corruption: "none".into(),
            threshold: 0.005,
            retrieved: 0,
            total: 3,
            rate,
            mean_mse: mse,
            seconds: 0.0,
            seed: 0,
            params: params.into(),
        }
    }

    #[test]
    fn best_breaks_ties_in_order() {
        let rows = vec![r(0.5, 0.1, "b"), r(0.8, 0.2, "c"), r(0.8, 0.1, "z"), r(0.8, 0.1, "a")];
        assert_eq!(best_row(rows.iter()).unwrap().params, "a");
        assert!(best_row(std::iter::empty()).is_none());
    }

    #[test]
    fn csv_has_the_documented_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(&path, &[r(1.0, 0.0, "")]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("task,depth,width,N,corruption,threshold,retrieved,total,rate,mean_mse,seconds,seed,params\n"));
    }
}
