use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const METRICS_FILE: &str = "metrics.csv";

/// One row of the training log. Validation fields are present only on
/// validation epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub d_loss_train_real: f32,
    pub d_loss_train_fake: f32,
    pub d_acc_train_real: f32,
    pub d_acc_train_fake: f32,
    /// Composite objective: adversarial cross-entropy plus λ times L1.
    pub g_loss: f32,
    /// The L1 term alone.
    pub g_l1: f32,
    pub d_loss_val_real: Option<f32>,
    pub d_acc_val_real: Option<f32>,
}

pub const METRIC_COLUMNS: [&str; 9] = [
    "epoch",
    "d_loss_train_real",
    "d_loss_train_fake",
    "d_acc_train_real",
    "d_acc_train_fake",
    "g_loss",
    "g_l1",
    "d_loss_val_real",
    "d_acc_val_real",
];

impl EpochMetrics {
    /// Named values of every populated stream, in column order.
    pub fn streams(&self) -> Vec<(&'static str, f32)> {
        let mut out = vec![
            ("d_loss_train_real", self.d_loss_train_real),
            ("d_loss_train_fake", self.d_loss_train_fake),
            ("d_acc_train_real", self.d_acc_train_real),
            ("d_acc_train_fake", self.d_acc_train_fake),
            ("g_loss", self.g_loss),
            ("g_l1", self.g_l1),
        ];
        if let Some(v) = self.d_loss_val_real {
            out.push(("d_loss_val_real", v));
        }
        if let Some(v) = self.d_acc_val_real {
            out.push(("d_acc_val_real", v));
        }
        out
    }

    /// Name of the first non-finite stream, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.streams()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(name, _)| name)
    }
}

fn writer<W: Write>(has_headers: bool, out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(has_headers)
        .from_writer(out)
}

/// Appends one row, writing the header first if the file is new or empty.
pub fn append_metrics(path: &Path, row: &EpochMetrics) -> Result<()> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .context(|| format!("opening {}", path.display()))?;
    let mut w = writer(fresh, &file);
    w.serialize(row)
        .map_err(|e| Error::Runtime(format!("writing {}: {e}", path.display())))?;
    w.flush()
        .context(|| format!("writing {}", path.display()))?;
    drop(w);
    file.sync_data()
        .context(|| format!("syncing {}", path.display()))
}

/// Serialises a complete log, header included.
pub fn metrics_to_csv(rows: &[EpochMetrics]) -> Result<Vec<u8>> {
    let mut w = writer(true, Vec::new());
    if rows.is_empty() {
        w.write_record(METRIC_COLUMNS)
            .map_err(|e| Error::Runtime(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Runtime(e.to_string()))
}

/// Parses a metrics log; malformed rows are reported with their line number.
pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: bad header: {e}", path.display())))?
        .clone();
    if headers.iter().ne(METRIC_COLUMNS) {
        return Err(Error::Data(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            METRIC_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| {
                // Header is line 1, so data row i sits on line i + 2.
                Error::Data(format!("{}: row {}: {e}", path.display(), i + 2))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: usize, val: bool) -> EpochMetrics {
        EpochMetrics {
            epoch,
            d_loss_train_real: 0.25,
            d_loss_train_fake: 0.5,
            d_acc_train_real: 0.75,
            d_acc_train_fake: 1.0,
            g_loss: 12.5,
            g_l1: 0.125,
            d_loss_val_real: val.then_some(0.3),
            d_acc_val_real: val.then_some(0.6),
        }
    }

    #[test]
    fn append_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_FILE);
        let rows: Vec<_> = (1..=3).map(|e| row(e, e == 2)).collect();
        for r in &rows {
            append_metrics(&path, r).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRIC_COLUMNS.join(","));
        assert!(text.lines().nth(1).unwrap().ends_with(",,"));
        assert_eq!(read_metrics(&path).unwrap(), rows);
        assert_eq!(metrics_to_csv(&rows).unwrap(), text.into_bytes());
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_FILE);
        let mut text = String::from_utf8(metrics_to_csv(&[row(1, false)]).unwrap()).unwrap();
        text.push_str("2,oops,0,0,0,0,0,,\n");
        std::fs::write(&path, text).unwrap();
        let err = read_metrics(&path).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn non_finite_streams_are_named() {
        let mut r = row(1, true);
        assert_eq!(r.first_non_finite(), None);
        r.d_acc_val_real = Some(f32::NAN);
        assert_eq!(r.first_non_finite(), Some("d_acc_val_real"));
    }
}
