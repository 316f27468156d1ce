use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::IngestError;
use crate::gbdt::RoundMetrics;
use crate::mlp::EpochMetrics;

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    let wrap = |e| IngestError::csv(path, e);
    writer.write_record(header).map_err(wrap)?;
    for r in rows {
        writer.serialize(r).map_err(wrap)?;
    }
    let mut inner = writer
        .into_inner()
        .map_err(|e| IngestError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| IngestError::io(path, e))
}

/// `round,eta,train_mae,val_mae`, one line per boosting round.
pub fn write_round_metrics(rows: &[RoundMetrics], path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_rows(rows, &["round", "eta", "train_mae", "val_mae"], path.as_ref())
}

/// `epoch,lr,train_mae,val_mae`, one line per epoch.
pub fn write_epoch_metrics(rows: &[EpochMetrics], path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_rows(rows, &["epoch", "lr", "train_mae", "val_mae"], path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_log_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rounds.csv");
        let rows = [RoundMetrics {
            round: 0,
            eta: 0.5,
            train_mae: 1.25,
            val_mae: 2.0,
        }];
        write_round_metrics(&rows, &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "round,eta,train_mae,val_mae\n0,0.5,1.25,2.0\n"
        );
    }

    #[test]
    fn epoch_log_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("epochs.csv");
        let rows = [EpochMetrics {
            epoch: 3,
            lr: 0.001,
            train_mae: 4.0,
            val_mae: 5.5,
        }];
        write_epoch_metrics(&rows, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("epoch,lr,train_mae,val_mae"));
        assert_eq!(text.lines().count(), 2);
    }
}
