use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{save_model, ModelState};
use crate::scalar::Scalar;

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose state was kept; 0 means no epoch beat the initial state.
    pub best_epoch: usize,
    pub initial_val_acc: f64,
    pub wall_time_secs: f64,
}

impl TrainHistory {
    pub fn best_val_acc(&self) -> f64 {
        match self.best_epoch {
            0 => self.initial_val_acc,
            e => self.records[e - 1].val_acc,
        }
    }

    /// Everything except wall time, for comparing runs.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.records == other.records && self.best_epoch == other.best_epoch && self.initial_val_acc == other.initial_val_acc
    }
}

/// Six significant digits, plain decimal notation where it fits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..=6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

pub fn history_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            sig6(r.train_loss),
            sig6(r.train_acc),
            sig6(r.val_loss),
            sig6(r.val_acc)
        ));
    }
    out
}

pub fn write_history(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let text = history_csv(records);
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Manifest(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != HISTORY_HEADER {
        return Err(Error::MalformedHeader(format!("history header {header:?}")));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Manifest(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Manifest(format!("bad history field {i} in {row:?}")))
        };
        out.push(EpochRecord {
            epoch: num(0)? as usize,
            train_loss: num(1)?,
            train_acc: num(2)?,
            val_loss: num(3)?,
            val_acc: num(4)?,
        });
    }
    Ok(out)
}

pub const CHECKPOINT_MODEL: &str = "checkpoint.smdl";
pub const CHECKPOINT_HISTORY: &str = "history.csv";

/// Atomically writes the model and the first `epoch` history rows into `dir`.
pub fn checkpoint<T: Scalar>(
    state: &ModelState<T>,
    history: &[EpochRecord],
    dir: &Path,
    epoch: usize,
) -> Result<(PathBuf, PathBuf)> {
    let model_path = dir.join(CHECKPOINT_MODEL);
    let history_path = dir.join(CHECKPOINT_HISTORY);
    save_model(state, &model_path)?;
    write_history(&history_path, &history[..epoch.min(history.len())])?;
    Ok((model_path, history_path))
}
