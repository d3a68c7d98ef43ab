use serde::Serialize;

use crate::error::Result;
use crate::metrics::{compute_eer, compute_fa_at_fr, ScoredSet};

/// Validation metric used to pick the returned checkpoint (lower is better).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Eer,
    FaAtFr10,
}

pub fn select_metric(selection: Selection, set: &ScoredSet) -> Result<f64> {
    match selection {
        Selection::Eer => compute_eer(set),
        Selection::FaAtFr10 => Ok(compute_fa_at_fr(set, 10.0)?.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation metric in percent.
    pub val_metric: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch of the returned checkpoint.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_metric(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch.checked_sub(1)?).map(|e| e.val_metric)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tval_metric\n");
        for e in &self.epochs {
            s.push_str(&format!("{}\t{:.6}\t{:.4}\n", e.epoch, e.train_loss, e.val_metric));
        }
        s.push_str(&format!("best_epoch\t{}\n", self.best_epoch));
        s
    }
}
