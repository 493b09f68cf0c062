use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train_classical, train_qt, Mode, RunRecord, TrainConfig};
use crate::data::Splits;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    /// `None` for the classical baseline.
    pub n_blocks: Option<usize>,
    pub trainable: usize,
    pub ratio: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl SweepRow {
    fn from_record(r: &RunRecord) -> Self {
        Self {
            mode: r.config.mode,
            n_blocks: (r.config.mode == Mode::Qt).then_some(r.config.n_blocks),
            trainable: r.trainable,
            ratio: r.parameter_ratio,
            train_accuracy: r.train.accuracy,
            test_accuracy: r.test.accuracy,
        }
    }
}

/// QT rows in the requested block order, then the classical baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,n_blocks,trainable,ratio,train_accuracy,test_accuracy\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                r.mode,
                r.n_blocks.map(|b| b.to_string()).unwrap_or_default(),
                r.trainable,
                r.ratio,
                r.train_accuracy,
                r.test_accuracy
            ));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<10} {:>8} {:>10} {:>8} {:>10} {:>10}\n",
            "mode", "blocks", "trainable", "ratio", "train acc", "test acc"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:>8} {:>10} {:>7.2}% {:>10.4} {:>10.4}\n",
                r.mode.to_string(),
                r.n_blocks.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
                r.trainable,
                100.0 * r.ratio,
                r.train_accuracy,
                r.test_accuracy
            ));
        }
        s
    }
}

/// One QT run per block count plus the classical baseline, all on the same
/// splits and seeds. Runs execute in parallel; rows keep input order.
pub fn sweep_blocks(config: &TrainConfig, blocks: &[usize], data: &Splits) -> Result<SweepTable> {
    if blocks.is_empty() {
        return Err(Error::invalid("block list is empty"));
    }
    let mut jobs: Vec<Option<usize>> = blocks.iter().copied().map(Some).collect();
    jobs.push(None);
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|job| match job {
            Some(b) => train_qt(
                &TrainConfig {
                    n_blocks: *b,
                    ..config.clone()
                },
                data,
            ),
            None => train_classical(config, data),
        })
        .map(|r| r.map(|o| o.record))
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        rows: records.iter().map(SweepRow::from_record).collect(),
        records,
    })
}
