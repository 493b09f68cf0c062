//! Training loops for the generated (QT) and directly trained (classical)
//! CNN, evaluation, block-count sweeps, checkpoints and parameter accounting.

mod accounting;
mod checkpoint;
mod eval;
mod sweep;
mod train;

pub use accounting::{param_report, ParamReport, REFERENCE_TOTALS};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use eval::{evaluate, Confusion, Metrics, ModelParams};
pub use sweep::{sweep_blocks, SweepRow, SweepTable};
pub use train::{
    train, train_classical, train_qt, EpochRecord, Mode, RunRecord, Seeds, TrainConfig,
    TrainOutcome,
};
