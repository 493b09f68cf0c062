//! Feature-table preprocessing: CSV ingestion, label encoding, min-max
//! scaling, sliding windows and stratified splits, plus a seeded synthetic
//! stand-in dataset.

mod manifest;
mod scaler;
mod split;
mod synth;
mod table;
mod window;

pub use manifest::{prepare, DataSource, Manifest, PrepareOptions, MANIFEST_VERSION};
pub use scaler::{minmax_apply, minmax_fit, ScalerParams};
pub use split::{stratified_split, SplitIndices, Splits, DEFAULT_RATIOS};
pub use synth::synth_generate;
pub use table::{encode_labels, load_feature_csv, CsvOptions, EncodedTable, FeatureTable, LabelMap};
pub use window::{make_windows, segments, WindowedDataset};
