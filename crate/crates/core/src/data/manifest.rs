use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scaler::{minmax_apply, minmax_fit, ScalerParams};
use super::split::{stratified_split, SplitIndices, Splits, DEFAULT_RATIOS};
use super::synth::synth_generate;
use super::table::{encode_labels, load_feature_csv, CsvOptions, EncodedTable, LabelMap};
use super::window::{make_windows, window_starts, WindowedDataset};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        columns: CsvOptions,
    },
    Synthetic {
        n_per_class: usize,
        features: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareOptions {
    pub window: usize,
    pub ratios: [f64; 3],
    pub split_seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            window: 5,
            ratios: DEFAULT_RATIOS,
            split_seed: 42,
        }
    }
}

/// Everything needed to rebuild the prepared splits bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub source: DataSource,
    pub options: PrepareOptions,
    pub feature_names: Vec<String>,
    pub label_map: LabelMap,
    /// Absent for synthetic data, which is generated on the target scale.
    pub scaler: Option<ScalerParams>,
    pub n_windows: usize,
    pub class_counts: [usize; 2],
    pub splits: SplitIndices,
}

impl Manifest {
    pub fn window(&self) -> usize {
        self.options.window
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("invalid manifest {}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Schema(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    /// Re-derives the windowed splits from the recorded source.
    pub fn materialize(&self) -> Result<Splits> {
        let ds = match &self.source {
            DataSource::Csv { path, columns } => {
                let table = encode_labels(&load_feature_csv(path, columns)?)?;
                if table.label_map != self.label_map {
                    return Err(Error::Schema(format!(
                        "labels in {} are {:?}, manifest recorded {:?}",
                        path.display(),
                        table.label_map.classes,
                        self.label_map.classes
                    )));
                }
                let scaler = self
                    .scaler
                    .as_ref()
                    .ok_or_else(|| Error::Schema("CSV manifest without scaler parameters".into()))?;
                scaled_windows(&table, scaler, self.window())?
            }
            DataSource::Synthetic {
                n_per_class,
                features,
                separation,
                seed,
            } => synth_generate(*n_per_class, self.window(), *features, *separation, *seed)?,
        };
        if ds.len() != self.n_windows {
            return Err(Error::Schema(format!(
                "source now yields {} windows, manifest recorded {}",
                ds.len(),
                self.n_windows
            )));
        }
        Splits::from_indices(&ds, &self.splits)
    }
}

fn scaled_windows(
    table: &EncodedTable,
    scaler: &ScalerParams,
    window: usize,
) -> Result<WindowedDataset> {
    let scaled = EncodedTable {
        rows: minmax_apply(scaler, &table.rows)?,
        ..table.clone()
    };
    make_windows(&scaled, window)
}

/// encode → window → stratified split → fit scaler on the frames of the
/// training windows → scale → re-window.
pub fn prepare(source: &DataSource, options: &PrepareOptions) -> Result<(Manifest, Splits)> {
    match source {
        DataSource::Csv { path, columns } => {
            let table = encode_labels(&load_feature_csv(path, columns)?)?;
            let starts = window_starts(&table, options.window)?;
            let labels: Vec<u8> = starts.iter().map(|&s| table.labels[s]).collect();
            let splits = stratified_split(&labels, options.ratios, options.split_seed)?;
            let train_rows: BTreeSet<usize> = splits
                .train
                .iter()
                .flat_map(|&k| starts[k]..starts[k] + options.window)
                .collect();
            let fit_rows: Vec<usize> = train_rows.into_iter().collect();
            let scaler = minmax_fit(&table.rows, &fit_rows)?;
            let ds = scaled_windows(&table, &scaler, options.window)?;
            let manifest = Manifest {
                version: MANIFEST_VERSION,
                source: source.clone(),
                options: options.clone(),
                feature_names: table.feature_names.clone(),
                label_map: table.label_map.clone(),
                scaler: Some(scaler),
                n_windows: ds.len(),
                class_counts: ds.class_counts(),
                splits,
            };
            let out = Splits::from_indices(&ds, &manifest.splits)?;
            Ok((manifest, out))
        }
        DataSource::Synthetic {
            n_per_class,
            features,
            separation,
            seed,
        } => {
            let ds = synth_generate(*n_per_class, options.window, *features, *separation, *seed)?;
            let splits = stratified_split(&ds.labels, options.ratios, options.split_seed)?;
            let manifest = Manifest {
                version: MANIFEST_VERSION,
                source: source.clone(),
                options: options.clone(),
                feature_names: (0..*features).map(|j| format!("x{j}")).collect(),
                label_map: LabelMap {
                    classes: ["0".into(), "1".into()],
                },
                scaler: None,
                n_windows: ds.len(),
                class_counts: ds.class_counts(),
                splits,
            };
            let out = Splits::from_indices(&ds, &manifest.splits)?;
            Ok((manifest, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn csv_fixture(dir: &Path) -> PathBuf {
        let mut s = String::from("a,b,LABEL\n");
        for i in 0..40 {
            let label = if i < 20 { "REAL" } else { "FAKE" };
            writeln!(s, "{},{},{label}", i as f64 * 0.5, 100.0 - i as f64).unwrap();
        }
        let p = dir.join("features.csv");
        std::fs::write(&p, s).unwrap();
        p
    }

    #[test]
    fn csv_pipeline_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let source = DataSource::Csv {
            path: csv_fixture(dir.path()),
            columns: CsvOptions::default(),
        };
        let opts = PrepareOptions::default();
        let (manifest, splits) = prepare(&source, &opts).unwrap();
        assert_eq!(manifest.n_windows, 2 * (20 - 5 + 1));
        assert_eq!(manifest.class_counts, [16, 16]);
        assert_eq!(manifest.label_map.classes, ["FAKE".to_string(), "REAL".to_string()]);
        for s in splits.train.samples.iter() {
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        assert_eq!(loaded, manifest);
        assert_eq!(loaded.materialize().unwrap(), splits);

        let (again, _) = prepare(&source, &opts).unwrap();
        assert_eq!(again.to_json().unwrap(), manifest.to_json().unwrap());
    }

    #[test]
    fn scaler_fitted_on_training_frames_only() {
        let dir = tempfile::tempdir().unwrap();
        let source = DataSource::Csv {
            path: csv_fixture(dir.path()),
            columns: CsvOptions::default(),
        };
        let (manifest, splits) = prepare(&source, &PrepareOptions::default()).unwrap();
        let scaler = manifest.scaler.unwrap();
        // Fitted minimum of feature a equals the smallest raw value inside a
        // training window; every training window touches [0, 1] only.
        let train_min = splits
            .train
            .samples
            .iter()
            .flat_map(|s| s.chunks(2).map(|f| f[0]))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(train_min, 0.0);
        assert!(scaler.min[0] >= 0.0 && scaler.max[0] <= 19.5);
    }

    #[test]
    fn synthetic_manifest_rebuilds() {
        let source = DataSource::Synthetic {
            n_per_class: 50,
            features: 4,
            separation: 2.0,
            seed: 9,
        };
        let (manifest, splits) = prepare(&source, &PrepareOptions::default()).unwrap();
        assert_eq!(splits.train.len(), 80);
        assert_eq!(manifest.materialize().unwrap(), splits);
    }

    #[test]
    fn version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let source = DataSource::Synthetic {
            n_per_class: 10,
            features: 2,
            separation: 1.0,
            seed: 1,
        };
        let (mut manifest, _) = prepare(&source, &PrepareOptions::default()).unwrap();
        manifest.version = 99;
        let path = dir.path().join("m.json");
        manifest.save(&path).unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Schema(_))));
    }
}
