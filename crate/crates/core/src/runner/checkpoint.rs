use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::ModelParams;
use super::train::{Mode, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::nn::CnnArchitecture;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters with the architecture and configuration that produced
/// them. QT checkpoints hold (φ, γ, s); classical ones hold θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub mode: Mode,
    pub arch: CnnArchitecture,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            mode: outcome.record.config.mode,
            arch: outcome.record.config.arch,
            config: outcome.record.config.clone(),
            best_epoch: outcome.record.best_epoch,
            params: outcome.params.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.arch.validate()?;
        match (&self.params, self.mode) {
            (ModelParams::Classical { theta }, Mode::Classical) => {
                if theta.len() != self.arch.n_params() {
                    return Err(Error::Schema(format!(
                        "checkpoint holds {} weights, architecture needs {}",
                        theta.len(),
                        self.arch.n_params()
                    )));
                }
            }
            (ModelParams::Qt(p), Mode::Qt) => p
                .validate()
                .map_err(|e| Error::Schema(format!("invalid QT checkpoint: {e}")))?,
            _ => {
                return Err(Error::Schema(format!(
                    "checkpoint mode {} does not match its parameters",
                    self.mode
                )))
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("invalid checkpoint {}: {e}", path.display())))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{stratified_split, synth_generate, Splits, DEFAULT_RATIOS};
    use crate::runner::{evaluate, train_classical, train_qt};

    #[test]
    fn save_load_evaluate_round_trip() {
        let config = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let ds = synth_generate(20, 5, 26, 6.0, 1).unwrap();
        let idx = stratified_split(&ds.labels, DEFAULT_RATIOS, 2).unwrap();
        let data = Splits::from_indices(&ds, &idx).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for outcome in [
            train_qt(&config, &data).unwrap(),
            train_classical(&config, &data).unwrap(),
        ] {
            let ckpt = Checkpoint::from_outcome(&outcome);
            let path = dir.path().join("ckpt.json");
            ckpt.save(&path).unwrap();
            let loaded = Checkpoint::load(&path).unwrap();
            assert_eq!(loaded, ckpt);
            let m = evaluate(&loaded.arch, &loaded.params, &data.test).unwrap();
            assert_eq!(m, outcome.record.test);
        }
    }

    #[test]
    fn mismatched_mode_rejected() {
        let arch = CnnArchitecture::default();
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            mode: Mode::Qt,
            arch,
            config: TrainConfig::default(),
            best_epoch: 0,
            params: ModelParams::Classical {
                theta: vec![0.0; arch.n_params()],
            },
        };
        assert!(matches!(ckpt.validate(), Err(Error::Schema(_))));
    }
}
