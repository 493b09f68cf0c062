use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_theta, Metrics, ModelParams};
use crate::data::{Splits, WindowedDataset};
use crate::error::{Error, Result};
use crate::generator::{QtParams, DEFAULT_MAPPING_HIDDEN};
use crate::nn::{cnn_backward, AdamConfig, CnnArchitecture, TrainState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Qt,
    Classical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Qt => "qt",
            Mode::Classical => "classical",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qt" => Ok(Mode::Qt),
            "classical" => Ok(Mode::Classical),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected 'qt' or 'classical')"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
    pub split: u64,
}

impl Seeds {
    pub fn from_base(seed: u64) -> Self {
        Self {
            init: seed,
            shuffle: seed.wrapping_add(1),
            split: seed.wrapping_add(2),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_base(42)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_blocks: usize,
    pub mapping_hidden: usize,
    pub seeds: Seeds,
    pub arch: CnnArchitecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Qt,
            epochs: 50,
            batch_size: 32,
            learning_rate: AdamConfig::default().learning_rate,
            n_blocks: 12,
            mapping_hidden: DEFAULT_MAPPING_HIDDEN,
            seeds: Seeds::default(),
            arch: CnnArchitecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.mode == Mode::Qt {
            if self.n_blocks == 0 {
                return Err(Error::Config("QT mode needs at least one block".into()));
            }
            if self.mapping_hidden == 0 {
                return Err(Error::Config("mapping hidden width must be at least 1".into()));
            }
        }
        self.arch
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: Metrics,
    pub validation: Metrics,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    /// Validation metrics before any update.
    pub initial_validation: Metrics,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch improved on the initialization.
    pub best_epoch: usize,
    /// Best-validation parameters evaluated on each split.
    pub train: Metrics,
    pub validation: Metrics,
    pub test: Metrics,
    pub trainable: usize,
    pub classical_params: usize,
    pub parameter_ratio: f64,
}

impl RunRecord {
    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.seconds = 0.0;
        }
        r
    }

    pub fn test_accuracy(&self) -> f64 {
        self.test.accuracy
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
}

/// Glorot-uniform weights and zero biases, layer by layer.
fn init_theta(arch: &CnnArchitecture, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Vec::with_capacity(arch.n_params());
    for layer in arch.layers() {
        let bound = layer.glorot_bound();
        theta.extend((0..layer.weight_count()).map(|_| rng.random_range(-bound..=bound)));
        theta.extend(std::iter::repeat_n(0.0, layer.bias_count()));
    }
    theta
}

fn check_data(arch: &CnnArchitecture, data: &Splits) -> Result<()> {
    for (name, split) in [
        ("train", &data.train),
        ("validation", &data.validation),
        ("test", &data.test),
    ] {
        if split.is_empty() {
            return Err(Error::invalid(format!("{name} split is empty")));
        }
        if split.window != arch.window || split.features != arch.features {
            return Err(Error::Config(format!(
                "{name} split has {}x{} windows but the architecture expects {}x{}",
                split.window, split.features, arch.window, arch.features
            )));
        }
    }
    Ok(())
}

/// Parameters being optimized, with the gradient of one mini-batch.
enum Trainable {
    Classical(Vec<f64>),
    Qt(Box<QtParams>),
}

impl Trainable {
    fn flat(&self) -> Vec<f64> {
        match self {
            Trainable::Classical(t) => t.clone(),
            Trainable::Qt(p) => p.to_flat(),
        }
    }

    fn snapshot(&self) -> ModelParams {
        match self {
            Trainable::Classical(t) => ModelParams::Classical { theta: t.clone() },
            Trainable::Qt(p) => ModelParams::Qt((**p).clone()),
        }
    }

    /// θ is regenerated from (φ, γ, s) on every call in QT mode.
    fn theta(&self, arch: &CnnArchitecture) -> Result<Vec<f64>> {
        match self {
            Trainable::Classical(t) => Ok(t.clone()),
            Trainable::Qt(p) => Ok(p.theta(arch)?.into_vec()),
        }
    }

    fn loss_and_grad(
        &self,
        arch: &CnnArchitecture,
        batch: &[&Vec<f64>],
        labels: &[u8],
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            Trainable::Classical(theta) => cnn_backward(arch, theta, batch, labels),
            Trainable::Qt(p) => {
                let cache = p.forward(arch)?;
                let (loss, d_theta) = cnn_backward(arch, cache.theta.as_slice(), batch, labels)?;
                if !loss.is_finite() {
                    return Ok((loss, Vec::new()));
                }
                Ok((loss, p.backward(arch, &cache, &d_theta)?.to_flat()))
            }
        }
    }

    fn step(&mut self, opt: &mut TrainState, grads: &[f64]) -> Result<()> {
        match self {
            Trainable::Classical(theta) => opt.step(theta, grads),
            Trainable::Qt(p) => {
                let mut flat = p.to_flat();
                opt.step(&mut flat, grads)?;
                p.set_flat(&flat)
            }
        }
    }
}

fn evaluate_all(
    arch: &CnnArchitecture,
    params: &Trainable,
    splits: &[&WindowedDataset],
) -> Result<Vec<Metrics>> {
    let theta = params.theta(arch)?;
    splits
        .iter()
        .map(|s| evaluate_theta(arch, &theta, s))
        .collect()
}

fn better(candidate: &Metrics, best: &Metrics) -> bool {
    candidate.accuracy > best.accuracy
        || (candidate.accuracy == best.accuracy && candidate.loss < best.loss)
}

fn run(config: &TrainConfig, data: &Splits, mut params: Trainable) -> Result<TrainOutcome> {
    let arch = &config.arch;
    let classical_params = arch.n_params();
    let trainable = params.flat().len();
    let mut opt = TrainState::new(trainable, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.shuffle);
    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();

    let initial_validation = evaluate_all(arch, &params, &[&data.validation])?[0];
    let mut best = (0usize, initial_validation, params.snapshot());
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Vec<f64>> = chunk.iter().map(|&i| &data.train.samples[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let (loss, grads) = params.loss_and_grad(arch, &batch, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "{} training produced loss {loss} at epoch {epoch}, step {}",
                    config.mode,
                    step + 1
                )));
            }
            params.step(&mut opt, &grads)?;
        }
        let m = evaluate_all(arch, &params, &[&data.train, &data.validation])?;
        let record = EpochRecord {
            epoch,
            train: m[0],
            validation: m[1],
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "{} epoch {epoch}: train loss {:.4} acc {:.4}, validation loss {:.4} acc {:.4}",
            config.mode,
            record.train.loss,
            record.train.accuracy,
            record.validation.loss,
            record.validation.accuracy
        );
        if better(&record.validation, &best.1) {
            best = (epoch, record.validation, params.snapshot());
        }
        epochs.push(record);
    }

    let (best_epoch, _, best_params) = best;
    let theta = best_params.theta(arch)?;
    let train = evaluate_theta(arch, &theta, &data.train)?;
    let validation = evaluate_theta(arch, &theta, &data.validation)?;
    let test = evaluate_theta(arch, &theta, &data.test)?;
    Ok(TrainOutcome {
        record: RunRecord {
            config: config.clone(),
            initial_validation,
            epochs,
            best_epoch,
            train,
            validation,
            test,
            trainable,
            classical_params,
            parameter_ratio: trainable as f64 / classical_params as f64,
        },
        params: best_params,
    })
}

/// Trains (φ, γ, s); the CNN weights are regenerated from them at every step
/// and never updated directly.
pub fn train_qt(config: &TrainConfig, data: &Splits) -> Result<TrainOutcome> {
    let config = TrainConfig {
        mode: Mode::Qt,
        ..config.clone()
    };
    config.validate()?;
    check_data(&config.arch, data)?;
    let params = QtParams::init(
        &config.arch,
        config.n_blocks,
        config.mapping_hidden,
        config.seeds.init,
    )?;
    run(&config, data, Trainable::Qt(Box::new(params)))
}

/// Trains every CNN parameter directly.
pub fn train_classical(config: &TrainConfig, data: &Splits) -> Result<TrainOutcome> {
    let config = TrainConfig {
        mode: Mode::Classical,
        ..config.clone()
    };
    config.validate()?;
    check_data(&config.arch, data)?;
    let theta = init_theta(&config.arch, config.seeds.init);
    run(&config, data, Trainable::Classical(theta))
}

pub fn train(config: &TrainConfig, data: &Splits) -> Result<TrainOutcome> {
    match config.mode {
        Mode::Qt => train_qt(config, data),
        Mode::Classical => train_classical(config, data),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{stratified_split, synth_generate, DEFAULT_RATIOS};

    fn small_data(arch: &CnnArchitecture) -> Splits {
        let ds = synth_generate(30, arch.window, arch.features, 6.0, 11).unwrap();
        let idx = stratified_split(&ds.labels, DEFAULT_RATIOS, 12).unwrap();
        Splits::from_indices(&ds, &idx).unwrap()
    }

    #[test]
    fn zero_epochs_is_initialization_only() {
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let data = small_data(&config.arch);
        for out in [
            train_qt(&config, &data).unwrap(),
            train_classical(&config, &data).unwrap(),
        ] {
            assert!(out.record.epochs.is_empty());
            assert_eq!(out.record.best_epoch, 0);
            assert_eq!(out.record.validation, out.record.initial_validation);
        }
    }

    #[test]
    fn trainable_counts_and_ratios() {
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let data = small_data(&config.arch);
        let qt = train_qt(&config, &data).unwrap().record;
        assert_eq!(qt.trainable, 453);
        assert!((qt.parameter_ratio - 453.0 / 3373.0).abs() < 1e-15);
        let cl = train_classical(&config, &data).unwrap().record;
        assert_eq!(cl.trainable, 3373);
        assert_eq!(cl.parameter_ratio, 1.0);
    }

    #[test]
    fn short_runs_are_reproducible() {
        let config = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let data = small_data(&config.arch);
        let a = train_qt(&config, &data).unwrap();
        let b = train_qt(&config, &data).unwrap();
        assert_eq!(a.record.without_timing(), b.record.without_timing());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn config_errors() {
        let data = small_data(&CnnArchitecture::default());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train_qt(&bad, &data), Err(Error::Config(_))));
        let bad = TrainConfig {
            n_blocks: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train_qt(&bad, &data), Err(Error::Config(_))));
        let bad = TrainConfig {
            arch: CnnArchitecture::for_input(5, 20),
            ..TrainConfig::default()
        };
        assert!(matches!(train_classical(&bad, &data), Err(Error::Config(_))));
    }

    #[test]
    fn huge_learning_rate_fails_numerically_or_trains() {
        // A diverging run must surface as a numeric error, never as NaN
        // metrics in the record.
        let config = TrainConfig {
            epochs: 3,
            learning_rate: 1e6,
            mode: Mode::Classical,
            ..TrainConfig::default()
        };
        let data = small_data(&config.arch);
        match train(&config, &data) {
            Ok(out) => assert!(out.record.epochs.iter().all(|e| e.train.loss.is_finite())),
            Err(e) => assert_eq!(e.exit_code(), 3),
        }
    }
}
