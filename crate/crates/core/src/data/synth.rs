use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::window::WindowedDataset;

/// Two isotropic unit-variance Gaussian classes in window space whose means
/// are `separation` apart along the all-ones direction. Class 0 samples come
/// first, then class 1.
pub fn synth_generate(
    n_per_class: usize,
    window: usize,
    features: usize,
    separation: f64,
    seed: u64,
) -> Result<WindowedDataset> {
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let dim = window * features;
    if dim == 0 {
        return Err(Error::invalid("synthetic windows need a non-zero shape"));
    }
    let offset = 0.5 * separation / (dim as f64).sqrt();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = WindowedDataset::empty(window, features);
    for (label, mean) in [(0u8, -offset), (1u8, offset)] {
        for _ in 0..n_per_class {
            ds.samples
                .push((0..dim).map(|_| mean + noise.sample(&mut rng)).collect());
            ds.labels.push(label);
        }
    }
    Ok(ds)
}
