use serde::{Deserialize, Serialize};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::generator::QtParams;
use crate::nn::{bce_loss, cnn_forward, CnnArchitecture};

/// Either the CNN parameters themselves or the triple that generates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Classical { theta: Vec<f64> },
    Qt(QtParams),
}

impl ModelParams {
    pub fn theta(&self, arch: &CnnArchitecture) -> Result<Vec<f64>> {
        match self {
            ModelParams::Classical { theta } => Ok(theta.clone()),
            ModelParams::Qt(p) => Ok(p.theta(arch)?.into_vec()),
        }
    }

    pub fn n_trainable(&self) -> usize {
        match self {
            ModelParams::Classical { theta } => theta.len(),
            ModelParams::Qt(p) => p.n_trainable(),
        }
    }
}

/// Positive class is label 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Predictions are thresholded at ŷ ≥ 0.5 → class 1.
pub fn metrics_from_predictions(labels: &[u8], predictions: &[f64]) -> Result<Metrics> {
    let loss = bce_loss(labels, predictions)?;
    let mut c = Confusion::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p >= 0.5) {
            (1, true) => c.true_positive += 1,
            (1, false) => c.false_negative += 1,
            (_, true) => c.false_positive += 1,
            (_, false) => c.true_negative += 1,
        }
    }
    let correct = c.true_positive + c.true_negative;
    Ok(Metrics {
        loss,
        accuracy: correct as f64 / labels.len() as f64,
        confusion: c,
    })
}

pub(crate) fn evaluate_theta(
    arch: &CnnArchitecture,
    theta: &[f64],
    split: &WindowedDataset,
) -> Result<Metrics> {
    if split.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty split"));
    }
    let predictions = cnn_forward(arch, theta, &split.samples)?;
    metrics_from_predictions(&split.labels, &predictions)
}

pub fn evaluate(
    arch: &CnnArchitecture,
    params: &ModelParams,
    split: &WindowedDataset,
) -> Result<Metrics> {
    if split.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty split"));
    }
    evaluate_theta(arch, &params.theta(arch)?, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced_split(arch: &CnnArchitecture) -> WindowedDataset {
        let mut ds = WindowedDataset::empty(arch.window, arch.features);
        for i in 0..10 {
            ds.samples.push(vec![i as f64 * 0.1; arch.input_len()]);
            ds.labels.push((i % 2) as u8);
        }
        ds
    }

    #[test]
    fn zero_theta_ties_to_positive_class() {
        let arch = CnnArchitecture::default();
        let params = ModelParams::Classical {
            theta: vec![0.0; arch.n_params()],
        };
        let m = evaluate(&arch, &params, &balanced_split(&arch)).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.confusion.true_positive, 5);
        assert_eq!(m.confusion.false_positive, 5);
        assert_eq!(m.confusion.true_negative + m.confusion.false_negative, 0);
    }

    #[test]
    fn perfect_predictor() {
        let m = metrics_from_predictions(&[1, 0, 1], &[0.9, 0.2, 0.6]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion.false_positive + m.confusion.false_negative, 0);
    }

    #[test]
    fn empty_split_rejected() {
        let arch = CnnArchitecture::default();
        let params = ModelParams::Classical {
            theta: vec![0.0; arch.n_params()],
        };
        let empty = WindowedDataset::empty(5, 26);
        assert!(matches!(
            evaluate(&arch, &params, &empty),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn generator_and_generated_theta_agree() {
        let arch = CnnArchitecture::default();
        let qt = QtParams::init(&arch, 12, 20, 3).unwrap();
        let theta = qt.theta(&arch).unwrap().into_vec();
        let split = balanced_split(&arch);
        let a = evaluate(&arch, &ModelParams::Qt(qt), &split).unwrap();
        let b = evaluate(&arch, &ModelParams::Classical { theta }, &split).unwrap();
        assert_eq!(a, b);
    }
}
