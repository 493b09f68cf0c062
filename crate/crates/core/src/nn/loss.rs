use crate::error::{Error, Result};

/// Predictions are clamped to [ε, 1 − ε] before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy −(1/N) Σ [y log ŷ + (1 − y) log(1 − ŷ)].
pub fn bce_loss(labels: &[u8], predictions: &[f64]) -> Result<f64> {
    if labels.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("cannot average a loss over zero samples"));
    }
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(predictions) {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        total += match y {
            0 => -(1.0 - p).ln(),
            1 => -p.ln(),
            other => return Err(Error::invalid(format!("label {other} is not 0 or 1"))),
        };
    }
    Ok(total / labels.len() as f64)
}

/// The same mean cross-entropy evaluated from logits z, as
/// softplus(z) − y·z. Equal to [`bce_loss`] of sigmoid(z) wherever the
/// clamp is inactive, finite for every finite z, and its derivative in z is
/// exactly sigmoid(z) − y.
pub fn bce_with_logits(labels: &[u8], logits: &[f64]) -> Result<f64> {
    if labels.len() != logits.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} logits",
            labels.len(),
            logits.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("cannot average a loss over zero samples"));
    }
    let mut total = 0.0;
    for (&y, &z) in labels.iter().zip(logits) {
        if y > 1 {
            return Err(Error::invalid(format!("label {y} is not 0 or 1")));
        }
        total += z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(y) * z;
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_form_matches_probability_form() {
        let labels = [0, 1, 1, 0, 1];
        let logits = [-3.0, 0.0, 2.5, 0.7, -12.0];
        let preds: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let a = bce_with_logits(&labels, &logits).unwrap();
        let b = bce_loss(&labels, &preds).unwrap();
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        assert!((bce_with_logits(&[1], &[0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logit_form_stays_finite_and_sloped_when_saturated() {
        let l = bce_with_logits(&[0], &[800.0]).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
        let h = 1e-5;
        let d = (bce_with_logits(&[0], &[40.0 + h]).unwrap()
            - bce_with_logits(&[0], &[40.0 - h]).unwrap())
            / (2.0 * h);
        assert!((d - sigmoid(40.0)).abs() < 1e-6);
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        let l = bce_loss(&[1], &[1.0 - PROB_EPS]).unwrap();
        assert!(l.abs() < 1e-11);
        assert!(bce_loss(&[0], &[0.0]).unwrap() < 1e-11);
    }

    #[test]
    fn uninformative_prediction() {
        let l = bce_loss(&[1, 0], &[0.5, 0.5]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn quarter_prediction() {
        let l = bce_loss(&[1], &[0.25]).unwrap();
        assert!((l - 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(bce_loss(&[1, 0], &[0.5]).is_err());
        assert!(bce_loss(&[2], &[0.5]).is_err());
        assert!(bce_loss(&[], &[]).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(10.0) - 0.999_954_602_131_297_6).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
