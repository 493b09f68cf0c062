use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature range observed on the fitting rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// `max == min`; such features always map to 0.
    pub degenerate: Vec<bool>,
}

/// Fits min/max on `rows[i]` for every `i` in `fit_rows`.
pub fn minmax_fit(rows: &[Vec<f64>], fit_rows: &[usize]) -> Result<ScalerParams> {
    let Some(&first) = fit_rows.first() else {
        return Err(Error::invalid("cannot fit a scaler on an empty split"));
    };
    let width = rows
        .get(first)
        .ok_or_else(|| Error::invalid(format!("fit row {first} out of range")))?
        .len();
    let mut min = vec![f64::INFINITY; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    for &r in fit_rows {
        let row = rows
            .get(r)
            .ok_or_else(|| Error::invalid(format!("fit row {r} out of range")))?;
        if row.len() != width {
            return Err(Error::invalid(format!(
                "row {r} has {} features, expected {width}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    let degenerate = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    Ok(ScalerParams {
        min,
        max,
        degenerate,
    })
}

/// Maps each feature linearly onto [0, 1] and clamps values outside the
/// fitted range.
pub fn minmax_apply(params: &ScalerParams, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != params.min.len() {
                return Err(Error::invalid(format!(
                    "row {r} has {} features, scaler was fitted on {}",
                    row.len(),
                    params.min.len()
                )));
            }
            Ok(row
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if params.degenerate[j] {
                        0.0
                    } else {
                        ((v - params.min[j]) / (params.max[j] - params.min[j])).clamp(0.0, 1.0)
                    }
                })
                .collect())
        })
        .collect()
}
