use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generator::{required_qubits, MappingModel, ScalingModel};
use crate::nn::CnnArchitecture;

/// Published trainable totals and ratios for the default model at the two
/// ends of the block sweep: `(n_blocks, total, ratio)`. The published totals
/// exceed the direct count by 3.
pub const REFERENCE_TOTALS: [(usize, usize, f64); 2] = [(12, 456, 0.135), (96, 1464, 0.434)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub classical: usize,
    pub n_qubits: usize,
    pub n_blocks: usize,
    pub qnn: usize,
    pub mapping: usize,
    pub scaling: usize,
    pub total: usize,
    pub ratio: f64,
}

impl ParamReport {
    pub fn overhead(&self) -> usize {
        self.mapping + self.scaling
    }

    /// Published reference `(total, ratio)` for this block count, when one
    /// exists for the default architecture.
    pub fn reference(&self) -> Option<(usize, f64)> {
        if self.classical != CnnArchitecture::default().n_params() {
            return None;
        }
        REFERENCE_TOTALS
            .iter()
            .find(|(b, _, _)| *b == self.n_blocks)
            .map(|&(_, t, r)| (t, r))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "classical CNN parameters (M): {}\n\
             qubits (N = ceil(log2 M)):     {}\n\
             circuit blocks:               {}\n\
             QNN rotation angles:          {}\n\
             mapping model:                {}\n\
             scaling model:                {}\n\
             QT trainable total:           {}\n\
             parameter ratio:              {:.2}%\n",
            self.classical,
            self.n_qubits,
            self.n_blocks,
            self.qnn,
            self.mapping,
            self.scaling,
            self.total,
            100.0 * self.ratio
        );
        if let Some((total, ratio)) = self.reference() {
            s.push_str(&format!(
                "reference total:              {total} ({:.1}%); the direct count above is {} lower, \
                 the reference does not itemize the difference\n",
                100.0 * ratio,
                total as i64 - self.total as i64
            ));
        }
        s
    }
}

pub fn param_report(
    arch: &CnnArchitecture,
    n_blocks: usize,
    mapping_hidden: usize,
) -> Result<ParamReport> {
    let classical = arch.n_params();
    let n_qubits = required_qubits(classical)?;
    let qnn = n_qubits * n_blocks;
    let mapping = MappingModel::param_count(n_qubits, mapping_hidden);
    let scaling = ScalingModel::N_PARAMS;
    let total = qnn + mapping + scaling;
    Ok(ParamReport {
        classical,
        n_qubits,
        n_blocks,
        qnn,
        mapping,
        scaling,
        total,
        ratio: total as f64 / classical as f64,
    })
}
