//! Quantum-to-classical weight generation.
//!
//! Every CNN parameter θ_i is produced from basis state |i⟩ of the circuit:
//! the mapping network reads `[bits of i, p_i]` and emits one real number,
//! then the scaling model applies the affine `(scale, shift)` pair of the
//! layer group that owns index i. Basis states beyond the CNN size are
//! simulated but unused.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{CnnArchitecture, N_LAYER_GROUPS};
use crate::qsim::{self, PhiVector, QnnConfig};

/// Hidden width of the mapping network; with 12 qubits it has 301 parameters.
pub const DEFAULT_MAPPING_HIDDEN: usize = 20;

/// ⌈log₂ m⌉, and 1 for m = 1.
pub fn required_qubits(m: usize) -> Result<usize> {
    match m {
        0 => Err(Error::invalid("cannot encode zero parameters")),
        1 => Ok(1),
        m => Ok((m - 1).ilog2() as usize + 1),
    }
}

/// `[bit_0, …, bit_{N−1}, probability]`, bits big-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingInput(Vec<f64>);

impl MappingInput {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn build_mapping_input(
    basis_index: usize,
    probability: f64,
    n_qubits: usize,
) -> Result<MappingInput> {
    if n_qubits == 0 || n_qubits >= usize::BITS as usize || basis_index >> n_qubits != 0 {
        return Err(Error::invalid(format!(
            "basis index {basis_index} does not fit in {n_qubits} qubits"
        )));
    }
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::invalid(format!(
            "probability {probability} outside [0, 1]"
        )));
    }
    let mut v: Vec<f64> = (0..n_qubits)
        .map(|q| ((basis_index >> (n_qubits - 1 - q)) & 1) as f64)
        .collect();
    v.push(probability);
    Ok(MappingInput(v))
}

/// Two-layer network `w₂·tanh(W₁x + b₁) + b₂`.
///
/// γ is stored flat as `[W₁ (hidden × inputs, row-major), b₁, w₂, b₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingModel {
    inputs: usize,
    hidden: usize,
    gamma: Vec<f64>,
}

impl MappingModel {
    pub fn param_count(n_qubits: usize, hidden: usize) -> usize {
        (n_qubits + 1) * hidden + hidden + hidden + 1
    }

    pub fn zeros(n_qubits: usize, hidden: usize) -> Self {
        Self {
            inputs: n_qubits + 1,
            hidden,
            gamma: vec![0.0; Self::param_count(n_qubits, hidden)],
        }
    }

    pub fn from_gamma(n_qubits: usize, hidden: usize, gamma: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(n_qubits, hidden);
        if gamma.len() != expected {
            return Err(Error::invalid(format!(
                "mapping model with {n_qubits} qubits and hidden width {hidden} needs {expected} parameters, got {}",
                gamma.len()
            )));
        }
        Ok(Self {
            inputs: n_qubits + 1,
            hidden,
            gamma,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, hidden: usize, rng: &mut R) -> Self {
        let mut model = Self::zeros(n_qubits, hidden);
        let inputs = model.inputs;
        let b1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let b2 = (6.0 / (hidden + 1) as f64).sqrt();
        for w in &mut model.gamma[..inputs * hidden] {
            *w = rng.random_range(-b1..=b1);
        }
        let w2 = model.w2_range();
        for w in &mut model.gamma[w2] {
            *w = rng.random_range(-b2..=b2);
        }
        model
    }

    pub fn n_qubits(&self) -> usize {
        self.inputs - 1
    }

    pub fn input_width(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_params(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_mut(&mut self) -> &mut [f64] {
        &mut self.gamma
    }

    fn w1(&self) -> &[f64] {
        &self.gamma[..self.inputs * self.hidden]
    }

    fn b1(&self) -> &[f64] {
        let s = self.inputs * self.hidden;
        &self.gamma[s..s + self.hidden]
    }

    fn w2_range(&self) -> Range<usize> {
        let s = (self.inputs + 1) * self.hidden;
        s..s + self.hidden
    }

    fn b2(&self) -> f64 {
        self.gamma[self.gamma.len() - 1]
    }

    /// Hidden activations into `hidden`; returns the network output.
    fn eval_into(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let w2 = &self.gamma[self.w2_range()];
        let mut out = self.b2();
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.w1()[j * self.inputs..(j + 1) * self.inputs];
            let pre = self.b1()[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            *h = pre.tanh();
            out += w2[j] * *h;
        }
        out
    }
}

pub fn mapping_forward(model: &MappingModel, input: &MappingInput) -> Result<f64> {
    if input.0.len() != model.inputs {
        return Err(Error::invalid(format!(
            "mapping input has width {} but the model expects {}",
            input.0.len(),
            model.inputs
        )));
    }
    let mut hidden = vec![0.0; model.hidden];
    Ok(model.eval_into(&input.0, &mut hidden))
}

/// Per-layer-group affine transform θ = scale·G + shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel {
    pub scale: [f64; N_LAYER_GROUPS],
    pub shift: [f64; N_LAYER_GROUPS],
}

impl Default for ScalingModel {
    fn default() -> Self {
        Self {
            scale: [1.0; N_LAYER_GROUPS],
            shift: [0.0; N_LAYER_GROUPS],
        }
    }
}

impl ScalingModel {
    pub const N_PARAMS: usize = 2 * N_LAYER_GROUPS;

    /// Per-group affine map that takes the mapping outputs `mapped` (one per
    /// CNN parameter) to zero mean and the standard deviation of a
    /// Glorot-uniform draw for that layer. Groups with (near-)constant output
    /// keep scale 1 and are only centred.
    pub fn calibrated(mapped: &[f64], arch: &CnnArchitecture) -> Self {
        let mut s = Self::default();
        for (l, (range, layer)) in arch.group_ranges().into_iter().zip(arch.layers()).enumerate() {
            let g = &mapped[range];
            if g.is_empty() {
                continue;
            }
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let sd = (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 {
                s.scale[l] = layer.glorot_bound() / 3f64.sqrt() / sd;
            }
            s.shift[l] = -s.scale[l] * mean;
        }
        s
    }

    /// `[scale_0, shift_0, scale_1, shift_1, …]`.
    pub fn to_flat(&self) -> [f64; Self::N_PARAMS] {
        let mut out = [0.0; Self::N_PARAMS];
        for l in 0..N_LAYER_GROUPS {
            out[2 * l] = self.scale[l];
            out[2 * l + 1] = self.shift[l];
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::N_PARAMS {
            return Err(Error::invalid(format!(
                "scaling model needs {} parameters, got {}",
                Self::N_PARAMS,
                flat.len()
            )));
        }
        let mut s = Self::default();
        for l in 0..N_LAYER_GROUPS {
            s.scale[l] = flat[2 * l];
            s.shift[l] = flat[2 * l + 1];
        }
        Ok(s)
    }
}

/// Flattened CNN parameters in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GenerationCache {
    qnn: QnnConfig,
    mapping_hidden: usize,
    pub probabilities: Vec<f64>,
    /// Mapping-network output G(x_i) for each used basis index.
    pub mapped: Vec<f64>,
    /// tanh activations, `M × hidden`.
    hidden: Vec<f64>,
    pub theta: ThetaVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QtGradients {
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Same `[scale, shift]` interleaving as [`ScalingModel::to_flat`].
    pub scaling: Vec<f64>,
}

fn check_generation(
    config: &QnnConfig,
    phi: &PhiVector,
    mapping: &MappingModel,
    arch: &CnnArchitecture,
) -> Result<usize> {
    let m = arch.n_params();
    let available = 1usize << config.n_qubits;
    if available < m {
        return Err(Error::Capacity {
            n_qubits: config.n_qubits,
            available,
            required: m,
        });
    }
    if mapping.input_width() != config.n_qubits + 1 {
        return Err(Error::invalid(format!(
            "mapping model input width {} does not match {} qubits",
            mapping.input_width(),
            config.n_qubits
        )));
    }
    if phi.len() != config.n_params() {
        return Err(Error::invalid(format!(
            "phi has {} angles, circuit needs {}",
            phi.len(),
            config.n_params()
        )));
    }
    Ok(m)
}

/// Runs the full chain and keeps the intermediate values.
pub fn generate_with_cache(
    config: &QnnConfig,
    phi: &PhiVector,
    mapping: &MappingModel,
    scaling: &ScalingModel,
    arch: &CnnArchitecture,
) -> Result<GenerationCache> {
    let m = check_generation(config, phi, mapping, arch)?;
    let n = config.n_qubits;
    let h = mapping.hidden();
    let probabilities = qsim::run_qnn(config, phi)?;
    let mut mapped = Vec::with_capacity(m);
    let mut hidden = vec![0.0; m * h];
    let mut theta = Vec::with_capacity(m);

    let mut x = vec![0.0; n + 1];
    for (l, range) in arch.group_ranges().into_iter().enumerate() {
        for i in range {
            fill_input(&mut x, i, probabilities[i], n);
            let g = mapping.eval_into(&x, &mut hidden[i * h..(i + 1) * h]);
            mapped.push(g);
            theta.push(scaling.scale[l] * g + scaling.shift[l]);
        }
    }
    Ok(GenerationCache {
        qnn: *config,
        mapping_hidden: h,
        probabilities,
        mapped,
        hidden,
        theta: ThetaVector(theta),
    })
}

fn fill_input(x: &mut [f64], index: usize, probability: f64, n: usize) {
    for (q, b) in x[..n].iter_mut().enumerate() {
        *b = ((index >> (n - 1 - q)) & 1) as f64;
    }
    x[n] = probability;
}

pub fn generate_theta(
    config: &QnnConfig,
    phi: &PhiVector,
    mapping: &MappingModel,
    scaling: &ScalingModel,
    arch: &CnnArchitecture,
) -> Result<ThetaVector> {
    Ok(generate_with_cache(config, phi, mapping, scaling, arch)?.theta)
}

/// Pulls ∂L/∂θ back to the circuit angles, the mapping weights and the
/// scaling parameters.
pub fn backprop_generation(
    dl_dtheta: &[f64],
    cache: &GenerationCache,
    phi: &PhiVector,
    mapping: &MappingModel,
    scaling: &ScalingModel,
    arch: &CnnArchitecture,
) -> Result<QtGradients> {
    let m = arch.n_params();
    let h = mapping.hidden();
    let n = cache.qnn.n_qubits;
    if cache.mapping_hidden != h
        || cache.theta.len() != m
        || cache.hidden.len() != m * h
        || mapping.n_qubits() != n
        || phi.len() != cache.qnn.n_params()
    {
        return Err(Error::State(
            "generation cache does not belong to this model and architecture; rerun the forward pass"
                .into(),
        ));
    }
    if dl_dtheta.len() != m {
        return Err(Error::invalid(format!(
            "theta gradient has {} entries, expected {m}",
            dl_dtheta.len()
        )));
    }

    let inputs = n + 1;
    let w1 = mapping.w1();
    let w2 = &mapping.gamma()[mapping.w2_range()];
    let mut d_w1 = vec![0.0; inputs * h];
    let mut d_b1 = vec![0.0; h];
    let mut d_w2 = vec![0.0; h];
    let mut d_b2 = 0.0;
    let mut d_scaling = [0.0; ScalingModel::N_PARAMS];
    let mut d_prob = vec![0.0; cache.qnn.dim()];
    let mut x = vec![0.0; inputs];
    let mut d_pre = vec![0.0; h];

    for (l, range) in arch.group_ranges().into_iter().enumerate() {
        for i in range {
            let g = dl_dtheta[i];
            d_scaling[2 * l] += g * cache.mapped[i];
            d_scaling[2 * l + 1] += g;
            let d_out = g * scaling.scale[l];
            if d_out == 0.0 {
                continue;
            }
            fill_input(&mut x, i, cache.probabilities[i], n);
            let hid = &cache.hidden[i * h..(i + 1) * h];
            d_b2 += d_out;
            let mut dp = 0.0;
            for j in 0..h {
                d_w2[j] += d_out * hid[j];
                let dz = d_out * w2[j] * (1.0 - hid[j] * hid[j]);
                d_pre[j] = dz;
                d_b1[j] += dz;
                dp += dz * w1[j * inputs + n];
            }
            for j in 0..h {
                let row = &mut d_w1[j * inputs..(j + 1) * inputs];
                for (dw, xv) in row.iter_mut().zip(&x) {
                    *dw += d_pre[j] * xv;
                }
            }
            d_prob[i] = dp;
        }
    }

    let d_phi = qsim::grad_probabilities(&cache.qnn, phi, &d_prob)?;
    let mut gamma = d_w1;
    gamma.extend_from_slice(&d_b1);
    gamma.extend_from_slice(&d_w2);
    gamma.push(d_b2);
    Ok(QtGradients {
        phi: d_phi,
        gamma,
        scaling: d_scaling.to_vec(),
    })
}

pub fn count_qt_params(config: &QnnConfig, mapping: &MappingModel, _scaling: &ScalingModel) -> usize {
    config.n_params() + mapping.n_params() + ScalingModel::N_PARAMS
}

/// The trainable triple (φ, γ, s) together with the circuit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtParams {
    pub qnn: QnnConfig,
    pub phi: PhiVector,
    pub mapping: MappingModel,
    pub scaling: ScalingModel,
}

impl QtParams {
    /// φ uniform in [−π, π], γ Glorot-uniform, and a scaling model
    /// calibrated by [`ScalingModel::calibrated`].
    pub fn init(arch: &CnnArchitecture, n_blocks: usize, hidden: usize, seed: u64) -> Result<Self> {
        let n_qubits = required_qubits(arch.n_params())?;
        let qnn = QnnConfig::new(n_qubits, n_blocks)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = PhiVector::random(&qnn, &mut rng);
        let mapping = MappingModel::random(n_qubits, hidden, &mut rng);
        let mut params = Self {
            qnn,
            phi,
            mapping,
            scaling: ScalingModel::default(),
        };
        let cache = params.forward(arch)?;
        params.scaling = ScalingModel::calibrated(&cache.mapped, arch);
        Ok(params)
    }

    pub fn n_trainable(&self) -> usize {
        count_qt_params(&self.qnn, &self.mapping, &self.scaling)
    }

    /// Shape consistency, for values that did not come through the
    /// constructors (e.g. deserialized checkpoints).
    pub fn validate(&self) -> Result<()> {
        QnnConfig::new(self.qnn.n_qubits, self.qnn.n_blocks)?;
        PhiVector::new(&self.qnn, self.phi.angles().to_vec())?;
        if self.mapping.input_width() != self.qnn.n_qubits + 1 {
            return Err(Error::invalid(format!(
                "mapping input width {} does not match {} qubits",
                self.mapping.input_width(),
                self.qnn.n_qubits
            )));
        }
        MappingModel::from_gamma(
            self.mapping.n_qubits(),
            self.mapping.hidden(),
            self.mapping.gamma().to_vec(),
        )?;
        Ok(())
    }

    pub fn forward(&self, arch: &CnnArchitecture) -> Result<GenerationCache> {
        generate_with_cache(&self.qnn, &self.phi, &self.mapping, &self.scaling, arch)
    }

    pub fn theta(&self, arch: &CnnArchitecture) -> Result<ThetaVector> {
        Ok(self.forward(arch)?.theta)
    }

    pub fn backward(
        &self,
        arch: &CnnArchitecture,
        cache: &GenerationCache,
        dl_dtheta: &[f64],
    ) -> Result<QtGradients> {
        backprop_generation(dl_dtheta, cache, &self.phi, &self.mapping, &self.scaling, arch)
    }

    /// `[φ, γ, s]` concatenated, the order used by the optimizer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.phi.angles().to_vec();
        v.extend_from_slice(self.mapping.gamma());
        v.extend_from_slice(&self.scaling.to_flat());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_trainable() {
            return Err(Error::invalid(format!(
                "expected {} trainable values, got {}",
                self.n_trainable(),
                flat.len()
            )));
        }
        let (phi, rest) = flat.split_at(self.phi.len());
        let (gamma, s) = rest.split_at(self.mapping.n_params());
        self.phi.angles_mut().copy_from_slice(phi);
        self.mapping.gamma_mut().copy_from_slice(gamma);
        self.scaling = ScalingModel::from_flat(s)?;
        Ok(())
    }
}

impl QtGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.phi.clone();
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.scaling);
        v
    }
}
