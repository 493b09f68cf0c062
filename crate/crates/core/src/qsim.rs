//! Real-amplitude statevector simulation of the Ry/CNOT block ansatz.
//!
//! Basis indices are read big-endian: qubit 0 is the most significant bit, so
//! basis index `0b0100100` on seven qubits is the bitstring `0100100` as
//! written. Ry and CNOT have real matrix entries, so amplitudes stay real and
//! are stored as `f64`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<f64>,
    n_qubits: usize,
}

impl Statevector {
    /// The all-zero state |0…0⟩.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amplitudes = vec![0.0; 1 << n_qubits];
        amplitudes[0] = 1.0;
        Ok(Self {
            amplitudes,
            n_qubits,
        })
    }

    /// Wraps a normalized amplitude vector whose length is a power of two.
    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a * a).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "amplitudes are not normalized (sum of squares {norm})"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Measurement probabilities |⟨i|ψ⟩|² in basis-index order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }

    fn mask(&self, qubit: usize, what: &str) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::invalid(format!(
                "{what} qubit {qubit} out of range for a {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(qubit_mask(self.n_qubits, qubit))
    }

    /// Applies Ry(angle) = [[cos, −sin], [sin, cos]] (half angles) to `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let mask = self.mask(qubit, "target")?;
        let (s, c) = (angle / 2.0).sin_cos();
        rotate_pairs(&mut self.amplitudes, mask, c, s);
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::invalid(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let cmask = self.mask(control, "control")?;
        let tmask = self.mask(target, "target")?;
        cnot_permute(&mut self.amplitudes, cmask, tmask);
        Ok(())
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "register size {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[inline]
fn qubit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// (a0, a1) ← (c·a0 − s·a1, s·a0 + c·a1) over every pair split by `mask`.
fn rotate_pairs(amps: &mut [f64], mask: usize, c: f64, s: f64) {
    let stride = mask << 1;
    for block in (0..amps.len()).step_by(stride) {
        let (lo, hi) = amps[block..block + stride].split_at_mut(mask);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x0, x1) = (*a0, *a1);
            *a0 = c * x0 - s * x1;
            *a1 = s * x0 + c * x1;
        }
    }
}

fn cnot_permute(amps: &mut [f64], cmask: usize, tmask: usize) {
    for i in 0..amps.len() {
        if i & cmask != 0 && i & tmask == 0 {
            amps.swap(i, i | tmask);
        }
    }
}

/// Shape of the block ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QnnConfig {
    pub n_qubits: usize,
    pub n_blocks: usize,
}

impl QnnConfig {
    pub fn new(n_qubits: usize, n_blocks: usize) -> Result<Self> {
        check_register(n_qubits)?;
        if n_blocks == 0 {
            return Err(Error::invalid("the ansatz needs at least one block"));
        }
        Ok(Self { n_qubits, n_blocks })
    }

    pub fn n_params(&self) -> usize {
        self.n_qubits * self.n_blocks
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.n_qubits, self.n_blocks).map(|_| ())
    }
}

/// Rotation angles ordered block-major, then by qubit index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiVector {
    angles: Vec<f64>,
}

impl PhiVector {
    pub fn new(config: &QnnConfig, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != config.n_params() {
            return Err(Error::invalid(format!(
                "expected {} rotation angles for {} qubits x {} blocks, got {}",
                config.n_params(),
                config.n_qubits,
                config.n_blocks,
                angles.len()
            )));
        }
        Ok(Self { angles })
    }

    /// Independent uniform angles in [−π, π].
    pub fn random<R: Rng + ?Sized>(config: &QnnConfig, rng: &mut R) -> Self {
        let angles = (0..config.n_params())
            .map(|_| rng.random_range(-PI..=PI))
            .collect();
        Self { angles }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

fn check_phi(config: &QnnConfig, phi: &PhiVector) -> Result<()> {
    config.validate()?;
    if phi.len() != config.n_params() {
        return Err(Error::invalid(format!(
            "phi has {} angles but the circuit has {} parameters",
            phi.len(),
            config.n_params()
        )));
    }
    Ok(())
}

/// Final state of the ansatz started from |0…0⟩.
pub fn final_state(config: &QnnConfig, phi: &PhiVector) -> Result<Statevector> {
    check_phi(config, phi)?;
    let n = config.n_qubits;
    let mut state = Statevector::zero(n)?;
    for block in phi.angles.chunks_exact(n) {
        for (q, &angle) in block.iter().enumerate() {
            let (s, c) = (angle / 2.0).sin_cos();
            rotate_pairs(&mut state.amplitudes, qubit_mask(n, q), c, s);
        }
        for k in 0..n.saturating_sub(1) {
            cnot_permute(
                &mut state.amplitudes,
                qubit_mask(n, k),
                qubit_mask(n, k + 1),
            );
        }
    }
    Ok(state)
}

/// Basis-state probabilities of the ansatz output.
pub fn run_qnn(config: &QnnConfig, phi: &PhiVector) -> Result<Vec<f64>> {
    Ok(final_state(config, phi)?.probabilities())
}

/// Vector-Jacobian product ∂L/∂φ given `cotangent` = ∂L/∂p.
///
/// Reverse-mode pass over the gate list: the final state is un-computed one
/// gate at a time with transposed gates while the adjoint ∂L/∂ψ is pulled
/// back alongside it. Memory stays at two statevectors regardless of depth.
pub fn grad_probabilities(
    config: &QnnConfig,
    phi: &PhiVector,
    cotangent: &[f64],
) -> Result<Vec<f64>> {
    check_phi(config, phi)?;
    if cotangent.len() != config.dim() {
        return Err(Error::invalid(format!(
            "cotangent has {} entries, expected {}",
            cotangent.len(),
            config.dim()
        )));
    }
    if let Some(i) = cotangent.iter().position(|c| !c.is_finite()) {
        return Err(Error::invalid(format!(
            "cotangent entry {i} is not finite ({})",
            cotangent[i]
        )));
    }

    let n = config.n_qubits;
    let mut psi = final_state(config, phi)?.amplitudes;
    // p_i = ψ_i², so ∂L/∂ψ_i = 2 c_i ψ_i.
    let mut adj: Vec<f64> = psi
        .iter()
        .zip(cotangent)
        .map(|(a, c)| 2.0 * c * a)
        .collect();
    let mut grad = vec![0.0; config.n_params()];

    for (b, block) in phi.angles.chunks_exact(n).enumerate().rev() {
        for k in (0..n.saturating_sub(1)).rev() {
            let (cm, tm) = (qubit_mask(n, k), qubit_mask(n, k + 1));
            cnot_permute(&mut psi, cm, tm);
            cnot_permute(&mut adj, cm, tm);
        }
        for (q, &angle) in block.iter().enumerate().rev() {
            let mask = qubit_mask(n, q);
            let (s, c) = (angle / 2.0).sin_cos();
            rotate_pairs(&mut psi, mask, c, -s);
            grad[b * n + q] = ry_derivative_overlap(&psi, &adj, mask, c, s);
            rotate_pairs(&mut adj, mask, c, -s);
        }
    }
    Ok(grad)
}

/// ⟨adj| dRy/dμ |psi⟩ with dRy/dμ = ½·[[−s, −c], [c, −s]].
fn ry_derivative_overlap(psi: &[f64], adj: &[f64], mask: usize, c: f64, s: f64) -> f64 {
    let stride = mask << 1;
    let mut acc = 0.0;
    for block in (0..psi.len()).step_by(stride) {
        for i0 in block..block + mask {
            let i1 = i0 | mask;
            let (x0, x1) = (psi[i0], psi[i1]);
            acc += adj[i0] * (-s * x0 - c * x1) + adj[i1] * (c * x0 - s * x1);
        }
    }
    0.5 * acc
}

/// ∂p_basis/∂φ_j by the parameter-shift rule, from two circuit evaluations at
/// φ_j ± π/2.
pub fn grad_parameter_shift(
    config: &QnnConfig,
    phi: &PhiVector,
    param_index: usize,
    basis_index: usize,
) -> Result<f64> {
    check_phi(config, phi)?;
    if param_index >= config.n_params() {
        return Err(Error::invalid(format!(
            "parameter index {param_index} out of range ({} parameters)",
            config.n_params()
        )));
    }
    if basis_index >= config.dim() {
        return Err(Error::invalid(format!(
            "basis index {basis_index} out of range ({} basis states)",
            config.dim()
        )));
    }
    let mut shifted = phi.clone();
    shifted.angles[param_index] += FRAC_PI_2;
    let plus = final_state(config, &shifted)?.amplitudes[basis_index].powi(2);
    shifted.angles[param_index] -= PI;
    let minus = final_state(config, &shifted)?.amplitudes[basis_index].powi(2);
    Ok((plus - minus) / 2.0)
}

/// Empirical frequencies of `n_shots` seeded categorical draws.
pub fn sample_shots(probabilities: &[f64], n_shots: usize, seed: u64) -> Result<Vec<f64>> {
    if n_shots == 0 {
        return Err(Error::invalid("n_shots must be positive"));
    }
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid(
            "probabilities must be finite and non-negative",
        ));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let dist = WeightedIndex::new(probabilities).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; probabilities.len()];
    for _ in 0..n_shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / n_shots as f64)
        .collect())
}
