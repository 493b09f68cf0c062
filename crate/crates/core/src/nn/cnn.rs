use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::loss::{bce_with_logits, sigmoid};
use crate::error::{Error, Result};

/// conv1, conv2, fc1, fc2.
pub const N_LAYER_GROUPS: usize = 4;

/// Shape of one parameterized layer, for parameter accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
            } => out_channels * in_channels * kernel,
            LayerSpec::Dense { inputs, outputs } => outputs * inputs,
        }
    }

    pub fn bias_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { out_channels, .. } => out_channels,
            LayerSpec::Dense { outputs, .. } => outputs,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    /// Half-width of the Glorot-uniform weight distribution.
    pub fn glorot_bound(&self) -> f64 {
        let (fan_in, fan_out) = match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
            } => (in_channels * kernel, out_channels * kernel),
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
        };
        (6.0 / (fan_in + fan_out).max(1) as f64).sqrt()
    }
}

pub fn count_params(layers: &[LayerSpec]) -> usize {
    layers.iter().map(LayerSpec::param_count).sum()
}

/// Two 1-D convolutions over the feature axis (window frames are the input
/// channels), each followed by ReLU and max-pool 2, then a ReLU hidden dense
/// layer and a single sigmoid output.
///
/// θ is laid out layer by layer; within a layer the weights come first
/// (row-major `[out][in][k]` or `[out][in]`) and the biases after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub window: usize,
    pub features: usize,
    pub conv1_channels: usize,
    pub conv1_kernel: usize,
    pub conv2_channels: usize,
    pub conv2_kernel: usize,
    pub hidden: usize,
}

impl Default for CnnArchitecture {
    /// 5 frames × 26 features; 3373 parameters.
    fn default() -> Self {
        Self::for_input(5, 26)
    }
}

impl CnnArchitecture {
    /// Default layer sizes for a `window × features` input.
    pub fn for_input(window: usize, features: usize) -> Self {
        Self {
            window,
            features,
            conv1_channels: 13,
            conv1_kernel: 3,
            conv2_channels: 2,
            conv2_kernel: 3,
            hidden: 257,
        }
    }

    pub fn input_len(&self) -> usize {
        self.window * self.features
    }

    fn conv1_len(&self) -> usize {
        (self.features + 1).saturating_sub(self.conv1_kernel)
    }

    fn pool1_len(&self) -> usize {
        self.conv1_len() / 2
    }

    fn conv2_len(&self) -> usize {
        (self.pool1_len() + 1).saturating_sub(self.conv2_kernel)
    }

    fn pool2_len(&self) -> usize {
        self.conv2_len() / 2
    }

    pub fn flatten_len(&self) -> usize {
        self.conv2_channels * self.pool2_len()
    }

    pub fn layers(&self) -> [LayerSpec; N_LAYER_GROUPS] {
        [
            LayerSpec::Conv1d {
                in_channels: self.window,
                out_channels: self.conv1_channels,
                kernel: self.conv1_kernel,
            },
            LayerSpec::Conv1d {
                in_channels: self.conv1_channels,
                out_channels: self.conv2_channels,
                kernel: self.conv2_kernel,
            },
            LayerSpec::Dense {
                inputs: self.flatten_len(),
                outputs: self.hidden,
            },
            LayerSpec::Dense {
                inputs: self.hidden,
                outputs: 1,
            },
        ]
    }

    pub fn n_params(&self) -> usize {
        count_params(&self.layers())
    }

    /// θ index range of each layer group (weights and biases together).
    pub fn group_ranges(&self) -> [Range<usize>; N_LAYER_GROUPS] {
        let mut start = 0;
        self.layers().map(|l| {
            let r = start..start + l.param_count();
            start = r.end;
            r
        })
    }

    /// Checks that every stage has a non-empty output.
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("window", self.window),
            ("features", self.features),
            ("conv1 channels", self.conv1_channels),
            ("conv1 kernel", self.conv1_kernel),
            ("conv2 channels", self.conv2_channels),
            ("conv2 kernel", self.conv2_kernel),
            ("hidden width", self.hidden),
            ("conv1 output length", self.conv1_len()),
            ("pool1 output length", self.pool1_len()),
            ("conv2 output length", self.conv2_len()),
            ("pool2 output length", self.pool2_len()),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::invalid(format!(
                "architecture {self:?} has zero {name}"
            ))),
            None => Ok(()),
        }
    }
}

pub fn count_cnn_params(arch: &CnnArchitecture) -> usize {
    arch.n_params()
}

/// Borrowed per-layer slices of θ.
struct Params<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    w3: &'a [f64],
    b3: &'a [f64],
    w4: &'a [f64],
    b4: f64,
}

impl<'a> Params<'a> {
    fn split(arch: &CnnArchitecture, theta: &'a [f64]) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.n_params() {
            return Err(Error::invalid(format!(
                "theta has {} values but the architecture has {} parameters",
                theta.len(),
                arch.n_params()
            )));
        }
        let [l1, l2, l3, l4] = arch.layers();
        let (w1, rest) = theta.split_at(l1.weight_count());
        let (b1, rest) = rest.split_at(l1.bias_count());
        let (w2, rest) = rest.split_at(l2.weight_count());
        let (b2, rest) = rest.split_at(l2.bias_count());
        let (w3, rest) = rest.split_at(l3.weight_count());
        let (b3, rest) = rest.split_at(l3.bias_count());
        let (w4, rest) = rest.split_at(l4.weight_count());
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            w4,
            b4: rest[0],
        })
    }
}

/// Intermediate activations of one sample.
struct Trace {
    conv1: Vec<f64>,
    pool1: Vec<f64>,
    pool1_arg: Vec<usize>,
    conv2: Vec<f64>,
    pool2: Vec<f64>,
    pool2_arg: Vec<usize>,
    hidden: Vec<f64>,
    logit: f64,
}

fn conv1d(input: &[f64], in_ch: usize, len: usize, w: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let out_len = len + 1 - k;
    let mut out = Vec::with_capacity(b.len() * out_len);
    for (o, &bias) in b.iter().enumerate() {
        let wo = &w[o * in_ch * k..(o + 1) * in_ch * k];
        for t in 0..out_len {
            let mut acc = bias;
            for c in 0..in_ch {
                let xs = &input[c * len + t..c * len + t + k];
                let ws = &wo[c * k..(c + 1) * k];
                acc += xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>();
            }
            out.push(acc.max(0.0));
        }
    }
    out
}

/// Accumulates weight/bias gradients and optionally the input gradient.
/// `dout` is the gradient w.r.t. the post-ReLU output; `out` the output itself.
#[allow(clippy::too_many_arguments)]
#[allow(clippy::needless_range_loop)]
fn conv1d_backward(
    input: &[f64],
    in_ch: usize,
    len: usize,
    w: &[f64],
    k: usize,
    out: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dinput: Option<&mut [f64]>,
) {
    let out_len = len + 1 - k;
    for o in 0..db.len() {
        for t in 0..out_len {
            let idx = o * out_len + t;
            if out[idx] <= 0.0 {
                continue;
            }
            let g = dout[idx];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            for c in 0..in_ch {
                let base = (o * in_ch + c) * k;
                for j in 0..k {
                    dw[base + j] += g * input[c * len + t + j];
                    if let Some(di) = dinput.as_deref_mut() {
                        di[c * len + t + j] += g * w[base + j];
                    }
                }
            }
        }
    }
}

/// Max-pool of size 2 (floor on odd lengths); ties keep the first element.
fn max_pool2(input: &[f64], ch: usize, len: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = len / 2;
    let mut out = Vec::with_capacity(ch * out_len);
    let mut arg = Vec::with_capacity(ch * out_len);
    for c in 0..ch {
        for t in 0..out_len {
            let i = c * len + 2 * t;
            let j = if input[i + 1] > input[i] { i + 1 } else { i };
            out.push(input[j]);
            arg.push(j);
        }
    }
    (out, arg)
}

fn forward_one(arch: &CnnArchitecture, p: &Params, x: &[f64]) -> Trace {
    let conv1 = conv1d(x, arch.window, arch.features, p.w1, p.b1, arch.conv1_kernel);
    let (pool1, pool1_arg) = max_pool2(&conv1, arch.conv1_channels, arch.conv1_len());
    let conv2 = conv1d(
        &pool1,
        arch.conv1_channels,
        arch.pool1_len(),
        p.w2,
        p.b2,
        arch.conv2_kernel,
    );
    let (pool2, pool2_arg) = max_pool2(&conv2, arch.conv2_channels, arch.conv2_len());
    let hidden: Vec<f64> = p
        .b3
        .iter()
        .zip(p.w3.chunks_exact(pool2.len()))
        .map(|(b, row)| (b + dot(row, &pool2)).max(0.0))
        .collect();
    let logit = p.b4 + dot(p.w4, &hidden);
    Trace {
        conv1,
        pool1,
        pool1_arg,
        conv2,
        pool2,
        pool2_arg,
        hidden,
        logit,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_batch<W: AsRef<[f64]>>(arch: &CnnArchitecture, batch: &[W]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if let Some((i, w)) = batch
        .iter()
        .enumerate()
        .find(|(_, w)| w.as_ref().len() != arch.input_len())
    {
        return Err(Error::invalid(format!(
            "sample {i} has {} values, expected {} ({} frames x {} features)",
            w.as_ref().len(),
            arch.input_len(),
            arch.window,
            arch.features
        )));
    }
    Ok(())
}

/// Per-sample probability ŷ for every window in `batch`.
pub fn cnn_forward<W: AsRef<[f64]>>(
    arch: &CnnArchitecture,
    theta: &[f64],
    batch: &[W],
) -> Result<Vec<f64>> {
    let p = Params::split(arch, theta)?;
    check_batch(arch, batch)?;
    Ok(batch
        .iter()
        .map(|x| sigmoid(forward_one(arch, &p, x.as_ref()).logit))
        .collect())
}

/// Mean binary cross-entropy over the batch (logit form, see
/// [`bce_with_logits`]) and its gradient w.r.t. θ.
pub fn cnn_backward<W: AsRef<[f64]>>(
    arch: &CnnArchitecture,
    theta: &[f64],
    batch: &[W],
    labels: &[u8],
) -> Result<(f64, Vec<f64>)> {
    let p = Params::split(arch, theta)?;
    check_batch(arch, batch)?;
    if labels.len() != batch.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} samples",
            labels.len(),
            batch.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
    }

    let mut grad = vec![0.0; theta.len()];
    let [r1, r2, r3, r4] = arch.group_ranges();
    let [l1, l2, l3, _] = arch.layers();
    let scale = 1.0 / batch.len() as f64;
    let mut logits = Vec::with_capacity(batch.len());

    for (x, &y) in batch.iter().zip(labels) {
        let x = x.as_ref();
        let tr = forward_one(arch, &p, x);
        let y_hat = sigmoid(tr.logit);
        logits.push(tr.logit);
        let dlogit = (y_hat - f64::from(y)) * scale;

        // fc2
        let (gw4, gb4) = grad[r4.clone()].split_at_mut(arch.hidden);
        for (g, h) in gw4.iter_mut().zip(&tr.hidden) {
            *g += dlogit * h;
        }
        gb4[0] += dlogit;

        // fc1
        let flat = tr.pool2.len();
        let mut dpool2 = vec![0.0; flat];
        let (gw3, gb3) = grad[r3.clone()].split_at_mut(l3.weight_count());
        for j in 0..arch.hidden {
            if tr.hidden[j] <= 0.0 {
                continue;
            }
            let dh = dlogit * p.w4[j];
            gb3[j] += dh;
            let row = &p.w3[j * flat..(j + 1) * flat];
            for i in 0..flat {
                gw3[j * flat + i] += dh * tr.pool2[i];
                dpool2[i] += dh * row[i];
            }
        }

        // pool2 → conv2
        let mut dconv2 = vec![0.0; tr.conv2.len()];
        for (g, &src) in dpool2.iter().zip(&tr.pool2_arg) {
            dconv2[src] += g;
        }
        let mut dpool1 = vec![0.0; tr.pool1.len()];
        {
            let (gw2, gb2) = grad[r2.clone()].split_at_mut(l2.weight_count());
            conv1d_backward(
                &tr.pool1,
                arch.conv1_channels,
                arch.pool1_len(),
                p.w2,
                arch.conv2_kernel,
                &tr.conv2,
                &dconv2,
                gw2,
                gb2,
                Some(&mut dpool1),
            );
        }

        // pool1 → conv1
        let mut dconv1 = vec![0.0; tr.conv1.len()];
        for (g, &src) in dpool1.iter().zip(&tr.pool1_arg) {
            dconv1[src] += g;
        }
        let (gw1, gb1) = grad[r1.clone()].split_at_mut(l1.weight_count());
        conv1d_backward(
            x,
            arch.window,
            arch.features,
            p.w1,
            arch.conv1_kernel,
            &tr.conv1,
            &dconv1,
            gw1,
            gb1,
            None,
        );
    }

    let loss = bce_with_logits(labels, &logits)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::bce_loss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> CnnArchitecture {
        // 2·(2·2+1) + 2·(2·2+1) + 3·(2+1) + (3+1) = 33 parameters.
        CnnArchitecture {
            window: 2,
            features: 7,
            conv1_channels: 2,
            conv1_kernel: 2,
            conv2_channels: 2,
            conv2_kernel: 2,
            hidden: 3,
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn default_architecture_has_3373_params() {
        let arch = CnnArchitecture::default();
        let counts: Vec<usize> = arch.layers().iter().map(LayerSpec::param_count).collect();
        assert_eq!(counts, vec![208, 80, 2827, 258]);
        assert_eq!(arch.flatten_len(), 10);
        assert_eq!(count_cnn_params(&arch), 3373);
        let ranges = arch.group_ranges();
        assert_eq!(ranges[0], 0..208);
        assert_eq!(ranges[3], 3115..3373);
    }

    #[test]
    fn degenerate_layer_lists() {
        let empty = [
            LayerSpec::Conv1d { in_channels: 5, out_channels: 0, kernel: 3 },
            LayerSpec::Conv1d { in_channels: 0, out_channels: 0, kernel: 3 },
            LayerSpec::Dense { inputs: 0, outputs: 0 },
            LayerSpec::Dense { inputs: 0, outputs: 0 },
        ];
        assert_eq!(count_params(&empty), 0);
        let fc_only = [
            LayerSpec::Conv1d { in_channels: 5, out_channels: 0, kernel: 3 },
            LayerSpec::Conv1d { in_channels: 0, out_channels: 0, kernel: 3 },
            LayerSpec::Dense { inputs: 10, outputs: 1 },
        ];
        assert_eq!(count_params(&fc_only), 11);
    }

    #[test]
    fn zero_theta_predicts_half() {
        let arch = CnnArchitecture::default();
        let theta = vec![0.0; arch.n_params()];
        let batch = vec![vec![0.3; 130], vec![0.9; 130]];
        assert_eq!(cnn_forward(&arch, &theta, &batch).unwrap(), vec![0.5, 0.5]);
        let (loss, _) = cnn_backward(&arch, &theta, &batch, &[1, 0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        let (loss, _) = cnn_backward(&arch, &theta, &batch, &[1, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn output_bias_passes_through() {
        let arch = CnnArchitecture::default();
        let mut theta = vec![0.0; arch.n_params()];
        *theta.last_mut().unwrap() = 10.0;
        let y = cnn_forward(&arch, &theta, &[vec![0.1; 130]]).unwrap();
        assert!((y[0] - 0.999_954_6).abs() < 1e-7);
    }

    #[test]
    fn duplicates_give_identical_predictions_and_unchanged_mean() {
        let arch = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = random_vec(&mut rng, arch.n_params(), 1.0);
        let a = random_vec(&mut rng, arch.input_len(), 1.0);
        let b = random_vec(&mut rng, arch.input_len(), 1.0);
        let y = cnn_forward(&arch, &theta, &[a.clone(), b.clone(), a.clone()]).unwrap();
        assert_eq!(y[0].to_bits(), y[2].to_bits());

        let (l1, g1) = cnn_backward(&arch, &theta, &[a.clone(), b.clone()], &[1, 0]).unwrap();
        let (l2, g2) = cnn_backward(&arch, &theta, &[a.clone(), b.clone(), a, b], &[1, 0, 1, 0])
            .unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_and_label_errors() {
        let arch = tiny();
        let theta = vec![0.0; arch.n_params()];
        let good = vec![0.0; arch.input_len()];
        assert!(cnn_forward(&arch, &theta[1..], std::slice::from_ref(&good)).is_err());
        assert!(cnn_forward(&arch, &theta, &[vec![0.0; 3]]).is_err());
        assert!(cnn_backward(&arch, &theta, std::slice::from_ref(&good), &[2]).is_err());
        assert!(cnn_backward(&arch, &theta, &[good], &[0, 1]).is_err());
        let mut bad = tiny();
        bad.features = 3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let arch = tiny();
        assert!(arch.n_params() <= 50);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = random_vec(&mut rng, arch.n_params(), 1.0);
            let batch: Vec<Vec<f64>> = (0..4)
                .map(|_| random_vec(&mut rng, arch.input_len(), 2.0))
                .collect();
            let labels = [0u8, 1, 1, 0];
            let (_, g) = cnn_backward(&arch, &theta, &batch, &labels).unwrap();
            let loss = |t: &[f64]| {
                let y = cnn_forward(&arch, t, &batch).unwrap();
                bce_loss(&labels, &y).unwrap()
            };
            let h = 1e-5;
            for j in 0..theta.len() {
                let mut up = theta.clone();
                up[j] += h;
                let mut dn = theta.clone();
                dn[j] -= h;
                let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                let err = (fd - g[j]).abs();
                assert!(
                    err < 1e-4 * fd.abs().max(g[j].abs()) || err < 1e-9,
                    "seed {seed} param {j}: analytic {} fd {fd}",
                    g[j]
                );
            }
        }
    }
}
