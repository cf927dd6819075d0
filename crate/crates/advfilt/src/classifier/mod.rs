//! A small fixed-architecture convolutional classifier over complex
//! baseband blocks, with exact analytic gradients with respect to the
//! weights, the complex input, and upstream FIR taps.
//!
//! The forward graph is: input normalization (zero mean, unit mean sample
//! power) -> re/im split into a 2-channel real sequence -> two valid-mode
//! 1-D convolution layers (16 kernels of width 7, then 16 of width 5) with
//! ReLU -> dense 64 with ReLU -> dense K -> softmax. Normalization is part
//! of the graph and its Jacobian is included in backpropagation, so
//! gradient-based attacks cannot exploit a normalization mismatch.

mod io;
mod train;

pub use io::{read_afnn, write_afnn, AFNN_MAGIC, AFNN_VERSION};
pub use train::{train, TrainConfig};

use num_complex::Complex64;

use crate::dsp::{conv_same, same_offset, ComplexSignal, FilterTaps};
use crate::error::{Error, Result};
use crate::modgen::ModClass;
use crate::seed;

const CONV1_CHANNELS: usize = 16;
const CONV1_WIDTH: usize = 7;
const CONV2_CHANNELS: usize = 16;
const CONV2_WIDTH: usize = 5;
const DENSE_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvLayer {
    pub out_ch: usize,
    pub in_ch: usize,
    pub width: usize,
    pub w: Vec<f64>, // [out_ch][in_ch][width]
    pub b: Vec<f64>, // [out_ch]
}

impl ConvLayer {
    fn w_at(&self, oc: usize, ic: usize, k: usize) -> f64 {
        self.w[(oc * self.in_ch + ic) * self.width + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub w: Vec<f64>, // [out_dim][in_dim]
    pub b: Vec<f64>,
}

/// Trained classifier standing in for both Bob's and Eve's model.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub(crate) conv1: ConvLayer,
    pub(crate) conv2: ConvLayer,
    pub(crate) dense1: DenseLayer,
    pub(crate) dense2: DenseLayer,
    classes: Vec<ModClass>,
    input_len: usize,
    /// Seed the weights were trained (or initialized) from.
    pub seed: u64,
}

/// Gradient of the loss with respect to the complex input, packed as
/// `g_n = dL/dRe(s_n) + j dL/dIm(s_n)`; adding a small multiple of `g`
/// to the input is an ascent direction for the loss.
pub type InputGradient = Vec<Complex64>;

pub(crate) struct Forward {
    pub sigma: f64,
    pub centered: Vec<Complex64>,
    pub x: Vec<f64>,
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub z2: Vec<f64>,
    pub a2: Vec<f64>,
    pub z3: Vec<f64>,
    pub a3: Vec<f64>,
    pub z4: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) struct WeightGrads {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense1_w: Vec<f64>,
    pub dense1_b: Vec<f64>,
    pub dense2_w: Vec<f64>,
    pub dense2_b: Vec<f64>,
}

impl Classifier {
    /// Randomly initialized (untrained) classifier.
    pub fn init_random(classes: &[ModClass], input_len: usize, init_seed: u64) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidArgument(
                "classifier needs at least two classes".into(),
            ));
        }
        if input_len < CONV1_WIDTH + CONV2_WIDTH {
            return Err(Error::InvalidArgument(
                "input too short for the convolution stack".into(),
            ));
        }
        let mut rng = seed::rng(&[0xc1a5, init_seed]);
        let mut normal = |n: usize, std: f64| -> Vec<f64> {
            use rand_distr::Distribution;
            let dist = rand_distr::Normal::new(0.0, std).unwrap();
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        };
        let l2 = input_len - CONV1_WIDTH - CONV2_WIDTH + 2;
        let flat = CONV2_CHANNELS * l2;
        let k = classes.len();
        // Phase-selective pulse bank plus noise: kernel oc responds to
        // Re(e^{-j theta_oc} x) correlated with the pulse peak, so
        // symbol-energy and phase features exist from the first step
        // instead of depending on a lucky random basin.
        let mut conv1_w = normal(
            CONV1_CHANNELS * 2 * CONV1_WIDTH,
            (0.5 / (2.0 * CONV1_WIDTH as f64)).sqrt(),
        );
        let pulse = crate::modgen::rrc_taps(
            crate::modgen::SAMPLES_PER_SYMBOL,
            crate::modgen::RRC_SPAN_SYMBOLS,
            crate::modgen::RRC_ROLLOFF,
        );
        let mid = (pulse.len() - 1) / 2;
        let seg: Vec<f64> = (0..CONV1_WIDTH)
            .map(|i| pulse[mid - CONV1_WIDTH / 2 + i])
            .collect();
        let seg_norm = (seg.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for oc in 0..CONV1_CHANNELS {
            let theta = std::f64::consts::TAU * oc as f64 / CONV1_CHANNELS as f64;
            for (kk, &sv) in seg.iter().enumerate() {
                let base = sv / seg_norm * 0.7;
                conv1_w[(oc * 2) * CONV1_WIDTH + kk] += base * theta.cos();
                conv1_w[(oc * 2 + 1) * CONV1_WIDTH + kk] += base * theta.sin();
            }
        }
        let conv1 = ConvLayer {
            out_ch: CONV1_CHANNELS,
            in_ch: 2,
            width: CONV1_WIDTH,
            w: conv1_w,
            b: vec![0.0; CONV1_CHANNELS],
        };
        let conv2 = ConvLayer {
            out_ch: CONV2_CHANNELS,
            in_ch: CONV1_CHANNELS,
            width: CONV2_WIDTH,
            w: normal(
                CONV2_CHANNELS * CONV1_CHANNELS * CONV2_WIDTH,
                (2.0 / (CONV1_CHANNELS as f64 * CONV2_WIDTH as f64)).sqrt(),
            ),
            b: vec![0.0; CONV2_CHANNELS],
        };
        let dense1 = DenseLayer {
            out_dim: DENSE_HIDDEN,
            in_dim: flat,
            w: normal(DENSE_HIDDEN * flat, (2.0 / flat as f64).sqrt()),
            b: vec![0.0; DENSE_HIDDEN],
        };
        let dense2 = DenseLayer {
            out_dim: k,
            in_dim: DENSE_HIDDEN,
            w: normal(k * DENSE_HIDDEN, (1.0 / DENSE_HIDDEN as f64).sqrt()),
            b: vec![0.0; k],
        };
        Ok(Self {
            conv1,
            conv2,
            dense1,
            dense2,
            classes: classes.to_vec(),
            input_len,
            seed: init_seed,
        })
    }

    pub fn classes(&self) -> &[ModClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn class_index(&self, k: ModClass) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == k)
            .ok_or_else(|| Error::InvalidArgument(format!("class {} unknown to classifier", k.label())))
    }

    fn check_input(&self, s: &ComplexSignal) -> Result<()> {
        if s.len() != self.input_len {
            return Err(Error::InvalidArgument(format!(
                "input length {} does not match classifier input length {}",
                s.len(),
                self.input_len
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, s: &[Complex64]) -> Result<Forward> {
        self.forward_with_dropout(s, None)
    }

    /// Forward pass with an optional inverted-dropout mask over the
    /// flattened conv features (training only).
    pub(crate) fn forward_with_dropout(
        &self,
        s: &[Complex64],
        flatten_mask: Option<&[f64]>,
    ) -> Result<Forward> {
        let d = self.input_len;
        // normalization is part of the graph
        let mean = s.iter().sum::<Complex64>() / d as f64;
        let centered: Vec<Complex64> = s.iter().map(|x| x - mean).collect();
        let var = centered.iter().map(|x| x.norm_sqr()).sum::<f64>() / d as f64;
        if var <= 0.0 || !var.is_finite() {
            return Err(Error::InvalidArgument(
                "degenerate input: zero or non-finite power after centering".into(),
            ));
        }
        let sigma = var.sqrt();
        let mut x = vec![0.0f64; 2 * d];
        for (n, cn) in centered.iter().enumerate() {
            x[n] = cn.re / sigma;
            x[d + n] = cn.im / sigma;
        }

        let l1 = d - CONV1_WIDTH + 1;
        let mut z1 = vec![0.0f64; CONV1_CHANNELS * l1];
        for oc in 0..CONV1_CHANNELS {
            for i in 0..l1 {
                let mut acc = self.conv1.b[oc];
                for ic in 0..2 {
                    let base = ic * d + i;
                    for k in 0..CONV1_WIDTH {
                        acc += self.conv1.w_at(oc, ic, k) * x[base + k];
                    }
                }
                z1[oc * l1 + i] = acc;
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();

        let l2 = l1 - CONV2_WIDTH + 1;
        let mut z2 = vec![0.0f64; CONV2_CHANNELS * l2];
        for oc in 0..CONV2_CHANNELS {
            for i in 0..l2 {
                let mut acc = self.conv2.b[oc];
                for ic in 0..CONV1_CHANNELS {
                    let base = ic * l1 + i;
                    for k in 0..CONV2_WIDTH {
                        acc += self.conv2.w_at(oc, ic, k) * a1[base + k];
                    }
                }
                z2[oc * l2 + i] = acc;
            }
        }
        let mut a2: Vec<f64> = z2.iter().map(|&v| v.max(0.0)).collect();
        if let Some(mask) = flatten_mask {
            for (a, m) in a2.iter_mut().zip(mask.iter()) {
                *a *= m;
            }
        }

        let mut z3 = vec![0.0f64; self.dense1.out_dim];
        for (j, z) in z3.iter_mut().enumerate() {
            let row = &self.dense1.w[j * self.dense1.in_dim..(j + 1) * self.dense1.in_dim];
            *z = self.dense1.b[j] + row.iter().zip(a2.iter()).map(|(w, a)| w * a).sum::<f64>();
        }
        let a3: Vec<f64> = z3.iter().map(|&v| v.max(0.0)).collect();

        let mut z4 = vec![0.0f64; self.dense2.out_dim];
        for (kk, z) in z4.iter_mut().enumerate() {
            let row = &self.dense2.w[kk * self.dense2.in_dim..(kk + 1) * self.dense2.in_dim];
            *z = self.dense2.b[kk] + row.iter().zip(a3.iter()).map(|(w, a)| w * a).sum::<f64>();
        }

        let zmax = z4.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z4.iter().map(|&z| (z - zmax).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|&e| e / total).collect();

        Ok(Forward {
            sigma,
            centered,
            x,
            z1,
            a1,
            z2,
            a2,
            z3,
            a3,
            z4,
            probs,
        })
    }

    fn loss_from_forward(&self, fwd: &Forward, true_idx: usize) -> f64 {
        let zmax = fwd.z4.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = fwd.z4.iter().map(|&z| (z - zmax).exp()).sum::<f64>().ln() + zmax;
        lse - fwd.z4[true_idx]
    }

    /// Backpropagates cross-entropy at `true_idx` through the whole graph.
    /// Weight gradients are only materialized when `with_weights` is set.
    pub(crate) fn backward(
        &self,
        fwd: &Forward,
        true_idx: usize,
        with_weights: bool,
    ) -> (Vec<Complex64>, Option<WeightGrads>) {
        self.backward_with_dropout(fwd, true_idx, with_weights, None)
    }

    pub(crate) fn backward_with_dropout(
        &self,
        fwd: &Forward,
        true_idx: usize,
        with_weights: bool,
        flatten_mask: Option<&[f64]>,
    ) -> (Vec<Complex64>, Option<WeightGrads>) {
        let d = self.input_len;
        let l1 = d - CONV1_WIDTH + 1;
        let l2 = l1 - CONV2_WIDTH + 1;

        let mut dz4 = fwd.probs.clone();
        dz4[true_idx] -= 1.0;

        let mut da3 = vec![0.0f64; self.dense2.in_dim];
        for kk in 0..self.dense2.out_dim {
            let row = &self.dense2.w[kk * self.dense2.in_dim..(kk + 1) * self.dense2.in_dim];
            let g = dz4[kk];
            for (da, w) in da3.iter_mut().zip(row.iter()) {
                *da += w * g;
            }
        }
        let dz3: Vec<f64> = da3
            .iter()
            .zip(fwd.z3.iter())
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();

        let mut da2 = vec![0.0f64; self.dense1.in_dim];
        for j in 0..self.dense1.out_dim {
            let g = dz3[j];
            if g == 0.0 {
                continue;
            }
            let row = &self.dense1.w[j * self.dense1.in_dim..(j + 1) * self.dense1.in_dim];
            for (da, w) in da2.iter_mut().zip(row.iter()) {
                *da += w * g;
            }
        }
        if let Some(mask) = flatten_mask {
            for (g, m) in da2.iter_mut().zip(mask.iter()) {
                *g *= m;
            }
        }
        let dz2: Vec<f64> = da2
            .iter()
            .zip(fwd.z2.iter())
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();

        let mut da1 = vec![0.0f64; CONV1_CHANNELS * l1];
        for oc in 0..CONV2_CHANNELS {
            for i in 0..l2 {
                let g = dz2[oc * l2 + i];
                if g == 0.0 {
                    continue;
                }
                for ic in 0..CONV1_CHANNELS {
                    let base = ic * l1 + i;
                    for k in 0..CONV2_WIDTH {
                        da1[base + k] += self.conv2.w_at(oc, ic, k) * g;
                    }
                }
            }
        }
        let dz1: Vec<f64> = da1
            .iter()
            .zip(fwd.z1.iter())
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();

        let mut dx = vec![0.0f64; 2 * d];
        for oc in 0..CONV1_CHANNELS {
            for i in 0..l1 {
                let g = dz1[oc * l1 + i];
                if g == 0.0 {
                    continue;
                }
                for ic in 0..2 {
                    let base = ic * d + i;
                    for k in 0..CONV1_WIDTH {
                        dx[base + k] += self.conv1.w_at(oc, ic, k) * g;
                    }
                }
            }
        }

        // back through normalization: y = (s - mean)/sigma
        let gy: Vec<Complex64> = (0..d).map(|n| Complex64::new(dx[n], dx[d + n])).collect();
        let gmean = gy.iter().sum::<Complex64>() / d as f64;
        let dot: f64 = gy
            .iter()
            .zip(fwd.centered.iter())
            .map(|(g, c)| g.re * c.re + g.im * c.im)
            .sum();
        let sigma = fwd.sigma;
        let coef = dot / (d as f64 * sigma * sigma * sigma);
        let input_grad: Vec<Complex64> = gy
            .iter()
            .zip(fwd.centered.iter())
            .map(|(g, c)| (g - gmean).scale(1.0 / sigma) - c.scale(coef))
            .collect();

        let weights = if with_weights {
            let mut conv1_w = vec![0.0f64; self.conv1.w.len()];
            let conv1_b: Vec<f64> = (0..CONV1_CHANNELS)
                .map(|oc| dz1[oc * l1..(oc + 1) * l1].iter().sum())
                .collect();
            for oc in 0..CONV1_CHANNELS {
                for i in 0..l1 {
                    let g = dz1[oc * l1 + i];
                    if g == 0.0 {
                        continue;
                    }
                    for ic in 0..2 {
                        let base = ic * d + i;
                        for k in 0..CONV1_WIDTH {
                            conv1_w[(oc * 2 + ic) * CONV1_WIDTH + k] += g * fwd.x[base + k];
                        }
                    }
                }
            }
            let mut conv2_w = vec![0.0f64; self.conv2.w.len()];
            let conv2_b: Vec<f64> = (0..CONV2_CHANNELS)
                .map(|oc| dz2[oc * l2..(oc + 1) * l2].iter().sum())
                .collect();
            for oc in 0..CONV2_CHANNELS {
                for i in 0..l2 {
                    let g = dz2[oc * l2 + i];
                    if g == 0.0 {
                        continue;
                    }
                    for ic in 0..CONV1_CHANNELS {
                        let base = ic * l1 + i;
                        for k in 0..CONV2_WIDTH {
                            conv2_w[(oc * CONV1_CHANNELS + ic) * CONV2_WIDTH + k] +=
                                g * fwd.a1[base + k];
                        }
                    }
                }
            }
            let mut dense1_w = vec![0.0f64; self.dense1.w.len()];
            for j in 0..self.dense1.out_dim {
                let g = dz3[j];
                if g == 0.0 {
                    continue;
                }
                let row = &mut dense1_w[j * self.dense1.in_dim..(j + 1) * self.dense1.in_dim];
                for (w, a) in row.iter_mut().zip(fwd.a2.iter()) {
                    *w += g * a;
                }
            }
            let mut dense2_w = vec![0.0f64; self.dense2.w.len()];
            for kk in 0..self.dense2.out_dim {
                let g = dz4[kk];
                let row = &mut dense2_w[kk * self.dense2.in_dim..(kk + 1) * self.dense2.in_dim];
                for (w, a) in row.iter_mut().zip(fwd.a3.iter()) {
                    *w += g * a;
                }
            }
            Some(WeightGrads {
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                dense1_w,
                dense1_b: dz3,
                dense2_w,
                dense2_b: dz4,
            })
        } else {
            None
        };

        (input_grad, weights)
    }

    /// Softmax class probabilities for a signal block.
    pub fn predict(&self, s: &ComplexSignal) -> Result<Vec<f64>> {
        self.check_input(s)?;
        Ok(self.forward(s)?.probs)
    }

    /// Most likely class.
    pub fn classify(&self, s: &ComplexSignal) -> Result<ModClass> {
        let probs = self.predict(s)?;
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        Ok(self.classes[best])
    }

    /// Cross-entropy of the prediction against the true class.
    pub fn loss(&self, s: &ComplexSignal, k: ModClass) -> Result<f64> {
        self.check_input(s)?;
        let idx = self.class_index(k)?;
        let fwd = self.forward(s)?;
        Ok(self.loss_from_forward(&fwd, idx))
    }

    /// Exact gradient of the loss with respect to the complex input.
    pub fn grad_input(&self, s: &ComplexSignal, k: ModClass) -> Result<InputGradient> {
        Ok(self.loss_and_grad_input(s, k)?.1)
    }

    pub fn loss_and_grad_input(
        &self,
        s: &ComplexSignal,
        k: ModClass,
    ) -> Result<(f64, InputGradient)> {
        self.check_input(s)?;
        let idx = self.class_index(k)?;
        let fwd = self.forward(s)?;
        let loss = self.loss_from_forward(&fwd, idx);
        let (grad, _) = self.backward(&fwd, idx, false);
        Ok((loss, grad))
    }

    /// Gradient of the loss with respect to FIR taps applied to `s` before
    /// classification, i.e. the chain rule through `conv_same(s, f)`.
    pub fn grad_taps(
        &self,
        s: &ComplexSignal,
        k: ModClass,
        f: &FilterTaps,
    ) -> Result<Vec<Complex64>> {
        let filtered = conv_same(s, f)?;
        let g = self.grad_input(&filtered, k)?;
        Ok(taps_grad_from_input_grad(s, &g, f.len(), true))
    }

    /// Macro-averaged accuracy: mean over classes of the per-class
    /// correct-classification rate. Every classifier class must appear.
    pub fn accuracy(&self, examples: &[(&ComplexSignal, ModClass)]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("empty example set".into()));
        }
        let k = self.num_classes();
        let mut correct = vec![0usize; k];
        let mut total = vec![0usize; k];
        for (s, label) in examples {
            let idx = self.class_index(*label)?;
            total[idx] += 1;
            if self.classify(s)? == *label {
                correct[idx] += 1;
            }
        }
        if total.iter().any(|&t| t == 0) {
            return Err(Error::InvalidArgument(
                "macro accuracy needs every class present".into(),
            ));
        }
        Ok(total
            .iter()
            .zip(correct.iter())
            .map(|(&t, &c)| c as f64 / t as f64)
            .sum::<f64>()
            / k as f64)
    }
}

/// Maps an input-space gradient to a taps-space gradient for the linear
/// map `r = conv_same(s, taps)`: `G_j = sum_i conj(s[i + c - j]) g[i]`
/// with `c` the same-mode centering offset. The conjugate makes `G` the
/// ascent direction for a real loss over complex taps; the plain
/// transpose (no conjugation) is kept for comparison.
pub fn taps_grad_from_input_grad(
    s: &[Complex64],
    g: &[Complex64],
    m: usize,
    conjugate: bool,
) -> Vec<Complex64> {
    let d = s.len();
    let c = same_offset(m);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, gi) in g.iter().enumerate() {
            let t = i as isize + c as isize - j as isize;
            if t >= 0 && (t as usize) < d {
                let sv = s[t as usize];
                acc += if conjugate { sv.conj() * gi } else { sv * gi };
            }
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modgen::{generate_signal, normalize_input, ModClass};
    use rand::Rng;

    fn test_signal(key: u64) -> ComplexSignal {
        normalize_input(&generate_signal(ModClass::Qpsk, 64, key).unwrap()).unwrap()
    }

    fn classifier(seed: u64) -> Classifier {
        Classifier::init_random(&ModClass::ALL, 64, seed).unwrap()
    }

    #[test]
    fn probabilities_sum_to_one() {
        let c = classifier(1);
        for key in 0..5 {
            let p = c.predict(&test_signal(key)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn prediction_invariant_to_positive_scaling() {
        let c = classifier(2);
        let s = test_signal(3);
        let scaled =
            ComplexSignal::new(s.iter().map(|x| x.scale(3.7)).collect()).unwrap();
        let p1 = c.predict(&s).unwrap();
        let p2 = c.predict(&scaled).unwrap();
        for (a, b) in p1.iter().zip(p2.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_matches_negative_log_prob() {
        let c = classifier(3);
        let s = test_signal(4);
        for k in ModClass::ALL {
            let p = c.predict(&s).unwrap();
            let idx = c.class_index(k).unwrap();
            let loss = c.loss(&s, k).unwrap();
            assert!((loss + p[idx].ln()).abs() < 1e-12);
            assert!(loss >= 0.0);
        }
    }

    #[test]
    fn rejects_length_mismatch() {
        let c = classifier(4);
        let s = ComplexSignal::zeros(32);
        assert!(c.predict(&s).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for trial in 0..3u64 {
            let c = classifier(10 + trial);
            let s = test_signal(20 + trial);
            let k = ModClass::ALL[trial as usize % 4];
            let analytic = c.grad_input(&s, k).unwrap();
            let loss = |v: &[Complex64]| {
                c.loss(&ComplexSignal::new(v.to_vec()).unwrap(), k).unwrap()
            };
            let err = crate::gradcheck::check_complex_gradient(&loss, &s, &analytic, 1e-5, 1e-4);
            assert!(err < 1e-4, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn taps_gradient_matches_finite_differences() {
        let m = 5;
        for trial in 0..3u64 {
            let c = classifier(30 + trial);
            let s = test_signal(40 + trial);
            let k = ModClass::ALL[trial as usize % 4];
            let mut rng = seed::rng(&[0x7e57, trial]);
            let taps: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let f = FilterTaps::new(taps.clone()).unwrap();
            let analytic = c.grad_taps(&s, k, &f).unwrap();
            let loss = |v: &[Complex64]| {
                let taps = FilterTaps::new(v.to_vec()).unwrap();
                c.loss(&conv_same(&s, &taps).unwrap(), k).unwrap()
            };
            let err = crate::gradcheck::check_complex_gradient(&loss, &taps, &analytic, 1e-5, 1e-4);
            assert!(err < 1e-4, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn ascent_direction_increases_loss() {
        let c = classifier(50);
        let mut improved = 0;
        let total = 40;
        for key in 0..total {
            let s = test_signal(100 + key);
            let k = ModClass::ALL[key as usize % 4];
            let g = c.grad_input(&s, k).unwrap();
            let gp = crate::dsp::mean_sample_power(&g);
            if gp == 0.0 {
                continue;
            }
            let eps = 1e-3 / gp.sqrt();
            let bumped = ComplexSignal::new(
                s.iter().zip(g.iter()).map(|(x, gi)| x + gi.scale(eps)).collect(),
            )
            .unwrap();
            if c.loss(&bumped, k).unwrap() > c.loss(&s, k).unwrap() {
                improved += 1;
            }
        }
        assert!(improved as f64 >= 0.95 * total as f64, "{improved}/{total}");
    }

    #[test]
    fn zero_weights_give_zero_input_gradient() {
        let mut c = classifier(60);
        c.conv1.w.iter_mut().for_each(|w| *w = 0.0);
        c.conv2.w.iter_mut().for_each(|w| *w = 0.0);
        c.dense1.w.iter_mut().for_each(|w| *w = 0.0);
        c.dense2.w.iter_mut().for_each(|w| *w = 0.0);
        let s = test_signal(61);
        let g = c.grad_input(&s, ModClass::Bpsk).unwrap();
        assert!(g.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn weight_gradients_match_finite_differences_sampled() {
        let c = classifier(70);
        let s = test_signal(71);
        let k = ModClass::Qam16;
        let idx = c.class_index(k).unwrap();
        let fwd = c.forward(&s).unwrap();
        let (_, grads) = c.backward(&fwd, idx, true);
        let grads = grads.unwrap();
        let h = 1e-5;
        let mut rng = seed::rng(&[0x3ead, 72]);
        // sample a few coordinates from each tensor
        for _ in 0..10 {
            let which = rng.random_range(0..4usize);
            let (len, analytic): (usize, &Vec<f64>) = match which {
                0 => (c.conv1.w.len(), &grads.conv1_w),
                1 => (c.conv2.w.len(), &grads.conv2_w),
                2 => (c.dense1.w.len(), &grads.dense1_w),
                _ => (c.dense2.w.len(), &grads.dense2_w),
            };
            let coord = rng.random_range(0..len);
            let mut bump = |delta: f64| -> f64 {
                let mut cc = c.clone();
                match which {
                    0 => cc.conv1.w[coord] += delta,
                    1 => cc.conv2.w[coord] += delta,
                    2 => cc.dense1.w[coord] += delta,
                    _ => cc.dense2.w[coord] += delta,
                }
                cc.loss(&s, k).unwrap()
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let denom = analytic[coord].abs().max(fd.abs()).max(1e-8);
            assert!(
                (analytic[coord] - fd).abs() / denom < 1e-4,
                "tensor {which} coord {coord}: {} vs {}",
                analytic[coord],
                fd
            );
        }
    }

    #[test]
    fn taps_grad_correlation_identity_for_unit_tap() {
        // for the centered unit tap, conv_same(s, v) = s, so the taps
        // gradient must equal the correlation of conj(s) with grad_input(s)
        let c = classifier(80);
        let s = test_signal(81);
        let k = ModClass::Psk8;
        let v = FilterTaps::centered_unit(5);
        let via_taps = c.grad_taps(&s, k, &v).unwrap();
        let g = c.grad_input(&s, k).unwrap();
        let direct = taps_grad_from_input_grad(&s, &g, 5, true);
        for (a, b) in via_taps.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_functional_taps_gradient_is_exact() {
        // closed-form check: L = sum_i Re(conj(w_i) r_i) with r = conv_same(s, f)
        // has taps gradient G_j = sum_i conj(s[i+c-j]) w_i, independent of f.
        let mut rng = seed::rng(&[0x11ea4, 1]);
        let d = 12;
        let m = 5;
        let s: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let w: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        // gradient of L w.r.t. r (packed) is w itself
        let got = taps_grad_from_input_grad(&s, &w, m, true);
        // brute force over every tap coordinate of the bilinear form
        let c_off = same_offset(m);
        for j in 0..m {
            let mut expect = Complex64::new(0.0, 0.0);
            for i in 0..d {
                let t = i as isize + c_off as isize - j as isize;
                if t >= 0 && (t as usize) < d {
                    expect += s[t as usize].conj() * w[i];
                }
            }
            assert!((got[j] - expect).norm() < 1e-12);
        }
    }
}

