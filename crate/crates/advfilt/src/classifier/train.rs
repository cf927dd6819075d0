//! Mini-batch training with Adam on cross-entropy.
//!
//! Training is single-threaded and fully deterministic under the seed:
//! weight init, epoch shuffles, and the AWGN augmentation stream all
//! derive from it in a fixed order.

use num_complex::Complex64;
use rand_distr::Distribution;

use super::{Classifier, WeightGrads};
use crate::dsp::ComplexSignal;
use crate::error::{Error, Result};
use crate::modgen::Dataset;
use crate::seed;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learn_rate: f64,
    pub batch: usize,
    pub seed: u64,
    /// SNR of the AWGN augmentation added to each training example,
    /// relative to the unit-power stored signals. `None` disables it.
    pub augment_snr_db: Option<f64>,
    /// Rotate each training example by a random multiple of pi/4. Labels
    /// are invariant under these rotations and the generator's own phase
    /// conventions are a subset of them, so this adds orientation variety
    /// without changing the deployment input distribution.
    pub augment_phase: bool,
    /// Decoupled weight decay applied to the weight tensors (not biases).
    pub weight_decay: f64,
    /// Conjugate (mirror) each training example with probability 1/2;
    /// every supported constellation is symmetric under conjugation.
    pub augment_conj: bool,
    /// Inverted-dropout probability on the flattened conv features.
    pub dropout: f64,
    /// Cosine-decay the learning rate to lr/10 over the run.
    pub lr_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learn_rate: 1e-3,
            batch: 64,
            seed: 0,
            augment_snr_db: Some(10.0),
            augment_phase: true,
            weight_decay: 1e-2,
            augment_conj: false,
            dropout: 0.0,
            lr_decay: false,
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn update(&mut self, w: &mut [f64], g: &[f64], lr: f64, t: usize, decay: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let bc1 = 1.0 - B1.powi(t as i32);
        let bc2 = 1.0 - B2.powi(t as i32);
        for i in 0..w.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            w[i] -= lr * (mhat / (vhat.sqrt() + EPS) + decay * w[i]);
        }
    }
}

fn accumulate(acc: &mut WeightGrads, g: &WeightGrads) {
    let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    add(&mut acc.conv1_w, &g.conv1_w);
    add(&mut acc.conv1_b, &g.conv1_b);
    add(&mut acc.conv2_w, &g.conv2_w);
    add(&mut acc.conv2_b, &g.conv2_b);
    add(&mut acc.dense1_w, &g.dense1_w);
    add(&mut acc.dense1_b, &g.dense1_b);
    add(&mut acc.dense2_w, &g.dense2_w);
    add(&mut acc.dense2_b, &g.dense2_b);
}

fn zero_grads(c: &Classifier) -> WeightGrads {
    WeightGrads {
        conv1_w: vec![0.0; c.conv1.w.len()],
        conv1_b: vec![0.0; c.conv1.b.len()],
        conv2_w: vec![0.0; c.conv2.w.len()],
        conv2_b: vec![0.0; c.conv2.b.len()],
        dense1_w: vec![0.0; c.dense1.w.len()],
        dense1_b: vec![0.0; c.dense1.b.len()],
        dense2_w: vec![0.0; c.dense2.w.len()],
        dense2_b: vec![0.0; c.dense2.b.len()],
    }
}

/// Trains a classifier on the dataset's training split.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<Classifier> {
    if !data.is_balanced() {
        return Err(Error::InvalidArgument(
            "training requires a class-balanced dataset".into(),
        ));
    }
    if data.train_indices().is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let mut net = Classifier::init_random(data.classes(), data.signal_len(), cfg.seed)?;

    let mut adam = [
        AdamState::new(net.conv1.w.len()),
        AdamState::new(net.conv1.b.len()),
        AdamState::new(net.conv2.w.len()),
        AdamState::new(net.conv2.b.len()),
        AdamState::new(net.dense1.w.len()),
        AdamState::new(net.dense1.b.len()),
        AdamState::new(net.dense2.w.len()),
        AdamState::new(net.dense2.b.len()),
    ];
    let mut rng = seed::rng(&[0x7247, cfg.seed]);
    let noise_sigma = cfg
        .augment_snr_db
        .map(|snr| (10.0f64.powf(-snr / 10.0) / 2.0).sqrt());
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = data.train_indices().to_vec();
        // Fisher-Yates from the training stream
        for i in (1..order.len()).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            order.swap(i, j);
        }
        let lr = if cfg.lr_decay {
            let t = epoch as f64 / cfg.epochs.max(1) as f64;
            let floor = cfg.learn_rate / 10.0;
            floor + 0.5 * (cfg.learn_rate - floor) * (1.0 + (std::f64::consts::PI * t).cos())
        } else {
            cfg.learn_rate
        };
        for chunk in order.chunks(cfg.batch) {
            let mut acc = zero_grads(&net);
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let (s, label) = data.example(idx);
                let true_idx = net.class_index(label)?;
                let rotation = if cfg.augment_phase {
                    let step = rand::Rng::random_range(&mut rng, 0..8u32);
                    Complex64::from_polar(1.0, step as f64 * std::f64::consts::FRAC_PI_4)
                } else {
                    Complex64::new(1.0, 0.0)
                };
                let conj = cfg.augment_conj && rand::Rng::random::<bool>(&mut rng);
                let input: ComplexSignal = match noise_sigma {
                    Some(sigma) => ComplexSignal::from_vec_unchecked(
                        s.iter()
                            .map(|x| {
                                let x = if conj { x.conj() } else { *x };
                                x * rotation
                                    + Complex64::new(
                                        sigma * normal.sample(&mut rng),
                                        sigma * normal.sample(&mut rng),
                                    )
                            })
                            .collect(),
                    ),
                    None => ComplexSignal::from_vec_unchecked(
                        s.iter()
                            .map(|x| if conj { x.conj() * rotation } else { x * rotation })
                            .collect(),
                    ),
                };
                let mask: Option<Vec<f64>> = if cfg.dropout > 0.0 {
                    let keep = 1.0 - cfg.dropout;
                    Some(
                        (0..net.dense1.in_dim)
                            .map(|_| {
                                if rand::Rng::random::<f64>(&mut rng) < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    )
                } else {
                    None
                };
                let fwd = net.forward_with_dropout(&input, mask.as_deref())?;
                batch_loss += net.loss_from_forward(&fwd, true_idx);
                let (_, grads) =
                    net.backward_with_dropout(&fwd, true_idx, true, mask.as_deref());
                accumulate(&mut acc, &grads.unwrap());
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            let scale = 1.0 / chunk.len() as f64;
            for tensor in [
                &mut acc.conv1_w,
                &mut acc.conv1_b,
                &mut acc.conv2_w,
                &mut acc.conv2_b,
                &mut acc.dense1_w,
                &mut acc.dense1_b,
                &mut acc.dense2_w,
                &mut acc.dense2_b,
            ] {
                tensor.iter_mut().for_each(|g| *g *= scale);
            }
            step += 1;
            let wd = cfg.weight_decay;
            adam[0].update(&mut net.conv1.w, &acc.conv1_w, lr, step, wd);
            adam[1].update(&mut net.conv1.b, &acc.conv1_b, lr, step, 0.0);
            adam[2].update(&mut net.conv2.w, &acc.conv2_w, lr, step, wd);
            adam[3].update(&mut net.conv2.b, &acc.conv2_b, lr, step, 0.0);
            adam[4].update(&mut net.dense1.w, &acc.dense1_w, lr, step, wd);
            adam[5].update(&mut net.dense1.b, &acc.dense1_b, lr, step, 0.0);
            adam[6].update(&mut net.dense2.w, &acc.dense2_w, lr, step, wd);
            adam[7].update(&mut net.dense2.b, &acc.dense2_b, lr, step, 0.0);
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modgen::{make_dataset, ModClass};

    #[test]
    fn zero_epochs_is_chance_level() {
        let data = make_dataset(&ModClass::ALL, 25, 64, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            seed: 3,
            ..TrainConfig::default()
        };
        let net = train(&data, &cfg).unwrap();
        let acc = net.accuracy(&data.test()).unwrap();
        assert!((acc - 0.25).abs() <= 0.1 + 1e-12, "accuracy {acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = make_dataset(&ModClass::ALL, 10, 64, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_training_run_learns_something() {
        let data = make_dataset(&ModClass::ALL, 40, 64, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch: 16,
            seed: 5,
            ..TrainConfig::default()
        };
        let net = train(&data, &cfg).unwrap();
        let acc = net.accuracy(&data.test()).unwrap();
        assert!(acc > 0.5, "accuracy {acc} after a short run");
    }
}
