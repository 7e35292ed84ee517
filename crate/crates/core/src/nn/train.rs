use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::TrainingSet;
use super::network::batch_gradient;
use super::params::NetworkParams;
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    SgdMomentum,
    /// Adam with the usual `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch sample shuffle.
    pub seed: u64,
    pub optimizer: Optimizer,
    pub momentum: f64,
    /// 1-based layer numbers whose gradients are computed but not applied.
    pub frozen_layers: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            seed: 0,
            optimizer: Optimizer::Adam,
            momentum: 0.9,
            frozen_layers: Vec::new(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Mini-batch gradient descent on the mean squared reconstruction loss.
///
/// Returns the trained parameters and, per epoch, the mean loss over all
/// samples measured as each mini-batch was visited.
pub fn train(
    params: &NetworkParams,
    train_set: &TrainingSet,
    config: &TrainingConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    train_with_progress(params, train_set, config, |_, _| {})
}

/// [`train`] with a callback invoked after every epoch as `(epoch, loss)`.
pub fn train_with_progress(
    params: &NetworkParams,
    train_set: &TrainingSet,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(NetworkParams, Vec<f64>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let layer_count = params.architecture().layer_count();
    if let Some(bad) = config
        .frozen_layers
        .iter()
        .find(|&&l| l == 0 || l > layer_count)
    {
        return Err(Error::invalid(format!("no layer {bad} to freeze")));
    }
    // two tensors (weights, bias) per layer
    let frozen: Vec<bool> = (0..2 * layer_count)
        .map(|t| config.frozen_layers.contains(&(t / 2 + 1)))
        .collect();

    let mut params = params.clone();
    let mut state = OptimizerState {
        first: params.zeros_like(),
        second: params.zeros_like(),
        steps: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::with_capacity(train_set.len());
        for batch in order.chunks(config.batch_size) {
            let (losses, grads) = batch_gradient(&params, train_set, batch)?;
            if losses.iter().any(|l| !l.is_finite()) || !grads.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_losses.extend(losses);
            apply_update(&mut params, &mut state, &grads, config, &frozen);
        }
        let mean = exact_sum(epoch_losses) / train_set.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((params, history))
}

struct OptimizerState {
    /// Momentum velocity, or Adam's first-moment estimate.
    first: NetworkParams,
    second: NetworkParams,
    steps: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(
    params: &mut NetworkParams,
    state: &mut OptimizerState,
    grads: &NetworkParams,
    config: &TrainingConfig,
    frozen: &[bool],
) {
    let lr = config.learning_rate;
    state.steps += 1;
    let bias1 = 1.0 - ADAM_BETA1.powi(state.steps);
    let bias2 = 1.0 - ADAM_BETA2.powi(state.steps);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(state.first.tensors_mut())
        .zip(state.second.tensors_mut())
        .zip(grads.tensors());
    for (t, (((p, m), v), g)) in tensors.enumerate() {
        if frozen[t] {
            continue;
        }
        match config.optimizer {
            Optimizer::Sgd => {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
            Optimizer::SgdMomentum => {
                for ((p, m), g) in p.iter_mut().zip(m.iter_mut()).zip(g) {
                    *m = config.momentum * *m + g;
                    *p -= lr * *m;
                }
            }
            Optimizer::Adam => {
                for (((p, m), v), g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / bias1) / ((*v / bias2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::BlockGrid;
    use crate::experiment::{generate_dataset, DatasetSpec};
    use crate::nn::params::{Architecture, ConvSpec};
    use crate::nn::{init_params, loss};

    fn small_params(seed: u64) -> NetworkParams {
        let arch = Architecture {
            block_side: 4,
            compression: 4,
            bottleneck: 4,
            conv: vec![
                ConvSpec { kernels: 2, size: 3 },
                ConvSpec { kernels: 1, size: 3 },
            ],
        };
        NetworkParams::init(&arch, seed).unwrap()
    }

    fn small_set(count: usize) -> TrainingSet {
        let blocks = (0..count)
            .map(|s| (0..16).map(|i| ((i * 7 + s * 3) % 11) as f64 / 10.0).collect())
            .collect();
        TrainingSet::autoencoding(16, blocks).unwrap()
    }

    fn config(epochs: usize) -> TrainingConfig {
        TrainingConfig {
            epochs,
            batch_size: 4,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let p = small_params(1);
        let set = small_set(10);
        for optimizer in [Optimizer::Sgd, Optimizer::SgdMomentum, Optimizer::Adam] {
            let cfg = TrainingConfig {
                learning_rate: 0.0,
                optimizer,
                ..config(3)
            };
            let (q, history) = train(&p, &set, &cfg).unwrap();
            assert_eq!(q, p);
            assert_eq!(history.len(), 3);
            assert!(history.iter().all(|&l| l == history[0]));
            assert_eq!(history[0], loss(&p, &set).unwrap());
        }
    }

    #[test]
    fn frozen_layers_do_not_move() {
        let p = small_params(2);
        let cfg = TrainingConfig {
            frozen_layers: vec![1, 6],
            ..config(2)
        };
        let (q, history) = train(&p, &small_set(8), &cfg).unwrap();
        assert_eq!(q.dense[0], p.dense[0]);
        assert_eq!(q.conv[1], p.conv[1]);
        assert_ne!(q.dense[1], p.dense[1]);
        assert!(history.iter().all(|l| l.is_finite()));
        let bad = TrainingConfig {
            frozen_layers: vec![7],
            ..config(1)
        };
        assert!(train(&p, &small_set(2), &bad).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let p = small_params(3);
        let set = small_set(12);
        let full = TrainingConfig {
            batch_size: 12,
            ..config(5)
        };
        for cfg in [config(5), full] {
            let (a, ha) = train(&p, &set, &cfg).unwrap();
            let (b, hb) = train(&p, &set, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(ha, hb);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let p = small_params(0);
        let set = small_set(2);
        for cfg in [
            TrainingConfig { learning_rate: -1.0, ..config(1) },
            TrainingConfig { batch_size: 0, ..config(1) },
            TrainingConfig { momentum: 1.0, ..config(1) },
        ] {
            assert!(matches!(train(&p, &set, &cfg), Err(Error::InvalidArgument(_))));
        }
        assert!(train(&p, &set.select(&[]), &config(1)).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let cfg = TrainingConfig {
            learning_rate: 1e200,
            optimizer: Optimizer::Sgd,
            ..config(5)
        };
        assert!(matches!(
            train(&small_params(4), &small_set(8), &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn default_config_halves_loss_on_synthetic_blocks() {
        let grid = BlockGrid::new(200, 200, 20).unwrap();
        let set = generate_dataset(&DatasetSpec::new(100, grid, 17)).unwrap();
        let p = init_params(100, 17).unwrap();
        let (_, history) = train(&p, &set, &TrainingConfig::default()).unwrap();
        assert_eq!(history.len(), 200);
        assert!(history[199] < 0.5 * history[0], "{} -> {}", history[0], history[199]);
    }
}
