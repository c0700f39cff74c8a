use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, forward, init_params, loss_bce, AdamConfig, ModelConfig, ModelParams, Weights};
use crate::error::{Error, Result};
use crate::pipeline::ModelInputs;
use crate::util::mix_seed;

/// Mini-batch Adam settings. A batch gradient is the plain sum of the
/// per-instance gradients, so the learning rate applies to summed BCE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-5,
            batch_size: 32,
            epochs: 50,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_bce: f64,
    pub valid_bce: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub epochs: Vec<EpochLoss>,
}

impl LossCurve {
    /// `epoch<TAB>train_bce<TAB>valid_bce` per line; missing validation is empty.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_bce\tvalid_bce\n");
        for e in &self.epochs {
            let valid = e.valid_bce.map(|v| format!("{v:.10}")).unwrap_or_default();
            out.push_str(&format!("{}\t{:.10}\t{}\n", e.epoch, e.train_bce, valid));
        }
        out
    }

    pub fn last(&self) -> Option<&EpochLoss> {
        self.epochs.last()
    }
}

/// Mean over instances of the per-instance summed BCE.
pub fn dataset_bce(params: &ModelParams, data: &[ModelInputs]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("cannot compute BCE of an empty dataset"));
    }
    let mut total = 0.0;
    for inst in data {
        let t = forward(params, &inst.exposure, &inst.history, &inst.frequency)?;
        total += loss_bce(&t.probs, &inst.engaged);
    }
    Ok(total / data.len() as f64)
}

/// Summed loss and gradient over `batch`, accumulated in slice order.
pub fn batch_gradient(params: &ModelParams, batch: &[&ModelInputs]) -> Result<(f64, Weights)> {
    let mut grad = Weights::zeros(&params.config);
    let mut loss = 0.0;
    for inst in batch {
        if inst.engaged.len() != params.config.num_topics {
            return Err(Error::Shape {
                what: "labels",
                expected: params.config.num_topics,
                found: inst.engaged.len(),
            });
        }
        let t = forward(params, &inst.exposure, &inst.history, &inst.frequency)?;
        loss += loss_bce(&t.probs, &inst.engaged);
        grad.add_assign(&backward(params, &t, &inst.engaged));
    }
    Ok((loss, grad))
}

/// Trains freshly initialised parameters.
pub fn train(
    data: &[ModelInputs],
    valid: Option<&[ModelInputs]>,
    cfg: &ModelConfig,
    hyper: &TrainConfig,
) -> Result<(ModelParams, LossCurve)> {
    let params = init_params(cfg)?;
    train_from(params, data, valid, hyper)
}

/// Continues training `params`. Shuffling uses a ChaCha8 stream derived from
/// the model seed, so runs are reproducible.
pub fn train_from(
    mut params: ModelParams,
    data: &[ModelInputs],
    valid: Option<&[ModelInputs]>,
    hyper: &TrainConfig,
) -> Result<(ModelParams, LossCurve)> {
    if data.is_empty() {
        return Err(Error::input("training dataset is empty"));
    }
    if hyper.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    if !(hyper.lr > 0.0 && hyper.lr.is_finite()) {
        return Err(Error::config("learning rate must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.config.seed, 0x7261_696e));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = LossCurve::default();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<&ModelInputs> = chunk.iter().map(|&k| &data[k]).collect();
            let (_, grad) = batch_gradient(&params, &batch)?;
            adam_step(&mut params, &grad, hyper.lr, &hyper.adam);
        }
        let train_bce = dataset_bce(&params, data)?;
        let valid_bce = match valid {
            Some(v) if !v.is_empty() => Some(dataset_bce(&params, v)?),
            _ => None,
        };
        curve.epochs.push(EpochLoss {
            epoch,
            train_bce,
            valid_bce,
        });
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            num_topics: 6,
            history_len: 4,
            num_filters: 3,
            bottleneck: 2,
            leaky_slope: 0.01,
            seed: 21,
        }
    }

    fn instance(user: usize, exposure: [u8; 6], engaged: [u8; 6]) -> ModelInputs {
        ModelInputs {
            user,
            target_period: 4,
            history: (0..24).map(|k| ((k * 7 + user) % 3 == 0) as u8).collect(),
            frequency: (0..6).map(|j| ((j + user) % 4) as f64 / 4.0).collect(),
            exposure: exposure.to_vec(),
            engaged: engaged.to_vec(),
        }
    }

    #[test]
    fn defaults_follow_reported_settings() {
        let t = TrainConfig::default();
        assert_eq!((t.lr, t.batch_size, t.epochs), (1e-5, 32, 50));
    }

    #[test]
    fn single_example_overfits() {
        let data = vec![instance(0, [1, 1, 0, 1, 0, 1], [1, 0, 0, 1, 0, 0])];
        let hyper = TrainConfig {
            lr: 1e-2,
            batch_size: 1,
            epochs: 200,
            ..Default::default()
        };
        let initial = dataset_bce(&init_params(&cfg()).unwrap(), &data).unwrap();
        let (_, curve) = train(&data, None, &cfg(), &hyper).unwrap();
        let losses: Vec<f64> = curve.epochs.iter().map(|e| e.train_bce).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(*losses.last().unwrap() < 0.1 * initial);
    }

    #[test]
    fn small_lr_full_batch_is_monotone() {
        let data = vec![
            instance(0, [1, 1, 0, 0, 1, 0], [1, 0, 0, 0, 1, 0]),
            instance(1, [0, 1, 1, 0, 0, 1], [0, 0, 1, 0, 0, 1]),
            instance(2, [1, 0, 1, 1, 0, 0], [1, 0, 1, 0, 0, 0]),
        ];
        let hyper = TrainConfig {
            lr: 1e-3,
            batch_size: 3,
            epochs: 60,
            ..Default::default()
        };
        let (_, curve) = train(&data, None, &cfg(), &hyper).unwrap();
        assert!(curve.epochs.windows(2).all(|w| w[1].train_bce < w[0].train_bce));
    }

    #[test]
    fn identical_runs_give_identical_params() {
        let data: Vec<ModelInputs> = (0..10)
            .map(|u| instance(u, [1, 0, 1, 0, 1, (u % 2) as u8], [(u % 3 == 0) as u8, 0, 1, 0, 0, 0]))
            .collect();
        let hyper = TrainConfig {
            lr: 1e-3,
            batch_size: 4,
            epochs: 5,
            ..Default::default()
        };
        let (a, ca) = train(&data, Some(&data[..3]), &cfg(), &hyper).unwrap();
        let (b, cb) = train(&data, Some(&data[..3]), &cfg(), &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert!(ca.epochs.iter().all(|e| e.valid_bce.is_some()));
        let tsv = ca.to_tsv();
        assert_eq!(tsv.lines().count(), 6);
        assert_eq!(tsv.lines().nth(1).unwrap().split('\t').count(), 3);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(train(&[], None, &cfg(), &TrainConfig::default()), Err(Error::Input(_))));
    }
}
