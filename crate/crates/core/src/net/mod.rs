//! Choice-aware engagement network.
//!
//! For one user and target period the network sees the next-period exposure
//! `R` (`J`), the recent history `E_T` (`J x T`, newest column first) and the
//! lifetime frequencies `E_inf` (`J`). It computes
//!
//! 1. `H` temporal filters shared by all topics, `E_H = leaky_relu(E_T w_h)`;
//! 2. linear bottlenecks with tied weights, `code = W x`, `recon = W^T code`,
//!    for `R` (`W_d`), `E_inf` (`W_inf`) and every column of `E_H` (`W_H`);
//! 3. per-topic feature rows
//!    `z_j = [1, r_j, recon_d_j, e_inf_j, recon_inf_j, E_H[j,:], recon_H[j,:]]`
//!    of width `K = 5 + 2H`;
//! 4. `p_j = sigmoid(theta . z_j)` with `theta` shared across topics.
//!
//! The bottlenecks are where information crosses topics, so `p_j` depends on
//! which other topics are shown. Gradients are derived by hand in
//! [`backward`]; decoder weights never exist separately from the encoders.

mod adam;
mod backward;
mod checkpoint;
mod forward;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::adam::{adam_step, adam_update, AdamConfig};
pub use self::backward::backward;
pub use self::checkpoint::{checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use self::forward::{bottleneck, forward, loss_bce, time_filter, ForwardTrace, PROB_EPS};
pub use self::train::{batch_gradient, dataset_bce, train, train_from, EpochLoss, LossCurve, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{ChoiceModel, UserContext};

/// Offsets of the fixed blocks in a feature row / in `theta`.
pub mod feature {
    pub const BIAS: usize = 0;
    pub const EXPOSURE: usize = 1;
    pub const EXPOSURE_RECON: usize = 2;
    pub const FREQUENCY: usize = 3;
    pub const FREQUENCY_RECON: usize = 4;
    /// First of the `H` filter outputs; their reconstructions follow at `5 + H`.
    pub const FILTERS: usize = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_topics: usize,
    pub history_len: usize,
    pub num_filters: usize,
    pub bottleneck: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub const DEFAULT_FILTERS: usize = 20;
    pub const DEFAULT_BOTTLENECK: usize = 8;
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    /// Defaults for everything but the data-determined dimensions.
    pub fn new(num_topics: usize, history_len: usize) -> Self {
        ModelConfig {
            num_topics,
            history_len,
            num_filters: Self::DEFAULT_FILTERS,
            bottleneck: Self::DEFAULT_BOTTLENECK,
            leaky_slope: Self::DEFAULT_LEAKY_SLOPE,
            seed: 0,
        }
    }

    pub fn feature_width(&self) -> usize {
        5 + 2 * self.num_filters
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_len == 0 {
            return Err(Error::config("history length T must be at least 1"));
        }
        if self.num_filters == 0 {
            return Err(Error::config("number of time filters H must be at least 1"));
        }
        if self.bottleneck == 0 || self.bottleneck >= self.num_topics {
            return Err(Error::config(format!(
                "bottleneck width L={} must satisfy 1 <= L < J={}",
                self.bottleneck, self.num_topics
            )));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope.is_finite()) {
            return Err(Error::config("leaky_slope must be a nonnegative number"));
        }
        Ok(())
    }
}

/// Learnable arrays. The same layout holds gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `H x T`, filter-major.
    pub time_filters: Vec<f64>,
    /// `L x J` each.
    pub w_d: Vec<f64>,
    pub w_inf: Vec<f64>,
    pub w_hist: Vec<f64>,
    /// `K = 5 + 2H`.
    pub theta: Vec<f64>,
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let lj = cfg.bottleneck * cfg.num_topics;
        Weights {
            time_filters: vec![0.0; cfg.num_filters * cfg.history_len],
            w_d: vec![0.0; lj],
            w_inf: vec![0.0; lj],
            w_hist: vec![0.0; lj],
            theta: vec![0.0; cfg.feature_width()],
        }
    }

    /// The arrays in storage order: filters, `W_d`, `W_inf`, `W_H`, `theta`.
    pub fn arrays(&self) -> [&[f64]; 5] {
        [&self.time_filters, &self.w_d, &self.w_inf, &self.w_hist, &self.theta]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.time_filters,
            &mut self.w_d,
            &mut self.w_inf,
            &mut self.w_hist,
            &mut self.theta,
        ]
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    /// Mutable access to the `k`-th scalar in storage order.
    pub fn flat_mut(&mut self, mut k: usize) -> &mut f64 {
        for arr in self.arrays_mut() {
            if k < arr.len() {
                return &mut arr[k];
            }
            k -= arr.len();
        }
        panic!("flat index out of range")
    }

    pub fn add_assign(&mut self, other: &Weights) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Weights,
    pub v: Weights,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights,
    pub adam: AdamState,
}

/// Half-width of the uniform initialisation for an array with `fan_in` inputs.
pub fn init_scale(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights from a ChaCha8 stream
/// seeded by `cfg.seed`; Adam moments start at zero.
pub fn init_params(cfg: &ModelConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = Weights::zeros(cfg);
    let fan_ins = [cfg.history_len, cfg.num_topics, cfg.num_topics, cfg.num_topics, cfg.feature_width()];
    for (arr, fan_in) in weights.arrays_mut().into_iter().zip(fan_ins) {
        let s = init_scale(fan_in);
        for x in arr.iter_mut() {
            *x = rng.gen_range(-s..s);
        }
    }
    Ok(ModelParams {
        config: *cfg,
        adam: AdamState {
            m: Weights::zeros(cfg),
            v: Weights::zeros(cfg),
            step: 0,
        },
        weights,
    })
}

impl ModelParams {
    /// Zero weights with fresh optimizer state; mostly useful in tests.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ModelParams {
            config: *cfg,
            weights: Weights::zeros(cfg),
            adam: AdamState {
                m: Weights::zeros(cfg),
                v: Weights::zeros(cfg),
                step: 0,
            },
        })
    }
}

impl ChoiceModel for ModelParams {
    fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    fn predict(&self, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>> {
        Ok(forward(self, exposure, ctx.history, ctx.frequency)?.probs)
    }

    fn name(&self) -> &str {
        "choice_net"
    }
}
