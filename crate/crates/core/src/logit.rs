//! Per-topic independent logistic regression baseline.
//!
//! Topic `j` gets its own weight vector over
//! `[1, r_j, e_inf_j, e_{t,j}, ..., e_{t-T+1,j}]` (dimension `T + 3`). No
//! weight touches another topic's features, so a topic's probability cannot
//! react to what else is shown.
//!
//! Each topic is fit by minimising mean BCE plus `ridge/2 * |w|^2` with
//! damped Newton steps and Armijo backtracking. The ridge term keeps weights
//! finite for topics whose labels are all one class.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CheckpointError, Error, Result};
use crate::model::{ChoiceModel, UserContext};
use crate::pipeline::ModelInputs;
use crate::util::{mix_seed, sigmoid, ByteReader, ByteWriter};

const MAGIC: &[u8; 5] = b"BLGT1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitConfig {
    pub ridge: f64,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Seeds the (small, random) starting point of each fit.
    pub seed: u64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        LogitConfig {
            ridge: 1e-4,
            tol: 1e-8,
            max_iter: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitParams {
    pub num_topics: usize,
    pub history_len: usize,
    /// `J x (T + 3)` row-major.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicFit {
    /// All training labels of the topic were the same class.
    pub degenerate: bool,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub params: LogitParams,
    pub topics: Vec<TopicFit>,
}

impl LogitParams {
    pub fn zeros(num_topics: usize, history_len: usize) -> Self {
        LogitParams {
            num_topics,
            history_len,
            weights: vec![0.0; num_topics * (history_len + 3)],
        }
    }

    pub fn dim(&self) -> usize {
        self.history_len + 3
    }

    pub fn topic_weights(&self, topic: usize) -> &[f64] {
        let d = self.dim();
        &self.weights[topic * d..(topic + 1) * d]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(self.num_topics as u32);
        w.u32(self.history_len as u32);
        w.f64s(&self.weights);
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = ByteReader::new(data);
        r.magic(MAGIC)?;
        let num_topics = r.u32()? as usize;
        let history_len = r.u32()? as usize;
        let weights = r.f64s(num_topics * (history_len + 3))?;
        r.finish()?;
        Ok(LogitParams {
            num_topics,
            history_len,
            weights,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let data = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Ok(Self::from_bytes(&data)?)
    }
}

/// Writes topic `j`'s feature vector into `out` (length `T + 3`).
fn topic_features(j: usize, history_len: usize, exposure: &[u8], ctx: &UserContext<'_>, out: &mut [f64]) {
    out[0] = 1.0;
    out[1] = exposure[j] as f64;
    out[2] = ctx.frequency[j];
    for k in 0..history_len {
        out[3 + k] = ctx.history[j * history_len + k] as f64;
    }
}

pub fn predict_logit(params: &LogitParams, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>> {
    let (j_count, t_len) = (params.num_topics, params.history_len);
    for (what, expected, found) in [
        ("exposure", j_count, exposure.len()),
        ("frequency", j_count, ctx.frequency.len()),
        ("history", j_count * t_len, ctx.history.len()),
    ] {
        if expected != found {
            return Err(Error::Shape { what, expected, found });
        }
    }
    let mut x = vec![0.0; params.dim()];
    Ok((0..j_count)
        .map(|j| {
            topic_features(j, t_len, exposure, ctx, &mut x);
            sigmoid(dot(params.topic_weights(j), &x))
        })
        .collect())
}

impl ChoiceModel for LogitParams {
    fn num_topics(&self) -> usize {
        self.num_topics
    }

    fn predict(&self, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>> {
        predict_logit(self, exposure, ctx)
    }

    fn name(&self) -> &str {
        "binary_logit"
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(s))` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

struct TopicProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    dim: usize,
    ridge: f64,
}

impl TopicProblem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in self.x.chunks_exact(self.dim).zip(self.y) {
            let s = dot(row, w);
            total += softplus(s) - y * s;
        }
        total / self.n() as f64 + 0.5 * self.ridge * dot(w, w)
    }

    /// Gradient and Hessian (row-major `dim x dim`).
    fn derivatives(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for (row, &y) in self.x.chunks_exact(d).zip(self.y) {
            let p = sigmoid(dot(row, w));
            let r = p - y;
            let c = p * (1.0 - p);
            for a in 0..d {
                g[a] += r * row[a];
                if row[a] == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    h[a * d + b] += c * row[a] * row[b];
                }
            }
        }
        let inv_n = 1.0 / self.n() as f64;
        for a in 0..d {
            g[a] = g[a] * inv_n + self.ridge * w[a];
            for b in 0..=a {
                let v = h[a * d + b] * inv_n + if a == b { self.ridge } else { 0.0 };
                h[a * d + b] = v;
                h[b * d + a] = v;
            }
        }
        (g, h)
    }
}

/// Solves `h x = g` for symmetric positive definite `h` by Cholesky.
fn cholesky_solve(h: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let d = g.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (g[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * d + i];
    }
    Some(x)
}

fn fit_topic(problem: &TopicProblem<'_>, mut w: Vec<f64>, cfg: &LogitConfig) -> (Vec<f64>, TopicFit) {
    let mut f = problem.objective(&w);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let (g, h) = problem.derivatives(&w);
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = cholesky_solve(&h, &g).unwrap_or_else(|| g.clone());
        let slope = dot(&g, &dir);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a - step * b).collect();
            let fc = problem.objective(&cand);
            if fc <= f - 1e-4 * step * slope {
                w = cand;
                f = fc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            // no representable decrease left
            converged = gnorm < cfg.tol.sqrt();
            break;
        }
    }
    let degenerate = problem.y.iter().all(|&y| y == problem.y[0]);
    (
        w,
        TopicFit {
            degenerate,
            converged,
            iterations,
            objective: f,
        },
    )
}

pub fn train_logit(data: &[ModelInputs], cfg: &LogitConfig) -> Result<LogitFit> {
    let first = data.first().ok_or_else(|| Error::input("training dataset is empty"))?;
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::config("ridge must be nonnegative"));
    }
    let j_count = first.num_topics();
    if j_count == 0 {
        return Err(Error::input("instances have no topics"));
    }
    let t_len = first.history.len() / j_count;
    for inst in data {
        if inst.exposure.len() != j_count
            || inst.engaged.len() != j_count
            || inst.frequency.len() != j_count
            || inst.history.len() != j_count * t_len
        {
            return Err(Error::input(format!(
                "instance for user {} at period {} has inconsistent shapes",
                inst.user, inst.target_period
            )));
        }
    }
    let dim = t_len + 3;
    let mut params = LogitParams::zeros(j_count, t_len);
    let mut topics = Vec::with_capacity(j_count);
    let mut x = vec![0.0; data.len() * dim];
    let mut y = vec![0.0; data.len()];
    for j in 0..j_count {
        for (n, inst) in data.iter().enumerate() {
            topic_features(j, t_len, &inst.exposure, &inst.context(), &mut x[n * dim..(n + 1) * dim]);
            y[n] = inst.engaged[j] as f64;
        }
        let problem = TopicProblem {
            x: &x,
            y: &y,
            dim,
            ridge: cfg.ridge,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, j as u64));
        let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let (w, fit) = fit_topic(&problem, start, cfg);
        params.weights[j * dim..(j + 1) * dim].copy_from_slice(&w);
        topics.push(fit);
    }
    Ok(LogitFit { params, topics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(user: usize, j: usize, t: usize, seed: u64) -> ModelInputs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exposure: Vec<u8> = (0..j).map(|_| rng.gen_range(0..2)).collect();
        let engaged = exposure.iter().map(|&r| r & rng.gen_range(0..2)).collect();
        ModelInputs {
            user,
            target_period: t,
            history: (0..j * t).map(|_| rng.gen_range(0..2)).collect(),
            frequency: (0..j).map(|_| rng.gen()).collect(),
            exposure,
            engaged,
        }
    }

    #[test]
    fn zero_weights_predict_half() {
        let p = LogitParams::zeros(5, 4);
        let x = inst(0, 5, 4, 1);
        assert!(predict_logit(&p, &x.exposure, &x.context()).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_features_give_sigmoid_of_bias() {
        let mut p = LogitParams::zeros(3, 2);
        for j in 0..3 {
            p.weights[j * 5] = j as f64 - 1.0;
            p.weights[j * 5 + 1] = 5.0;
        }
        let ctx = UserContext { user: 0, history: &[0; 6], frequency: &[0.0; 3] };
        let probs = predict_logit(&p, &[0; 3], &ctx).unwrap();
        for j in 0..3 {
            assert_eq!(probs[j], sigmoid(j as f64 - 1.0));
        }
    }

    #[test]
    fn prediction_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (j, t) = (7, 4);
        let p = LogitParams { num_topics: j, history_len: t, weights: (0..j * (t + 3)).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let x = inst(0, j, t, 9);
        let got = predict_logit(&p, &x.exposure, &x.context()).unwrap();
        for topic in 0..j {
            let w = &p.weights[topic * (t + 3)..];
            let mut s = w[0] + w[1] * x.exposure[topic] as f64 + w[2] * x.frequency[topic];
            for k in 0..t {
                s += w[3 + k] * x.history[topic * t + k] as f64;
            }
            assert!((got[topic] - 1.0 / (1.0 + (-s).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn topics_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LogitParams { num_topics: 6, history_len: 3, weights: (0..36).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let x = inst(0, 6, 3, 5);
        let base = predict_logit(&p, &x.exposure, &x.context()).unwrap();
        for a in 0..6 {
            let mut exposure = x.exposure.clone();
            exposure[a] ^= 1;
            let mut history = x.history.clone();
            history[a * 3] ^= 1;
            let mut frequency = x.frequency.clone();
            frequency[a] += 0.3;
            let ctx = UserContext { user: 0, history: &history, frequency: &frequency };
            let moved = predict_logit(&p, &exposure, &ctx).unwrap();
            for b in (0..6).filter(|&b| b != a) {
                assert_eq!(moved[b], base[b]);
            }
        }
    }

    #[test]
    fn all_negative_topic_stays_finite() {
        let data: Vec<ModelInputs> = (0..200)
            .map(|u| {
                let mut x = inst(u, 3, 2, u as u64);
                x.engaged[1] = 0;
                x
            })
            .collect();
        let fit = train_logit(&data, &LogitConfig::default()).unwrap();
        assert!(fit.topics[1].degenerate);
        assert!(!fit.topics[0].degenerate);
        let w = fit.params.topic_weights(1);
        assert!(w.iter().all(|v| v.is_finite()));
        assert!(w[0] + w[1] < -4.0, "{w:?}");
    }

    #[test]
    fn separable_topic_is_classified_perfectly() {
        // engaged iff exposed and the most recent history bit is set
        let data: Vec<ModelInputs> = (0..300)
            .map(|u| {
                let mut x = inst(u, 2, 3, 1000 + u as u64);
                for j in 0..2 {
                    x.engaged[j] = x.exposure[j] & x.history[j * 3];
                }
                x
            })
            .collect();
        let fit = train_logit(&data, &LogitConfig::default()).unwrap();
        let mut correct = 0;
        for x in &data {
            let p = predict_logit(&fit.params, &x.exposure, &x.context()).unwrap();
            correct += (0..2).filter(|&j| (p[j] > 0.5) == (x.engaged[j] == 1)).count();
        }
        assert_eq!(correct, 2 * data.len());
    }

    #[test]
    fn fits_from_different_seeds_agree() {
        let data: Vec<ModelInputs> = (0..400).map(|u| inst(u, 4, 3, 50 + u as u64)).collect();
        let a = train_logit(&data, &LogitConfig { seed: 1, ..Default::default() }).unwrap();
        let b = train_logit(&data, &LogitConfig { seed: 2, ..Default::default() }).unwrap();
        for (fa, fb) in a.topics.iter().zip(&b.topics) {
            assert!(fa.converged && fb.converged);
            assert!((fa.objective - fb.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn cholesky_solves_small_system() {
        let h = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&h, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(cholesky_solve(&[0.0], &[1.0]).is_none());
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = LogitParams { num_topics: 3, history_len: 4, weights: (0..21).map(|_| rng.gen()).collect() };
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..5], b"BLGT1");
        assert_eq!(bytes.len(), 5 + 8 + 21 * 8);
        assert_eq!(LogitParams::from_bytes(&bytes).unwrap(), p);
        assert!(matches!(LogitParams::from_bytes(&bytes[..20]), Err(CheckpointError::Truncated { .. })));
        assert!(matches!(LogitParams::from_bytes(b"CAEM1xxxxxxxx"), Err(CheckpointError::BadMagic { .. })));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(train_logit(&[], &LogitConfig::default()), Err(Error::Input(_))));
    }
}
