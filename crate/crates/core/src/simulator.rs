//! Synthetic interaction logs from a known choice process.
//!
//! Each period a user is shown every topic independently with probability
//! `exposure_rate[j]`. A shown topic is engaged with probability
//!
//! ```text
//! sigmoid(base[u][j] + sum_k recency[k] * e[t-1-k][j] + sum_a S[a][j] * r[a])
//! ```
//!
//! where `base` comes from the user's archetype plus clamped Gaussian noise
//! and `S` is the substitution matrix. Unshown topics are never engaged. The
//! form is a plain logistic in `r`, with no low-rank structure.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CheckpointError, Error, Result};
use crate::evaluation::auc;
use crate::model::{ChoiceModel, UserContext};
use crate::pipeline::{EngagementKind, InteractionLog, PeriodGrid, Record};
use crate::util::{mix_seed, sigmoid, ByteReader, ByteWriter};

const TRUTH_MAGIC: &[u8; 5] = b"ENGP1";
const USERS_TAG: u64 = 0x7573_6572;
const PERIODS_TAG: u64 = 0x7065_7269;

/// Per-user preference noise is clamped to this many standard deviations.
pub const NOISE_CLAMP: f64 = 4.0;
/// Largest admissible engagement logit magnitude.
pub const MAX_LOGIT: f64 = 30.0;

/// Within-group substitution strength of [`SimConfig::default`].
pub const STRONG_SUBSTITUTION: f64 = 2.0;
pub const DEFAULT_GROUP_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    /// Unnormalised mixture weight.
    pub weight: f64,
    /// Base engagement logit per topic.
    pub base: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub num_users: usize,
    pub num_topics: usize,
    pub num_periods: usize,
    pub period_length_seconds: u64,
    pub origin_timestamp: i64,
    pub exposure_rate: Vec<f64>,
    pub archetypes: Vec<Archetype>,
    pub preference_noise: f64,
    /// `J x J` row-major; entry `[a * J + b]` shifts topic `b`'s logit when
    /// `a` is shown.
    pub substitution: Vec<f64>,
    /// Weight of the engagement `k + 1` periods back.
    pub recency: Vec<f64>,
    pub engagement_kind: EngagementKind,
    pub seed: u64,
}

/// `-strength` between distinct topics of the same consecutive group of
/// `group_size`, zero elsewhere.
pub fn group_substitution(num_topics: usize, group_size: usize, strength: f64) -> Vec<f64> {
    let mut s = vec![0.0; num_topics * num_topics];
    for a in 0..num_topics {
        for b in 0..num_topics {
            if a != b && a / group_size == b / group_size {
                s[a * num_topics + b] = -strength;
            }
        }
    }
    s
}

impl SimConfig {
    /// 2000 users, 30 topics in groups of 5, 14 half-day periods, four
    /// archetypes whose preferred topics rotate around the topic axis.
    pub fn desk(substitution_strength: f64, seed: u64) -> Self {
        SimConfig::scaled(2000, 30, substitution_strength, seed)
    }

    /// The desk layout with a different user and topic count.
    pub fn scaled(num_users: usize, num_topics: usize, substitution_strength: f64, seed: u64) -> Self {
        let num_arch = 4;
        let archetypes = (0..num_arch)
            .map(|k| Archetype {
                weight: 1.0,
                base: (0..num_topics)
                    .map(|j| {
                        let phase = 2.0 * PI * (j as f64 / num_topics as f64 - k as f64 / num_arch as f64);
                        0.5 + 1.0 * phase.cos()
                    })
                    .collect(),
            })
            .collect();
        let grid = PeriodGrid::default();
        SimConfig {
            num_users,
            num_topics,
            num_periods: grid.num_periods,
            period_length_seconds: grid.period_length_seconds,
            origin_timestamp: grid.origin_timestamp,
            exposure_rate: vec![0.5; num_topics],
            archetypes,
            preference_noise: 0.75,
            substitution: group_substitution(num_topics, DEFAULT_GROUP_SIZE, substitution_strength),
            recency: vec![0.6, 0.3, 0.15, 0.05],
            engagement_kind: EngagementKind::default(),
            seed,
        }
    }

    pub fn without_substitution(mut self) -> Self {
        self.substitution.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    pub fn grid(&self) -> PeriodGrid {
        PeriodGrid {
            period_length_seconds: self.period_length_seconds,
            num_periods: self.num_periods,
            origin_timestamp: self.origin_timestamp,
        }
    }

    /// Upper bound on `|logit|` over every user, period and slate.
    pub fn logit_bound(&self) -> f64 {
        let j_count = self.num_topics;
        let base = self
            .archetypes
            .iter()
            .flat_map(|a| a.base.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let recency: f64 = self.recency.iter().map(|v| v.abs()).sum();
        let substitution = (0..j_count)
            .map(|b| (0..j_count).map(|a| self.substitution[a * j_count + b].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        base + NOISE_CLAMP * self.preference_noise + recency + substitution
    }

    pub fn validate(&self) -> Result<()> {
        let j_count = self.num_topics;
        if self.num_users == 0 || j_count == 0 || self.num_periods == 0 {
            return Err(Error::config("users, topics and periods must all be positive"));
        }
        if self.period_length_seconds < 4 {
            return Err(Error::config("period length must be at least 4 seconds"));
        }
        if self.exposure_rate.len() != j_count {
            return Err(Error::config(format!(
                "exposure_rate has {} entries for {j_count} topics",
                self.exposure_rate.len()
            )));
        }
        if self.exposure_rate.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::config("exposure rates must lie in [0, 1]"));
        }
        if self.archetypes.is_empty() {
            return Err(Error::config("at least one archetype is required"));
        }
        for (k, a) in self.archetypes.iter().enumerate() {
            if a.base.len() != j_count {
                return Err(Error::config(format!("archetype {k} has {} base entries", a.base.len())));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) || a.base.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("archetype {k} has a non-finite or nonpositive value")));
            }
        }
        if !(self.preference_noise >= 0.0 && self.preference_noise.is_finite()) {
            return Err(Error::config("preference_noise must be finite and nonnegative"));
        }
        if self.substitution.len() != j_count * j_count || self.substitution.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!("substitution must hold {} finite entries", j_count * j_count)));
        }
        if let Some(j) = (0..j_count).find(|&j| self.substitution[j * j_count + j] != 0.0) {
            return Err(Error::config(format!("substitution diagonal is nonzero at topic {j}")));
        }
        if self.recency.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("recency weights must be finite"));
        }
        let bound = self.logit_bound();
        if bound > MAX_LOGIT {
            return Err(Error::config(format!(
                "engagement logits can reach {bound:.1}, so probabilities would leave (0, 1); the limit is {MAX_LOGIT}"
            )));
        }
        Ok(())
    }

    fn user_id(&self, index: usize) -> String {
        let width = (self.num_users.max(1) - 1).to_string().len().max(5);
        format!("u{index:0width$}")
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::desk(STRONG_SUBSTITUTION, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimUser {
    pub id: String,
    pub archetype: usize,
    pub base: Vec<f64>,
}

/// Draws every user's archetype and base logits. Depends only on the seed,
/// the archetypes and the noise level.
pub fn sample_users(cfg: &SimConfig) -> Result<Vec<SimUser>> {
    cfg.validate()?;
    let total: f64 = cfg.archetypes.iter().map(|a| a.weight).sum();
    let noise = Normal::new(0.0, cfg.preference_noise).map_err(|e| Error::config(e.to_string()))?;
    let limit = NOISE_CLAMP * cfg.preference_noise;
    Ok((0..cfg.num_users)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, USERS_TAG));
            rng.set_stream(i as u64);
            let mut u = rng.gen::<f64>() * total;
            let mut archetype = cfg.archetypes.len() - 1;
            for (k, a) in cfg.archetypes.iter().enumerate() {
                if u < a.weight {
                    archetype = k;
                    break;
                }
                u -= a.weight;
            }
            let base = cfg.archetypes[archetype]
                .base
                .iter()
                .map(|&b| b + noise.sample(&mut rng).clamp(-limit, limit))
                .collect();
            SimUser {
                id: cfg.user_id(i),
                archetype,
                base,
            }
        })
        .collect())
}

/// True engagement probabilities and the sampled outcomes, indexed
/// `(user * periods + period) * topics + topic`. A probability is zero for
/// unshown topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTensor {
    pub user_ids: Vec<String>,
    pub num_periods: usize,
    pub num_topics: usize,
    pub prob: Vec<f64>,
    pub engaged: Vec<u8>,
}

impl TruthTensor {
    /// Layout: `"ENGP1" | users u32 | periods u32 | topics u32`, each user id
    /// as u32 length plus UTF-8, then all probabilities (f64 LE), then all
    /// outcomes as LSB-first bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(TRUTH_MAGIC);
        w.u32(self.user_ids.len() as u32);
        w.u32(self.num_periods as u32);
        w.u32(self.num_topics as u32);
        for id in &self.user_ids {
            w.string(id);
        }
        w.f64s(&self.prob);
        w.bits(&self.engaged);
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = ByteReader::new(data);
        r.magic(TRUTH_MAGIC)?;
        let users = r.u32()? as usize;
        let num_periods = r.u32()? as usize;
        let num_topics = r.u32()? as usize;
        let user_ids = (0..users).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let cells = users * num_periods * num_topics;
        let prob = r.f64s(cells)?;
        let engaged = r.bits(cells)?;
        r.finish()?;
        Ok(TruthTensor {
            user_ids,
            num_periods,
            num_topics,
            prob,
            engaged,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let data = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Ok(Self::from_bytes(&data)?)
    }

    fn span(&self, user: usize, period: usize) -> Range<usize> {
        let start = (user * self.num_periods + period) * self.num_topics;
        start..start + self.num_topics
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: InteractionLog,
    pub truth: TruthTensor,
    pub users: Vec<SimUser>,
}

fn engagement_logit(cfg: &SimConfig, base: &[f64], exposure: &[u8], history: impl Fn(usize, usize) -> u8, j: usize) -> f64 {
    let j_count = cfg.num_topics;
    let mut s = base[j];
    for (k, &w) in cfg.recency.iter().enumerate() {
        s += w * history(j, k) as f64;
    }
    for (a, &r) in exposure.iter().enumerate() {
        if r != 0 {
            s += cfg.substitution[a * j_count + j];
        }
    }
    s
}

struct UserTrace {
    records: Vec<Record>,
    prob: Vec<f64>,
    engaged: Vec<u8>,
}

fn simulate_user(cfg: &SimConfig, index: usize, user: &SimUser) -> UserTrace {
    let (j_count, periods) = (cfg.num_topics, cfg.num_periods);
    let grid = cfg.grid();
    let half = (cfg.period_length_seconds / 2) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, PERIODS_TAG));
    rng.set_stream(index as u64);
    let mut prob = vec![0.0; periods * j_count];
    let mut engaged = vec![0u8; periods * j_count];
    let mut records = Vec::new();
    let mut exposure = vec![0u8; j_count];
    for t in 0..periods {
        for (r, &q) in exposure.iter_mut().zip(&cfg.exposure_rate) {
            *r = rng.gen_bool(q) as u8;
        }
        let history = |j: usize, k: usize| if k < t { engaged[(t - 1 - k) * j_count + j] } else { 0 };
        let probs: Vec<f64> = (0..j_count)
            .map(|j| {
                if exposure[j] == 0 {
                    0.0
                } else {
                    sigmoid(engagement_logit(cfg, &user.base, &exposure, history, j))
                }
            })
            .collect();
        let start = grid.period_start(t);
        for j in 0..j_count {
            if exposure[j] == 0 {
                continue;
            }
            let p = probs[j];
            let hit = rng.gen_bool(p);
            let tweet_ts = start + rng.gen_range(0..half);
            let mut record = Record::new(user.id.clone(), format!("{}-{t}-{j}", user.id), j, tweet_ts);
            if hit {
                record.set_engagement(cfg.engagement_kind, Some(tweet_ts + rng.gen_range(1..half)));
            }
            records.push(record);
            prob[t * j_count + j] = p;
            engaged[t * j_count + j] = hit as u8;
        }
    }
    UserTrace { records, prob, engaged }
}

/// Simulates every user over every period. Records are ordered by user,
/// period and topic.
pub fn generate_log(cfg: &SimConfig) -> Result<SimOutput> {
    let users = sample_users(cfg)?;
    let traces: Vec<UserTrace> = users
        .par_iter()
        .enumerate()
        .map(|(i, u)| simulate_user(cfg, i, u))
        .collect();
    let mut records = Vec::new();
    let mut prob = Vec::with_capacity(users.len() * cfg.num_periods * cfg.num_topics);
    let mut engaged = Vec::with_capacity(prob.capacity());
    for trace in traces {
        records.extend(trace.records);
        prob.extend(trace.prob);
        engaged.extend(trace.engaged);
    }
    Ok(SimOutput {
        log: InteractionLog::new(records),
        truth: TruthTensor {
            user_ids: users.iter().map(|u| u.id.clone()).collect(),
            num_periods: cfg.num_periods,
            num_topics: cfg.num_topics,
            prob,
            engaged,
        },
        users,
    })
}

/// AUC of the true probabilities against the sampled outcomes over the
/// given periods of every user.
pub fn ground_truth_auc_bound(truth: &TruthTensor, periods: Range<usize>) -> Result<f64> {
    if periods.end > truth.num_periods || periods.is_empty() {
        return Err(Error::input(format!(
            "period range {periods:?} is empty or exceeds {} periods",
            truth.num_periods
        )));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for u in 0..truth.user_ids.len() {
        for t in periods.clone() {
            let span = truth.span(u, t);
            scores.extend_from_slice(&truth.prob[span.clone()]);
            labels.extend_from_slice(&truth.engaged[span]);
        }
    }
    auc(&scores, &labels)
}

/// The simulator's engagement probabilities as a predictor. Rows follow an
/// engagement tensor's user order.
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    cfg: SimConfig,
    /// Base logits per tensor row.
    bases: Vec<Vec<f64>>,
}

impl GroundTruthModel {
    pub fn new(cfg: &SimConfig, users: &[SimUser], user_ids: &[String]) -> Result<Self> {
        cfg.validate()?;
        let by_id: HashMap<&str, &SimUser> = users.iter().map(|u| (u.id.as_str(), u)).collect();
        let bases = user_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|u| u.base.clone())
                    .ok_or_else(|| Error::input(format!("user {id:?} is not part of the simulation")))
            })
            .collect::<Result<_>>()?;
        Ok(GroundTruthModel { cfg: cfg.clone(), bases })
    }

    pub fn history_len(&self) -> usize {
        self.cfg.recency.len()
    }
}

impl ChoiceModel for GroundTruthModel {
    fn num_topics(&self) -> usize {
        self.cfg.num_topics
    }

    fn predict(&self, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>> {
        let (j_count, t_len) = (self.cfg.num_topics, self.history_len());
        let base = self.bases.get(ctx.user).ok_or_else(|| {
            Error::input(format!("user row {} outside the {} simulated users", ctx.user, self.bases.len()))
        })?;
        if exposure.len() != j_count {
            return Err(Error::Shape {
                what: "exposure",
                expected: j_count,
                found: exposure.len(),
            });
        }
        if ctx.history.len() != j_count * t_len {
            return Err(Error::Shape {
                what: "history",
                expected: j_count * t_len,
                found: ctx.history.len(),
            });
        }
        let history = |j: usize, k: usize| ctx.history[j * t_len + k];
        Ok((0..j_count)
            .map(|j| {
                if exposure[j] == 0 {
                    0.0
                } else {
                    sigmoid(engagement_logit(&self.cfg, base, exposure, history, j))
                }
            })
            .collect())
    }

    fn name(&self) -> &str {
        "ground_truth"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{build_model_inputs, split_periods};

    fn small(strength: f64, seed: u64) -> SimConfig {
        SimConfig {
            num_users: 200,
            ..SimConfig::desk(strength, seed)
        }
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.num_users, cfg.num_topics, cfg.num_periods), (2000, 30, 14));
        assert_eq!(cfg.recency.len(), 4);
        assert!((0..30).all(|j| cfg.substitution[j * 30 + j] == 0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small(1.0, 0);
        c.substitution[31] = 0.5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small(1.0, 0);
        c.archetypes[0].base[0] = 40.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small(1.0, 0);
        c.exposure_rate[3] = 1.5;
        assert!(c.validate().is_err());
        let mut c = small(1.0, 0);
        c.recency.push(f64::NAN);
        assert!(c.validate().is_err());
    }

    #[test]
    fn no_exposure_means_empty_log() {
        let mut cfg = small(1.0, 0);
        cfg.exposure_rate = vec![0.0; 30];
        let out = generate_log(&cfg).unwrap();
        assert!(out.log.is_empty());
        assert!(out.truth.prob.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = small(2.0, 9);
        let (a, b) = (generate_log(&cfg).unwrap(), generate_log(&cfg).unwrap());
        let (mut wa, mut wb) = (Vec::new(), Vec::new());
        a.log.write_tsv(&mut wa).unwrap();
        b.log.write_tsv(&mut wb).unwrap();
        assert_eq!(wa, wb);
        assert_eq!(a.truth.to_bytes(), b.truth.to_bytes());
        let c = generate_log(&SimConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.truth.engaged, c.truth.engaged);
    }

    #[test]
    fn engagement_rate_converges_to_base() {
        let mut cfg = SimConfig::desk(0.0, 4);
        cfg.recency = vec![0.0; 4];
        cfg.preference_noise = 0.0;
        cfg.archetypes.truncate(1);
        let out = generate_log(&cfg).unwrap();
        let j_count = cfg.num_topics;
        for j in 0..j_count {
            let (mut shown, mut hits) = (0usize, 0usize);
            for r in &out.log.records {
                if r.topic == j {
                    shown += 1;
                    hits += r.engagement(cfg.engagement_kind).is_some() as usize;
                }
            }
            let p = sigmoid(cfg.archetypes[0].base[j]);
            let se = (p * (1.0 - p) / shown as f64).sqrt();
            let rate = hits as f64 / shown as f64;
            assert!((rate - p).abs() < 3.0 * se + 1e-12, "topic {j}: rate {rate} vs {p} (se {se})");
        }
    }

    #[test]
    fn records_respect_the_grid() {
        let cfg = small(2.0, 1);
        let out = generate_log(&cfg).unwrap();
        let grid = cfg.grid();
        out.log.validate(cfg.num_topics).unwrap();
        for r in &out.log.records {
            let t = grid.period_of(r.tweet_ts).unwrap();
            let e = r.engagement(cfg.engagement_kind);
            assert!(e.map_or(true, |e| grid.period_of(e) == Some(t)));
            assert!([r.like_ts, r.reply_ts, r.rt_comment_ts].iter().all(Option::is_none));
        }
    }

    #[test]
    fn truth_model_reproduces_simulated_probabilities() {
        let cfg = small(2.0, 3);
        let out = generate_log(&cfg).unwrap();
        let tensor = split_periods(&out.log, &cfg.grid(), cfg.num_topics, cfg.engagement_kind).unwrap();
        assert_eq!(tensor.user_ids, out.truth.user_ids);
        let model = GroundTruthModel::new(&cfg, &out.users, &tensor.user_ids).unwrap();
        for target in [4, 9, 13] {
            for inst in build_model_inputs(&tensor, 4, target).unwrap() {
                let p = model.predict(&inst.exposure, &inst.context()).unwrap();
                let span = out.truth.span(inst.user, target);
                assert_eq!(&p[..], &out.truth.prob[span.clone()]);
                assert_eq!(&inst.engaged[..], &out.truth.engaged[span]);
            }
        }
    }

    #[test]
    fn substitution_lowers_engagement_with_crowded_groups() {
        let cfg = small(2.0, 0);
        let users = sample_users(&cfg).unwrap();
        let ids: Vec<String> = users.iter().map(|u| u.id.clone()).collect();
        let model = GroundTruthModel::new(&cfg, &users, &ids).unwrap();
        let ctx = UserContext { user: 0, history: &[0; 120], frequency: &[0.0; 30] };
        let mut alone = vec![0u8; 30];
        alone[0] = 1;
        let mut crowded = alone.clone();
        crowded[1] = 1;
        let (pa, pc) = (model.predict(&alone, &ctx).unwrap(), model.predict(&crowded, &ctx).unwrap());
        assert!(pc[0] < pa[0]);
        assert_eq!(pa[5..], pc[5..]);
        assert_eq!(pa[1], 0.0);
    }

    #[test]
    fn auc_bound_extremes() {
        let truth = |prob: Vec<f64>, engaged: Vec<u8>| TruthTensor {
            user_ids: vec!["a".into()],
            num_periods: 1,
            num_topics: prob.len(),
            prob,
            engaged,
        };
        let exact = truth(vec![1e-7, 1.0 - 1e-7, 1e-7, 1.0 - 1e-7], vec![0, 1, 0, 1]);
        assert_eq!(ground_truth_auc_bound(&exact, 0..1).unwrap(), 1.0);
        let coin = truth(vec![0.5; 6], vec![0, 1, 1, 0, 1, 0]);
        assert_eq!(ground_truth_auc_bound(&coin, 0..1).unwrap(), 0.5);
        let cfg = small(2.0, 0);
        let out = generate_log(&cfg).unwrap();
        let ceiling = ground_truth_auc_bound(&out.truth, 12..14).unwrap();
        assert!(ceiling > 0.5 && ceiling < 1.0);
    }

    #[test]
    fn truth_file_round_trip() {
        let out = generate_log(&SimConfig { num_users: 20, ..SimConfig::default() }).unwrap();
        let bytes = out.truth.to_bytes();
        assert_eq!(&bytes[..5], b"ENGP1");
        assert_eq!(TruthTensor::from_bytes(&bytes).unwrap(), out.truth);
        assert!(matches!(TruthTensor::from_bytes(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated { .. })));
    }

    #[test]
    fn unknown_users_are_rejected() {
        let cfg = small(1.0, 0);
        let users = sample_users(&cfg).unwrap();
        assert!(GroundTruthModel::new(&cfg, &users, &["nobody".to_string()]).is_err());
    }
}
