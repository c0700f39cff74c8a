//! From interaction logs to model-ready instances.
//!
//! Records are bucketed into fixed-length periods. A topic counts as
//! *exposed* for a user in a period when at least one tweet of that topic was
//! published to the user in it, and as *engaged* when at least one of those
//! tweets carries the selected engagement. Engagement is credited to the
//! tweet's publication period so that labels and exposure line up.

mod dataset;
mod log;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use self::dataset::Dataset;
pub use self::log::{label_active_states, EngagementKind, InteractionLog, Record};
use crate::error::{Error, Result};
use crate::model::UserContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodGrid {
    pub period_length_seconds: u64,
    pub num_periods: usize,
    pub origin_timestamp: i64,
}

impl Default for PeriodGrid {
    /// 14 periods of 12 hours starting at the unix epoch.
    fn default() -> Self {
        PeriodGrid {
            period_length_seconds: 12 * 3600,
            num_periods: 14,
            origin_timestamp: 0,
        }
    }
}

impl PeriodGrid {
    pub fn validate(&self, history_len: usize) -> Result<()> {
        if self.period_length_seconds == 0 {
            return Err(Error::config("period length must be positive"));
        }
        if self.num_periods < history_len + 2 {
            return Err(Error::config(format!(
                "{} periods cannot hold a history window of {history_len} plus a target",
                self.num_periods
            )));
        }
        Ok(())
    }

    pub fn end_timestamp(&self) -> i64 {
        self.origin_timestamp + (self.num_periods as u64 * self.period_length_seconds) as i64
    }

    pub fn period_of(&self, ts: i64) -> Option<usize> {
        if ts < self.origin_timestamp || ts >= self.end_timestamp() {
            return None;
        }
        Some(((ts - self.origin_timestamp) as u64 / self.period_length_seconds) as usize)
    }

    pub fn period_start(&self, period: usize) -> i64 {
        self.origin_timestamp + (period as u64 * self.period_length_seconds) as i64
    }
}

/// Binary engagement `e` and exposure `r` indicators, indexed
/// `(user, period, topic)` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngagementTensor {
    pub user_ids: Vec<String>,
    pub num_periods: usize,
    pub num_topics: usize,
    e: Vec<u8>,
    r: Vec<u8>,
}

impl EngagementTensor {
    pub fn zeros(user_ids: Vec<String>, num_periods: usize, num_topics: usize) -> Self {
        let n = user_ids.len() * num_periods * num_topics;
        EngagementTensor {
            user_ids,
            num_periods,
            num_topics,
            e: vec![0; n],
            r: vec![0; n],
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    #[inline]
    fn idx(&self, user: usize, period: usize, topic: usize) -> usize {
        (user * self.num_periods + period) * self.num_topics + topic
    }

    pub fn engaged(&self, user: usize, period: usize, topic: usize) -> u8 {
        self.e[self.idx(user, period, topic)]
    }

    pub fn exposed(&self, user: usize, period: usize, topic: usize) -> u8 {
        self.r[self.idx(user, period, topic)]
    }

    /// Sets one cell; engagement forces exposure.
    pub fn set(&mut self, user: usize, period: usize, topic: usize, exposed: bool, engaged: bool) {
        let k = self.idx(user, period, topic);
        self.r[k] = (exposed || engaged) as u8;
        self.e[k] = engaged as u8;
    }

    pub fn engaged_row(&self, user: usize, period: usize) -> &[u8] {
        let k = self.idx(user, period, 0);
        &self.e[k..k + self.num_topics]
    }

    pub fn exposed_row(&self, user: usize, period: usize) -> &[u8] {
        let k = self.idx(user, period, 0);
        &self.r[k..k + self.num_topics]
    }
}

/// Buckets a log into the period grid. Users are ordered by id.
pub fn split_periods(
    log: &InteractionLog,
    grid: &PeriodGrid,
    num_topics: usize,
    kind: EngagementKind,
) -> Result<EngagementTensor> {
    if grid.period_length_seconds == 0 || grid.num_periods == 0 {
        return Err(Error::config("period grid must have positive length and count"));
    }
    log.validate(num_topics)?;
    let users: BTreeSet<&str> = log.records.iter().map(|r| r.user_id.as_str()).collect();
    let index: BTreeMap<&str, usize> = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut tensor = EngagementTensor::zeros(
        users.iter().map(|u| u.to_string()).collect(),
        grid.num_periods,
        num_topics,
    );
    for (n, rec) in log.records.iter().enumerate() {
        let period = grid.period_of(rec.tweet_ts).ok_or_else(|| {
            Error::input(format!(
                "record {n} (user {}, tweet {}): timestamp {} outside [{}, {})",
                rec.user_id,
                rec.tweet_id,
                rec.tweet_ts,
                grid.origin_timestamp,
                grid.end_timestamp()
            ))
        })?;
        let k = tensor.idx(index[rec.user_id.as_str()], period, rec.topic);
        tensor.r[k] = 1;
        if rec.engagement(kind).is_some() {
            tensor.e[k] = 1;
        }
    }
    Ok(tensor)
}

/// One training/evaluation instance: user `user` predicted at `target_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    pub user: usize,
    pub target_period: usize,
    /// `J x T` row-major; column `k` holds period `target_period - 1 - k`.
    pub history: Vec<u8>,
    pub frequency: Vec<f64>,
    pub exposure: Vec<u8>,
    pub engaged: Vec<u8>,
}

impl ModelInputs {
    pub fn context(&self) -> UserContext<'_> {
        UserContext {
            user: self.user,
            history: &self.history,
            frequency: &self.frequency,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.exposure.len()
    }
}

/// One instance per user for `target_period`, with history from the `T`
/// preceding periods (newest first) and frequencies over all of
/// `0..target_period`.
pub fn build_model_inputs(
    tensor: &EngagementTensor,
    history_len: usize,
    target_period: usize,
) -> Result<Vec<ModelInputs>> {
    if history_len == 0 {
        return Err(Error::config("history length must be at least 1"));
    }
    if target_period < history_len {
        return Err(Error::input(format!(
            "target period {target_period} has fewer than {history_len} periods of history"
        )));
    }
    if target_period >= tensor.num_periods {
        return Err(Error::input(format!(
            "target period {target_period} beyond the last period {}",
            tensor.num_periods - 1
        )));
    }
    let j_count = tensor.num_topics;
    let elapsed = target_period as f64;
    let mut out = Vec::with_capacity(tensor.num_users());
    for user in 0..tensor.num_users() {
        let mut history = vec![0u8; j_count * history_len];
        for k in 0..history_len {
            let row = tensor.engaged_row(user, target_period - 1 - k);
            for (j, &v) in row.iter().enumerate() {
                history[j * history_len + k] = v;
            }
        }
        let mut counts = vec![0u32; j_count];
        for t in 0..target_period {
            for (c, &v) in counts.iter_mut().zip(tensor.engaged_row(user, t)) {
                *c += v as u32;
            }
        }
        out.push(ModelInputs {
            user,
            target_period,
            history,
            frequency: counts.iter().map(|&c| c as f64 / elapsed).collect(),
            exposure: tensor.exposed_row(user, target_period).to_vec(),
            engaged: tensor.engaged_row(user, target_period).to_vec(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    /// Period counts `(train, valid, test)` for `n` eligible periods.
    /// Validation and test get at least one period each.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        let total = self.train + self.valid + self.test;
        if !(self.train > 0.0 && self.valid >= 0.0 && self.test >= 0.0 && total.is_finite()) {
            return Err(Error::config("split ratios must be positive"));
        }
        if n < 3 {
            return Err(Error::input(format!(
                "need at least 3 eligible target periods for a train/valid/test split, have {n}"
            )));
        }
        let share = |r: f64| ((n as f64 * r / total).round() as usize).max(1);
        let (valid, test) = (share(self.valid), share(self.test));
        if valid + test >= n {
            return Err(Error::config(format!(
                "split ratios leave no training periods out of {n}"
            )));
        }
        Ok((n - valid - test, valid, test))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<ModelInputs>,
    pub valid: Vec<ModelInputs>,
    pub test: Vec<ModelInputs>,
    pub train_periods: Vec<usize>,
    pub valid_periods: Vec<usize>,
    pub test_periods: Vec<usize>,
}

/// Chronological split: earliest target periods train, then validation, then
/// test.
pub fn split_train_valid_test(
    by_period: BTreeMap<usize, Vec<ModelInputs>>,
    ratios: &SplitRatios,
) -> Result<Splits> {
    let (n_train, n_valid, _) = ratios.counts(by_period.len())?;
    let mut splits = Splits {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        train_periods: Vec::new(),
        valid_periods: Vec::new(),
        test_periods: Vec::new(),
    };
    for (rank, (period, inputs)) in by_period.into_iter().enumerate() {
        let (set, periods) = if rank < n_train {
            (&mut splits.train, &mut splits.train_periods)
        } else if rank < n_train + n_valid {
            (&mut splits.valid, &mut splits.valid_periods)
        } else {
            (&mut splits.test, &mut splits.test_periods)
        };
        set.extend(inputs);
        periods.push(period);
    }
    Ok(splits)
}

/// Builds inputs for every eligible target period `T..num_periods` and splits
/// them chronologically.
pub fn prepare_splits(tensor: &EngagementTensor, history_len: usize, ratios: &SplitRatios) -> Result<Splits> {
    let mut by_period = BTreeMap::new();
    for t in history_len..tensor.num_periods {
        by_period.insert(t, build_model_inputs(tensor, history_len, t)?);
    }
    split_train_valid_test(by_period, ratios)
}
