//! Interaction log records and their tab-separated file format.
//!
//! One header line, then one record per line:
//!
//! ```text
//! user_id  tweet_id  topic  tweet_ts  like_ts  reply_ts  retweet_ts  rt_comment_ts
//! ```
//!
//! Timestamps are unix seconds. An engagement that did not happen is an
//! empty field.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementKind {
    Like,
    Reply,
    #[default]
    Retweet,
    RetweetWithComment,
}

impl FromStr for EngagementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "like" => Ok(EngagementKind::Like),
            "reply" => Ok(EngagementKind::Reply),
            "retweet" => Ok(EngagementKind::Retweet),
            "retweet_with_comment" | "rt_comment" => Ok(EngagementKind::RetweetWithComment),
            other => Err(Error::input(format!("unknown engagement kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub user_id: String,
    pub tweet_id: String,
    pub topic: usize,
    pub tweet_ts: i64,
    pub like_ts: Option<i64>,
    pub reply_ts: Option<i64>,
    pub retweet_ts: Option<i64>,
    pub rt_comment_ts: Option<i64>,
}

impl Record {
    pub fn new(user_id: impl Into<String>, tweet_id: impl Into<String>, topic: usize, tweet_ts: i64) -> Self {
        Record {
            user_id: user_id.into(),
            tweet_id: tweet_id.into(),
            topic,
            tweet_ts,
            like_ts: None,
            reply_ts: None,
            retweet_ts: None,
            rt_comment_ts: None,
        }
    }

    pub fn engagement(&self, kind: EngagementKind) -> Option<i64> {
        match kind {
            EngagementKind::Like => self.like_ts,
            EngagementKind::Reply => self.reply_ts,
            EngagementKind::Retweet => self.retweet_ts,
            EngagementKind::RetweetWithComment => self.rt_comment_ts,
        }
    }

    pub fn set_engagement(&mut self, kind: EngagementKind, ts: Option<i64>) {
        let slot = match kind {
            EngagementKind::Like => &mut self.like_ts,
            EngagementKind::Reply => &mut self.reply_ts,
            EngagementKind::Retweet => &mut self.retweet_ts,
            EngagementKind::RetweetWithComment => &mut self.rt_comment_ts,
        };
        *slot = ts;
    }

    fn engagements(&self) -> [Option<i64>; 4] {
        [self.like_ts, self.reply_ts, self.retweet_ts, self.rt_comment_ts]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub records: Vec<Record>,
}

impl InteractionLog {
    pub fn new(records: Vec<Record>) -> Self {
        InteractionLog { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks topic range and that no engagement precedes its tweet.
    pub fn validate(&self, num_topics: usize) -> Result<()> {
        for (n, rec) in self.records.iter().enumerate() {
            if rec.topic >= num_topics {
                return Err(Error::input(format!(
                    "record {n} (tweet {}): topic {} outside 0..{num_topics}",
                    rec.tweet_id, rec.topic
                )));
            }
            if rec.engagements().iter().flatten().any(|&ts| ts < rec.tweet_ts) {
                return Err(Error::input(format!(
                    "record {n} (tweet {}): engagement timestamp precedes tweet timestamp",
                    rec.tweet_id
                )));
            }
        }
        Ok(())
    }

    /// Drops users with fewer than `min` records.
    pub fn filter_min_tweets(&self, min: usize) -> InteractionLog {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for rec in &self.records {
            *counts.entry(rec.user_id.as_str()).or_default() += 1;
        }
        InteractionLog::new(
            self.records
                .iter()
                .filter(|r| counts[r.user_id.as_str()] >= min)
                .cloned()
                .collect(),
        )
    }

    /// Replaces each record's topic by the clustering label of its tweet.
    pub fn with_topics(&self, labels: &HashMap<String, usize>) -> Result<InteractionLog> {
        let mut records = self.records.clone();
        for rec in &mut records {
            rec.topic = *labels.get(&rec.tweet_id).ok_or_else(|| {
                Error::input(format!("tweet {} has no topic assignment", rec.tweet_id))
            })?;
        }
        Ok(InteractionLog::new(records))
    }

    pub fn read_tsv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .has_headers(true)
            .from_reader(reader);
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<Record>, _>>()
            .map_err(|source_err| Error::Csv {
                path: source.to_owned(),
                source: source_err,
            })?;
        Ok(InteractionLog::new(records))
    }

    pub fn write_tsv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().delimiter(b'\t').from_writer(writer);
        let wrap = |e: csv::Error| Error::Csv {
            path: "<log writer>".into(),
            source: e,
        };
        for rec in &self.records {
            wtr.serialize(rec).map_err(wrap)?;
        }
        wtr.flush().map_err(|e| Error::io("<log writer>", e))?;
        Ok(())
    }
}

/// The interval between publication and engagement for each record, or
/// `None` for records without an engagement of `kind`.
pub fn label_active_states(log: &InteractionLog, kind: EngagementKind) -> Vec<Option<(i64, i64)>> {
    log.records
        .iter()
        .map(|r| r.engagement(kind).map(|e| (r.tweet_ts, e)))
        .collect()
}
