//! Run configuration file.
//!
//! TOML with one table per stage. Every key is optional; omitted keys take
//! the defaults below. Relative paths resolve against the directory holding
//! the config file. One master seed drives every stochastic stage.
//!
//! ```toml
//! seed = 0
//!
//! [paths]
//! corpus = "corpus.tsv"           # cluster: doc_id<TAB>text lines
//! log = "interactions.tsv"        # prepare: interaction log
//! topics = "assignment.tsv"       # prepare: optional tweet -> topic relabelling
//! simulation = "simulation.toml"  # evaluate: ground truth of a simulated log
//! workdir = "run"                 # artifact directory unless --out is given
//!
//! [pipeline]
//! engagement = "retweet"          # like | reply | retweet | retweet_with_comment
//! period_length_seconds = 43200
//! num_periods = 14
//! origin_timestamp = 0
//! history_len = 4
//! min_tweets = 0                  # drop users with fewer records
//! # num_topics = 30               # default: inferred from the log
//!
//! [split]
//! train = 0.8
//! valid = 0.1
//! test = 0.1
//!
//! [model]
//! num_filters = 20
//! bottleneck = 8
//! leaky_slope = 0.01
//!
//! [training]
//! lr = 1e-5
//! batch_size = 32
//! epochs = 50
//!
//! [logit]
//! ridge = 1e-4
//! tol = 1e-8
//! max_iter = 100
//!
//! [slate]
//! n = 5
//! method = "greedy"               # greedy | exhaustive | top_n
//! variant = "reevaluate"          # reevaluate | frozen_marginals
//! search_cap = 1000000
//!
//! [clustering]
//! max_clusters = 40
//! alpha = 0.1
//! beta = 0.1
//! iterations = 30
//! init = "sequential"             # sequential | uniform
//! raw_text = false                # tokenize and drop stopwords first
//!
//! [simulation]
//! users = 2000
//! topics = 30
//! exposure_rate = 0.5
//! substitution_strength = 2.0
//! group_size = 5
//! preference_noise = 0.75
//! recency = [0.6, 0.3, 0.15, 0.05]
//!
//! [sweep]
//! num_filters = [5, 10, 15, 20, 30]
//! batch_size = [16, 32, 64, 128]
//! lr = [1e-3, 1e-4, 1e-5, 1e-6]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topicchoice::gsdmm::{ClusteringConfig, InitStrategy};
use topicchoice::logit::LogitConfig;
use topicchoice::net::{ModelConfig, TrainConfig};
use topicchoice::optimizer::{GreedyVariant, SlateMethod, DEFAULT_SEARCH_CAP};
use topicchoice::pipeline::{EngagementKind, PeriodGrid, SplitRatios};
use topicchoice::simulator::{group_substitution, SimConfig, DEFAULT_GROUP_SIZE, STRONG_SUBSTITUTION};
use topicchoice::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub pipeline: PipelineSection,
    pub split: SplitRatios,
    pub model: ModelSection,
    pub training: TrainConfig,
    pub logit: LogitSection,
    pub slate: SlateSection,
    pub clustering: ClusteringSection,
    pub simulation: SimulationSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub simulation: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub engagement: EngagementKind,
    pub period_length_seconds: u64,
    pub num_periods: usize,
    pub origin_timestamp: i64,
    pub history_len: usize,
    pub min_tweets: usize,
    pub num_topics: Option<usize>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let grid = PeriodGrid::default();
        PipelineSection {
            engagement: EngagementKind::default(),
            period_length_seconds: grid.period_length_seconds,
            num_periods: grid.num_periods,
            origin_timestamp: grid.origin_timestamp,
            history_len: 4,
            min_tweets: 0,
            num_topics: None,
        }
    }
}

impl PipelineSection {
    pub fn grid(&self) -> PeriodGrid {
        PeriodGrid {
            period_length_seconds: self.period_length_seconds,
            num_periods: self.num_periods,
            origin_timestamp: self.origin_timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub num_filters: usize,
    pub bottleneck: usize,
    pub leaky_slope: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            num_filters: ModelConfig::DEFAULT_FILTERS,
            bottleneck: ModelConfig::DEFAULT_BOTTLENECK,
            leaky_slope: ModelConfig::DEFAULT_LEAKY_SLOPE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitSection {
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogitSection {
    fn default() -> Self {
        let d = LogitConfig::default();
        LogitSection {
            ridge: d.ridge,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlateSection {
    pub n: usize,
    pub method: SlateMethod,
    pub variant: GreedyVariant,
    pub search_cap: u128,
}

impl Default for SlateSection {
    fn default() -> Self {
        SlateSection {
            n: 5,
            method: SlateMethod::Greedy,
            variant: GreedyVariant::default(),
            search_cap: DEFAULT_SEARCH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub max_clusters: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub init: InitStrategy,
    pub raw_text: bool,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        let d = ClusteringConfig::default();
        ClusteringSection {
            max_clusters: d.max_clusters,
            alpha: d.alpha,
            beta: d.beta,
            iterations: d.iterations,
            init: d.init,
            raw_text: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub users: usize,
    pub topics: usize,
    pub exposure_rate: f64,
    pub substitution_strength: f64,
    pub group_size: usize,
    pub preference_noise: f64,
    pub recency: Vec<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimulationSection {
            users: d.num_users,
            topics: d.num_topics,
            exposure_rate: d.exposure_rate[0],
            substitution_strength: STRONG_SUBSTITUTION,
            group_size: DEFAULT_GROUP_SIZE,
            preference_noise: d.preference_noise,
            recency: d.recency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub num_filters: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub lr: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            num_filters: vec![5, 10, 15, 20, 30],
            batch_size: vec![16, 32, 64, 128],
            lr: vec![1e-3, 1e-4, 1e-5, 1e-6],
        }
    }
}

impl RunConfig {
    /// Reads `path` and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.corpus,
            &mut cfg.paths.log,
            &mut cfg.paths.topics,
            &mut cfg.paths.simulation,
            &mut cfg.paths.workdir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn model_config(&self, num_topics: usize, history_len: usize) -> ModelConfig {
        ModelConfig {
            num_topics,
            history_len,
            num_filters: self.model.num_filters,
            bottleneck: self.model.bottleneck,
            leaky_slope: self.model.leaky_slope,
            seed: self.seed,
        }
    }

    pub fn logit_config(&self) -> LogitConfig {
        LogitConfig {
            ridge: self.logit.ridge,
            tol: self.logit.tol,
            max_iter: self.logit.max_iter,
            seed: self.seed,
        }
    }

    pub fn clustering_config(&self) -> ClusteringConfig {
        ClusteringConfig {
            max_clusters: self.clustering.max_clusters,
            alpha: self.clustering.alpha,
            beta: self.clustering.beta,
            iterations: self.clustering.iterations,
            seed: self.seed,
            init: self.clustering.init,
        }
    }

    pub fn sim_config(&self, without_substitution: bool) -> SimConfig {
        let s = &self.simulation;
        let strength = if without_substitution { 0.0 } else { s.substitution_strength };
        let mut cfg = SimConfig::scaled(s.users, s.topics, strength, self.seed);
        cfg.substitution = group_substitution(s.topics, s.group_size.max(1), strength);
        cfg.exposure_rate = vec![s.exposure_rate; s.topics];
        cfg.preference_noise = s.preference_noise;
        cfg.recency = s.recency.clone();
        cfg.num_periods = self.pipeline.num_periods;
        cfg.period_length_seconds = self.pipeline.period_length_seconds;
        cfg.origin_timestamp = self.pipeline.origin_timestamp;
        cfg.engagement_kind = self.pipeline.engagement;
        cfg
    }
}
