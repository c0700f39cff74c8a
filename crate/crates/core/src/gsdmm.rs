//! Short-text clustering with the Dirichlet multinomial mixture.
//!
//! Each document belongs to exactly one cluster. The sampler is the collapsed
//! Gibbs scheme of the "movie group process": a document is removed from its
//! cluster and reassigned with probability proportional to
//!
//! ```text
//! (m_k + alpha) * prod_{w in d} prod_{j=1}^{N_dw} (n_kw + beta + j - 1)
//!               / prod_{i=1}^{N_d} (n_k + V*beta + i - 1)
//! ```
//!
//! where `m_k` is the number of documents in cluster `k`, `n_k` its token
//! total and `n_kw` the count of word `w` in it. The computation runs in log
//! space. After the last sweep every document is labeled with its most
//! probable cluster given the others; clusters that end up empty are dropped
//! and the labels compacted.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{self, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Vec<u32>>,
    vocab_size: usize,
    doc_ids: Vec<String>,
}

impl Corpus {
    pub fn new(documents: Vec<Vec<u32>>, vocab_size: usize, doc_ids: Vec<String>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::input("corpus has no documents"));
        }
        if vocab_size == 0 {
            return Err(Error::input("vocabulary size must be positive"));
        }
        if doc_ids.len() != documents.len() {
            return Err(Error::Shape {
                what: "corpus doc_ids",
                expected: documents.len(),
                found: doc_ids.len(),
            });
        }
        for (doc, id) in documents.iter().zip(&doc_ids) {
            if doc.is_empty() {
                return Err(Error::input(format!("document {id} has no tokens")));
            }
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(Error::input(format!(
                    "document {id} has token id {w} outside vocabulary of size {vocab_size}"
                )));
            }
        }
        Ok(Corpus {
            documents,
            vocab_size,
            doc_ids,
        })
    }

    /// Convenience constructor that numbers documents `0..n`.
    pub fn from_documents(documents: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self> {
        let ids = (0..documents.len()).map(|i| i.to_string()).collect();
        Self::new(documents, vocab_size, ids)
    }

    /// Parses `doc_id<TAB>space-separated tokens` lines. With `normalize`, each
    /// token list goes through [`text::tokenize`] first.
    pub fn parse_tsv(input: &str, normalize: bool) -> Result<(Self, Vocabulary)> {
        let mut vocab = Vocabulary::new();
        let mut documents = Vec::new();
        let mut doc_ids = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, body) = line.split_once('\t').ok_or_else(|| {
                Error::input(format!("line {}: expected doc_id<TAB>tokens", lineno + 1))
            })?;
            let tokens: Vec<String> = if normalize {
                text::tokenize(body)
            } else {
                body.split_whitespace().map(str::to_owned).collect()
            };
            documents.push(tokens.iter().map(|t| vocab.intern(t)).collect());
            doc_ids.push(id.to_owned());
        }
        let corpus = Corpus::new(documents, vocab.len().max(1), doc_ids)?;
        Ok((corpus, vocab))
    }

    pub fn documents(&self) -> &[Vec<u32>] {
        &self.documents
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub max_clusters: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub init: InitStrategy,
}

/// How documents are placed before the first sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Each document in turn is sampled from the conditional given the
    /// documents placed before it.
    #[default]
    Sequential,
    /// Uniformly random clusters.
    Uniform,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            max_clusters: 40,
            alpha: 0.1,
            beta: 0.1,
            iterations: 30,
            seed: 0,
            init: InitStrategy::Sequential,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_clusters == 0 {
            return Err(Error::config("max_clusters must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        Ok(())
    }
}

/// The dense topic set used downstream. Topic `j` corresponds to the sampler
/// cluster `source_clusters[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicUniverse {
    pub source_clusters: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl TopicUniverse {
    pub fn num_topics(&self) -> usize {
        self.sizes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicAssignment {
    labels: Vec<usize>,
    occupied_clusters: Vec<usize>,
    topic_universe: TopicUniverse,
    /// Occupied cluster count after each sweep (empty when built from labels).
    pub sweep_occupancy: Vec<usize>,
}

impl TopicAssignment {
    /// Builds an assignment from raw cluster labels, keeping the ids as given.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in &labels {
            *sizes.entry(l).or_default() += 1;
        }
        let occupied_clusters: Vec<usize> = sizes.keys().copied().collect();
        let topic_universe = TopicUniverse {
            source_clusters: occupied_clusters.clone(),
            sizes: sizes.values().copied().collect(),
        };
        TopicAssignment {
            labels,
            occupied_clusters,
            topic_universe,
            sweep_occupancy: Vec::new(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn occupied_clusters(&self) -> &[usize] {
        &self.occupied_clusters
    }

    pub fn topic_universe(&self) -> &TopicUniverse {
        &self.topic_universe
    }

    pub fn num_topics(&self) -> usize {
        self.occupied_clusters.len()
    }

    /// `doc_id<TAB>label` lines followed by a `J=<count>` summary line.
    pub fn to_tsv(&self, doc_ids: &[String]) -> String {
        let mut out = String::new();
        for (id, label) in doc_ids.iter().zip(&self.labels) {
            out.push_str(id);
            out.push('\t');
            out.push_str(&label.to_string());
            out.push('\n');
        }
        out.push_str(&format!("J={}\n", self.num_topics()));
        out
    }
}

/// Parses the output of [`TopicAssignment::to_tsv`] into a doc-id lookup and
/// the declared topic count.
pub fn parse_assignment_tsv(input: &str) -> Result<(HashMap<String, usize>, usize)> {
    let mut map = HashMap::new();
    let mut declared = None;
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(j) = line.strip_prefix("J=") {
            declared = Some(
                j.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::input(format!("line {}: bad J summary", lineno + 1)))?,
            );
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::input(format!("line {}: expected doc_id<TAB>label", lineno + 1)))?;
        let label = label
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::input(format!("line {}: bad topic label {label:?}", lineno + 1)))?;
        map.insert(id.to_owned(), label);
    }
    let j = declared.ok_or_else(|| Error::input("assignment has no J=<int> summary line"))?;
    if let Some((id, &l)) = map.iter().find(|(_, &l)| l >= j) {
        return Err(Error::input(format!("document {id} has label {l} but J={j}")));
    }
    Ok((map, j))
}

/// Collapsed Gibbs sampler state. Exposed for tests that inspect the
/// conditional distribution directly.
pub struct GibbsSampler<'a> {
    corpus: &'a Corpus,
    cfg: &'a ClusteringConfig,
    doc_words: Vec<Vec<(u32, u32)>>,
    cluster_docs: Vec<usize>,
    cluster_tokens: Vec<usize>,
    cluster_word: Vec<Vec<u32>>,
    labels: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<'a> GibbsSampler<'a> {
    /// Sampler with every document placed according to `cfg.init`.
    pub fn new(corpus: &'a Corpus, cfg: &'a ClusteringConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.max_clusters;
        let v = corpus.vocab_size();
        let doc_words = corpus
            .documents()
            .iter()
            .map(|doc| {
                let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
                for &w in doc {
                    *counts.entry(w).or_default() += 1;
                }
                counts.into_iter().collect()
            })
            .collect();
        let mut sampler = GibbsSampler {
            corpus,
            cfg,
            doc_words,
            cluster_docs: vec![0; k],
            cluster_tokens: vec![0; k],
            cluster_word: vec![vec![0; v]; k],
            labels: vec![0; corpus.len()],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        let mut probs = vec![0.0; k];
        for d in 0..corpus.len() {
            let z = match cfg.init {
                InitStrategy::Uniform => sampler.rng.gen_range(0..k),
                InitStrategy::Sequential => {
                    sampler.conditional_excluding(d, &mut probs);
                    sampler.draw(&probs)
                }
            };
            sampler.labels[d] = z;
            sampler.add(d, z);
        }
        Ok(sampler)
    }

    fn add(&mut self, d: usize, z: usize) {
        self.cluster_docs[z] += 1;
        self.cluster_tokens[z] += self.corpus.documents()[d].len();
        for &(w, c) in &self.doc_words[d] {
            self.cluster_word[z][w as usize] += c;
        }
    }

    fn remove(&mut self, d: usize, z: usize) {
        self.cluster_docs[z] -= 1;
        self.cluster_tokens[z] -= self.corpus.documents()[d].len();
        for &(w, c) in &self.doc_words[d] {
            self.cluster_word[z][w as usize] -= c;
        }
    }

    /// Fills `out` with the normalised reassignment distribution for document
    /// `d`, which must currently be removed from the counts.
    fn conditional_excluding(&self, d: usize, out: &mut [f64]) {
        let alpha = self.cfg.alpha;
        let beta = self.cfg.beta;
        let v_beta = self.corpus.vocab_size() as f64 * beta;
        let len = self.corpus.documents()[d].len();
        let mut max = f64::NEG_INFINITY;
        for (k, slot) in out.iter_mut().enumerate() {
            let mut lp = (self.cluster_docs[k] as f64 + alpha).ln();
            for &(w, c) in &self.doc_words[d] {
                let n = self.cluster_word[k][w as usize] as f64;
                for j in 0..c {
                    lp += (n + beta + j as f64).ln();
                }
            }
            let total = self.cluster_tokens[k] as f64 + v_beta;
            for i in 0..len {
                lp -= (total + i as f64).ln();
            }
            *slot = lp;
            max = max.max(lp);
        }
        let mut sum = 0.0;
        for slot in out.iter_mut() {
            *slot = (*slot - max).exp();
            sum += *slot;
        }
        for slot in out.iter_mut() {
            *slot /= sum;
        }
    }

    /// Reassignment distribution for document `d` given all other documents.
    pub fn conditional(&mut self, d: usize) -> Vec<f64> {
        let z = self.labels[d];
        self.remove(d, z);
        let mut probs = vec![0.0; self.cfg.max_clusters];
        self.conditional_excluding(d, &mut probs);
        self.add(d, z);
        probs
    }

    /// Inverse-CDF draw from a normalised distribution.
    fn draw(&mut self, probs: &[f64]) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        probs.len() - 1
    }

    /// One full pass over the documents in index order.
    pub fn sweep(&mut self) {
        let mut probs = vec![0.0; self.cfg.max_clusters];
        for d in 0..self.corpus.len() {
            let z = self.labels[d];
            self.remove(d, z);
            self.conditional_excluding(d, &mut probs);
            let chosen = self.draw(&probs);
            self.labels[d] = chosen;
            self.add(d, chosen);
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Most probable cluster for every document given the current counts of
    /// all other documents (lowest id on ties). This is the reported labeling.
    pub fn best_labels(&mut self) -> Vec<usize> {
        (0..self.corpus.len())
            .map(|d| {
                let probs = self.conditional(d);
                let mut best = 0;
                for (k, &p) in probs.iter().enumerate() {
                    if p > probs[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_docs
    }

    pub fn occupied(&self) -> usize {
        self.cluster_docs.iter().filter(|&&m| m > 0).count()
    }
}

pub fn fit_gsdmm(corpus: &Corpus, cfg: &ClusteringConfig) -> Result<TopicAssignment> {
    let mut sampler = GibbsSampler::new(corpus, cfg)?;
    let mut occupancy = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        sampler.sweep();
        occupancy.push(sampler.occupied());
    }
    let mut assignment = relabel_compact(&TopicAssignment::from_labels(sampler.best_labels()));
    assignment.sweep_occupancy = occupancy;
    Ok(assignment)
}

/// Topic sizes, largest first; equal sizes are ordered by topic id.
pub fn topic_histogram(assignment: &TopicAssignment) -> Vec<(usize, usize)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in assignment.labels() {
        *counts.entry(l).or_default() += 1;
    }
    let mut hist: Vec<(usize, usize)> = counts.into_iter().collect();
    hist.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    hist
}

/// Maps labels onto `0..J` in order of first appearance.
pub fn relabel_compact(assignment: &TopicAssignment) -> TopicAssignment {
    let mut mapping: HashMap<usize, usize> = HashMap::new();
    let mut source = Vec::new();
    let labels: Vec<usize> = assignment
        .labels()
        .iter()
        .map(|&l| {
            *mapping.entry(l).or_insert_with(|| {
                source.push(l);
                source.len() - 1
            })
        })
        .collect();
    let mut sizes = vec![0; source.len()];
    for &l in &labels {
        sizes[l] += 1;
    }
    // carry the original cluster ids through an earlier relabeling
    let universe = assignment.topic_universe();
    let source_clusters = source
        .iter()
        .map(|&old| {
            universe
                .source_clusters
                .get(assignment.occupied_clusters().binary_search(&old).unwrap_or(usize::MAX))
                .copied()
                .unwrap_or(old)
        })
        .collect();
    TopicAssignment {
        occupied_clusters: (0..source.len()).collect(),
        topic_universe: TopicUniverse {
            source_clusters,
            sizes,
        },
        labels,
        sweep_occupancy: assignment.sweep_occupancy.clone(),
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len();
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        // both labelings are trivial (all-one-cluster or all-singletons)
        return if sum_rows == sum_cols { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}
