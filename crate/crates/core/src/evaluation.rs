//! Pooled AUC, mean per-instance BCE and slate uplift.
//!
//! AUC pools every (instance, topic) pair so that topics with a single label
//! class do not make the metric undefined.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ChoiceModel;
use crate::net::{loss_bce, PROB_EPS};
use crate::optimizer::{greedy_slate_with, uplift, GreedyVariant, SlateProblem};
use crate::pipeline::ModelInputs;

/// Probability that a random positive outscores a random negative, ties
/// counted half. Computed from midranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::input("AUC scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&y| y != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AucUndefined { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut k = i + 1;
        while k < order.len() && scores[order[k]] == scores[order[i]] {
            k += 1;
        }
        // ranks i+1..=k share their mean
        let midrank = (i + k + 1) as f64 / 2.0;
        let tied_positives = order[i..k].iter().filter(|&&o| labels[o] != 0).count();
        positive_rank_sum += midrank * tied_positives as f64;
        i = k;
    }
    let p = positives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Mean over instances of the clipped BCE summed across the `num_topics`
/// predictions of each instance. Both slices are instance-major.
pub fn mean_bce(predictions: &[f64], labels: &[u8], num_topics: usize) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            what: "labels",
            expected: predictions.len(),
            found: labels.len(),
        });
    }
    if num_topics == 0 || predictions.is_empty() || predictions.len() % num_topics != 0 {
        return Err(Error::input(format!(
            "{} predictions do not form whole instances of {num_topics} topics",
            predictions.len()
        )));
    }
    let total: f64 = predictions
        .chunks_exact(num_topics)
        .zip(labels.chunks_exact(num_topics))
        .map(|(p, y)| loss_bce(p, y))
        .sum();
    Ok(total / (predictions.len() / num_topics) as f64)
}

/// Pooled predictions of one model on a dataset, instance-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub num_topics: usize,
    pub probs: Vec<f64>,
    pub labels: Vec<u8>,
}

pub fn predict_all(model: &dyn ChoiceModel, data: &[ModelInputs]) -> Result<Predictions> {
    if data.is_empty() {
        return Err(Error::input("evaluation dataset is empty"));
    }
    let num_topics = model.num_topics();
    let rows: Vec<Vec<f64>> = data
        .par_iter()
        .map(|inst| model.predict(&inst.exposure, &inst.context()))
        .collect::<Result<_>>()?;
    let mut labels = Vec::with_capacity(data.len() * num_topics);
    for inst in data {
        if inst.engaged.len() != num_topics {
            return Err(Error::Shape {
                what: "labels",
                expected: num_topics,
                found: inst.engaged.len(),
            });
        }
        labels.extend_from_slice(&inst.engaged);
    }
    Ok(Predictions {
        num_topics,
        probs: rows.concat(),
        labels,
    })
}

#[derive(Clone, Copy)]
pub struct UpliftSpec<'a> {
    pub n: usize,
    /// Model whose predictions value the chosen slates.
    pub scorer: &'a dyn ChoiceModel,
    pub variant: GreedyVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub bce: f64,
    pub auc: f64,
    pub mean_uplift: Option<f64>,
    pub instances: usize,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    pub topic: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Mean over instances of this topic's BCE term.
    pub bce: f64,
    /// `None` when the topic has a single label class.
    pub auc: Option<f64>,
}

/// Greedy slate of `model` for every instance, valued under `spec.scorer`.
pub fn slate_uplifts(model: &dyn ChoiceModel, data: &[ModelInputs], spec: &UpliftSpec<'_>) -> Result<Vec<f64>> {
    data.par_iter()
        .map(|inst| {
            let problem = SlateProblem {
                model,
                context: inst.context(),
                n: spec.n,
            };
            let slate = greedy_slate_with(&problem, spec.variant)?;
            let probs = spec.scorer.predict(&slate.r_star, &inst.context())?;
            Ok(uplift(&probs, &slate.r_star))
        })
        .collect()
}

pub fn evaluate_model(model: &dyn ChoiceModel, data: &[ModelInputs], spec: Option<&UpliftSpec<'_>>) -> Result<EvalReport> {
    let preds = predict_all(model, data)?;
    let positives = preds.labels.iter().filter(|&&y| y != 0).count();
    let mean_uplift = match spec {
        Some(spec) => {
            let values = slate_uplifts(model, data, spec)?;
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
        None => None,
    };
    Ok(EvalReport {
        model: model.name().to_string(),
        bce: mean_bce(&preds.probs, &preds.labels, preds.num_topics)?,
        auc: auc(&preds.probs, &preds.labels)?,
        mean_uplift,
        instances: data.len(),
        positives,
        negatives: preds.labels.len() - positives,
    })
}

pub fn topic_breakdown(preds: &Predictions) -> Vec<TopicReport> {
    let j_count = preds.num_topics;
    let instances = preds.probs.len() / j_count;
    (0..j_count)
        .map(|topic| {
            let probs: Vec<f64> = preds.probs.iter().skip(topic).step_by(j_count).copied().collect();
            let labels: Vec<u8> = preds.labels.iter().skip(topic).step_by(j_count).copied().collect();
            let positives = labels.iter().filter(|&&y| y != 0).count();
            TopicReport {
                topic,
                positives,
                negatives: instances - positives,
                bce: loss_bce(&probs, &labels) / instances as f64,
                auc: auc(&probs, &labels).ok(),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `model,bce,auc,mean_uplift,instances` with one row per report.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,bce,auc,mean_uplift,instances\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model,
            r.bce,
            r.auc,
            fmt_opt(r.mean_uplift),
            r.instances
        ));
    }
    out
}

/// `model,topic,positives,negatives,bce,auc`; `auc` is empty for single-class
/// topics.
pub fn topics_to_csv(rows: &[(String, Vec<TopicReport>)]) -> String {
    let mut out = String::from("model,topic,positives,negatives,bce,auc\n");
    for (model, topics) in rows {
        for t in topics {
            out.push_str(&format!(
                "{model},{},{},{},{},{}\n",
                t.topic,
                t.positives,
                t.negatives,
                t.bce,
                fmt_opt(t.auc)
            ));
        }
    }
    out
}

/// Clipped probability used for both the training loss and evaluation.
pub fn clip_probability(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}
