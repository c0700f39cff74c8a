use super::{feature, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::util::sigmoid;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub(super) fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Every intermediate of one forward pass, kept for [`super::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub config: ModelConfig,
    pub exposure: Vec<f64>,
    pub history: Vec<f64>,
    pub frequency: Vec<f64>,
    /// `J x H` filter responses before the activation.
    pub pre_activation: Vec<f64>,
    /// `J x H`.
    pub filtered: Vec<f64>,
    pub code_d: Vec<f64>,
    pub recon_d: Vec<f64>,
    pub code_inf: Vec<f64>,
    pub recon_inf: Vec<f64>,
    /// `L x H`.
    pub code_hist: Vec<f64>,
    /// `J x H`.
    pub recon_hist: Vec<f64>,
    /// `J x K`.
    pub z: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Applies the `H` shared filters to every topic row of the `J x T` history
/// and returns the activated `J x H` responses.
pub fn time_filter(history: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let c = &params.config;
    check_len("history", c.num_topics * c.history_len, history.len())?;
    Ok(filter_raw(history, params).1)
}

fn filter_raw(history: &[f64], params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let c = &params.config;
    let (t_len, h_count) = (c.history_len, c.num_filters);
    let mut pre = vec![0.0; c.num_topics * h_count];
    for (j, row) in history.chunks_exact(t_len).enumerate() {
        for h in 0..h_count {
            let w = &params.weights.time_filters[h * t_len..(h + 1) * t_len];
            pre[j * h_count + h] = row.iter().zip(w).map(|(x, w)| x * w).sum();
        }
    }
    let act = pre.iter().map(|&a| leaky_relu(a, c.leaky_slope)).collect();
    (pre, act)
}

/// Tied-weight linear bottleneck applied to each column of the `J x cols`
/// row-major `x`: `code = W x` (`L x cols`), `recon = W^T code` (`J x cols`).
pub fn bottleneck(x: &[f64], cols: usize, w: &[f64], width: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if width == 0 || w.len() % width != 0 {
        return Err(Error::Shape {
            what: "bottleneck weights",
            expected: width,
            found: w.len(),
        });
    }
    let j_count = w.len() / width;
    check_len("bottleneck input", j_count * cols, x.len())?;
    let mut code = vec![0.0; width * cols];
    for l in 0..width {
        let row = &w[l * j_count..(l + 1) * j_count];
        for j in 0..j_count {
            let wlj = row[j];
            if wlj == 0.0 {
                continue;
            }
            for c in 0..cols {
                code[l * cols + c] += wlj * x[j * cols + c];
            }
        }
    }
    let mut recon = vec![0.0; j_count * cols];
    for l in 0..width {
        let row = &w[l * j_count..(l + 1) * j_count];
        for j in 0..j_count {
            for c in 0..cols {
                recon[j * cols + c] += row[j] * code[l * cols + c];
            }
        }
    }
    Ok((code, recon))
}

/// Runs the network for one instance.
pub fn forward(params: &ModelParams, exposure: &[u8], history: &[u8], frequency: &[f64]) -> Result<ForwardTrace> {
    let c = params.config;
    let (j_count, h_count, l) = (c.num_topics, c.num_filters, c.bottleneck);
    check_len("exposure", j_count, exposure.len())?;
    check_len("history", j_count * c.history_len, history.len())?;
    check_len("frequency", j_count, frequency.len())?;
    if frequency.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("frequency vector contains NaN or infinity"));
    }
    let exposure: Vec<f64> = exposure.iter().map(|&x| x as f64).collect();
    let history: Vec<f64> = history.iter().map(|&x| x as f64).collect();
    let frequency = frequency.to_vec();

    let (pre_activation, filtered) = filter_raw(&history, params);
    let w = &params.weights;
    let (code_d, recon_d) = bottleneck(&exposure, 1, &w.w_d, l)?;
    let (code_inf, recon_inf) = bottleneck(&frequency, 1, &w.w_inf, l)?;
    let (code_hist, recon_hist) = bottleneck(&filtered, h_count, &w.w_hist, l)?;

    let k = c.feature_width();
    let mut z = vec![0.0; j_count * k];
    let mut logits = vec![0.0; j_count];
    let mut probs = vec![0.0; j_count];
    for j in 0..j_count {
        let row = &mut z[j * k..(j + 1) * k];
        row[feature::BIAS] = 1.0;
        row[feature::EXPOSURE] = exposure[j];
        row[feature::EXPOSURE_RECON] = recon_d[j];
        row[feature::FREQUENCY] = frequency[j];
        row[feature::FREQUENCY_RECON] = recon_inf[j];
        row[feature::FILTERS..feature::FILTERS + h_count]
            .copy_from_slice(&filtered[j * h_count..(j + 1) * h_count]);
        row[feature::FILTERS + h_count..].copy_from_slice(&recon_hist[j * h_count..(j + 1) * h_count]);
        logits[j] = row.iter().zip(&w.theta).map(|(a, b)| a * b).sum();
        probs[j] = sigmoid(logits[j]);
    }

    Ok(ForwardTrace {
        config: c,
        exposure,
        history,
        frequency,
        pre_activation,
        filtered,
        code_d,
        recon_d,
        code_inf,
        recon_inf,
        code_hist,
        recon_hist,
        z,
        logits,
        probs,
    })
}

/// Sum over topics of clipped binary cross-entropy.
pub fn loss_bce(probs: &[f64], labels: &[u8]) -> f64 {
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            if y != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}
