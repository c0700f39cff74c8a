use super::{feature, ForwardTrace, ModelParams, Weights};

/// Accumulates the tied-weight bottleneck gradient for one column.
///
/// With `code = W x` and `recon = W^T code`, an upstream gradient `u` on
/// `recon` gives `dW = code u^T + (W u) x^T` and `dx = W^T (W u)`. The
/// first term is the decoder path, the second the encoder path.
fn bottleneck_grad(
    w: &[f64],
    width: usize,
    x: impl Fn(usize) -> f64,
    code: impl Fn(usize) -> f64,
    upstream: &[f64],
    dw: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let j_count = upstream.len();
    for l in 0..width {
        let row = &w[l * j_count..(l + 1) * j_count];
        let wu: f64 = row.iter().zip(upstream).map(|(a, b)| a * b).sum();
        let c = code(l);
        let drow = &mut dw[l * j_count..(l + 1) * j_count];
        for j in 0..j_count {
            drow[j] += c * upstream[j] + wu * x(j);
        }
        if let Some(dx) = dx.as_deref_mut() {
            for j in 0..j_count {
                dx[j] += row[j] * wu;
            }
        }
    }
}

/// Gradient of the summed BCE of `trace` against `labels` with respect to
/// every weight.
///
/// The per-topic logit gradient is `p_j - y_j`, the gradient of the
/// unclipped loss. It coincides with the clipped loss wherever clipping is
/// inactive and keeps saturated mistakes trainable.
pub fn backward(params: &ModelParams, trace: &ForwardTrace, labels: &[u8]) -> Weights {
    let c = &trace.config;
    let (j_count, h_count, t_len, l) = (c.num_topics, c.num_filters, c.history_len, c.bottleneck);
    let k = c.feature_width();
    let w = &params.weights;
    let theta = &w.theta;
    let mut g = Weights::zeros(c);

    let dlogit: Vec<f64> = trace
        .probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| p - y as f64)
        .collect();

    // head
    for j in 0..j_count {
        let zj = &trace.z[j * k..(j + 1) * k];
        for (gt, &zv) in g.theta.iter_mut().zip(zj) {
            *gt += dlogit[j] * zv;
        }
    }

    // exposure bottleneck; R is data, only W_d receives gradient
    let d_recon_d: Vec<f64> = dlogit.iter().map(|&d| d * theta[feature::EXPOSURE_RECON]).collect();
    bottleneck_grad(
        &w.w_d,
        l,
        |j| trace.exposure[j],
        |ll| trace.code_d[ll],
        &d_recon_d,
        &mut g.w_d,
        None,
    );

    let d_recon_inf: Vec<f64> = dlogit.iter().map(|&d| d * theta[feature::FREQUENCY_RECON]).collect();
    bottleneck_grad(
        &w.w_inf,
        l,
        |j| trace.frequency[j],
        |ll| trace.code_inf[ll],
        &d_recon_inf,
        &mut g.w_inf,
        None,
    );

    // filter outputs feed the head directly and through W_H
    let mut d_filtered = vec![0.0; j_count * h_count];
    let mut upstream = vec![0.0; j_count];
    let mut d_col = vec![0.0; j_count];
    for h in 0..h_count {
        let direct = theta[feature::FILTERS + h];
        let via_recon = theta[feature::FILTERS + h_count + h];
        for j in 0..j_count {
            upstream[j] = dlogit[j] * via_recon;
            d_col[j] = dlogit[j] * direct;
        }
        bottleneck_grad(
            &w.w_hist,
            l,
            |j| trace.filtered[j * h_count + h],
            |ll| trace.code_hist[ll * h_count + h],
            &upstream,
            &mut g.w_hist,
            Some(&mut d_col),
        );
        for j in 0..j_count {
            d_filtered[j * h_count + h] = d_col[j];
        }
    }

    // leaky ReLU and the shared filters
    for j in 0..j_count {
        let row = &trace.history[j * t_len..(j + 1) * t_len];
        for h in 0..h_count {
            let a = trace.pre_activation[j * h_count + h];
            let slope = if a >= 0.0 { 1.0 } else { c.leaky_slope };
            let da = d_filtered[j * h_count + h] * slope;
            if da == 0.0 {
                continue;
            }
            let gw = &mut g.time_filters[h * t_len..(h + 1) * t_len];
            for (gk, &x) in gw.iter_mut().zip(row) {
                *gk += da * x;
            }
        }
    }

    g
}

#[cfg(test)]
mod tests {
    use super::super::{feature, forward, init_params, loss_bce, ModelConfig, ModelParams};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(seed: u64) -> ModelConfig {
        ModelConfig {
            num_topics: 6,
            history_len: 4,
            num_filters: 3,
            bottleneck: 2,
            leaky_slope: 0.01,
            seed,
        }
    }

    #[test]
    fn head_gradient_at_zero_theta() {
        let mut p = init_params(&small(2)).unwrap();
        p.weights.theta.iter_mut().for_each(|t| *t = 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exp: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2)).collect();
        let hist: Vec<u8> = (0..24).map(|_| rng.gen_range(0..2)).collect();
        let freq: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
        let y: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2)).collect();
        let t = forward(&p, &exp, &hist, &freq).unwrap();
        let g = backward(&p, &t, &y);
        for kk in 0..11 {
            let want: f64 = (0..6).map(|j| (0.5 - y[j] as f64) * t.z[j * 11 + kk]).sum();
            assert!((g.theta[kk] - want).abs() < 1e-14);
        }
        // theta = 0 blocks every path below the head
        assert!(g.w_d.iter().chain(&g.w_inf).chain(&g.w_hist).chain(&g.time_filters).all(|&x| x == 0.0));
    }

    #[test]
    fn zero_inputs_leave_only_bias_gradient() {
        let mut p = ModelParams::zeros(&small(0)).unwrap();
        p.weights.theta[feature::BIAS] = 0.4;
        let t = forward(&p, &[0; 6], &[0; 24], &[0.0; 6]).unwrap();
        let g = backward(&p, &t, &[1, 0, 0, 1, 0, 0]);
        assert!(g.theta[feature::BIAS] != 0.0);
        assert!(g.theta[1..].iter().all(|&x| x == 0.0));
        assert!(g.w_d.iter().chain(&g.w_inf).chain(&g.w_hist).chain(&g.time_filters).all(|&x| x == 0.0));
    }

    #[test]
    fn matches_central_differences() {
        for seed in 0..3 {
            let p = init_params(&small(seed)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let exp: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2)).collect();
            let hist: Vec<u8> = (0..24).map(|_| rng.gen_range(0..2)).collect();
            let freq: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
            let y: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2)).collect();
            let t = forward(&p, &exp, &hist, &freq).unwrap();
            let g = backward(&p, &t, &y).to_flat();
            let step = 1e-5;
            for k in 0..g.len() {
                let mut plus = p.clone();
                *plus.weights.flat_mut(k) += step;
                let mut minus = p.clone();
                *minus.weights.flat_mut(k) -= step;
                let lp = loss_bce(&forward(&plus, &exp, &hist, &freq).unwrap().probs, &y);
                let lm = loss_bce(&forward(&minus, &exp, &hist, &freq).unwrap().probs, &y);
                let fd = (lp - lm) / (2.0 * step);
                let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} param {k}: analytic {} vs fd {fd}", g[k]);
            }
        }
    }
}
