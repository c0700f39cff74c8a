//! Slate selection: pick `n` topics maximising the summed predicted
//! engagement of the chosen topics, where the predictions are made with the
//! chosen slate as the exposure vector.
//!
//! Only [`ChoiceModel::predict`] is used, so any predictor plugs in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceModel, UserContext};

/// Largest number of subsets [`exhaustive_slate`] enumerates by default.
pub const DEFAULT_SEARCH_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlateMethod {
    Greedy,
    Exhaustive,
    TopN,
}

impl SlateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SlateMethod::Greedy => "greedy",
            SlateMethod::Exhaustive => "exhaustive",
            SlateMethod::TopN => "top_n",
        }
    }
}

/// How greedy scores a candidate addition `c` to the current set `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyVariant {
    /// Sum over `S + {c}` of probabilities predicted under `R = S + {c}`.
    #[default]
    Reevaluate,
    /// Probabilities of `S` stay at the values seen when each was added;
    /// only `c` is scored under `R = S + {c}`.
    FrozenMarginals,
}

#[derive(Clone, Copy)]
pub struct SlateProblem<'a> {
    pub model: &'a dyn ChoiceModel,
    pub context: UserContext<'a>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlateResult {
    /// Ascending topic ids, length `n`.
    pub chosen: Vec<usize>,
    pub r_star: Vec<u8>,
    /// All `J` probabilities under `r_star`.
    pub probs: Vec<f64>,
    /// Sum of `probs` over `chosen`.
    pub uplift: f64,
    pub method: SlateMethod,
}

impl SlateProblem<'_> {
    fn num_topics(&self) -> usize {
        self.model.num_topics()
    }

    fn validate(&self) -> Result<()> {
        let j = self.num_topics();
        if self.n == 0 || self.n > j {
            return Err(Error::input(format!("slate size {} must lie in [1, {j}]", self.n)));
        }
        Ok(())
    }

    fn predict(&self, exposure: &[u8]) -> Result<Vec<f64>> {
        self.model.predict(exposure, &self.context)
    }

    fn finish(&self, mut chosen: Vec<usize>, method: SlateMethod) -> Result<SlateResult> {
        chosen.sort_unstable();
        let r_star = indicator(self.num_topics(), &chosen);
        let probs = self.predict(&r_star)?;
        let uplift = uplift(&probs, &r_star);
        Ok(SlateResult {
            chosen,
            r_star,
            probs,
            uplift,
            method,
        })
    }
}

fn indicator(num_topics: usize, set: &[usize]) -> Vec<u8> {
    let mut r = vec![0u8; num_topics];
    for &j in set {
        r[j] = 1;
    }
    r
}

/// `sum_j probs[j] * r[j]`.
pub fn uplift(probs: &[f64], r: &[u8]) -> f64 {
    assert_eq!(probs.len(), r.len(), "probability and slate lengths differ");
    probs.iter().zip(r).filter(|(_, &x)| x != 0).map(|(p, _)| p).sum()
}

pub fn greedy_slate(problem: &SlateProblem<'_>) -> Result<SlateResult> {
    greedy_slate_with(problem, GreedyVariant::Reevaluate)
}

pub fn greedy_slate_with(problem: &SlateProblem<'_>, variant: GreedyVariant) -> Result<SlateResult> {
    problem.validate()?;
    let j_count = problem.num_topics();
    let mut r = vec![0u8; j_count];
    let mut chosen = Vec::with_capacity(problem.n);
    let mut frozen_sum = 0.0;
    for _ in 0..problem.n {
        let mut best: Option<(usize, f64, f64)> = None;
        for c in 0..j_count {
            if r[c] == 1 {
                continue;
            }
            r[c] = 1;
            let probs = problem.predict(&r)?;
            r[c] = 0;
            let score = match variant {
                GreedyVariant::Reevaluate => chosen.iter().map(|&s| probs[s]).sum::<f64>() + probs[c],
                GreedyVariant::FrozenMarginals => frozen_sum + probs[c],
            };
            if best.map_or(true, |(_, b, _)| score > b) {
                best = Some((c, score, probs[c]));
            }
        }
        let (c, _, pc) = best.expect("n <= J leaves a candidate");
        r[c] = 1;
        chosen.push(c);
        frozen_sum += pc;
    }
    problem.finish(chosen, SlateMethod::Greedy)
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Enumerates every `n`-subset in lexicographic order and keeps the first
/// maximum.
pub fn exhaustive_slate(problem: &SlateProblem<'_>, cap: u128) -> Result<SlateResult> {
    problem.validate()?;
    let j_count = problem.num_topics();
    let subsets = binomial(j_count, problem.n);
    if subsets > cap {
        return Err(Error::SearchTooLarge {
            topics: j_count,
            slate: problem.n,
            subsets,
            cap,
        });
    }
    let n = problem.n;
    let mut combo: Vec<usize> = (0..n).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let r = indicator(j_count, &combo);
        let value = uplift(&problem.predict(&r)?, &r);
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((combo.clone(), value));
        }
        // advance to the next combination in lexicographic order
        let Some(i) = (0..n).rev().find(|&i| combo[i] < j_count - n + i) else {
            break;
        };
        combo[i] += 1;
        for k in i + 1..n {
            combo[k] = combo[k - 1] + 1;
        }
    }
    let (chosen, _) = best.expect("at least one subset");
    problem.finish(chosen, SlateMethod::Exhaustive)
}

/// Ranks topics by their probability with every topic exposed and takes the
/// top `n` (ties to the lower id). Exact when each `p_j` depends on the slate
/// only through `r_j`.
pub fn top_n_slate(problem: &SlateProblem<'_>) -> Result<SlateResult> {
    problem.validate()?;
    let j_count = problem.num_topics();
    let probs = problem.predict(&vec![1u8; j_count])?;
    let mut order: Vec<usize> = (0..j_count).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(problem.n);
    problem.finish(order, SlateMethod::TopN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `p = sigmoid(b + A r)`; choice-aware whenever `A` has off-diagonal mass.
    struct LinearChoice {
        bias: Vec<f64>,
        interaction: Vec<f64>,
    }

    impl LinearChoice {
        fn random(j: usize, seed: u64, coupled: bool) -> Self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bias = (0..j).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let interaction = (0..j * j)
                .map(|k| if coupled || k / j == k % j { rng.gen_range(-1.5..1.5) } else { 0.0 })
                .collect();
            LinearChoice { bias, interaction }
        }
    }

    impl ChoiceModel for LinearChoice {
        fn num_topics(&self) -> usize {
            self.bias.len()
        }

        fn predict(&self, r: &[u8], _: &UserContext<'_>) -> Result<Vec<f64>> {
            let j = self.bias.len();
            Ok((0..j)
                .map(|b| sigmoid(self.bias[b] + (0..j).map(|a| self.interaction[b * j + a] * r[a] as f64).sum::<f64>()))
                .collect())
        }

        fn name(&self) -> &str {
            "linear_choice"
        }
    }

    /// Ignores the slate entirely.
    struct Fixed(Vec<f64>);

    impl ChoiceModel for Fixed {
        fn num_topics(&self) -> usize {
            self.0.len()
        }

        fn predict(&self, _: &[u8], _: &UserContext<'_>) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }

        fn name(&self) -> &str {
            "fixed"
        }
    }

    const CTX: UserContext<'static> = UserContext { user: 0, history: &[], frequency: &[] };

    fn problem(model: &dyn ChoiceModel, n: usize) -> SlateProblem<'_> {
        SlateProblem { model, context: CTX, n }
    }

    /// Bitmask enumeration; keeps the lexicographically smallest sorted
    /// subset among maxima.
    fn brute_force(model: &dyn ChoiceModel, n: usize) -> (Vec<usize>, f64) {
        let j = model.num_topics();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for mask in 0u32..(1 << j) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let set: Vec<usize> = (0..j).filter(|&t| mask >> t & 1 == 1).collect();
            let r: Vec<u8> = (0..j).map(|t| (mask >> t & 1) as u8).collect();
            let p = model.predict(&r, &CTX).unwrap();
            let mut v = 0.0;
            for &t in &set {
                v += p[t];
            }
            let better = match &best {
                None => true,
                Some((bs, bv)) => v > *bv || (v == *bv && set < *bs),
            };
            if better {
                best = Some((set, v));
            }
        }
        best.unwrap()
    }

    #[test]
    fn uplift_examples() {
        assert_eq!(uplift(&[1.0; 8], &[1, 1, 1, 1, 1, 0, 0, 0]), 5.0);
        assert_eq!(uplift(&[0.3; 4], &[0; 4]), 0.0);
        assert!((uplift(&[0.1, 0.2, 0.4], &[1, 0, 1]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_slate_chooses_everything() {
        let m = LinearChoice::random(6, 1, true);
        for res in [greedy_slate(&problem(&m, 6)).unwrap(), exhaustive_slate(&problem(&m, 6), DEFAULT_SEARCH_CAP).unwrap()] {
            assert_eq!(res.chosen, (0..6).collect::<Vec<_>>());
            assert_eq!(res.r_star, vec![1; 6]);
        }
    }

    #[test]
    fn slate_size_is_validated() {
        let m = Fixed(vec![0.5; 4]);
        assert!(matches!(greedy_slate(&problem(&m, 5)), Err(Error::Input(_))));
        assert!(matches!(top_n_slate(&problem(&m, 0)), Err(Error::Input(_))));
    }

    #[test]
    fn exhaustive_matches_independent_enumerator() {
        for seed in 0..10 {
            let m = LinearChoice::random(10, seed, true);
            let res = exhaustive_slate(&problem(&m, 4), DEFAULT_SEARCH_CAP).unwrap();
            let (set, value) = brute_force(&m, 4);
            assert_eq!(res.chosen, set, "seed {seed}");
            assert!((res.uplift - value).abs() < 1e-12);
        }
    }

    #[test]
    fn exhaustive_ties_go_to_smallest_subset() {
        let m = Fixed(vec![0.2, 0.7, 0.7, 0.7, 0.1]);
        assert_eq!(exhaustive_slate(&problem(&m, 2), DEFAULT_SEARCH_CAP).unwrap().chosen, vec![1, 2]);
        assert_eq!(greedy_slate(&problem(&m, 2)).unwrap().chosen, vec![1, 2]);
        assert_eq!(top_n_slate(&problem(&m, 2)).unwrap().chosen, vec![1, 2]);
    }

    #[test]
    fn greedy_equals_exhaustive_for_single_topic() {
        for seed in 0..20 {
            let m = LinearChoice::random(9, seed, true);
            let g = greedy_slate(&problem(&m, 1)).unwrap();
            let e = exhaustive_slate(&problem(&m, 1), DEFAULT_SEARCH_CAP).unwrap();
            assert_eq!(g.chosen, e.chosen);
            assert_eq!(g.uplift, e.uplift);
        }
    }

    #[test]
    fn separable_models_agree_across_methods() {
        for seed in 0..10 {
            // diagonal interaction: p_j depends on r_j only
            let m = LinearChoice::random(8, seed, false);
            for n in 1..=4 {
                let g = greedy_slate(&problem(&m, n)).unwrap();
                let e = exhaustive_slate(&problem(&m, n), DEFAULT_SEARCH_CAP).unwrap();
                let t = top_n_slate(&problem(&m, n)).unwrap();
                assert_eq!(g.chosen, e.chosen);
                assert_eq!(t.chosen, e.chosen);
            }
        }
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        for seed in 0..10 {
            let m = LinearChoice::random(9, 100 + seed, true);
            for n in 1..=4 {
                let g = greedy_slate(&problem(&m, n)).unwrap();
                let e = exhaustive_slate(&problem(&m, n), DEFAULT_SEARCH_CAP).unwrap();
                assert!(g.uplift <= e.uplift + 1e-12);
            }
        }
    }

    #[test]
    fn results_are_consistent_and_bounded() {
        let m = LinearChoice::random(12, 7, true);
        for variant in [GreedyVariant::Reevaluate, GreedyVariant::FrozenMarginals] {
            let res = greedy_slate_with(&problem(&m, 5), variant).unwrap();
            assert_eq!(res.chosen.len(), 5);
            assert!(res.chosen.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(res.r_star.iter().map(|&x| x as usize).sum::<usize>(), 5);
            assert_eq!(res.uplift, res.chosen.iter().map(|&j| res.probs[j]).sum::<f64>());
            assert!((0.0..=5.0).contains(&res.uplift));
            assert_eq!(res, greedy_slate_with(&problem(&m, 5), variant).unwrap());
        }
    }

    #[test]
    fn oversized_search_is_refused() {
        let m = Fixed(vec![0.5; 40]);
        let err = exhaustive_slate(&problem(&m, 20), DEFAULT_SEARCH_CAP).unwrap_err();
        match err {
            Error::SearchTooLarge { subsets, .. } => assert_eq!(subsets, 137_846_528_820),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(10, 10), 1);
        assert_eq!(binomial(5, 6), 0);
        assert_eq!(binomial(30, 5), 142_506);
    }
}
