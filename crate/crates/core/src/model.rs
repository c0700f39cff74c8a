//! The predictor contract shared by the network, the logit baseline and the
//! simulator's ground truth. The slate optimizer only talks to this trait.

use crate::error::Result;

/// What a predictor knows about one user at decision time.
#[derive(Debug, Clone, Copy)]
pub struct UserContext<'a> {
    /// Row index of the user in the engagement tensor.
    pub user: usize,
    /// `J x T` row-major binary history, column 0 is the most recent period.
    pub history: &'a [u8],
    /// Lifetime per-topic engagement frequencies in `[0, 1]`.
    pub frequency: &'a [f64],
}

pub trait ChoiceModel: Sync {
    fn num_topics(&self) -> usize;

    /// Per-topic engagement probabilities given the shown slate `exposure`
    /// (a binary `J`-vector).
    fn predict(&self, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>>;

    fn name(&self) -> &str;
}

impl<M: ChoiceModel + ?Sized> ChoiceModel for &M {
    fn num_topics(&self) -> usize {
        (**self).num_topics()
    }

    fn predict(&self, exposure: &[u8], ctx: &UserContext<'_>) -> Result<Vec<f64>> {
        (**self).predict(exposure, ctx)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
