//! Topic-level engagement modeling and slate optimization.
//!
//! The crate is organised as a pipeline:
//!
//! - [`gsdmm`] clusters short token sequences into topics with a collapsed
//!   Gibbs sampler for the Dirichlet multinomial mixture.
//! - [`pipeline`] turns an interaction log plus topic labels into per-period
//!   engagement/exposure tensors and model inputs (recent history, lifetime
//!   frequencies, next-period exposure and labels).
//! - [`net`] is the choice-aware engagement network: temporal filters over the
//!   history, tied-weight bottlenecks that mix information across topics, and
//!   a shared sigmoid head. Gradients are computed analytically.
//! - [`logit`] is the per-topic independent logistic baseline.
//! - [`optimizer`] selects topic slates that maximise the expected number of
//!   engagements, greedily or by exhaustive enumeration.
//! - [`evaluation`] computes BCE, AUC and uplift reports.
//! - [`simulator`] generates synthetic logs with known cross-topic effects.

pub mod error;
pub mod evaluation;
pub mod gsdmm;
pub mod logit;
pub mod model;
pub mod net;
pub mod optimizer;
pub mod pipeline;
pub mod simulator;
pub mod text;
pub(crate) mod util;

pub use error::{CheckpointError, Error, Result};
pub use model::{ChoiceModel, UserContext};
pub use util::mix_seed as derive_seed;
