//! The siamese BiRNN sentence-pair classifier.
//!
//! Both languages share one forward and one backward recurrent cell; only the
//! embedding matrices are language specific. A sentence is represented by the
//! forward state after its last token concatenated with the backward state
//! after its first token. A pair is scored from the element-wise product and
//! absolute difference of the two representations.

mod config;
mod forward;
mod params;
mod train;

pub use config::ModelConfig;
pub use forward::{
    bce_loss, predict, BatchForward, Gradients, LossGraph, Mode, PairTrace,
    SentenceRepresentation, CLAMP_EPS,
};
pub use params::{ModelParams, ParamId, PARAM_NAMES};
pub use train::{EpochStats, TrainConfig, Trainer, TrainingLog};

/// Scratch space for [`ModelParams::match_logit`] callers outside this module.
pub(crate) fn forward_scratch<S: crate::nn::Scalar>(cfg: &ModelConfig) -> forward::MatchScratch<S> {
    forward::MatchScratch::new(cfg.d_enc(), cfg.d_f)
}

/// Which embedding matrix a sentence is routed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Source,
    Target,
}
