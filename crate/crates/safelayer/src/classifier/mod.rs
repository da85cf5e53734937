//! Safety classification model: a small rectifier network with manual
//! forward/backward, trained by externally computed logit gradients, plus the
//! bias-correction routine that retargets a trained model to a new threshold
//! without retraining.

mod bias;
mod mlp;

pub use bias::{apply_bias, bias_correct, bias_correct_logits, BiasCorrection, BiasVector};
pub use mlp::{Mlp, MlpGradients, TrainSample, LOGIT_GRAD_CLIP};
