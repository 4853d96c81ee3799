//! A small pre-norm decoder-only transformer with a gated SiLU MLP.
//!
//! The MLP intermediate (the `d_mlp`-wide product of the SiLU gate and the up
//! projection, just before the down projection) is the "neuron" space that
//! gets captured, masked and analysed.

mod forward;
mod head;
mod io;
mod tokenizer;
mod weights;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forward::{
    mlp_forward, AblationMask, ActivationOffset, ActivationTrace, ForwardOptions, ForwardOutput,
    MlpOutput,
};
pub use head::{
    classify_tokens, head_loss_and_grad, train_head, train_head_on_features, ClassifierHead,
    HeadGradient, LabeledSequence, TrainConfig, TrainedHead,
};
pub use io::{
    load_trace, load_weights, read_tensor_file, save_trace, save_weights, write_tensor_file, Tensor,
};
pub use tokenizer::CharTokenizer;
pub use weights::{init_model, BlockWeights, ModelWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub d_mlp: usize,
    pub n_heads: usize,
    pub vocab_size: usize,
    pub max_seq: usize,
    pub seed: u64,
    pub rope_theta: f64,
    pub norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            d_model: 64,
            d_mlp: 172,
            n_heads: 4,
            vocab_size: CharTokenizer::default().vocab_size(),
            max_seq: 256,
            seed: 0,
            rope_theta: 10_000.0,
            norm_eps: crate::nn::RMS_EPS,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_layers == 0 || self.d_model == 0 || self.n_heads == 0 || self.vocab_size == 0 {
            return bad("n_layers, d_model, n_heads and vocab_size must be positive".into());
        }
        if self.max_seq == 0 {
            return bad("max_seq must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if !self.head_dim().is_multiple_of(2) {
            return bad(format!(
                "head dim {} must be even for rotary positions",
                self.head_dim()
            ));
        }
        if self.d_mlp <= self.d_model {
            return bad(format!(
                "d_mlp {} must exceed d_model {} (up-projection expands)",
                self.d_mlp, self.d_model
            ));
        }
        if self.rope_theta.is_nan()
            || self.rope_theta <= 0.0
            || self.norm_eps.is_nan()
            || self.norm_eps < 0.0
        {
            return bad("rope_theta must be positive and norm_eps nonnegative".into());
        }
        Ok(())
    }
}
