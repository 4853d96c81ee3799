use crate::error::Result;
use crate::model::{
    ActivationOffset, ActivationTrace, CharTokenizer, ForwardOptions, ModelWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Correct,
    Altered,
}

/// Anything that can turn a token string into captured MLP activations.
pub trait TraceSource: Sync {
    fn n_layers(&self) -> usize;
    fn d_mlp(&self) -> usize;
    fn trace(&self, text: &str, role: Role, layers: &[usize]) -> Result<ActivationTrace>;
}

/// Runs the model on the character ids of a token.
///
/// An optional offset is added to the MLP intermediates of altered inputs
/// only, which plants a known reaction for detection tests.
#[derive(Debug, Clone)]
pub struct ModelProbe<'a> {
    model: &'a ModelWeights,
    tokenizer: &'a CharTokenizer,
    altered_offset: Option<ActivationOffset>,
}

impl<'a> ModelProbe<'a> {
    pub fn new(model: &'a ModelWeights, tokenizer: &'a CharTokenizer) -> Self {
        Self {
            model,
            tokenizer,
            altered_offset: None,
        }
    }

    pub fn with_altered_offset(mut self, offset: ActivationOffset) -> Self {
        self.altered_offset = Some(offset);
        self
    }
}

impl TraceSource for ModelProbe<'_> {
    fn n_layers(&self) -> usize {
        self.model.config.n_layers
    }

    fn d_mlp(&self) -> usize {
        self.model.config.d_mlp
    }

    fn trace(&self, text: &str, role: Role, layers: &[usize]) -> Result<ActivationTrace> {
        let ids = self.tokenizer.encode(text);
        let offset = match role {
            Role::Altered => self.altered_offset.as_ref(),
            Role::Correct => None,
        };
        let opts = ForwardOptions {
            mask: None,
            offset,
            capture: layers,
        };
        Ok(self.model.forward(&ids, &opts)?.trace)
    }
}
