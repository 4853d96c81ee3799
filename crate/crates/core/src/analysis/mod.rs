//! Layer-level and neuron-level measurements of how MLP activations react
//! to corrupted inputs.

mod cka;
mod neurons;
mod probe;
mod profile;
mod stats;

pub use cka::{linear_cka, mean_pool, token_pair_cka, CkaValue};
pub use neurons::{
    neuron_pair_diff, neuron_pair_diff_with, sensitivity_report, significant_neurons,
    significant_neurons_with, DiffOptions, LayerSensitivity, NeuronEntry, NeuronStreamStats,
    SensitivityConfig, SensitivityReport,
};
pub use probe::{ModelProbe, Role, TraceSource};
pub use profile::{cka_pairs, profile_layers, CkaCell, LayerCkaProfile, PairCka};
pub use stats::{quantile, Welford};
