//! Neuron neutralisation sweeps on a synthetic noisy NER task.

mod baseline;
mod f1;
mod grid;
mod heatmap;
mod ner;
mod select;

pub use baseline::{baseline_eval, head_f1, predict_labels, BaselineResult};
pub use f1::micro_f1;
pub use grid::{
    improvement_percent, run_sweep, BinRange, ImprovementCell, LayerSelection, SweepGrid,
    SweepResult,
};
pub use heatmap::{emit_heatmap, parse_heatmap, read_cells_jsonl, write_cells_jsonl, Heatmap};
pub use ner::{generate_ner_data, NerData, NerSentence, SynthNerConfig};
pub use select::{select_neurons, SelectionMode};
