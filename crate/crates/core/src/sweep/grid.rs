use serde::{Deserialize, Serialize};

use crate::analysis::SensitivityReport;
use crate::error::{Error, Result};
use crate::model::{AblationMask, ClassifierHead, ForwardOptions, LabeledSequence, ModelWeights};
use crate::nn::Matrix;
use crate::par::{self, Workers};

use super::baseline::{evaluate_labels, head_f1, predict_labels};
use super::select::select_neurons;

/// Arithmetic progression `start, start + step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinRange {
    pub start: usize,
    pub step: usize,
    pub stop: usize,
}

impl BinRange {
    pub fn sizes(&self) -> Vec<usize> {
        if self.step == 0 {
            return Vec::new();
        }
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub layers: Vec<usize>,
    pub bins: BinRange,
    pub alphas: Vec<f64>,
    /// Mask every grid layer up to and including the cell's layer at once,
    /// instead of that layer alone.
    pub joint: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            layers: (0..4).collect(),
            bins: BinRange {
                start: 16,
                step: 16,
                stop: 160,
            },
            alphas: vec![0.1, 0.5, 0.9],
            joint: false,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self, n_layers: usize, d_mlp: usize) -> Result<()> {
        let b = &self.bins;
        if b.step == 0 || b.start == 0 || b.start > b.stop {
            return Err(Error::Config(format!(
                "bin range needs 0 < start <= stop and step > 0, got {b:?}"
            )));
        }
        if b.stop > d_mlp {
            return Err(Error::Config(format!(
                "bin size {} exceeds d_mlp {d_mlp}",
                b.stop
            )));
        }
        if self.layers.is_empty() || self.alphas.is_empty() {
            return Err(Error::Config(
                "sweep grid needs at least one layer and one alpha".into(),
            ));
        }
        if let Some(&l) = self.layers.iter().find(|&&l| l >= n_layers) {
            return Err(Error::Config(format!(
                "sweep layer {l} outside model with {n_layers} layers"
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::Config(format!("alpha {a} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.layers.len() * self.bins.sizes().len() * self.alphas.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCell {
    pub layer: usize,
    pub bin_size: usize,
    pub alpha: f64,
    pub f1_neutralised: f64,
    pub f1_baseline: f64,
    pub improvement_percent: f64,
}

/// `(neutralised − baseline) / baseline × 100`.
pub fn improvement_percent(f1_neutralised: f64, f1_baseline: f64) -> Result<f64> {
    if f1_baseline == 0.0 || !f1_baseline.is_finite() {
        return Err(Error::Input(format!(
            "improvement undefined for baseline F1 {f1_baseline}"
        )));
    }
    Ok((f1_neutralised - f1_baseline) / f1_baseline * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSelection {
    pub layer: usize,
    pub bin_size: usize,
    pub neurons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Unmasked F1 of the head the sweep was run with.
    pub baseline_f1: f64,
    pub selection: Vec<LayerSelection>,
    /// Ordered by (layer, bin, alpha) as listed in the grid.
    pub cells: Vec<ImprovementCell>,
}

/// Evaluate every (layer, bin, α) cell, reusing the unmasked residual stream
/// up to the first masked layer.
pub fn run_sweep(
    model: &ModelWeights,
    head: &ClassifierHead,
    test: &[LabeledSequence],
    grid: &SweepGrid,
    report: Option<&SensitivityReport>,
    workers: Workers,
) -> Result<SweepResult> {
    let cfg = &model.config;
    grid.validate(cfg.n_layers, cfg.d_mlp)?;
    let baseline_f1 = head_f1(model, head, test, workers)?;
    if baseline_f1 == 0.0 {
        return Err(Error::Input(
            "baseline F1 is 0; improvement is undefined".into(),
        ));
    }

    let bins = grid.bins.sizes();
    let mut selection = Vec::new();
    for &layer in &grid.layers {
        for &bin_size in &bins {
            let neurons = select_neurons(report, layer, bin_size, cfg.d_mlp)?;
            selection.push(LayerSelection {
                layer,
                bin_size,
                neurons,
            });
        }
    }

    // Layers masked by the cells of grid row `li`.
    let masked = |li: usize| {
        if grid.joint {
            &grid.layers[..=li]
        } else {
            &grid.layers[li..=li]
        }
    };
    let starts: Vec<usize> = (0..grid.layers.len())
        .map(|li| *masked(li).iter().min().expect("non-empty"))
        .collect();
    let residuals: Vec<Vec<Matrix>> = starts
        .iter()
        .map(|&start| {
            par::map(workers, test, |_, s| model.residual_before(&s.ids, start))
                .into_iter()
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, f64)> = (0..grid.layers.len())
        .flat_map(|li| {
            (0..bins.len()).flat_map(move |bi| grid.alphas.iter().map(move |&a| (li, bi, a)))
        })
        .collect();
    let cells = par::map(
        workers,
        &jobs,
        |_, &(li, bi, alpha)| -> Result<ImprovementCell> {
            let layer = grid.layers[li];
            let mut mask = AblationMask::for_config(cfg);
            for (lj, &l) in grid.layers.iter().enumerate() {
                if masked(li).contains(&l) {
                    mask.neutralise(l, &selection[lj * bins.len() + bi].neurons, alpha)?;
                }
            }
            let opts = ForwardOptions::masked(&mask);
            let f1 = evaluate_labels(test, Workers::SEQUENTIAL, |i, _| {
                let out = model.forward_from(starts[li], residuals[li][i].clone(), &opts)?;
                predict_labels(&out.hidden, head)
            })?;
            Ok(ImprovementCell {
                layer,
                bin_size: bins[bi],
                alpha,
                f1_neutralised: f1,
                f1_baseline: baseline_f1,
                improvement_percent: improvement_percent(f1, baseline_f1)?,
            })
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        baseline_f1,
        selection,
        cells,
    })
}
