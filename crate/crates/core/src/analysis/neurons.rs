use serde::{Deserialize, Serialize};

use super::probe::{Role, TraceSource};
use super::stats::Welford;
use crate::error::{Error, Result};
use crate::model::ActivationTrace;
use crate::nn::Matrix;
use crate::noise::{LevelName, TokenPairRecord};
use crate::par::{self, Workers};

/// Pairs per accumulation chunk. Fixed so the merge tree, and therefore every
/// rounding step, is the same for any worker count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffOptions {
    /// Average only over positions where the activation is positive.
    pub activated_only: bool,
}

fn position_means(m: &Matrix, opts: DiffOptions) -> Vec<f64> {
    if !opts.activated_only {
        return m.col_means();
    }
    let mut sum = vec![0.0; m.cols()];
    let mut cnt = vec![0usize; m.cols()];
    for r in 0..m.rows() {
        for (j, &v) in m.row(r).iter().enumerate() {
            if v > 0.0 {
                sum[j] += v;
                cnt[j] += 1;
            }
        }
    }
    sum.iter()
        .zip(&cnt)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// `|mean_correct(n) − mean_altered(n)|` per neuron, means over positions.
pub fn neuron_pair_diff(
    correct: &ActivationTrace,
    altered: &ActivationTrace,
    layer: usize,
) -> Result<Vec<f64>> {
    neuron_pair_diff_with(correct, altered, layer, DiffOptions::default())
}

pub fn neuron_pair_diff_with(
    correct: &ActivationTrace,
    altered: &ActivationTrace,
    layer: usize,
    opts: DiffOptions,
) -> Result<Vec<f64>> {
    let c = position_means(correct.layer(layer)?, opts);
    let a = position_means(altered.layer(layer)?, opts);
    if c.len() != a.len() {
        return Err(Error::shape("neuron_pair_diff", c.len(), a.len()));
    }
    Ok(c.iter().zip(&a).map(|(x, y)| (x - y).abs()).collect())
}

/// Neurons with `diff_n > μ + σ`, where μ and σ (population) are taken over
/// all other neurons of the layer.
pub fn significant_neurons(diff: &[f64]) -> Vec<usize> {
    significant_neurons_with(diff, true)
}

/// As [`significant_neurons`]; `leave_one_out = false` includes neuron `n`
/// itself in μ and σ. Margins within floating-point resolution of the
/// layer's scale do not count as exceeding the threshold.
pub fn significant_neurons_with(diff: &[f64], leave_one_out: bool) -> Vec<usize> {
    let n = diff.len();
    if n < 2 {
        return Vec::new();
    }
    // Work in deviations from the overall mean so constant inputs stay exact.
    let mu = diff.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = diff.iter().map(|d| d - mu).collect();
    let s: f64 = dev.iter().sum();
    let q: f64 = dev.iter().map(|e| e * e).sum();
    let scale = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let tol = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let all_mean = s / n as f64;
    let all_std = (q / n as f64 - all_mean * all_mean).max(0.0).sqrt();
    let m = (n - 1) as f64;
    dev.iter()
        .enumerate()
        .filter(|&(_, &e)| {
            let (mean, std) = if leave_one_out {
                let mean = (s - e) / m;
                (mean, ((q - e * e) / m - mean * mean).max(0.0).sqrt())
            } else {
                (all_mean, all_std)
            };
            e - mean - std > tol
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    /// A neuron is OCR-sensitive when its consistency strictly exceeds this.
    pub threshold: f64,
    pub leave_one_out: bool,
    pub diff: DiffOptions,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            leave_one_out: true,
            diff: DiffOptions::default(),
        }
    }
}

/// Per-layer, per-neuron accumulators across token pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronStreamStats {
    pub n_pairs: u64,
    /// `[layer][neuron]`
    pub correct: Vec<Vec<Welford>>,
    pub altered: Vec<Vec<Welford>>,
    pub diff: Vec<Vec<Welford>>,
    pub hits: Vec<Vec<u64>>,
}

impl NeuronStreamStats {
    pub fn new(n_layers: usize, d_mlp: usize) -> Self {
        Self {
            n_pairs: 0,
            correct: vec![vec![Welford::default(); d_mlp]; n_layers],
            altered: vec![vec![Welford::default(); d_mlp]; n_layers],
            diff: vec![vec![Welford::default(); d_mlp]; n_layers],
            hits: vec![vec![0; d_mlp]; n_layers],
        }
    }

    /// Fold in one (correct, altered) pair.
    pub fn push_pair(
        &mut self,
        correct: &ActivationTrace,
        altered: &ActivationTrace,
        cfg: &SensitivityConfig,
    ) -> Result<()> {
        for layer in 0..self.hits.len() {
            let mc = position_means(correct.layer(layer)?, cfg.diff);
            let ma = position_means(altered.layer(layer)?, cfg.diff);
            if mc.len() != self.hits[layer].len() || ma.len() != mc.len() {
                return Err(Error::shape(
                    "NeuronStreamStats",
                    mc.len(),
                    self.hits[layer].len(),
                ));
            }
            let diff: Vec<f64> = mc.iter().zip(&ma).map(|(x, y)| (x - y).abs()).collect();
            for n in significant_neurons_with(&diff, cfg.leave_one_out) {
                self.hits[layer][n] += 1;
            }
            for (j, ((c, a), d)) in mc.iter().zip(&ma).zip(&diff).enumerate() {
                self.correct[layer][j].push(*c);
                self.altered[layer][j].push(*a);
                self.diff[layer][j].push(*d);
            }
        }
        self.n_pairs += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &NeuronStreamStats) {
        self.n_pairs += other.n_pairs;
        for l in 0..self.hits.len() {
            for j in 0..self.hits[l].len() {
                self.correct[l][j].merge(&other.correct[l][j]);
                self.altered[l][j].merge(&other.altered[l][j]);
                self.diff[l][j].merge(&other.diff[l][j]);
                self.hits[l][j] += other.hits[l][j];
            }
        }
    }

    pub fn into_report(self, level: LevelName, threshold: f64) -> SensitivityReport {
        let pairs = self.n_pairs.max(1) as f64;
        let layers = self
            .hits
            .iter()
            .enumerate()
            .map(|(layer, hits)| {
                let neurons: Vec<NeuronEntry> = hits
                    .iter()
                    .enumerate()
                    .map(|(neuron, &h)| NeuronEntry {
                        neuron,
                        consistency: h as f64 / pairs,
                        mean_diff: self.diff[layer][neuron].mean,
                    })
                    .collect();
                let sensitive: Vec<usize> = neurons
                    .iter()
                    .filter(|e| e.consistency > threshold)
                    .map(|e| e.neuron)
                    .collect();
                LayerSensitivity {
                    layer,
                    n_sensitive: sensitive.len(),
                    sensitive,
                    neurons,
                }
            })
            .collect();
        SensitivityReport {
            level,
            threshold,
            n_pairs: self.n_pairs,
            layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronEntry {
    pub neuron: usize,
    pub consistency: f64,
    pub mean_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSensitivity {
    pub layer: usize,
    pub n_sensitive: usize,
    pub sensitive: Vec<usize>,
    /// Every neuron of the layer, by index.
    pub neurons: Vec<NeuronEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub level: LevelName,
    pub threshold: f64,
    pub n_pairs: u64,
    pub layers: Vec<LayerSensitivity>,
}

impl SensitivityReport {
    pub fn layer(&self, layer: usize) -> Result<&LayerSensitivity> {
        self.layers
            .iter()
            .find(|l| l.layer == layer)
            .ok_or(Error::MissingLayer(layer))
    }

    /// Re-derive the sensitive subsets for another threshold.
    pub fn with_threshold(&self, threshold: f64) -> SensitivityReport {
        let mut r = self.clone();
        r.threshold = threshold;
        for l in &mut r.layers {
            l.sensitive = l
                .neurons
                .iter()
                .filter(|e| e.consistency > threshold)
                .map(|e| e.neuron)
                .collect();
            l.n_sensitive = l.sensitive.len();
        }
        r
    }

    /// `layer,level,n_sensitive` rows.
    pub fn counts_csv(&self) -> String {
        let mut s = String::from("layer,level,n_sensitive\n");
        for l in &self.layers {
            s.push_str(&format!("{},{},{}\n", l.layer, self.level, l.n_sensitive));
        }
        s
    }
}

/// Consistency of per-pair significance for every neuron of every layer.
pub fn sensitivity_report(
    source: &dyn TraceSource,
    records: &[TokenPairRecord],
    level: LevelName,
    cfg: &SensitivityConfig,
    workers: Workers,
) -> Result<SensitivityReport> {
    if records.is_empty() {
        return Err(Error::Empty("token-pair dataset".into()));
    }
    let (n_layers, d_mlp) = (source.n_layers(), source.d_mlp());
    let layers: Vec<usize> = (0..n_layers).collect();
    let chunks: Vec<&[TokenPairRecord]> = records.chunks(CHUNK).collect();
    let partial = par::map(workers, &chunks, |_, chunk| -> Result<NeuronStreamStats> {
        let mut acc = NeuronStreamStats::new(n_layers, d_mlp);
        for rec in chunk.iter() {
            let c = source.trace(&rec.correct, Role::Correct, &layers)?;
            let a = source.trace(&rec.variant(level).text, Role::Altered, &layers)?;
            acc.push_pair(&c, &a, cfg)?;
        }
        Ok(acc)
    });
    let mut total = NeuronStreamStats::new(n_layers, d_mlp);
    for p in partial {
        total.merge(&p?);
    }
    Ok(total.into_report(level, cfg.threshold))
}
