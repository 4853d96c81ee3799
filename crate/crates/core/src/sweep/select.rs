use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::SensitivityReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Most consistent neurons first.
    #[default]
    SensitivityRanked,
    /// Lowest indices first, ignoring sensitivity.
    Positional,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SensitivityRanked => "sensitivity-ranked",
            Self::Positional => "positional",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensitivity-ranked" => Ok(Self::SensitivityRanked),
            "positional" => Ok(Self::Positional),
            other => Err(Error::Config(format!("unknown selection mode {other:?}"))),
        }
    }
}

/// The `bin_size` neurons of `layer` to neutralise. With a report, neurons
/// are ranked by consistency, then mean difference (both descending), then
/// index; without one the first `bin_size` indices are taken.
pub fn select_neurons(
    report: Option<&SensitivityReport>,
    layer: usize,
    bin_size: usize,
    d_mlp: usize,
) -> Result<Vec<usize>> {
    if bin_size > d_mlp {
        return Err(Error::Config(format!(
            "bin size {bin_size} exceeds d_mlp {d_mlp}"
        )));
    }
    let Some(report) = report else {
        return Ok((0..bin_size).collect());
    };
    let entries = &report.layer(layer)?.neurons;
    if entries.len() != d_mlp {
        return Err(Error::Input(format!(
            "report for layer {layer} covers {} neurons, model has {d_mlp}",
            entries.len()
        )));
    }
    let mut ranked: Vec<_> = entries.iter().collect();
    ranked.sort_by(|a, b| {
        b.consistency
            .total_cmp(&a.consistency)
            .then(b.mean_diff.total_cmp(&a.mean_diff))
            .then(a.neuron.cmp(&b.neuron))
    });
    Ok(ranked
        .into_iter()
        .take(bin_size)
        .map(|e| e.neuron)
        .collect())
}
