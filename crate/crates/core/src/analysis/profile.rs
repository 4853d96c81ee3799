use serde::{Deserialize, Serialize};

use super::cka::token_pair_cka;
use super::probe::{Role, TraceSource};
use super::stats::quantile;
use crate::error::{Error, Result};
use crate::noise::{LevelName, TokenPairRecord};
use crate::par::{self, Workers};

/// CKA of one record at one (layer, level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCka {
    pub record: usize,
    pub layer: usize,
    pub level: LevelName,
    pub cka: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkaCell {
    pub layer: usize,
    pub level: LevelName,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub n_pairs: usize,
    pub n_undefined: usize,
}

/// Aggregated per-pair CKA, ordered by (layer, level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCkaProfile {
    pub cells: Vec<CkaCell>,
}

impl LayerCkaProfile {
    pub fn cell(&self, layer: usize, level: LevelName) -> Option<&CkaCell> {
        self.cells
            .iter()
            .find(|c| c.layer == layer && c.level == level)
    }

    pub fn n_layers(&self) -> usize {
        self.cells.iter().map(|c| c.layer + 1).max().unwrap_or(0)
    }

    /// `layer,level,mean,median,q10,q90,n_pairs,n_undefined`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,level,mean,median,q10,q90,n_pairs,n_undefined\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.layer, c.level, c.mean, c.median, c.q10, c.q90, c.n_pairs, c.n_undefined
            ));
        }
        s
    }

    /// Group per-pair values into cells. Undefined values are counted and
    /// left out of the statistics.
    pub fn from_pairs(points: &[PairCka], n_layers: usize, levels: &[LevelName]) -> Self {
        let mut cells = Vec::with_capacity(n_layers * levels.len());
        for layer in 0..n_layers {
            for &level in levels {
                let mut n_pairs = 0;
                let mut vals: Vec<f64> = Vec::new();
                for p in points
                    .iter()
                    .filter(|p| p.layer == layer && p.level == level)
                {
                    n_pairs += 1;
                    if let Some(v) = p.cka {
                        vals.push(v);
                    }
                }
                vals.sort_by(f64::total_cmp);
                let q = |x| quantile(&vals, x).unwrap_or(f64::NAN);
                let mean = if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                };
                cells.push(CkaCell {
                    layer,
                    level,
                    mean,
                    median: q(0.5),
                    q10: q(0.1),
                    q90: q(0.9),
                    n_pairs,
                    n_undefined: n_pairs - vals.len(),
                });
            }
        }
        Self { cells }
    }
}

/// Per-pair CKA for every record, layer and level, in (record, level, layer) order.
pub fn cka_pairs(
    source: &dyn TraceSource,
    records: &[TokenPairRecord],
    levels: &[LevelName],
    workers: Workers,
) -> Result<Vec<PairCka>> {
    if records.is_empty() {
        return Err(Error::Empty("token-pair dataset".into()));
    }
    let layers: Vec<usize> = (0..source.n_layers()).collect();
    let per_record = par::map(workers, records, |i, rec| -> Result<Vec<PairCka>> {
        let correct = source.trace(&rec.correct, Role::Correct, &layers)?;
        let mut out = Vec::with_capacity(levels.len() * layers.len());
        for &level in levels {
            let altered = source.trace(&rec.variant(level).text, Role::Altered, &layers)?;
            for &layer in &layers {
                let cka = token_pair_cka(&correct, &altered, layer)?.value();
                out.push(PairCka {
                    record: i,
                    layer,
                    level,
                    cka,
                });
            }
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(records.len() * levels.len() * layers.len());
    for r in per_record {
        all.extend(r?);
    }
    Ok(all)
}

/// Per-layer CKA profile between correct tokens and their altered variants.
pub fn profile_layers(
    source: &dyn TraceSource,
    records: &[TokenPairRecord],
    levels: &[LevelName],
    workers: Workers,
) -> Result<LayerCkaProfile> {
    let points = cka_pairs(source, records, levels, workers)?;
    Ok(LayerCkaProfile::from_pairs(
        &points,
        source.n_layers(),
        levels,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_excludes_undefined() {
        let pts = vec![
            PairCka {
                record: 0,
                layer: 0,
                level: LevelName::Low,
                cka: Some(0.5),
            },
            PairCka {
                record: 1,
                layer: 0,
                level: LevelName::Low,
                cka: None,
            },
            PairCka {
                record: 2,
                layer: 0,
                level: LevelName::Low,
                cka: Some(1.0),
            },
        ];
        let p = LayerCkaProfile::from_pairs(&pts, 1, &[LevelName::Low]);
        let c = &p.cells[0];
        assert_eq!((c.n_pairs, c.n_undefined), (3, 1));
        assert!((c.mean - 0.75).abs() < 1e-15);
        assert!(c.q10 <= c.median && c.median <= c.q90);
        assert_eq!(p.to_csv().lines().count(), 2);
    }
}
