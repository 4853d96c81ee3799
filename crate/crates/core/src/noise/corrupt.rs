use serde::{Deserialize, Serialize};

use super::{similarity, CharConfusionTable, NoiseLevel};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    /// Probability that an altered position is substituted rather than deleted.
    pub substitution_prob: f64,
    pub max_retries: usize,
    pub min_token_len: usize,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            substitution_prob: 0.7,
            max_retries: 50,
            min_token_len: 4,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.substitution_prob) {
            return Err(Error::Config(format!(
                "substitution_prob {} outside [0, 1]",
                self.substitution_prob
            )));
        }
        if self.max_retries == 0 || self.min_token_len == 0 {
            return Err(Error::Config(
                "max_retries and min_token_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One altered form of a token, as stored in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub text: String,
    pub sim: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub variant: Variant,
    /// For each character of the altered text, the index of the source
    /// character it came from. Deleted source positions do not appear.
    pub source_index: Vec<usize>,
}

/// Draw a corruption of `token` whose similarity falls in `level`'s band.
///
/// Returns `Ok(None)` when no attempt within the retry budget lands in the
/// band (the token is unsatisfiable at this level).
pub fn corrupt(
    token: &str,
    level: &NoiseLevel,
    table: &CharConfusionTable,
    cfg: &CorruptionConfig,
    rng: &mut RngState,
) -> Result<Option<Corruption>> {
    let chars: Vec<char> = token.chars().collect();
    if chars.len() < cfg.min_token_len {
        return Err(Error::Input(format!(
            "token {token:?} shorter than the minimum length {}",
            cfg.min_token_len
        )));
    }
    let (lo, hi) = level.alteration_range;
    for _ in 0..cfg.max_retries {
        let k = rng.range_inclusive(lo, hi).min(chars.len());
        if k < lo {
            continue;
        }
        let positions = rng.distinct_indices(chars.len(), k);
        let mut altered = String::with_capacity(token.len());
        let mut source_index = Vec::with_capacity(chars.len());
        let mut next_pos = positions.iter().peekable();
        for (i, &c) in chars.iter().enumerate() {
            if next_pos.peek() == Some(&&i) {
                next_pos.next();
                let subs = table.replacements(c);
                if rng.uniform() < cfg.substitution_prob && !subs.is_empty() {
                    altered.push(subs[rng.index(subs.len())]);
                    source_index.push(i);
                }
                // otherwise deleted
            } else {
                altered.push(c);
                source_index.push(i);
            }
        }
        if altered.is_empty() || altered == token {
            continue;
        }
        let sim = similarity(token, &altered)?;
        if level.band.contains(sim) {
            return Ok(Some(Corruption {
                variant: Variant {
                    text: altered,
                    sim,
                    k,
                },
                source_index,
            }));
        }
    }
    Ok(None)
}
