//! Multi-level OCR noise: Levenshtein similarity, a visual confusion table,
//! band-constrained corruption and the noisy token-pair dataset.

mod confusion;
mod corpus;
mod corrupt;
mod dataset;
mod levenshtein;

use serde::{Deserialize, Serialize};

pub use confusion::CharConfusionTable;
pub use corpus::{ingest_corpus, pseudo_words, tokenize, TokenFilter};
pub use corrupt::{corrupt, Corruption, CorruptionConfig, Variant};
pub use dataset::{
    build_dataset, read_jsonl, write_jsonl, DatasetStats, LevelStats, TokenPairRecord,
};
pub use levenshtein::{levenshtein_distance, similarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelName {
    Low,
    Average,
    High,
}

impl LevelName {
    pub const ALL: [LevelName; 3] = [LevelName::Low, LevelName::Average, LevelName::High];

    pub fn as_str(self) -> &'static str {
        match self {
            LevelName::Low => "low",
            LevelName::Average => "average",
            LevelName::High => "high",
        }
    }
}

impl std::fmt::Display for LevelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LevelName {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(LevelName::Low),
            "average" => Ok(LevelName::Average),
            "high" => Ok(LevelName::High),
            other => Err(crate::Error::Config(format!(
                "unknown noise level {other:?} (expected low, average or high)"
            ))),
        }
    }
}

/// Similarity interval; the lower bound is always inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBand {
    pub lo: f64,
    pub hi: f64,
    pub hi_inclusive: bool,
}

impl SimilarityBand {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo
            && if self.hi_inclusive {
                s <= self.hi
            } else {
                s < self.hi
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub name: LevelName,
    /// Inclusive `(min, max)` number of character alterations.
    pub alteration_range: (usize, usize),
    pub band: SimilarityBand,
}

impl NoiseLevel {
    pub fn low() -> Self {
        Self {
            name: LevelName::Low,
            alteration_range: (1, 1),
            band: SimilarityBand {
                lo: 0.8,
                hi: 1.0,
                hi_inclusive: true,
            },
        }
    }

    pub fn average() -> Self {
        Self {
            name: LevelName::Average,
            alteration_range: (2, 5),
            band: SimilarityBand {
                lo: 0.6,
                hi: 0.8,
                hi_inclusive: false,
            },
        }
    }

    pub fn high() -> Self {
        Self {
            name: LevelName::High,
            alteration_range: (3, 10),
            band: SimilarityBand {
                lo: 0.0,
                hi: 0.6,
                hi_inclusive: false,
            },
        }
    }

    pub fn preset(name: LevelName) -> Self {
        match name {
            LevelName::Low => Self::low(),
            LevelName::Average => Self::average(),
            LevelName::High => Self::high(),
        }
    }

    pub fn defaults() -> [NoiseLevel; 3] {
        [Self::low(), Self::average(), Self::high()]
    }

    pub fn validate(&self) -> crate::Result<()> {
        let (lo, hi) = self.alteration_range;
        if lo == 0 || lo > hi {
            return Err(crate::Error::Config(format!(
                "{}: alteration range {lo}..={hi} is empty or starts at zero",
                self.name
            )));
        }
        let b = &self.band;
        if !(0.0..=1.0).contains(&b.lo) || !(0.0..=1.0).contains(&b.hi) || b.lo > b.hi {
            return Err(crate::Error::Config(format!(
                "{}: similarity band [{}, {}] is not inside [0, 1]",
                self.name, b.lo, b.hi
            )));
        }
        Ok(())
    }
}
