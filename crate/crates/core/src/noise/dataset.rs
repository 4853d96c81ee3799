use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{corrupt, CharConfusionTable, CorruptionConfig, LevelName, NoiseLevel, Variant};
use crate::error::{Error, Result};
use crate::par::{self, Workers};
use crate::rng::RngState;

/// A correct token and one band-verified variant per noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPairRecord {
    pub correct: String,
    pub low: Variant,
    pub average: Variant,
    pub high: Variant,
}

impl TokenPairRecord {
    pub fn variant(&self, level: LevelName) -> &Variant {
        match level {
            LevelName::Low => &self.low,
            LevelName::Average => &self.average,
            LevelName::High => &self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: LevelName,
    pub mean_similarity: f64,
    pub mean_alterations: f64,
    /// Tokens for which no in-band variant was found at this level.
    pub unsatisfiable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_tokens: usize,
    pub n_records: usize,
    pub n_dropped: usize,
    pub n_too_short: usize,
    pub levels: Vec<LevelStats>,
}

/// Corrupt every token at all three levels; tokens that fail any level are
/// dropped and counted. Each token draws from its own substream keyed by its
/// index, so the output does not depend on `workers`.
pub fn build_dataset(
    tokens: &[String],
    levels: &[NoiseLevel; 3],
    table: &CharConfusionTable,
    cfg: &CorruptionConfig,
    rng: &RngState,
    workers: Workers,
) -> Result<(Vec<TokenPairRecord>, DatasetStats)> {
    if tokens.is_empty() {
        return Err(Error::Empty("token set".into()));
    }
    cfg.validate()?;
    for (l, want) in levels.iter().zip(LevelName::ALL) {
        l.validate()?;
        if l.name != want {
            return Err(Error::Config(format!(
                "levels must be ordered low, average, high; got {}",
                l.name
            )));
        }
    }
    let base = rng.split("dataset");

    enum Outcome {
        TooShort,
        Failed([bool; 3]),
        Ok(TokenPairRecord),
    }

    let outcomes = par::map(workers, tokens, |i, tok| -> Result<Outcome> {
        if tok.chars().count() < cfg.min_token_len {
            return Ok(Outcome::TooShort);
        }
        let tok_rng = base.split_indexed("token", i as u64);
        let mut variants = Vec::with_capacity(3);
        let mut failed = [false; 3];
        for (j, level) in levels.iter().enumerate() {
            let mut r = tok_rng.split(level.name.as_str());
            match corrupt(tok, level, table, cfg, &mut r)? {
                Some(c) => variants.push(c.variant),
                None => failed[j] = true,
            }
        }
        if failed.iter().any(|&f| f) {
            return Ok(Outcome::Failed(failed));
        }
        let mut it = variants.into_iter();
        let (low, average, high) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        Ok(Outcome::Ok(TokenPairRecord {
            correct: tok.clone(),
            low,
            average,
            high,
        }))
    });

    let mut records = Vec::new();
    let mut unsat = [0usize; 3];
    let mut too_short = 0;
    let mut dropped = 0;
    for o in outcomes {
        match o? {
            Outcome::TooShort => {
                too_short += 1;
                dropped += 1;
            }
            Outcome::Failed(f) => {
                dropped += 1;
                for (u, failed) in unsat.iter_mut().zip(f) {
                    *u += usize::from(failed);
                }
            }
            Outcome::Ok(r) => records.push(r),
        }
    }

    let levels_stats = LevelName::ALL
        .iter()
        .enumerate()
        .map(|(j, &name)| {
            let n = records.len().max(1) as f64;
            LevelStats {
                level: name,
                mean_similarity: records.iter().map(|r| r.variant(name).sim).sum::<f64>() / n,
                mean_alterations: records
                    .iter()
                    .map(|r| r.variant(name).k as f64)
                    .sum::<f64>()
                    / n,
                unsatisfiable: unsat[j],
            }
        })
        .collect();

    let stats = DatasetStats {
        n_tokens: tokens.len(),
        n_records: records.len(),
        n_dropped: dropped,
        n_too_short: too_short,
        levels: levels_stats,
    };
    Ok((records, stats))
}

pub fn write_jsonl<W: Write>(records: &[TokenPairRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<jsonl output>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TokenPairRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Input(format!("dataset line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
