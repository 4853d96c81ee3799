use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ocrsense::analysis::{DiffOptions, SensitivityConfig};
use ocrsense::model::{CharTokenizer, ModelConfig, TrainConfig};
use ocrsense::noise::{CorruptionConfig, LevelName, NoiseLevel};
use ocrsense::par::Workers;
use ocrsense::sweep::{SelectionMode, SweepGrid, SynthNerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySettings {
    /// Level whose report drives neuron selection in the sweep.
    pub level: LevelName,
    pub threshold: f64,
    pub leave_one_out: bool,
    pub activated_only: bool,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        let d = SensitivityConfig::default();
        Self {
            level: LevelName::Average,
            threshold: d.threshold,
            leave_one_out: d.leave_one_out,
            activated_only: d.diff.activated_only,
        }
    }
}

impl SensitivitySettings {
    pub fn stats_config(&self) -> SensitivityConfig {
        SensitivityConfig {
            threshold: self.threshold,
            leave_one_out: self.leave_one_out,
            diff: DiffOptions {
                activated_only: self.activated_only,
            },
        }
    }
}

/// Everything one pipeline run needs. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: Vec<PathBuf>,
    pub confusion_table: Option<PathBuf>,
    pub allowlist: Option<PathBuf>,
    pub lowercase: bool,
    pub min_token_len: usize,
    pub out_dir: PathBuf,
    pub model: ModelConfig,
    /// Replaces the preset of the level with the same name.
    pub noise_levels: Vec<NoiseLevel>,
    pub corruption: CorruptionConfig,
    pub sweep: SweepGrid,
    /// Synthetic NER description; the built-in one when absent.
    pub ner: Option<PathBuf>,
    pub train: TrainConfig,
    pub repetitions: usize,
    pub selection: SelectionMode,
    pub sensitivity: SensitivitySettings,
    pub workers: Workers,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: Vec::new(),
            confusion_table: None,
            allowlist: None,
            lowercase: false,
            min_token_len: 4,
            out_dir: PathBuf::from("out"),
            model: ModelConfig::default(),
            noise_levels: Vec::new(),
            corruption: CorruptionConfig::default(),
            sweep: SweepGrid::default(),
            ner: None,
            train: TrainConfig::default(),
            repetitions: 5,
            selection: SelectionMode::default(),
            sensitivity: SensitivitySettings::default(),
            workers: Workers::AUTO,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub level: Option<LevelName>,
    pub alphas: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply(ov);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.iter_mut().for_each(join);
        self.confusion_table.iter_mut().for_each(join);
        self.allowlist.iter_mut().for_each(join);
        self.ner.iter_mut().for_each(join);
        join(&mut self.out_dir);
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(o) = &ov.out {
            self.out_dir = o.clone();
        }
        if let Some(w) = ov.workers {
            self.workers = Workers(w);
        }
        if let Some(l) = ov.level {
            self.sensitivity.level = l;
        }
        if !ov.alphas.is_empty() {
            self.sweep.alphas = ov.alphas.clone();
        }
    }

    /// The three levels with overrides applied.
    pub fn levels(&self) -> [NoiseLevel; 3] {
        LevelName::ALL.map(|name| {
            self.noise_levels
                .iter()
                .find(|l| l.name == name)
                .cloned()
                .unwrap_or_else(|| NoiseLevel::preset(name))
        })
    }

    /// Model config with the vocabulary of the default tokenizer and a seed
    /// derived from the master seed.
    pub fn model_config(&self, tokenizer: &CharTokenizer) -> ModelConfig {
        ModelConfig {
            vocab_size: tokenizer.vocab_size(),
            seed: ocrsense::rng::RngState::new(self.seed).derive_seed("model"),
            ..self.model.clone()
        }
    }

    pub fn ner_config(&self) -> anyhow::Result<SynthNerConfig> {
        let mut ner = match &self.ner {
            Some(p) => SynthNerConfig::load(p)?,
            None => SynthNerConfig::default(),
        };
        ner.seed = ocrsense::rng::RngState::new(self.seed).derive_seed("ner");
        Ok(ner)
    }

    /// Checks shared by all stages. Input files are checked here so that a
    /// bad path is reported before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        for p in self
            .corpus
            .iter()
            .chain(&self.confusion_table)
            .chain(&self.allowlist)
            .chain(&self.ner)
        {
            if !p.is_file() {
                bail!("input file not found: {}", p.display());
            }
        }
        if self.repetitions == 0 {
            bail!("repetitions must be >= 1");
        }
        if self.min_token_len == 0 {
            bail!("min_token_len must be >= 1");
        }
        if let Some(l) = self.noise_levels.iter().find(|l| {
            self.noise_levels
                .iter()
                .filter(|m| m.name == l.name)
                .count()
                > 1
        }) {
            bail!("noise level {} is overridden more than once", l.name);
        }
        for l in self.levels() {
            l.validate()?;
        }
        self.corruption.validate()?;
        let m = self.model_config(&CharTokenizer::default());
        m.validate()?;
        self.sweep.validate(m.n_layers, m.d_mlp)?;
        let t = &self.train;
        if !(t.lr.is_finite() && t.lr >= 0.0 && t.init_std.is_finite() && t.init_std >= 0.0) {
            bail!("train lr and init_std must be finite and non-negative");
        }
        let th = self.sensitivity.threshold;
        if !(0.0..1.0).contains(&th) {
            bail!("sensitivity threshold {th} outside [0, 1)");
        }
        Ok(())
    }

    /// SHA-256 of the effective config, ignoring the output directory and
    /// worker count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = Workers::AUTO;
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }
}
