use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CharTokenizer, LabeledSequence};
use crate::noise::{corrupt, CharConfusionTable, CorruptionConfig, LevelName, NoiseLevel};
use crate::rng::RngState;

/// Template-based NER data with character-level IOB2 labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthNerConfig {
    /// Entity type (slot name) → surface forms.
    pub gazetteers: BTreeMap<String, Vec<String>>,
    /// Sentences with `{TYPE}` slots.
    pub templates: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    /// Noise applied to the test split; `None` keeps it clean.
    pub noise_level: Option<LevelName>,
    /// Chance that an eligible test word is corrupted.
    pub word_noise_prob: f64,
    pub seed: u64,
}

const PERSONS: &[&str] = &[
    "Dupont",
    "Lefèvre",
    "Marie Curie",
    "Jean Jaurès",
    "Victor Hugo",
    "Émile Zola",
    "Moreau",
    "Durand",
    "Louise Michel",
    "Gambetta",
    "Clémenceau",
    "Sarah Bernhardt",
    "Pasteur",
    "Dreyfus",
    "Jules Ferry",
    "Georges Sand",
    "Lamartine",
    "Mistral",
    "Thiers",
    "Boulanger",
];
const LOCATIONS: &[&str] = &[
    "Paris",
    "Lausanne",
    "Genève",
    "Lyon",
    "Marseille",
    "Bordeaux",
    "Neuchâtel",
    "Fribourg",
    "Strasbourg",
    "Toulouse",
    "Nantes",
    "Lille",
    "Berne",
    "Sion",
    "Rouen",
    "Montreux",
];
const ORGS: &[&str] = &[
    "Conseil fédéral",
    "Banque de France",
    "Académie française",
    "Compagnie du Nord",
    "Société des Nations",
    "Gazette de Lausanne",
    "Chambre des députés",
    "Crédit Lyonnais",
    "Journal de Genève",
    "Université de Paris",
];
const TEMPLATES: &[&str] = &[
    "M. {PERSON} arrive à {LOCATION}.",
    "Le {ORG} a reçu {PERSON} hier soir.",
    "On annonce de {LOCATION} la visite de {PERSON}.",
    "{PERSON} quitte {LOCATION} pour rejoindre le {ORG}.",
    "La séance du {ORG} à {LOCATION} fut agitée.",
    "Une dépêche de {LOCATION} confirme le départ de {PERSON}.",
    "Selon le {ORG}, la situation à {LOCATION} reste calme.",
    "Mme {PERSON} donnera une conférence à {LOCATION} demain.",
    "Le discours de {PERSON} devant le {ORG} fut remarqué.",
    "Les délégués de {LOCATION} et de {LOCATION} se réuniront lundi.",
];

impl Default for SynthNerConfig {
    fn default() -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            gazetteers: BTreeMap::from([
                ("LOCATION".to_string(), own(LOCATIONS)),
                ("ORG".to_string(), own(ORGS)),
                ("PERSON".to_string(), own(PERSONS)),
            ]),
            templates: own(TEMPLATES),
            train_size: 300,
            test_size: 120,
            noise_level: Some(LevelName::Average),
            word_noise_prob: 1.0,
            seed: 0,
        }
    }
}

impl SynthNerConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn tag(entity_type: &str) -> &str {
        match entity_type {
            "PERSON" => "PERS",
            "LOCATION" => "LOC",
            "ORGANIZATION" | "ORGANISATION" => "ORG",
            other => other,
        }
    }

    /// `O` followed by `B-`/`I-` per entity type, in gazetteer key order.
    pub fn label_names(&self) -> Vec<String> {
        let mut v = vec!["O".to_string()];
        for k in self.gazetteers.keys() {
            v.push(format!("B-{}", Self::tag(k)));
            v.push(format!("I-{}", Self::tag(k)));
        }
        v
    }

    fn validate(&self) -> Result<Vec<Vec<Segment>>> {
        if self.templates.is_empty() || self.gazetteers.is_empty() {
            return Err(Error::Config(
                "NER config needs templates and gazetteers".into(),
            ));
        }
        if let Some((k, _)) = self.gazetteers.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::Config(format!("gazetteer {k} is empty")));
        }
        if !(0.0..=1.0).contains(&self.word_noise_prob) {
            return Err(Error::Config("word_noise_prob outside [0, 1]".into()));
        }
        let types: Vec<&String> = self.gazetteers.keys().collect();
        self.templates
            .iter()
            .map(|t| {
                let segs = parse_template(t)?;
                for s in &segs {
                    if let Segment::Slot(name) = s {
                        if !self.gazetteers.contains_key(name) {
                            return Err(Error::Config(format!(
                                "template {t:?} references missing gazetteer {name} (have {types:?})"
                            )));
                        }
                    }
                }
                Ok(segs)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Slot(String),
}

fn parse_template(t: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Segment::Text(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Config(format!("unclosed slot in template {t:?}")))?;
        out.push(Segment::Slot(rest[open + 1..open + close].to_string()));
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest.to_string()));
    }
    Ok(out)
}

/// A sentence with one label index per character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerSentence {
    pub text: String,
    pub labels: Vec<usize>,
}

impl NerSentence {
    pub fn encode(&self, tok: &CharTokenizer) -> LabeledSequence {
        LabeledSequence {
            ids: tok.encode(&self.text),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerData {
    pub label_names: Vec<String>,
    pub train: Vec<NerSentence>,
    pub test: Vec<NerSentence>,
}

/// Characters with their label and entity-span id (`None` outside entities).
struct Instance {
    chars: Vec<char>,
    labels: Vec<usize>,
    span: Vec<Option<usize>>,
}

fn instantiate(
    segs: &[Segment],
    cfg: &SynthNerConfig,
    type_index: &BTreeMap<&str, usize>,
    rng: &mut RngState,
) -> Instance {
    let mut inst = Instance {
        chars: Vec::new(),
        labels: Vec::new(),
        span: Vec::new(),
    };
    let mut n_spans = 0;
    for s in segs {
        match s {
            Segment::Text(t) => {
                for c in t.chars() {
                    inst.chars.push(c);
                    inst.labels.push(0);
                    inst.span.push(None);
                }
            }
            Segment::Slot(name) => {
                let entries = &cfg.gazetteers[name];
                let surface = &entries[rng.index(entries.len())];
                let b = 1 + 2 * type_index[name.as_str()];
                for (i, c) in surface.chars().enumerate() {
                    inst.chars.push(c);
                    inst.labels.push(if i == 0 { b } else { b + 1 });
                    inst.span.push(Some(n_spans));
                }
                n_spans += 1;
            }
        }
    }
    inst
}

/// Corrupt eligible words in place; labels follow surviving characters, and
/// an entity whose first character was deleted starts at its next survivor.
fn add_noise(
    inst: Instance,
    level: &NoiseLevel,
    word_prob: f64,
    table: &CharConfusionTable,
    ccfg: &CorruptionConfig,
    rng: &mut RngState,
) -> Result<NerSentence> {
    let n = inst.chars.len();
    let mut out_chars = Vec::with_capacity(n);
    let mut src = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if !inst.chars[i].is_alphabetic() {
            out_chars.push(inst.chars[i]);
            src.push(i);
            i += 1;
            continue;
        }
        let start = i;
        while i < n && inst.chars[i].is_alphabetic() {
            i += 1;
        }
        let word: String = inst.chars[start..i].iter().collect();
        let eligible = i - start >= ccfg.min_token_len;
        let corrupted = if eligible && rng.uniform() < word_prob {
            corrupt(&word, level, table, ccfg, rng)?
        } else {
            None
        };
        match corrupted {
            Some(c) => {
                out_chars.extend(c.variant.text.chars());
                src.extend(c.source_index.iter().map(|&k| start + k));
            }
            None => {
                out_chars.extend(&inst.chars[start..i]);
                src.extend(start..i);
            }
        }
    }
    let mut labels: Vec<usize> = src.iter().map(|&s| inst.labels[s]).collect();
    for k in 0..labels.len() {
        let l = labels[k];
        let is_inside = l != 0 && l.is_multiple_of(2);
        let span_start = k == 0 || inst.span[src[k - 1]] != inst.span[src[k]];
        if is_inside && span_start {
            labels[k] = l - 1;
        }
    }
    Ok(NerSentence {
        text: out_chars.into_iter().collect(),
        labels,
    })
}

/// Clean train split and (optionally) noisy test split.
pub fn generate_ner_data(
    cfg: &SynthNerConfig,
    table: &CharConfusionTable,
    ccfg: &CorruptionConfig,
    levels: &[NoiseLevel; 3],
) -> Result<NerData> {
    let segments = cfg.validate()?;
    let type_index: BTreeMap<&str, usize> = cfg
        .gazetteers
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();
    let root = RngState::new(cfg.seed).split("ner");
    let make = |split: &str, i: usize| {
        let mut r = root.split_indexed(split, i as u64);
        let segs = &segments[r.index(segments.len())];
        instantiate(segs, cfg, &type_index, &mut r)
    };
    let train = (0..cfg.train_size)
        .map(|i| {
            let inst = make("train", i);
            NerSentence {
                text: inst.chars.iter().collect(),
                labels: inst.labels,
            }
        })
        .collect();
    let level = cfg.noise_level.map(|name| {
        levels
            .iter()
            .find(|l| l.name == name)
            .cloned()
            .unwrap_or_else(|| NoiseLevel::preset(name))
    });
    let test = (0..cfg.test_size)
        .map(|i| {
            let inst = make("test", i);
            match &level {
                None => Ok(NerSentence {
                    text: inst.chars.iter().collect(),
                    labels: inst.labels,
                }),
                Some(level) => {
                    let mut r = root.split_indexed("test-noise", i as u64);
                    add_noise(inst, level, cfg.word_noise_prob, table, ccfg, &mut r)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NerData {
        label_names: cfg.label_names(),
        train,
        test,
    })
}
