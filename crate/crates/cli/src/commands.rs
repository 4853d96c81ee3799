use std::fmt::Write as _;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use ocrsense::analysis::{
    cka_pairs, sensitivity_report, LayerCkaProfile, ModelProbe, SensitivityReport,
};
use ocrsense::model::{
    init_model, load_weights, save_weights, train_head, CharTokenizer, ClassifierHead,
    LabeledSequence, ModelWeights,
};
use ocrsense::noise::{
    build_dataset, ingest_corpus, read_jsonl, write_jsonl, CharConfusionTable, LevelName,
    TokenFilter, TokenPairRecord,
};
use ocrsense::rng::RngState;
use ocrsense::sweep::{
    baseline_eval, emit_heatmap, generate_ner_data, head_f1, run_sweep, write_cells_jsonl, NerData,
    SelectionMode,
};

use crate::artifacts::{read_json, StageWriter};
use crate::config::RunConfig;

/// Exit code 2 for configuration and missing inputs, 3 for anything that
/// fails while running.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<ocrsense::Error>() {
            Some(ocrsense::Error::Config(_)) => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<ocrsense::Error> for Failure {
    fn from(e: ocrsense::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

const DATASET: &str = "dataset.jsonl";
const MODEL: &str = "model.bin";

fn require(w: &mut StageWriter<'_>, name: &str, producer: &str) -> Result<PathBuf, Failure> {
    w.input(name).ok_or_else(|| {
        Failure::Config(anyhow!(
            "missing input {}: run `{producer}` first",
            w.path(name).display()
        ))
    })
}

fn confusion_table(cfg: &RunConfig) -> anyhow::Result<CharConfusionTable> {
    Ok(match &cfg.confusion_table {
        Some(p) => CharConfusionTable::load(p)?,
        None => CharConfusionTable::default(),
    })
}

pub fn gen_dataset(cfg: &RunConfig) -> Outcome {
    if cfg.corpus.is_empty() {
        return Err(Failure::Config(anyhow!("no corpus files configured")));
    }
    let mut w = StageWriter::new("gen-dataset", cfg)?;
    let mut filter = TokenFilter {
        min_len: cfg.min_token_len,
        lowercase: cfg.lowercase,
        allowlist: None,
    };
    if let Some(p) = &cfg.allowlist {
        filter = filter.with_allowlist_file(p)?;
    }
    let tokens = ingest_corpus(&cfg.corpus, &filter)?;
    let table = confusion_table(cfg)?;
    let rng = RngState::new(cfg.seed);
    let (records, stats) = build_dataset(
        &tokens,
        &cfg.levels(),
        &table,
        &cfg.corruption,
        &rng,
        cfg.workers,
    )?;

    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf)?;
    w.write(DATASET, &buf)?;
    w.write_json("dataset_stats.json", &stats)?;
    w.finish()?;

    println!(
        "tokens {}  records {}  dropped {}  too short {}",
        stats.n_tokens, stats.n_records, stats.n_dropped, stats.n_too_short
    );
    for l in &stats.levels {
        println!(
            "  {:<8} variants {:>6}  mean similarity {:.4}  mean alterations {:.2}  unsatisfiable {}",
            l.level.as_str(),
            stats.n_records,
            l.mean_similarity,
            l.mean_alterations,
            l.unsatisfiable
        );
    }
    Ok(())
}

pub fn init(cfg: &RunConfig) -> Outcome {
    let mut w = StageWriter::new("init-model", cfg)?;
    let mc = cfg.model_config(&CharTokenizer::default());
    w.seed("model", mc.seed);
    let model = init_model(&mc)?;
    save_weights(&w.path(MODEL), &model)?;
    w.record(MODEL)?;
    w.finish()?;
    println!(
        "model: {} layers, d_model {}, d_mlp {}, {} heads, vocab {}",
        mc.n_layers, mc.d_model, mc.d_mlp, mc.n_heads, mc.vocab_size
    );
    Ok(())
}

fn load_model(w: &mut StageWriter<'_>) -> Result<ModelWeights, Failure> {
    let p = require(w, MODEL, "init-model")?;
    Ok(load_weights(&p).with_context(|| format!("loading {}", p.display()))?)
}

struct NerSplits {
    data: NerData,
    train: Vec<LabeledSequence>,
    test: Vec<LabeledSequence>,
}

fn ner_splits(cfg: &RunConfig, w: &mut StageWriter<'_>) -> anyhow::Result<NerSplits> {
    let ner = cfg.ner_config().map_err(|e| e.context("NER config"))?;
    w.seed("ner", ner.seed);
    let data = generate_ner_data(&ner, &confusion_table(cfg)?, &cfg.corruption, &cfg.levels())?;
    let tok = CharTokenizer::default();
    let train = data.train.iter().map(|s| s.encode(&tok)).collect();
    let test = data.test.iter().map(|s| s.encode(&tok)).collect();
    Ok(NerSplits { data, train, test })
}

fn jsonl<T: Serialize>(items: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    label_names: Vec<String>,
    losses: Vec<f64>,
    head: ClassifierHead,
}

pub fn train(cfg: &RunConfig) -> Outcome {
    let mut w = StageWriter::new("train-head", cfg)?;
    let model = load_model(&mut w)?;
    let ner = ner_splits(cfg, &mut w)?;
    let rng = RngState::new(cfg.seed)
        .split("baseline")
        .split_indexed("baseline-rep", 0);
    let n_labels = ner.data.label_names.len();
    let trained = train_head(&model, &ner.train, n_labels, &cfg.train, &rng, cfg.workers)?;
    let test_f1 = head_f1(&model, &trained.head, &ner.test, cfg.workers)?;

    println!(
        "head: {} labels, loss {:.4} -> {:.4}, noisy-test F1 {:.4}",
        n_labels,
        trained.losses[0],
        trained.final_loss(),
        test_f1
    );
    w.write("ner_train.jsonl", &jsonl(&ner.data.train)?)?;
    w.write("ner_test.jsonl", &jsonl(&ner.data.test)?)?;
    let file = HeadFile {
        label_names: ner.data.label_names,
        losses: trained.losses,
        head: trained.head,
    };
    w.write_json("head.json", &file)?;
    w.finish()?;
    Ok(())
}

fn load_dataset(w: &mut StageWriter<'_>) -> Result<Vec<TokenPairRecord>, Failure> {
    let p = require(w, DATASET, "gen-dataset")?;
    let f = std::fs::File::open(&p).with_context(|| format!("cannot open {}", p.display()))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

fn report_name(level: LevelName) -> String {
    format!("sensitivity_{level}.json")
}

pub fn profile(cfg: &RunConfig) -> Outcome {
    let mut w = StageWriter::new("profile", cfg)?;
    let model = load_model(&mut w)?;
    let records = load_dataset(&mut w)?;
    let tok = CharTokenizer::default();
    let probe = ModelProbe::new(&model, &tok);
    let n_layers = model.config.n_layers;

    let points = cka_pairs(&probe, &records, &LevelName::ALL, cfg.workers)?;
    let profile = LayerCkaProfile::from_pairs(&points, n_layers, &LevelName::ALL);
    let stats = cfg.sensitivity.stats_config();
    let reports = LevelName::ALL
        .iter()
        .map(|&l| sensitivity_report(&probe, &records, l, &stats, cfg.workers))
        .collect::<ocrsense::Result<Vec<SensitivityReport>>>()?;

    let mut csv = String::from(
        "layer,level,cka_mean,cka_median,cka_q10,cka_q90,n_pairs,n_undefined,n_sensitive\n",
    );
    for c in &profile.cells {
        let rep = reports
            .iter()
            .find(|r| r.level == c.level)
            .expect("one report per level");
        let n_sensitive = rep.layer(c.layer)?.n_sensitive;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            c.layer, c.level, c.mean, c.median, c.q10, c.q90, c.n_pairs, c.n_undefined, n_sensitive
        )
        .expect("write to string");
    }
    let mut pts = String::from("record,layer,level,cka\n");
    for p in &points {
        let v = p.cka.map(|v| v.to_string()).unwrap_or_default();
        writeln!(pts, "{},{},{},{}", p.record, p.layer, p.level, v).expect("write to string");
    }
    w.write("profile.csv", csv.as_bytes())?;
    w.write("cka_points.csv", pts.as_bytes())?;
    for r in &reports {
        w.write_json(&report_name(r.level), r)?;
    }
    w.finish()?;

    println!("{} pairs, {} layers", records.len(), n_layers);
    println!("layer  level     mean CKA  sensitive");
    for c in &profile.cells {
        let rep = reports
            .iter()
            .find(|r| r.level == c.level)
            .expect("one report per level");
        println!(
            "{:>5}  {:<8} {:>9.4}  {:>9}",
            c.layer,
            c.level.as_str(),
            c.mean,
            rep.layer(c.layer)?.n_sensitive
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineFile<'a> {
    repetitions: usize,
    f1s: &'a [f64],
    mean: f64,
    std: f64,
    /// Unmasked F1 of the repetition-0 head, the reference for every cell.
    sweep_reference_f1: f64,
}

pub fn sweep(cfg: &RunConfig) -> Outcome {
    let mut w = StageWriter::new("sweep", cfg)?;
    let model = load_model(&mut w)?;
    let report: Option<SensitivityReport> = match cfg.selection {
        SelectionMode::Positional => None,
        SelectionMode::SensitivityRanked => {
            let name = report_name(cfg.sensitivity.level);
            let p = require(&mut w, &name, "profile")?;
            Some(read_json(&p)?)
        }
    };
    w.meta("selection_mode", cfg.selection)?;
    if report.is_some() {
        w.meta("selection_level", cfg.sensitivity.level)?;
    }
    let ner = ner_splits(cfg, &mut w)?;
    let n_labels = ner.data.label_names.len();
    let rng = RngState::new(cfg.seed).split("baseline");
    let base = baseline_eval(
        &model,
        &ner.train,
        &ner.test,
        n_labels,
        &cfg.train,
        cfg.repetitions,
        &rng,
        cfg.workers,
    )?;
    let result = run_sweep(
        &model,
        &base.heads[0],
        &ner.test,
        &cfg.sweep,
        report.as_ref(),
        cfg.workers,
    )?;

    w.write_json(
        "baseline.json",
        &BaselineFile {
            repetitions: cfg.repetitions,
            f1s: &base.f1s,
            mean: base.mean,
            std: base.std,
            sweep_reference_f1: result.baseline_f1,
        },
    )?;
    write_cells_jsonl(&w.path("sweep_cells.jsonl"), &result.cells)?;
    w.record("sweep_cells.jsonl")?;
    w.write_json("selection.json", &result.selection)?;
    for &alpha in &cfg.sweep.alphas {
        let csv = emit_heatmap(&result.cells, alpha)?;
        w.write(&format!("heatmap_alpha_{alpha}.csv"), csv.as_bytes())?;
    }
    w.finish()?;

    println!(
        "baseline F1 {:.4} ± {:.4} over {} runs; sweep reference {:.4}",
        base.mean, base.std, cfg.repetitions, result.baseline_f1
    );
    println!("{} cells ({} selection)", result.cells.len(), cfg.selection);
    if let Some(best) = result
        .cells
        .iter()
        .max_by(|a, b| a.improvement_percent.total_cmp(&b.improvement_percent))
    {
        println!(
            "best: layer {} bin {} alpha {} -> {:+.3}%",
            best.layer, best.bin_size, best.alpha, best.improvement_percent
        );
    }
    Ok(())
}
