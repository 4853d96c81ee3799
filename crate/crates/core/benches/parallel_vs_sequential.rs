//! Sequential vs. rayon-backed execution of the three data-parallel stages.
//!
//! `cargo bench -p ocrsense-core` compares both paths; with
//! `--no-default-features` the "parallel" rows also run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ocrsense::analysis::{cka_pairs, ModelProbe};
use ocrsense::model::{init_model, train_head, CharTokenizer, ModelConfig, TrainConfig};
use ocrsense::noise::{
    build_dataset, pseudo_words, CharConfusionTable, CorruptionConfig, LevelName, NoiseLevel,
};
use ocrsense::par::Workers;
use ocrsense::rng::RngState;
use ocrsense::sweep::{generate_ner_data, run_sweep, BinRange, SweepGrid, SynthNerConfig};

const MODES: [(&str, Workers); 2] = [
    ("sequential", Workers::SEQUENTIAL),
    ("parallel", Workers::AUTO),
];

fn bench_pipeline(c: &mut Criterion) {
    let rng = RngState::new(1);
    let table = CharConfusionTable::default();
    let levels = NoiseLevel::defaults();
    let ccfg = CorruptionConfig::default();
    let words = pseudo_words(400, &rng);
    let tok = CharTokenizer::default();
    let model = init_model(&ModelConfig {
        vocab_size: tok.vocab_size(),
        ..Default::default()
    })
    .unwrap();

    let mut g = c.benchmark_group("build_dataset");
    for (name, w) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| build_dataset(black_box(&words), &levels, &table, &ccfg, &rng, w).unwrap())
        });
    }
    g.finish();

    let (records, _) =
        build_dataset(&words[..120], &levels, &table, &ccfg, &rng, Workers::AUTO).unwrap();
    let probe = ModelProbe::new(&model, &tok);
    let mut g = c.benchmark_group("cka_profile");
    g.sample_size(10);
    for (name, w) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| cka_pairs(&probe, black_box(&records), &LevelName::ALL, w).unwrap())
        });
    }
    g.finish();

    let ner_cfg = SynthNerConfig {
        train_size: 60,
        test_size: 30,
        ..Default::default()
    };
    let ner = generate_ner_data(&ner_cfg, &table, &ccfg, &levels).unwrap();
    let train: Vec<_> = ner.train.iter().map(|s| s.encode(&tok)).collect();
    let test: Vec<_> = ner.test.iter().map(|s| s.encode(&tok)).collect();
    let head = train_head(
        &model,
        &train,
        ner.label_names.len(),
        &TrainConfig::default(),
        &rng,
        Workers::AUTO,
    )
    .unwrap()
    .head;
    let grid = SweepGrid {
        layers: vec![0, 3],
        bins: BinRange {
            start: 32,
            step: 32,
            stop: 96,
        },
        alphas: vec![0.5],
        joint: false,
    };
    let mut g = c.benchmark_group("run_sweep");
    g.sample_size(10);
    for (name, w) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| run_sweep(&model, &head, black_box(&test), &grid, None, w).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
