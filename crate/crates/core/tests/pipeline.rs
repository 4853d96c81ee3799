use ocrsense::analysis::{cka_pairs, sensitivity_report, ModelProbe, SensitivityConfig};
use ocrsense::model::{
    init_model, CharTokenizer, LabeledSequence, ModelConfig, ModelWeights, TrainConfig,
};
use ocrsense::noise::{
    build_dataset, pseudo_words, CharConfusionTable, CorruptionConfig, LevelName, NoiseLevel,
    TokenPairRecord,
};
use ocrsense::par::Workers;
use ocrsense::rng::RngState;
use ocrsense::sweep::{
    baseline_eval, emit_heatmap, generate_ner_data, improvement_percent, parse_heatmap, run_sweep,
    BinRange, SweepGrid, SynthNerConfig,
};

fn small_model(tok: &CharTokenizer) -> ModelWeights {
    init_model(&ModelConfig {
        n_layers: 2,
        d_model: 16,
        d_mlp: 40,
        n_heads: 2,
        vocab_size: tok.vocab_size(),
        seed: 11,
        ..Default::default()
    })
    .unwrap()
}

fn records(workers: Workers) -> Vec<TokenPairRecord> {
    let rng = RngState::new(5);
    let words = pseudo_words(120, &rng);
    let table = CharConfusionTable::default();
    build_dataset(
        &words,
        &NoiseLevel::defaults(),
        &table,
        &CorruptionConfig::default(),
        &rng,
        workers,
    )
    .unwrap()
    .0
}

fn ner(tok: &CharTokenizer) -> (usize, Vec<LabeledSequence>, Vec<LabeledSequence>) {
    let cfg = SynthNerConfig {
        train_size: 80,
        test_size: 40,
        seed: 3,
        ..Default::default()
    };
    let d = generate_ner_data(
        &cfg,
        &CharConfusionTable::default(),
        &CorruptionConfig::default(),
        &NoiseLevel::defaults(),
    )
    .unwrap();
    let enc =
        |v: &[ocrsense::sweep::NerSentence]| v.iter().map(|s| s.encode(tok)).collect::<Vec<_>>();
    (d.label_names.len(), enc(&d.train), enc(&d.test))
}

#[test]
fn analysis_is_independent_of_worker_count() {
    let tok = CharTokenizer::default();
    let model = small_model(&tok);
    let probe = ModelProbe::new(&model, &tok);
    let (r1, r4) = (records(Workers(1)), records(Workers(4)));
    assert_eq!(r1, r4);
    let p1 = cka_pairs(&probe, &r1, &LevelName::ALL, Workers(1)).unwrap();
    let p4 = cka_pairs(&probe, &r1, &LevelName::ALL, Workers(4)).unwrap();
    assert_eq!(p1, p4);
    let cfg = SensitivityConfig::default();
    let s1 = sensitivity_report(&probe, &r1, LevelName::High, &cfg, Workers(1)).unwrap();
    let s4 = sensitivity_report(&probe, &r1, LevelName::High, &cfg, Workers(4)).unwrap();
    assert_eq!(s1, s4);
    assert_eq!(s1.n_pairs as usize, r1.len());
}

#[test]
fn sweep_contracts_on_a_small_model() {
    let tok = CharTokenizer::default();
    let model = small_model(&tok);
    let probe = ModelProbe::new(&model, &tok);
    let recs = records(Workers::AUTO);
    let report = sensitivity_report(
        &probe,
        &recs,
        LevelName::Average,
        &SensitivityConfig::default(),
        Workers::AUTO,
    )
    .unwrap();
    let (n_labels, train, test) = ner(&tok);
    let base = baseline_eval(
        &model,
        &train,
        &test,
        n_labels,
        &TrainConfig::default(),
        2,
        &RngState::new(1),
        Workers::AUTO,
    )
    .unwrap();
    assert_eq!(base.f1s.len(), 2);
    assert!(base.mean > 0.0);

    let grid = SweepGrid {
        layers: vec![0, 1],
        bins: BinRange {
            start: 8,
            step: 8,
            stop: 24,
        },
        alphas: vec![0.1, 1.0],
        joint: false,
    };
    let run = |w| run_sweep(&model, &base.heads[0], &test, &grid, Some(&report), w).unwrap();
    let res = run(Workers(1));
    assert_eq!(res, run(Workers(4)));
    assert_eq!(res.cells.len(), grid.n_cells());
    assert_eq!(res.baseline_f1, base.f1s[0]);

    let order: Vec<_> = res
        .cells
        .iter()
        .map(|c| (c.layer, c.bin_size, c.alpha.to_bits()))
        .collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);

    for c in &res.cells {
        assert_eq!(
            c.improvement_percent,
            improvement_percent(c.f1_neutralised, c.f1_baseline).unwrap()
        );
        if c.alpha == 1.0 {
            assert_eq!(c.f1_neutralised, c.f1_baseline);
            assert_eq!(c.improvement_percent, 0.0);
        }
    }
    // each bin's neurons extend the previous bin's
    for pair in res
        .selection
        .windows(2)
        .filter(|p| p[0].layer == p[1].layer)
    {
        assert_eq!(
            pair[0].neurons[..],
            pair[1].neurons[..pair[0].neurons.len()]
        );
    }

    let (layers, rows) = parse_heatmap(&emit_heatmap(&res.cells, 1.0).unwrap()).unwrap();
    assert_eq!(layers, vec![0, 1]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));

    // Joint masking agrees with single-layer masking on the first grid layer
    // and is still the identity at α = 1.
    let joint = run_sweep(
        &model,
        &base.heads[0],
        &test,
        &SweepGrid {
            joint: true,
            ..grid.clone()
        },
        Some(&report),
        Workers::AUTO,
    )
    .unwrap();
    assert_eq!(joint.cells.len(), res.cells.len());
    for (j, s) in joint.cells.iter().zip(&res.cells) {
        if s.layer == 0 || s.alpha == 1.0 {
            assert_eq!(j, s);
        }
    }
}
