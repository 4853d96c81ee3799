use serde::{Deserialize, Serialize};

use crate::analysis::Welford;
use crate::error::{Error, Result};
use crate::model::{
    classify_tokens, train_head, ClassifierHead, ForwardOptions, LabeledSequence, ModelWeights,
    TrainConfig,
};
use crate::nn::Matrix;
use crate::par::{self, Workers};
use crate::rng::RngState;

use super::f1::micro_f1;

/// Argmax label per row; ties go to the lowest index.
pub fn predict_labels(hidden: &Matrix, head: &ClassifierHead) -> Result<Vec<usize>> {
    let p = classify_tokens(hidden, head)?;
    Ok((0..p.rows())
        .map(|r| {
            p.row(r)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                    if v > best.1 {
                        (j, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect())
}

/// Micro-F1 of `head` on the unmasked model.
pub fn head_f1(
    model: &ModelWeights,
    head: &ClassifierHead,
    data: &[LabeledSequence],
    workers: Workers,
) -> Result<f64> {
    evaluate_labels(data, workers, |_, s| {
        let h = model.forward(&s.ids, &ForwardOptions::default())?.hidden;
        predict_labels(&h, head)
    })
}

pub(crate) fn evaluate_labels<F>(
    data: &[LabeledSequence],
    workers: Workers,
    predict: F,
) -> Result<f64>
where
    F: Fn(usize, &LabeledSequence) -> Result<Vec<usize>> + Sync + Send,
{
    if data.is_empty() {
        return Err(Error::Empty("evaluation data".into()));
    }
    let preds = par::map(workers, data, |i, s| predict(i, s));
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for (p, s) in preds.into_iter().zip(data) {
        pred.extend(p?);
        gold.extend_from_slice(&s.labels);
    }
    micro_f1(&pred, &gold, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub f1s: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across repetitions.
    pub std: f64,
    #[serde(skip)]
    pub heads: Vec<ClassifierHead>,
}

/// Train `repetitions` heads with independent seeds on the clean split and
/// score each, unmasked, on the test split.
#[allow(clippy::too_many_arguments)]
pub fn baseline_eval(
    model: &ModelWeights,
    train: &[LabeledSequence],
    test: &[LabeledSequence],
    n_labels: usize,
    cfg: &TrainConfig,
    repetitions: usize,
    rng: &RngState,
    workers: Workers,
) -> Result<BaselineResult> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be >= 1".into()));
    }
    let mut f1s = Vec::with_capacity(repetitions);
    let mut heads = Vec::with_capacity(repetitions);
    let mut acc = Welford::default();
    for r in 0..repetitions {
        let seed = rng.split_indexed("baseline-rep", r as u64);
        let head = train_head(model, train, n_labels, cfg, &seed, workers)?.head;
        let f1 = head_f1(model, &head, test, workers)?;
        acc.push(f1);
        f1s.push(f1);
        heads.push(head);
    }
    Ok(BaselineResult {
        f1s,
        mean: acc.mean,
        std: acc.std(),
        heads,
    })
}
