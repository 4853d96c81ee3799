use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Matrix};
use crate::par::{self, Workers};
use crate::rng::RngState;

use super::forward::ForwardOptions;
use super::weights::ModelWeights;

/// Token-classification head, `softmax(W hᵢ + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    /// n_labels × d_model
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl ClassifierHead {
    pub fn zeros(n_labels: usize, d_model: usize) -> Self {
        Self {
            w: Matrix::zeros(n_labels, d_model),
            b: vec![0.0; n_labels],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n_labels() < 2 || self.w.rows() != self.n_labels() {
            return Err(Error::Input(format!(
                "head needs >= 2 labels with matching W rows, got b={} W={}x{}",
                self.n_labels(),
                self.w.rows(),
                self.w.cols()
            )));
        }
        Ok(())
    }

    fn logits(&self, hidden: &Matrix) -> Result<Matrix> {
        let mut z = nn::matmul_nt(hidden, &self.w)?;
        let k = self.n_labels();
        for (i, v) in z.data_mut().iter_mut().enumerate() {
            *v += self.b[i % k];
        }
        Ok(z)
    }
}

/// Per-token label distributions, (tokens × n_labels).
pub fn classify_tokens(hidden: &Matrix, head: &ClassifierHead) -> Result<Matrix> {
    head.validate()?;
    if hidden.cols() != head.w.cols() {
        return Err(Error::shape(
            "classify_tokens",
            format!("hidden {}x{}", hidden.rows(), hidden.cols()),
            format!("head W {}x{}", head.w.rows(), head.w.cols()),
        ));
    }
    let mut p = head.logits(hidden)?;
    let k = head.n_labels();
    for r in 0..p.rows() {
        nn::softmax_in_place(&mut p.data_mut()[r * k..(r + 1) * k]);
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub loss: f64,
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Mean cross-entropy over rows of `features` and its gradient, using
/// `∂loss/∂logits = (probs − onehot) / N`.
pub fn head_loss_and_grad(
    head: &ClassifierHead,
    features: &Matrix,
    labels: &[usize],
) -> Result<HeadGradient> {
    if features.rows() != labels.len() {
        return Err(Error::shape(
            "head_loss_and_grad",
            format!("{} feature rows", features.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let k = head.n_labels();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Input(format!("label {bad} outside [0, {k})")));
    }
    let mut p = classify_tokens(features, head)?;
    let n = labels.len() as f64;
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = &mut p.data_mut()[r * k..(r + 1) * k];
        loss -= row[y].max(f64::MIN_POSITIVE).ln();
        row[y] -= 1.0;
        row.iter_mut().for_each(|v| *v /= n);
    }
    let w = nn::matmul_tn(&p, features)?;
    let b = (0..k)
        .map(|j| (0..p.rows()).map(|r| p.get(r, j)).sum())
        .collect();
    Ok(HeadGradient {
        loss: loss / n,
        w,
        b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Std of the Gaussian used to initialise W; `0` starts from zeros.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1.0,
            epochs: 300,
            init_std: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedHead {
    pub head: ClassifierHead,
    /// Loss before each update; the last entry is the loss after training.
    pub losses: Vec<f64>,
}

impl TrainedHead {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one loss")
    }
}

/// Full-batch gradient descent on a frozen feature matrix.
pub fn train_head_on_features(
    features: &Matrix,
    labels: &[usize],
    n_labels: usize,
    cfg: &TrainConfig,
    rng: &RngState,
) -> Result<TrainedHead> {
    if labels.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let mut r = rng.split("head-init");
    let d = features.cols();
    let w = (0..n_labels * d)
        .map(|_| r.gaussian() * cfg.init_std)
        .collect();
    let mut head = ClassifierHead {
        w: Matrix::from_vec(n_labels, d, w)?,
        b: vec![0.0; n_labels],
    };
    head.validate()?;
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        let g = head_loss_and_grad(&head, features, labels)?;
        losses.push(g.loss);
        for (w, gw) in head.w.data_mut().iter_mut().zip(g.w.data()) {
            *w -= cfg.lr * gw;
        }
        for (b, gb) in head.b.iter_mut().zip(&g.b) {
            *b -= cfg.lr * gb;
        }
    }
    losses.push(head_loss_and_grad(&head, features, labels)?.loss);
    if !losses.iter().all(|l| l.is_finite()) {
        return Err(Error::NonFinite("train_head"));
    }
    Ok(TrainedHead { head, losses })
}

/// Token ids with one label per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub ids: Vec<u32>,
    pub labels: Vec<usize>,
}

/// Stack the frozen model's final hidden states for every sequence.
pub(crate) fn collect_features(
    model: &ModelWeights,
    data: &[LabeledSequence],
    workers: Workers,
) -> Result<(Matrix, Vec<usize>)> {
    let hidden = par::map(workers, data, |_, s| {
        if s.ids.len() != s.labels.len() {
            return Err(Error::shape(
                "labeled sequence",
                format!("{} ids", s.ids.len()),
                format!("{} labels", s.labels.len()),
            ));
        }
        model
            .forward(&s.ids, &ForwardOptions::default())
            .map(|o| o.hidden)
    });
    let d = model.config.d_model;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (h, s) in hidden.into_iter().zip(data) {
        rows.extend_from_slice(h?.data());
        labels.extend_from_slice(&s.labels);
    }
    Ok((Matrix::from_vec(labels.len(), d, rows)?, labels))
}

/// Train a head on top of a frozen backbone.
pub fn train_head(
    model: &ModelWeights,
    data: &[LabeledSequence],
    n_labels: usize,
    cfg: &TrainConfig,
    rng: &RngState,
    workers: Workers,
) -> Result<TrainedHead> {
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    let (features, labels) = collect_features(model, data, workers)?;
    train_head_on_features(&features, &labels, n_labels, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(r: &mut RngState, rows: usize, cols: usize, s: f64) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| r.gaussian() * s).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_head_is_uniform_and_bias_example() {
        let h = rand_matrix(&mut RngState::new(1), 4, 5, 1.0);
        let p = classify_tokens(&h, &ClassifierHead::zeros(3, 5)).unwrap();
        p.data()
            .iter()
            .for_each(|v| assert!((v - 1.0 / 3.0).abs() < 1e-15));

        let head = ClassifierHead {
            w: Matrix::zeros(2, 5),
            b: vec![2f64.ln(), 0.0],
        };
        let p = classify_tokens(&h, &head).unwrap();
        for r in 0..4 {
            assert!((p.get(r, 0) - 2.0 / 3.0).abs() < 1e-15);
            assert!((p.get(r, 1) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_shift_invariance_and_shape_errors() {
        let mut r = RngState::new(2);
        let h = rand_matrix(&mut r, 6, 4, 1.0);
        let head = ClassifierHead {
            w: rand_matrix(&mut r, 3, 4, 1.0),
            b: vec![0.1, -0.4, 2.0],
        };
        let shifted = ClassifierHead {
            w: head.w.clone(),
            b: head.b.iter().map(|b| b + 7.5).collect(),
        };
        let (p, q) = (
            classify_tokens(&h, &head).unwrap(),
            classify_tokens(&h, &shifted).unwrap(),
        );
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for row in 0..6 {
            assert!(((0..3).map(|j| p.get(row, j)).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(classify_tokens(&rand_matrix(&mut r, 2, 5, 1.0), &head).is_err());
        assert!(classify_tokens(&h, &ClassifierHead::zeros(1, 4)).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = RngState::new(3);
        for _ in 0..10 {
            let x = rand_matrix(&mut r, 12, 5, 1.0);
            let labels: Vec<usize> = (0..12).map(|_| r.index(4)).collect();
            let head = ClassifierHead {
                w: rand_matrix(&mut r, 4, 5, 0.5),
                b: (0..4).map(|_| r.gaussian() * 0.5).collect(),
            };
            let g = head_loss_and_grad(&head, &x, &labels).unwrap();
            let eps = 1e-5;
            let loss = |h: &ClassifierHead| head_loss_and_grad(h, &x, &labels).unwrap().loss;
            let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            for i in 0..20 {
                let (mut p, mut m) = (head.clone(), head.clone());
                p.w.data_mut()[i] += eps;
                m.w.data_mut()[i] -= eps;
                let num = (loss(&p) - loss(&m)) / (2.0 * eps);
                assert!(
                    rel(g.w.data()[i], num) < 1e-5,
                    "w[{i}] {} vs {num}",
                    g.w.data()[i]
                );
            }
            for j in 0..4 {
                let (mut p, mut m) = (head.clone(), head.clone());
                p.b[j] += eps;
                m.b[j] -= eps;
                let num = (loss(&p) - loss(&m)) / (2.0 * eps);
                assert!(rel(g.b[j], num) < 1e-5);
            }
        }
    }

    #[test]
    fn separable_data_loss_decreases_monotonically() {
        let mut r = RngState::new(4);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let y = i % 2;
            let c = if y == 0 { -2.0 } else { 2.0 };
            rows.extend([
                c + r.gaussian() * 0.3,
                r.gaussian(),
                -c + r.gaussian() * 0.3,
            ]);
            labels.push(y);
        }
        let x = Matrix::from_vec(40, 3, rows).unwrap();
        let t = train_head_on_features(
            &x,
            &labels,
            2,
            &TrainConfig {
                lr: 0.1,
                epochs: 50,
                init_std: 0.01,
            },
            &r,
        )
        .unwrap();
        assert!(t.losses.windows(2).all(|w| w[1] < w[0]));
        assert!(t.final_loss() < 0.1);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let r = RngState::new(5);
        let x = rand_matrix(&mut r.clone(), 10, 3, 1.0);
        let labels = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 5,
            init_std: 0.01,
        };
        let t = train_head_on_features(&x, &labels, 3, &cfg, &r).unwrap();
        let init = train_head_on_features(
            &x,
            &labels,
            3,
            &TrainConfig {
                epochs: 0,
                ..cfg.clone()
            },
            &r,
        )
        .unwrap();
        assert_eq!(t.head, init.head);
        assert!(t.losses.iter().all(|&l| l == t.losses[0]));
        assert!(train_head_on_features(&Matrix::zeros(0, 3), &[], 3, &cfg, &r).is_err());
        assert!(train_head_on_features(&x, &[5; 10], 3, &cfg, &r).is_err());
    }
}
