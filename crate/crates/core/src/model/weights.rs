use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::RngState;

use super::io::Tensor;
use super::ModelConfig;

/// One decoder block. Projection matrices are stored (out × in).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub attn_norm: Vec<f64>,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub mlp_norm: Vec<f64>,
    /// d_mlp × d_model
    pub w_gate: Matrix,
    /// d_mlp × d_model; the up projection
    pub w_up: Matrix,
    /// d_mlp
    pub b_in: Vec<f64>,
    /// d_model × d_mlp; the down projection
    pub w_down: Matrix,
    /// d_model
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    /// vocab_size × d_model
    pub embedding: Matrix,
    pub blocks: Vec<BlockWeights>,
    pub final_norm: Vec<f64>,
}

/// Gaussian weights with std `1/sqrt(fan_in)` (embeddings: std 1), zero
/// biases, unit norm gains. Values are rounded to `f32` so that the weight
/// file round-trips exactly.
pub fn init_model(config: &ModelConfig) -> Result<ModelWeights> {
    config.validate()?;
    let root = RngState::new(config.seed).split("init");
    let gauss = |label: String, rows: usize, cols: usize, fan_in: usize| -> Matrix {
        let mut r = root.split(&label);
        let std = 1.0 / (fan_in as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| (r.gaussian() * std) as f32 as f64)
            .collect();
        Matrix::from_vec(rows, cols, data).expect("sized by construction")
    };
    let (d, m) = (config.d_model, config.d_mlp);
    let blocks = (0..config.n_layers)
        .map(|l| BlockWeights {
            attn_norm: vec![1.0; d],
            wq: gauss(format!("blocks.{l}.attn.wq"), d, d, d),
            wk: gauss(format!("blocks.{l}.attn.wk"), d, d, d),
            wv: gauss(format!("blocks.{l}.attn.wv"), d, d, d),
            wo: gauss(format!("blocks.{l}.attn.wo"), d, d, d),
            mlp_norm: vec![1.0; d],
            w_gate: gauss(format!("blocks.{l}.mlp.w_gate"), m, d, d),
            w_up: gauss(format!("blocks.{l}.mlp.w_up"), m, d, d),
            b_in: vec![0.0; m],
            w_down: gauss(format!("blocks.{l}.mlp.w_down"), d, m, m),
            b_out: vec![0.0; d],
        })
        .collect();
    Ok(ModelWeights {
        config: config.clone(),
        embedding: gauss("embedding".into(), config.vocab_size, d, 1),
        blocks,
        final_norm: vec![1.0; d],
    })
}

fn vec_tensor(name: String, v: &[f64]) -> Tensor {
    Tensor {
        name,
        shape: vec![v.len()],
        data: v.to_vec(),
    }
}

fn mat_tensor(name: String, m: &Matrix) -> Tensor {
    Tensor {
        name,
        shape: vec![m.rows(), m.cols()],
        data: m.data().to_vec(),
    }
}

impl ModelWeights {
    /// Flat, named view in a fixed order.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = vec![mat_tensor("embedding".into(), &self.embedding)];
        for (l, b) in self.blocks.iter().enumerate() {
            let p = |s: &str| format!("blocks.{l}.{s}");
            out.push(vec_tensor(p("attn_norm"), &b.attn_norm));
            out.push(mat_tensor(p("attn.wq"), &b.wq));
            out.push(mat_tensor(p("attn.wk"), &b.wk));
            out.push(mat_tensor(p("attn.wv"), &b.wv));
            out.push(mat_tensor(p("attn.wo"), &b.wo));
            out.push(vec_tensor(p("mlp_norm"), &b.mlp_norm));
            out.push(mat_tensor(p("mlp.w_gate"), &b.w_gate));
            out.push(mat_tensor(p("mlp.w_up"), &b.w_up));
            out.push(vec_tensor(p("mlp.b_in"), &b.b_in));
            out.push(mat_tensor(p("mlp.w_down"), &b.w_down));
            out.push(vec_tensor(p("mlp.b_out"), &b.b_out));
        }
        out.push(vec_tensor("final_norm".into(), &self.final_norm));
        out
    }

    /// Inverse of [`to_tensors`](Self::to_tensors); names and shapes must
    /// match what `config` implies exactly.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let expected = init_shapes(&config);
        if expected.len() != tensors.len() {
            let names: Vec<&str> = tensors.iter().map(|t| t.name.as_str()).collect();
            let missing: Vec<&String> = expected
                .iter()
                .map(|(n, _)| n)
                .filter(|n| !names.contains(&n.as_str()))
                .collect();
            return Err(Error::Format(format!(
                "expected {} tensors, found {}; missing {missing:?}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(Error::Format(format!(
                    "tensor {name}: expected shape {shape:?}, found {} with shape {:?}",
                    t.name, t.shape
                )));
            }
        }
        let mut it = tensors.into_iter();
        let embedding = to_mat(it.next().expect("count checked"))?;
        let mut blocks = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let mut take = || it.next().expect("count checked");
            let attn_norm = take().data;
            let wq = to_mat(take())?;
            let wk = to_mat(take())?;
            let wv = to_mat(take())?;
            let wo = to_mat(take())?;
            let mlp_norm = take().data;
            let w_gate = to_mat(take())?;
            let w_up = to_mat(take())?;
            let b_in = take().data;
            let w_down = to_mat(take())?;
            let b_out = take().data;
            blocks.push(BlockWeights {
                attn_norm,
                wq,
                wk,
                wv,
                wo,
                mlp_norm,
                w_gate,
                w_up,
                b_in,
                w_down,
                b_out,
            });
        }
        let final_norm = it.next().expect("count checked").data;
        let w = ModelWeights {
            config,
            embedding,
            blocks,
            final_norm,
        };
        if w.to_tensors()
            .iter()
            .any(|t| t.data.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Format("non-finite weight values".into()));
        }
        Ok(w)
    }
}

fn to_mat(t: Tensor) -> Result<Matrix> {
    Matrix::from_vec(t.shape[0], t.shape[1], t.data)
        .map_err(|e| Error::Format(format!("tensor {}: {e}", t.name)))
}

/// Expected (name, shape) manifest for a configuration.
pub(crate) fn init_shapes(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (d, m) = (c.d_model, c.d_mlp);
    let mut out = vec![("embedding".to_string(), vec![c.vocab_size, d])];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("blocks.{l}.{s}");
        out.extend([
            (p("attn_norm"), vec![d]),
            (p("attn.wq"), vec![d, d]),
            (p("attn.wk"), vec![d, d]),
            (p("attn.wv"), vec![d, d]),
            (p("attn.wo"), vec![d, d]),
            (p("mlp_norm"), vec![d]),
            (p("mlp.w_gate"), vec![m, d]),
            (p("mlp.w_up"), vec![m, d]),
            (p("mlp.b_in"), vec![m]),
            (p("mlp.w_down"), vec![d, m]),
            (p("mlp.b_out"), vec![d]),
        ]);
    }
    out.push(("final_norm".into(), vec![d]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            d_mlp: 20,
            n_heads: 2,
            vocab_size: 30,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = init_model(&small()).unwrap();
        let b = init_model(&small()).unwrap();
        assert_eq!(a, b);
        let c = init_model(&ModelConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.blocks[0].w_up, c.blocks[0].w_up);
        assert!(a.blocks[0].b_in.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_rejects_bad_config() {
        let bad = ModelConfig {
            d_model: 63,
            ..Default::default()
        };
        assert!(init_model(&bad).is_err());
    }

    #[test]
    fn init_std_tracks_fan_in() {
        let w = init_model(&ModelConfig::default()).unwrap();
        let std = |m: &Matrix| (m.frobenius_sq() / m.data().len() as f64).sqrt();
        let up = std(&w.blocks[0].w_up);
        let down = std(&w.blocks[0].w_down);
        assert!((up - 1.0 / 8.0).abs() < 0.01, "{up}");
        assert!((down - 1.0 / 172f64.sqrt()).abs() < 0.01, "{down}");
    }

    #[test]
    fn tensor_view_round_trips() {
        let w = init_model(&small()).unwrap();
        let back = ModelWeights::from_tensors(small(), w.to_tensors()).unwrap();
        assert_eq!(back, w);
        let mut ts = w.to_tensors();
        ts[3].shape = vec![4, 16];
        let err = ModelWeights::from_tensors(small(), ts)
            .unwrap_err()
            .to_string();
        assert!(err.contains("blocks.0.attn.wk"), "{err}");
    }
}
