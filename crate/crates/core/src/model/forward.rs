use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{self, matmul_nt, Matrix};

use super::weights::{BlockWeights, ModelWeights};
use super::ModelConfig;

/// Per-layer multiplicative factors on the MLP intermediate, `h' = h ⊙ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationMask {
    rows: Vec<Vec<f64>>,
}

impl AblationMask {
    pub fn ones(n_layers: usize, d_mlp: usize) -> Self {
        Self {
            rows: vec![vec![1.0; d_mlp]; n_layers],
        }
    }

    pub fn for_config(c: &ModelConfig) -> Self {
        Self::ones(c.n_layers, c.d_mlp)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("mask entries must lie in [0, 1]".into()));
        }
        Ok(Self { rows })
    }

    /// Set `M[layer][i] = alpha` for every `i` in `neurons`.
    pub fn neutralise(&mut self, layer: usize, neurons: &[usize], alpha: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Input(format!(
                "neutralising factor {alpha} outside [0, 1]"
            )));
        }
        let row = self.rows.get_mut(layer).ok_or(Error::MissingLayer(layer))?;
        let d = row.len();
        for &n in neurons {
            *row.get_mut(n)
                .ok_or_else(|| Error::Input(format!("neuron {n} out of range for d_mlp {d}")))? =
                alpha;
        }
        Ok(())
    }

    pub fn row(&self, layer: usize) -> Option<&[f64]> {
        self.rows.get(layer).map(Vec::as_slice)
    }

    pub fn n_layers(&self) -> usize {
        self.rows.len()
    }

    pub fn is_identity(&self) -> bool {
        self.rows.iter().flatten().all(|&v| v == 1.0)
    }
}

/// Additive per-layer shift of the MLP intermediate, applied after the mask.
/// Used to plant a known reaction in a neuron.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationOffset {
    pub layers: BTreeMap<usize, Vec<f64>>,
}

impl ActivationOffset {
    pub fn single(layer: usize, neuron: usize, delta: f64, d_mlp: usize) -> Self {
        let mut v = vec![0.0; d_mlp];
        v[neuron] = delta;
        Self {
            layers: BTreeMap::from([(layer, v)]),
        }
    }
}

/// Post-mask MLP intermediates for the layers requested at capture time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationTrace {
    layers: BTreeMap<usize, Matrix>,
}

impl ActivationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: usize, m: Matrix) {
        self.layers.insert(layer, m);
    }

    /// Activations of `layer`, shape (tokens × d_mlp).
    pub fn layer(&self, layer: usize) -> Result<&Matrix> {
        self.layers.get(&layer).ok_or(Error::MissingLayer(layer))
    }

    pub fn layers(&self) -> impl Iterator<Item = (usize, &Matrix)> {
        self.layers.iter().map(|(&l, m)| (l, m))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions<'a> {
    pub mask: Option<&'a AblationMask>,
    pub offset: Option<&'a ActivationOffset>,
    pub capture: &'a [usize],
}

impl<'a> ForwardOptions<'a> {
    pub fn capture(layers: &'a [usize]) -> Self {
        Self {
            capture: layers,
            ..Default::default()
        }
    }

    pub fn masked(mask: &'a AblationMask) -> Self {
        Self {
            mask: Some(mask),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Final-normed hidden states, (tokens × d_model).
    pub hidden: Matrix,
    pub trace: ActivationTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOutput {
    /// `h'`, the masked intermediate (d_mlp).
    pub intermediate: Vec<f64>,
    /// `W_down · h' + b_out` (d_model).
    pub output: Vec<f64>,
}

/// Gated MLP on a single normalised vector:
/// `h' = (silu(W_gate x) ⊙ (W_up x + b_in)) ⊙ mask_row`, output `W_down h' + b_out`.
pub fn mlp_forward(x: &[f64], block: &BlockWeights, mask_row: &[f64]) -> Result<MlpOutput> {
    if x.len() != block.w_up.cols() {
        return Err(Error::shape(
            "mlp_forward",
            format!("x of {}", x.len()),
            format!("d_model {}", block.w_up.cols()),
        ));
    }
    if mask_row.len() != block.w_up.rows() {
        return Err(Error::shape(
            "mlp_forward",
            format!("mask row of {}", mask_row.len()),
            format!("d_mlp {}", block.w_up.rows()),
        ));
    }
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let (h, out) = mlp_rows(&xm, block, Some(mask_row), None)?;
    Ok(MlpOutput {
        intermediate: h.into_data(),
        output: out.into_data(),
    })
}

fn mlp_rows(
    xn: &Matrix,
    b: &BlockWeights,
    mask_row: Option<&[f64]>,
    offset_row: Option<&[f64]>,
) -> Result<(Matrix, Matrix)> {
    let gate = matmul_nt(xn, &b.w_gate)?;
    let mut h = matmul_nt(xn, &b.w_up)?;
    let cols = h.cols();
    for (i, (hv, gv)) in h.data_mut().iter_mut().zip(gate.data()).enumerate() {
        let j = i % cols;
        *hv = nn::silu_scalar(*gv) * (*hv + b.b_in[j]);
        if let Some(m) = mask_row {
            *hv *= m[j];
        }
        if let Some(o) = offset_row {
            *hv += o[j];
        }
    }
    let mut out = matmul_nt(&h, &b.w_down)?;
    let dcols = out.cols();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v += b.b_out[i % dcols];
    }
    Ok((h, out))
}

struct Rope {
    cos: Vec<f64>,
    sin: Vec<f64>,
    half: usize,
}

impl Rope {
    fn new(n: usize, head_dim: usize, theta: f64) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(n * half);
        let mut sin = Vec::with_capacity(n * half);
        for pos in 0..n {
            for i in 0..half {
                let freq = theta.powf(-((2 * i) as f64) / head_dim as f64);
                let a = pos as f64 * freq;
                cos.push(a.cos());
                sin.push(a.sin());
            }
        }
        Self { cos, sin, half }
    }

    /// Rotate consecutive pairs of every head slice of `row` (position `pos`).
    fn apply(&self, row: &mut [f64], pos: usize, head_dim: usize) {
        let base = pos * self.half;
        for head in row.chunks_mut(head_dim) {
            for i in 0..self.half {
                let (c, s) = (self.cos[base + i], self.sin[base + i]);
                let (a, b) = (head[2 * i], head[2 * i + 1]);
                head[2 * i] = a * c - b * s;
                head[2 * i + 1] = a * s + b * c;
            }
        }
    }
}

fn norm_rows(x: &Matrix, gain: &[f64], eps: f64) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        nn::rms_norm_into(x.row(r), gain, eps, out.row_mut(r));
    }
    out
}

fn add_into(x: &mut Matrix, y: &Matrix) {
    for (a, b) in x.data_mut().iter_mut().zip(y.data()) {
        *a += b;
    }
}

impl ModelWeights {
    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        let c = &self.config;
        if ids.is_empty() {
            return Err(Error::Empty("token sequence".into()));
        }
        if ids.len() > c.max_seq {
            return Err(Error::Input(format!(
                "sequence of {} tokens exceeds max_seq {}",
                ids.len(),
                c.max_seq
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= c.vocab_size) {
            return Err(Error::Input(format!(
                "token id {bad} outside vocabulary of {}",
                c.vocab_size
            )));
        }
        Ok(())
    }

    fn check_options(&self, opts: &ForwardOptions<'_>) -> Result<()> {
        let c = &self.config;
        if let Some(m) = opts.mask {
            if m.rows.len() != c.n_layers || m.rows.iter().any(|r| r.len() != c.d_mlp) {
                return Err(Error::shape(
                    "forward mask",
                    format!("{} layers", m.rows.len()),
                    format!("{} layers x {}", c.n_layers, c.d_mlp),
                ));
            }
        }
        if let Some(o) = opts.offset {
            if o.layers
                .iter()
                .any(|(&l, v)| l >= c.n_layers || v.len() != c.d_mlp)
            {
                return Err(Error::Input(
                    "activation offset does not fit the model".into(),
                ));
            }
        }
        if let Some(&l) = opts.capture.iter().find(|&&l| l >= c.n_layers) {
            return Err(Error::MissingLayer(l));
        }
        Ok(())
    }

    pub fn embed(&self, ids: &[u32]) -> Result<Matrix> {
        self.check_ids(ids)?;
        let d = self.config.d_model;
        let mut x = Matrix::zeros(ids.len(), d);
        for (r, &id) in ids.iter().enumerate() {
            x.row_mut(r)
                .copy_from_slice(self.embedding.row(id as usize));
        }
        Ok(x)
    }

    fn attention(&self, b: &BlockWeights, x: &Matrix, rope: &Rope) -> Result<Matrix> {
        let c = &self.config;
        let (n, hd) = (x.rows(), c.head_dim());
        let xn = norm_rows(x, &b.attn_norm, c.norm_eps);
        let mut q = matmul_nt(&xn, &b.wq)?;
        let mut k = matmul_nt(&xn, &b.wk)?;
        let v = matmul_nt(&xn, &b.wv)?;
        for t in 0..n {
            rope.apply(q.row_mut(t), t, hd);
            rope.apply(k.row_mut(t), t, hd);
        }
        let scale = 1.0 / (hd as f64).sqrt();
        let mut ctx = Matrix::zeros(n, c.d_model);
        let mut scores = vec![0.0; n];
        for h in 0..c.n_heads {
            let span = h * hd..(h + 1) * hd;
            for t in 0..n {
                let qt = &q.row(t)[span.clone()];
                for (j, s) in scores[..=t].iter_mut().enumerate() {
                    *s = nn::dot(qt, &k.row(j)[span.clone()]) * scale;
                }
                nn::softmax_in_place(&mut scores[..=t]);
                let out = &mut ctx.row_mut(t)[span.clone()];
                for (j, &p) in scores[..=t].iter().enumerate() {
                    for (o, vv) in out.iter_mut().zip(&v.row(j)[span.clone()]) {
                        *o += p * vv;
                    }
                }
            }
        }
        matmul_nt(&ctx, &b.wo)
    }

    /// Residual stream entering block `layer`, computed without any mask.
    pub fn residual_before(&self, ids: &[u32], layer: usize) -> Result<Matrix> {
        if layer >= self.config.n_layers {
            return Err(Error::MissingLayer(layer));
        }
        let x = self.embed(ids)?;
        let (x, _) = self.run_blocks(x, 0, layer, &ForwardOptions::default())?;
        Ok(x)
    }

    /// Full forward pass: pre-norm blocks with causal attention, then the
    /// final norm. Captured rows are the post-mask MLP intermediates.
    pub fn forward(&self, ids: &[u32], opts: &ForwardOptions<'_>) -> Result<ForwardOutput> {
        let x = self.embed(ids)?;
        self.forward_from(0, x, opts)
    }

    /// Continue a forward pass from the residual stream entering block
    /// `start` (as returned by [`residual_before`](Self::residual_before)).
    /// Mask rows and capture requests for earlier layers have no effect.
    pub fn forward_from(
        &self,
        start: usize,
        residual: Matrix,
        opts: &ForwardOptions<'_>,
    ) -> Result<ForwardOutput> {
        self.check_options(opts)?;
        if start > self.config.n_layers {
            return Err(Error::MissingLayer(start));
        }
        if residual.cols() != self.config.d_model || residual.rows() > self.config.max_seq {
            return Err(Error::shape(
                "forward_from",
                format!("{}x{}", residual.rows(), residual.cols()),
                format!("<= {} x {}", self.config.max_seq, self.config.d_model),
            ));
        }
        let (x, trace) = self.run_blocks(residual, start, self.config.n_layers, opts)?;
        let hidden = norm_rows(&x, &self.final_norm, self.config.norm_eps);
        Ok(ForwardOutput { hidden, trace })
    }

    fn run_blocks(
        &self,
        mut x: Matrix,
        start: usize,
        end: usize,
        opts: &ForwardOptions<'_>,
    ) -> Result<(Matrix, ActivationTrace)> {
        let c = &self.config;
        let rope = Rope::new(x.rows(), c.head_dim(), c.rope_theta);
        let mut trace = ActivationTrace::new();
        for (l, b) in self.blocks.iter().enumerate().take(end).skip(start) {
            let attn = self.attention(b, &x, &rope)?;
            add_into(&mut x, &attn);
            let xn = norm_rows(&x, &b.mlp_norm, c.norm_eps);
            let mask_row = opts.mask.map(|m| m.rows[l].as_slice());
            let offset_row = opts
                .offset
                .and_then(|o| o.layers.get(&l))
                .map(Vec::as_slice);
            let (h, out) = mlp_rows(&xn, b, mask_row, offset_row)?;
            add_into(&mut x, &out);
            if opts.capture.contains(&l) {
                trace.insert(l, h);
            }
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward"));
        }
        Ok((x, trace))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn tiny(n_layers: usize) -> ModelWeights {
        init_model(&ModelConfig {
            n_layers,
            d_model: 8,
            d_mlp: 12,
            n_heads: 2,
            vocab_size: 20,
            max_seq: 16,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    fn identity_block() -> BlockWeights {
        let i = Matrix::identity(2);
        BlockWeights {
            attn_norm: vec![1.0; 2],
            wq: i.clone(),
            wk: i.clone(),
            wv: i.clone(),
            wo: i.clone(),
            mlp_norm: vec![1.0; 2],
            w_gate: i.clone(),
            w_up: i.clone(),
            b_in: vec![0.0; 2],
            w_down: i,
            b_out: vec![0.0; 2],
        }
    }

    #[test]
    fn mlp_two_neuron_hand_example() {
        let out = mlp_forward(&[1.0, -1.0], &identity_block(), &[1.0, 0.5]).unwrap();
        let want = [0.7310585786300049, 0.13447071068499755];
        for (a, b) in out.intermediate.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(out.output, out.intermediate);
    }

    #[test]
    fn mlp_mask_extremes() {
        let w = tiny(1);
        let b = &w.blocks[0];
        let x: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 2.0).collect();
        let ones = mlp_forward(&x, b, &[1.0; 12]).unwrap();
        let xm = Matrix::from_vec(1, 8, x.clone()).unwrap();
        let (h, out) = mlp_rows(&xm, b, None, None).unwrap();
        assert_eq!(ones.intermediate, h.into_data());
        assert_eq!(ones.output, out.into_data());
        let zeros = mlp_forward(&x, b, &[0.0; 12]).unwrap();
        assert!(zeros.intermediate.iter().all(|&v| v == 0.0));
        assert_eq!(zeros.output, b.b_out);
        assert!(mlp_forward(&x[..4], b, &[1.0; 12]).is_err());
        assert!(mlp_forward(&x, b, &[1.0; 3]).is_err());
    }

    /// Independent scalar evaluation of a one-layer, one-head model on two tokens.
    #[test]
    fn single_layer_two_token_oracle() {
        let cfg = ModelConfig {
            n_layers: 1,
            d_model: 4,
            d_mlp: 6,
            n_heads: 1,
            vocab_size: 5,
            max_seq: 4,
            seed: 17,
            ..Default::default()
        };
        let w = init_model(&cfg).unwrap();
        let ids = [3u32, 1];
        let got = w.forward(&ids, &ForwardOptions::capture(&[0])).unwrap();

        let eps = cfg.norm_eps;
        let rms = |v: &[f64]| -> Vec<f64> {
            let ms = v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64;
            v.iter().map(|a| a / (ms + eps).sqrt()).collect()
        };
        let mv = |m: &Matrix, v: &[f64]| -> Vec<f64> {
            (0..m.rows())
                .map(|r| (0..m.cols()).map(|c| m.get(r, c) * v[c]).sum())
                .collect()
        };
        let rot = |v: &[f64], pos: f64| -> Vec<f64> {
            let mut o = v.to_vec();
            for i in 0..2 {
                let a = pos * 10_000f64.powf(-(2.0 * i as f64) / 4.0);
                o[2 * i] = v[2 * i] * a.cos() - v[2 * i + 1] * a.sin();
                o[2 * i + 1] = v[2 * i] * a.sin() + v[2 * i + 1] * a.cos();
            }
            o
        };
        let b = &w.blocks[0];
        let x0: Vec<Vec<f64>> = ids
            .iter()
            .map(|&i| w.embedding.row(i as usize).to_vec())
            .collect();
        let xn: Vec<Vec<f64>> = x0.iter().map(|v| rms(v)).collect();
        let q: Vec<Vec<f64>> = xn
            .iter()
            .enumerate()
            .map(|(t, v)| rot(&mv(&b.wq, v), t as f64))
            .collect();
        let k: Vec<Vec<f64>> = xn
            .iter()
            .enumerate()
            .map(|(t, v)| rot(&mv(&b.wk, v), t as f64))
            .collect();
        let v: Vec<Vec<f64>> = xn.iter().map(|x| mv(&b.wv, x)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // position 0 attends only to itself; position 1 to a 2-way softmax
        let ctx0 = v[0].clone();
        let s10 = dot(&q[1], &k[0]) / 2.0;
        let s11 = dot(&q[1], &k[1]) / 2.0;
        let p0 = 1.0 / (1.0 + (s11 - s10).exp());
        let ctx1: Vec<f64> = (0..4)
            .map(|i| p0 * v[0][i] + (1.0 - p0) * v[1][i])
            .collect();
        let x1: Vec<Vec<f64>> = [ctx0, ctx1]
            .iter()
            .zip(&x0)
            .map(|(c, x)| mv(&b.wo, c).iter().zip(x).map(|(a, b)| a + b).collect())
            .collect();
        for (t, x1t) in x1.iter().enumerate() {
            let n = rms(x1t);
            let g = mv(&b.w_gate, &n);
            let u = mv(&b.w_up, &n);
            let h: Vec<f64> = g
                .iter()
                .zip(&u)
                .map(|(g, u)| g / (1.0 + (-g).exp()) * u)
                .collect();
            let out = mv(&b.w_down, &h);
            let x2: Vec<f64> = x1t.iter().zip(&out).map(|(a, b)| a + b).collect();
            let fin = rms(&x2);
            for (a, e) in got.trace.layer(0).unwrap().row(t).iter().zip(&h) {
                assert!((a - e).abs() < 1e-12, "trace {a} vs {e}");
            }
            for (a, e) in got.hidden.row(t).iter().zip(&fin) {
                assert!((a - e).abs() < 1e-12, "hidden {a} vs {e}");
            }
        }
    }

    #[test]
    fn ones_mask_is_bitwise_identity() {
        let w = tiny(3);
        let ids = [2, 5, 7, 1, 9, 4];
        let mask = AblationMask::for_config(&w.config);
        let plain = w
            .forward(&ids, &ForwardOptions::capture(&[0, 1, 2]))
            .unwrap();
        let masked = w
            .forward(
                &ids,
                &ForwardOptions {
                    mask: Some(&mask),
                    capture: &[0, 1, 2],
                    offset: None,
                },
            )
            .unwrap();
        assert_eq!(plain.hidden, masked.hidden);
        assert_eq!(plain.trace, masked.trace);
    }

    #[test]
    fn zero_alpha_zeroes_intermediates_and_layer_locality() {
        let w = tiny(3);
        let ids = [2, 5, 7, 1];
        let mut mask = AblationMask::for_config(&w.config);
        mask.neutralise(1, &[0, 3, 11], 0.0).unwrap();
        let plain = w
            .forward(&ids, &ForwardOptions::capture(&[0, 1, 2]))
            .unwrap();
        let masked = w
            .forward(
                &ids,
                &ForwardOptions {
                    mask: Some(&mask),
                    capture: &[0, 1, 2],
                    offset: None,
                },
            )
            .unwrap();
        let h = masked.trace.layer(1).unwrap();
        for r in 0..h.rows() {
            for n in [0, 3, 11] {
                assert_eq!(h.get(r, n), 0.0);
            }
        }
        assert_eq!(
            plain.trace.layer(0).unwrap(),
            masked.trace.layer(0).unwrap()
        );
        assert_ne!(
            plain.trace.layer(2).unwrap(),
            masked.trace.layer(2).unwrap()
        );
    }

    #[test]
    fn causal_rows_ignore_future_tokens() {
        let w = tiny(2);
        let a = w
            .forward(&[3, 4, 5, 6, 7], &ForwardOptions::capture(&[0, 1]))
            .unwrap();
        let b = w
            .forward(&[3, 4, 5, 11, 2], &ForwardOptions::capture(&[0, 1]))
            .unwrap();
        for t in 0..3 {
            assert_eq!(a.hidden.row(t), b.hidden.row(t));
            assert_eq!(
                a.trace.layer(1).unwrap().row(t),
                b.trace.layer(1).unwrap().row(t)
            );
        }
        assert_ne!(a.hidden.row(3), b.hidden.row(3));
    }

    #[test]
    fn trace_shape_and_errors() {
        let w = tiny(3);
        let out = w
            .forward(&[1, 2, 3], &ForwardOptions::capture(&[0, 2]))
            .unwrap();
        assert_eq!(out.trace.len(), 2);
        for (_, m) in out.trace.layers() {
            assert_eq!(m.shape(), (3, 12));
        }
        assert!(matches!(out.trace.layer(1), Err(Error::MissingLayer(1))));
        assert!(w.forward(&[1, 20], &ForwardOptions::default()).is_err());
        assert!(w.forward(&[1; 17], &ForwardOptions::default()).is_err());
        assert!(w.forward(&[], &ForwardOptions::default()).is_err());
        assert!(w.forward(&[1], &ForwardOptions::capture(&[3])).is_err());
    }

    #[test]
    fn resumed_forward_matches_full_pass() {
        let w = tiny(3);
        let ids = [4, 8, 15, 16, 2];
        let mut mask = AblationMask::for_config(&w.config);
        mask.neutralise(2, &[1, 2, 3], 0.5).unwrap();
        let opts = ForwardOptions::masked(&mask);
        let full = w.forward(&ids, &opts).unwrap();
        let resumed = w
            .forward_from(2, w.residual_before(&ids, 2).unwrap(), &opts)
            .unwrap();
        assert_eq!(full.hidden, resumed.hidden);
    }

    #[test]
    fn mask_validation() {
        let mut m = AblationMask::ones(2, 4);
        assert!(m.neutralise(0, &[1], 1.5).is_err());
        assert!(m.neutralise(0, &[4], 0.5).is_err());
        assert!(m.neutralise(2, &[0], 0.5).is_err());
        assert!(AblationMask::from_rows(vec![vec![0.5, -0.1]]).is_err());
        assert!(m.is_identity());
        m.neutralise(1, &[0], 0.9).unwrap();
        assert!(!m.is_identity());
    }
}
