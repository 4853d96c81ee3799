use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ActivationTrace;
use crate::nn::{matmul_tn, Matrix};

const DEGENERATE: f64 = 1e-30;

/// CKA in `[0, 1]`, or `None` when a representation has no centered variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CkaValue(pub Option<f64>);

impl CkaValue {
    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_defined(self) -> bool {
        self.0.is_some()
    }
}

/// Linear CKA between two representations of the same `n` examples:
/// `‖ỸᵀX̃‖²_F / (‖X̃ᵀX̃‖_F ‖ỸᵀỸ‖_F)` on column-centered inputs.
pub fn linear_cka(x: &Matrix, y: &Matrix) -> Result<CkaValue> {
    if x.rows() != y.rows() {
        return Err(Error::shape(
            "linear_cka",
            format!("{} rows", x.rows()),
            format!("{} rows", y.rows()),
        ));
    }
    if x.rows() < 2 {
        return Err(Error::Input(
            "linear CKA needs at least two examples".into(),
        ));
    }
    let xc = x.center_columns();
    let yc = y.center_columns();
    let cross = matmul_tn(&yc, &xc)?.frobenius_sq();
    let xx = matmul_tn(&xc, &xc)?.frobenius_sq().sqrt();
    let yy = matmul_tn(&yc, &yc)?.frobenius_sq().sqrt();
    if xx < DEGENERATE || yy < DEGENERATE {
        return Ok(CkaValue(None));
    }
    Ok(CkaValue(Some((cross / (xx * yy)).clamp(0.0, 1.0))))
}

/// Mean over sequence positions (rows).
pub fn mean_pool(m: &Matrix) -> Vec<f64> {
    m.col_means()
}

/// Per-pair CKA: mean-pool each trace over positions, then take the squared
/// Pearson correlation of the two pooled vectors across neurons. This is
/// linear CKA on the pooled vectors viewed as `d_mlp × 1` representations,
/// which lets inputs of different lengths be compared.
pub fn token_pair_cka(
    correct: &ActivationTrace,
    altered: &ActivationTrace,
    layer: usize,
) -> Result<CkaValue> {
    let u = mean_pool(correct.layer(layer)?);
    let v = mean_pool(altered.layer(layer)?);
    pooled_cka(&u, &v)
}

pub(crate) fn pooled_cka(u: &[f64], v: &[f64]) -> Result<CkaValue> {
    if u.len() != v.len() {
        return Err(Error::shape("token_pair_cka", u.len(), v.len()));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a - mu, b - mv);
        suv += a * b;
        suu += a * a;
        svv += b * b;
    }
    if suu < DEGENERATE || svv < DEGENERATE {
        return Ok(CkaValue(None));
    }
    Ok(CkaValue(Some((suv * suv / (suu * svv)).clamp(0.0, 1.0))))
}
