use crate::error::{Error, Result};

/// Token-level micro F1 over every label except `outside`.
pub fn micro_f1(pred: &[usize], gold: &[usize], outside: usize) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::shape(
            "micro_f1",
            format!("{} predictions", pred.len()),
            format!("{} gold labels", gold.len()),
        ));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            if g != outside {
                tp += 1;
            }
        } else {
            if p != outside {
                fp += 1;
            }
            if g != outside {
                fn_ += 1;
            }
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}
