use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Classifier;
use crate::stream::Instance;

/// 0/1 errors of two labelers and their mutual disagreement on one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub eps_h: f64,
    pub eps_pair: f64,
    pub eps_ref: f64,
}

impl ErrorDecomposition {
    /// `eps_pair + eps_ref - eps_h`; never negative for 0/1 loss.
    pub fn slack(&self) -> f64 {
        self.eps_pair + self.eps_ref - self.eps_h
    }
}

pub fn error_decomposition(
    h: &impl Classifier,
    h_ref: &impl Classifier,
    batch: &[Instance],
) -> Result<ErrorDecomposition> {
    if batch.is_empty() {
        return Err(Error::param("error decomposition needs a non-empty batch"));
    }
    let (mut wrong_h, mut wrong_ref, mut differ) = (0usize, 0usize, 0usize);
    for inst in batch {
        let a = h.predict_label(&inst.x);
        let b = h_ref.predict_label(&inst.x);
        wrong_h += (a != inst.y) as usize;
        wrong_ref += (b != inst.y) as usize;
        differ += (a != b) as usize;
    }
    let n = batch.len() as f64;
    Ok(ErrorDecomposition {
        eps_h: wrong_h as f64 / n,
        eps_pair: differ as f64 / n,
        eps_ref: wrong_ref as f64 / n,
    })
}
