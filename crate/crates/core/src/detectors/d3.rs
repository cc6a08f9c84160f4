//! Discriminative drift detection over raw feature windows.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DetectorStatus, FeatureDetector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct D3Params {
    /// Old-window size.
    pub w: usize,
    /// New-window size as a fraction of `w`.
    pub rho: f64,
    pub auc_threshold: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for D3Params {
    fn default() -> Self {
        Self {
            w: 100,
            rho: 0.1,
            auc_threshold: 0.75,
            epochs: 100,
            learning_rate: 0.1,
        }
    }
}

impl D3Params {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.new_len() == 0 {
            return Err(Error::config("d3", "w and round(w·rho) must be positive"));
        }
        if !(0.5..1.0).contains(&self.auc_threshold) {
            return Err(Error::config("d3.auc_threshold", "must lie in [0.5,1)"));
        }
        if self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::config(
                "d3",
                "epochs and learning_rate must be positive",
            ));
        }
        Ok(())
    }

    pub fn new_len(&self) -> usize {
        (self.w as f64 * self.rho).round() as usize
    }

    pub fn capacity(&self) -> usize {
        self.w + self.new_len()
    }
}

/// Rank-based (Mann–Whitney) AUC of `scores` for `labels` (1 = positive),
/// ties counted half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::param("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::param("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::param("auc needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Logistic regression by full-batch gradient descent from zero weights on
/// standardized features; returns the in-sample linear scores.
fn discriminator_scores(points: &[&[f64]], labels: &[u8], epochs: usize, lr: f64) -> Vec<f64> {
    let n = points.len();
    let d = points[0].len();
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(*p) {
            *m += v / n as f64;
        }
    }
    let mut sd = vec![0.0; d];
    for p in points {
        for j in 0..d {
            sd[j] += (p[j] - mean[j]).powi(2) / n as f64;
        }
    }
    let z: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            (0..d)
                .map(|j| {
                    let s = sd[j].sqrt();
                    if s > 1e-12 {
                        (p[j] - mean[j]) / s
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let score = |w: &[f64], b: f64, x: &[f64]| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    for _ in 0..epochs {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, &y) in z.iter().zip(labels) {
            let p = 1.0 / (1.0 + (-score(&w, b, x)).exp());
            let r = p - y as f64;
            gb += r / n as f64;
            for j in 0..d {
                gw[j] += r * x[j] / n as f64;
            }
        }
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < 1e-6 {
            break;
        }
        b -= lr * gb;
        for j in 0..d {
            w[j] -= lr * gw[j];
        }
    }
    z.iter().map(|x| score(&w, b, x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D3 {
    params: D3Params,
    dim: Option<usize>,
    buffer: VecDeque<Vec<f64>>,
    last_auc: Option<f64>,
}

impl D3 {
    pub fn new(params: D3Params) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            dim: None,
            buffer: VecDeque::new(),
            last_auc: None,
        })
    }

    pub fn params(&self) -> &D3Params {
        &self.params
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// AUC of the most recent evaluation.
    pub fn last_auc(&self) -> Option<f64> {
        self.last_auc
    }

    fn evaluate(&mut self) -> f64 {
        let points: Vec<&[f64]> = self.buffer.iter().map(|v| v.as_slice()).collect();
        let labels: Vec<u8> = (0..points.len())
            .map(|i| (i >= self.params.w) as u8)
            .collect();
        let scores = discriminator_scores(
            &points,
            &labels,
            self.params.epochs,
            self.params.learning_rate,
        );
        auc(&scores, &labels).expect("both windows are non-empty")
    }
}

impl FeatureDetector for D3 {
    fn update(&mut self, x: &[f64]) -> Result<DetectorStatus> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite feature value"));
        }
        match self.dim {
            Some(d) if d != x.len() => {
                return Err(Error::param(format!(
                    "feature dimension {} does not match {d}",
                    x.len()
                )))
            }
            None => self.dim = Some(x.len()),
            _ => {}
        }
        self.buffer.push_back(x.to_vec());
        if self.buffer.len() < self.params.capacity() {
            return Ok(DetectorStatus::InControl);
        }
        let score = self.evaluate();
        self.last_auc = Some(score);
        if score > self.params.auc_threshold {
            self.buffer.drain(..self.params.w);
            Ok(DetectorStatus::Drift)
        } else {
            self.buffer.drain(..self.params.new_len());
            Ok(DetectorStatus::InControl)
        }
    }

    fn reset(&mut self) {
        self.buffer.clear();
        self.dim = None;
        self.last_auc = None;
    }

    fn name(&self) -> &'static str {
        "d3"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn buffer_fills_before_evaluation() {
        let mut d = D3::new(D3Params::default()).unwrap();
        for i in 0..109 {
            assert_eq!(d.update(&[i as f64]).unwrap(), DetectorStatus::InControl);
        }
        assert!(d.last_auc().is_none());
        d.update(&[0.0]).unwrap();
        assert!(d.last_auc().is_some());
        assert!(d.buffer_len() <= 110);
    }

    #[test]
    fn dimension_is_fixed() {
        let mut d = D3::new(D3Params::default()).unwrap();
        d.update(&[1.0, 2.0]).unwrap();
        assert!(d.update(&[1.0]).is_err());
        assert!(d.update(&[f64::NAN, 1.0]).is_err());
    }
}
