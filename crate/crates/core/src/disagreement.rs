//! Label-free drift detection from ensemble disagreement.
//!
//! Each batch is split into consecutive windows Q and R. Both are
//! pseudo-labeled by the ensemble g, and two copies of g are trained on them
//! with the same members receiving inverted labels. A shift between Q and R
//! shows up as a difference between the distributions of pairwise member
//! disagreement of the two copies, which a two-sample KS test picks up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::stats::{ks_two_sample, RngState};

/// Smallest allowed Q or R window.
pub const MIN_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// g_Q judged on Q, g_R on R.
    OwnWindow,
    /// Both copies judged on the whole batch.
    FullBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptPolicy {
    ResetAll,
    ResetFraction,
    None,
}

/// How g itself is updated between detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GUpdate {
    /// Train on its own pseudo-labels after every batch.
    SelfTrain,
    /// Never train between drifts.
    Frozen,
    /// Left to the caller (e.g. prequential training on true labels).
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisagreementConfig {
    pub batch_size: usize,
    /// Length of Q; `None` splits the batch in half.
    pub q_size: Option<usize>,
    pub alpha: f64,
    pub flip_fraction: f64,
    pub eval_mode: EvalMode,
    pub adapt_policy: AdaptPolicy,
    /// Share of members reinitialized under `reset_fraction`.
    pub reset_fraction: f64,
    pub g_update: GUpdate,
    /// Fixed Poisson rate for training the copies; `None` uses g's λ(ε).
    pub copy_lambda: Option<f64>,
}

impl Default for DisagreementConfig {
    fn default() -> Self {
        Self {
            batch_size: 1000,
            q_size: None,
            alpha: 0.01,
            flip_fraction: 0.5,
            eval_mode: EvalMode::OwnWindow,
            adapt_policy: AdaptPolicy::ResetAll,
            reset_fraction: 0.5,
            g_update: GUpdate::SelfTrain,
            copy_lambda: None,
        }
    }
}

impl DisagreementConfig {
    pub fn q_len(&self) -> usize {
        self.q_size.unwrap_or(self.batch_size / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q_len();
        if q < MIN_WINDOW || self.batch_size < q + MIN_WINDOW {
            return Err(Error::config(
                "disagreement.batch_size",
                format!("Q and R need at least {MIN_WINDOW} instances each"),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("disagreement.alpha", "must lie in (0,1)"));
        }
        if !(self.flip_fraction > 0.0 && self.flip_fraction < 1.0) {
            return Err(Error::config(
                "disagreement.flip_fraction",
                "must lie in (0,1)",
            ));
        }
        if !(self.reset_fraction > 0.0 && self.reset_fraction <= 1.0) {
            return Err(Error::config(
                "disagreement.reset_fraction",
                "must lie in (0,1]",
            ));
        }
        if let Some(l) = self.copy_lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config(
                    "disagreement.copy_lambda",
                    "must be non-negative",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDecision {
    pub drift: bool,
    pub d_stat: f64,
    pub p_value: f64,
    pub batch_index: u64,
    pub mean_dq: f64,
    pub mean_dr: f64,
}

/// Ensemble majority vote for every instance of `window`.
pub fn pseudo_label(ens: &Ensemble, window: &[Vec<f64>]) -> Result<Vec<u8>> {
    if window.is_empty() {
        return Err(Error::param("cannot pseudo-label an empty window"));
    }
    window
        .iter()
        .map(|x| ens.predict(x).map(|(l, _)| l))
        .collect()
}

/// Exactly `round(flip_fraction · n)` members marked, chosen uniformly and
/// reproducibly from `(seed, batch_index)`.
pub fn flip_assign(
    n_members: usize,
    flip_fraction: f64,
    seed: u64,
    batch_index: u64,
) -> Result<Vec<bool>> {
    if n_members < 2 {
        return Err(Error::param("flip assignment needs at least two members"));
    }
    if !(flip_fraction > 0.0 && flip_fraction < 1.0) {
        return Err(Error::param("flip_fraction must lie in (0,1)"));
    }
    let k = (flip_fraction * n_members as f64).round() as usize;
    let mut rng = RngState::with_stream(seed, batch_index);
    let mut idx: Vec<usize> = (0..n_members).collect();
    // partial Fisher-Yates: the first k slots end up a uniform k-subset
    for i in 0..k {
        let j = i + rng.below(n_members - i);
        idx.swap(i, j);
    }
    let mut mask = vec![false; n_members];
    for &m in &idx[..k] {
        mask[m] = true;
    }
    Ok(mask)
}

/// Deep copy of `ens` trained on `window` with `labels`, inverted for the
/// members marked in `mask`.
pub fn train_flipped_copy(
    ens: &Ensemble,
    window: &[Vec<f64>],
    labels: &[u8],
    mask: &[bool],
    lambda: Option<f64>,
) -> Result<Ensemble> {
    if window.len() != labels.len() {
        return Err(Error::param("window and labels differ in length"));
    }
    let mut copy = ens.clone();
    for (x, &y) in window.iter().zip(labels) {
        copy.learn_one_with(x, y, Some(mask), lambda)?;
    }
    Ok(copy)
}

/// Disagreement rate of every unordered member pair on `window`, in
/// lexicographic pair order.
pub fn pairwise_disagreement(ens: &Ensemble, window: &[Vec<f64>]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::param("empty evaluation window"));
    }
    let n = ens.n_members();
    let words = window.len().div_ceil(64);
    let mut bits = vec![vec![0u64; words]; n];
    for (i, x) in window.iter().enumerate() {
        for (m, label) in ens.member_predictions(x)?.into_iter().enumerate() {
            if label == 1 {
                bits[m][i / 64] |= 1 << (i % 64);
            }
        }
    }
    let k = window.len() as f64;
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let diff: u32 = bits[a]
                .iter()
                .zip(&bits[b])
                .map(|(x, y)| (x ^ y).count_ones())
                .sum();
            out.push(diff as f64 / k);
        }
    }
    Ok(out)
}

/// Members ordered from least to most agreement with `labels` on `window`;
/// ties keep the lower index first.
fn members_by_agreement(ens: &Ensemble, window: &[Vec<f64>], labels: &[u8]) -> Result<Vec<usize>> {
    let mut hits = vec![0usize; ens.n_members()];
    for (x, &y) in window.iter().zip(labels) {
        for (m, l) in ens.member_predictions(x)?.into_iter().enumerate() {
            hits[m] += (l == y) as usize;
        }
    }
    let mut order: Vec<usize> = (0..hits.len()).collect();
    order.sort_by_key(|&m| hits[m]);
    Ok(order)
}

/// Applies the adaptation policy after a detection.
pub fn on_drift_adapt(
    ens: &mut Ensemble,
    batch: &[Vec<f64>],
    config: &DisagreementConfig,
) -> Result<()> {
    match config.adapt_policy {
        AdaptPolicy::None => {}
        AdaptPolicy::ResetAll => {
            let labels = pseudo_label(ens, batch)?;
            ens.reset_all()?;
            if config.g_update != GUpdate::External {
                for (x, &y) in batch.iter().zip(&labels) {
                    ens.learn_one(x, y)?;
                }
            }
        }
        AdaptPolicy::ResetFraction => {
            let labels = pseudo_label(ens, batch)?;
            let count = (config.reset_fraction * ens.n_members() as f64).round() as usize;
            for m in members_by_agreement(ens, batch, &labels)?
                .into_iter()
                .take(count)
            {
                ens.reset_member(m)?;
            }
        }
    }
    Ok(())
}

/// Per-stream detector state. It only ever receives feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementDetector {
    config: DisagreementConfig,
    seed: u64,
    batch_index: u64,
}

impl DisagreementDetector {
    pub fn new(config: DisagreementConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            seed,
            batch_index: 0,
        })
    }

    pub fn config(&self) -> &DisagreementConfig {
        &self.config
    }

    pub fn batches_seen(&self) -> u64 {
        self.batch_index
    }

    /// Smallest batch [`DisagreementDetector::step`] accepts.
    pub fn min_batch(&self) -> usize {
        2 * MIN_WINDOW
    }

    /// Runs one batch through the test and updates `g`. Short batches are
    /// split at the same proportion as full ones.
    pub fn step(&mut self, g: &mut Ensemble, batch: &[Vec<f64>]) -> Result<DriftDecision> {
        let cfg = &self.config;
        if batch.len() > cfg.batch_size {
            return Err(Error::param(format!(
                "batch of {} exceeds batch_size {}",
                batch.len(),
                cfg.batch_size
            )));
        }
        if batch.len() < self.min_batch() {
            return Err(Error::param(format!(
                "batch of {} is below the minimum of {}",
                batch.len(),
                self.min_batch()
            )));
        }
        let q_len = if batch.len() == cfg.batch_size {
            cfg.q_len()
        } else {
            (batch.len() * cfg.q_len() / cfg.batch_size).clamp(MIN_WINDOW, batch.len() - MIN_WINDOW)
        };
        let (q, r) = batch.split_at(q_len);
        let labels = pseudo_label(g, batch)?;
        let (lq, lr) = labels.split_at(q_len);
        let mask = flip_assign(
            g.n_members(),
            cfg.flip_fraction,
            self.seed,
            self.batch_index,
        )?;
        let g_ref: &Ensemble = g;
        let (copy_q, copy_r) = rayon::join(
            || train_flipped_copy(g_ref, q, lq, &mask, cfg.copy_lambda),
            || train_flipped_copy(g_ref, r, lr, &mask, cfg.copy_lambda),
        );
        let (copy_q, copy_r) = (copy_q?, copy_r?);
        let (eval_q, eval_r) = match cfg.eval_mode {
            EvalMode::OwnWindow => (q, r),
            EvalMode::FullBatch => (batch, batch),
        };
        let (dq, dr) = rayon::join(
            || pairwise_disagreement(&copy_q, eval_q),
            || pairwise_disagreement(&copy_r, eval_r),
        );
        let (dq, dr) = (dq?, dr?);
        let ks = ks_two_sample(&dq, &dr)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let decision = DriftDecision {
            drift: ks.p_value < cfg.alpha,
            d_stat: ks.d_stat,
            p_value: ks.p_value,
            batch_index: self.batch_index,
            mean_dq: mean(&dq),
            mean_dr: mean(&dr),
        };
        if decision.drift {
            on_drift_adapt(g, batch, cfg)?;
        } else if cfg.g_update == GUpdate::SelfTrain {
            for (x, &y) in batch.iter().zip(&labels) {
                g.learn_one(x, y)?;
            }
        }
        self.batch_index += 1;
        Ok(decision)
    }
}
