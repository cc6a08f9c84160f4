//! Online bagging ensemble with error-adaptive Poisson resampling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{EnsembleKind, Member};
use crate::error::{Error, Result};
use crate::learners::hoeffding::HoeffdingTreeParams;
use crate::learners::mlp::MlpParams;
use crate::stats::{poisson_sample, RngState};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Stream ids at or above this value seed member weight initialization.
const INIT_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(rename = "type")]
    pub kind: EnsembleKind,
    pub n_members: usize,
    pub lambda_max: f64,
    pub lambda_floor: f64,
    /// Sliding window length for the prequential error estimate.
    pub error_window: usize,
    pub tree: HoeffdingTreeParams,
    pub mlp: MlpParams,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            kind: EnsembleKind::Idt,
            n_members: 100,
            lambda_max: 6.0,
            lambda_floor: 0.05,
            error_window: 500,
            tree: HoeffdingTreeParams::default(),
            mlp: MlpParams::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_members == 0 {
            return Err(Error::config("ensemble.n_members", "must be positive"));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return Err(Error::config("ensemble.lambda_max", "must be positive"));
        }
        if !(0.0..=self.lambda_max).contains(&self.lambda_floor) {
            return Err(Error::config(
                "ensemble.lambda_floor",
                "must lie in [0, lambda_max]",
            ));
        }
        if self.error_window == 0 {
            return Err(Error::config("ensemble.error_window", "must be positive"));
        }
        match self.kind {
            EnsembleKind::Idt => self.tree.validate(),
            EnsembleKind::Mlp => self.mlp.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    config: EnsembleConfig,
    dim: usize,
    seed: u64,
    members: Vec<Member>,
    /// Poisson sub-stream per member.
    rngs: Vec<RngState>,
    /// Bumped on every member reinitialization so new weights differ.
    generation: u64,
    errors: VecDeque<bool>,
    error_count: usize,
}

#[derive(Serialize, Deserialize)]
struct Snapshot<T> {
    version: u32,
    ensemble: T,
}

impl Ensemble {
    pub fn new(config: EnsembleConfig, dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::param("ensemble input dimension must be positive"));
        }
        let n = config.n_members;
        let mut ens = Self {
            config,
            dim,
            seed,
            members: Vec::with_capacity(n),
            rngs: (0..n as u64)
                .map(|i| RngState::with_stream(seed, i))
                .collect(),
            generation: 0,
            errors: VecDeque::new(),
            error_count: 0,
        };
        for i in 0..n {
            let m = ens.fresh_member(i)?;
            ens.members.push(m);
        }
        Ok(ens)
    }

    fn fresh_member(&self, index: usize) -> Result<Member> {
        let stream = INIT_STREAM_BASE + (self.generation << 20) + index as u64;
        let mut rng = RngState::with_stream(self.seed, stream);
        Member::new(&self.config, self.dim, &mut rng)
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::param(format!(
                "feature dimension {} does not match ensemble dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Sliding-window prequential error; 0.5 before any observation.
    pub fn error_estimate(&self) -> f64 {
        if self.errors.is_empty() {
            0.5
        } else {
            self.error_count as f64 / self.errors.len() as f64
        }
    }

    pub fn lambda(&self) -> f64 {
        (self.error_estimate() * self.config.lambda_max).max(self.config.lambda_floor)
    }

    /// Push one 0/1 outcome into the error window and return the new ε.
    pub fn record_error(&mut self, wrong: bool) -> f64 {
        self.errors.push_back(wrong);
        self.error_count += wrong as usize;
        if self.errors.len() > self.config.error_window {
            let old = self.errors.pop_front().expect("window non-empty");
            self.error_count -= old as usize;
        }
        self.error_estimate()
    }

    /// Predict `x`, compare against `y` and update ε.
    pub fn observe(&mut self, x: &[f64], y: u8) -> Result<f64> {
        let (label, _) = self.predict(x)?;
        Ok(self.record_error(label != y))
    }

    pub fn clear_error_window(&mut self) {
        self.errors.clear();
        self.error_count = 0;
    }

    /// Per-member labels for `x`.
    pub fn member_predictions(&self, x: &[f64]) -> Result<Vec<u8>> {
        self.check_dim(x)?;
        self.members.iter().map(|m| m.predict(x)).collect()
    }

    /// Majority label and the fraction of members voting 1; ties go to 0.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, f64)> {
        self.check_dim(x)?;
        let mut ones = 0usize;
        for m in &self.members {
            ones += m.predict(x)? as usize;
        }
        let n = self.members.len();
        Ok(((2 * ones > n) as u8, ones as f64 / n as f64))
    }

    /// Each member trains `k ~ Poisson(λ(ε))` times on `(x, y)`.
    pub fn learn_one(&mut self, x: &[f64], y: u8) -> Result<()> {
        self.learn_one_masked(x, y, None)
    }

    /// As [`Ensemble::learn_one`], but members with `mask[m]` see `1 - y`.
    pub fn learn_one_masked(&mut self, x: &[f64], y: u8, mask: Option<&[bool]>) -> Result<()> {
        self.learn_one_with(x, y, mask, None)
    }

    /// Masked training with an optional fixed Poisson rate in place of λ(ε).
    pub fn learn_one_with(
        &mut self,
        x: &[f64],
        y: u8,
        mask: Option<&[bool]>,
        lambda: Option<f64>,
    ) -> Result<()> {
        if y > 1 {
            return Err(Error::param(format!("label must be 0 or 1, got {y}")));
        }
        self.check_dim(x)?;
        if let Some(mask) = mask {
            if mask.len() != self.members.len() {
                return Err(Error::param("flip mask length differs from ensemble size"));
            }
        }
        let lambda = lambda.unwrap_or_else(|| self.lambda());
        for (i, (member, rng)) in self.members.iter_mut().zip(&mut self.rngs).enumerate() {
            let k = poisson_sample(lambda, rng)?;
            if k == 0 {
                continue;
            }
            let label = if mask.is_some_and(|m| m[i]) { 1 - y } else { y };
            member.learn(x, label, k)?;
        }
        Ok(())
    }

    /// Replace member `index` with a freshly initialized learner.
    pub fn reset_member(&mut self, index: usize) -> Result<()> {
        if index >= self.members.len() {
            return Err(Error::param(format!("member index {index} out of range")));
        }
        self.generation += 1;
        self.members[index] = self.fresh_member(index)?;
        Ok(())
    }

    /// Reinitialize every member and clear the error window.
    pub fn reset_all(&mut self) -> Result<()> {
        self.generation += 1;
        for i in 0..self.members.len() {
            self.members[i] = self.fresh_member(i)?;
        }
        self.clear_error_window();
        Ok(())
    }

    pub fn to_snapshot(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(&Snapshot {
            version: SNAPSHOT_VERSION,
            ensemble: self,
        })?)
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        let snap: Snapshot<Ensemble> = serde_json::from_slice(bytes)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::param(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        Ok(snap.ensemble)
    }
}
