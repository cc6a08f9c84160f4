//! Incremental base learners and the bagging ensemble built from them.

pub mod ensemble;
pub mod hoeffding;
pub mod mlp;

use serde::{Deserialize, Serialize};

pub use ensemble::{Ensemble, EnsembleConfig};
pub use hoeffding::{HoeffdingTree, HoeffdingTreeParams, LeafPrediction};
pub use mlp::{Mlp, MlpParams};

use crate::error::Result;
use crate::stats::RngState;

/// Base learner family of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Hoeffding trees.
    #[serde(alias = "IDT")]
    Idt,
    #[serde(alias = "MLP")]
    Mlp,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Idt => "idt",
            EnsembleKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Member {
    Tree(HoeffdingTree),
    Mlp(Mlp),
}

impl Member {
    pub fn new(config: &EnsembleConfig, dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(match config.kind {
            EnsembleKind::Idt => Member::Tree(HoeffdingTree::new(config.tree.clone())),
            EnsembleKind::Mlp => Member::Mlp(Mlp::new(config.mlp.clone(), dim, rng)?),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        match self {
            Member::Tree(t) => t.predict(x).map(|(l, _)| l),
            Member::Mlp(m) => m.predict(x).map(|(l, _)| l),
        }
    }

    /// Train on `(x, y)` as if it appeared `copies` times.
    pub fn learn(&mut self, x: &[f64], y: u8, copies: u32) -> Result<()> {
        match self {
            Member::Tree(t) => t.learn_one(x, y, copies as f64),
            Member::Mlp(m) => m.learn_one(x, y, copies),
        }
    }
}

/// Anything that maps a feature vector to a binary label.
pub trait Classifier {
    fn predict_label(&self, x: &[f64]) -> u8;
}

impl<F: Fn(&[f64]) -> u8> Classifier for F {
    fn predict_label(&self, x: &[f64]) -> u8 {
        self(x)
    }
}

impl Classifier for Ensemble {
    fn predict_label(&self, x: &[f64]) -> u8 {
        self.predict(x).map(|(l, _)| l).unwrap_or(0)
    }
}

impl Classifier for Member {
    fn predict_label(&self, x: &[f64]) -> u8 {
        Member::predict(self, x).unwrap_or(0)
    }
}
