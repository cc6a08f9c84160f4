//! Drift detectors: loss-based monitors of the prequential error signal and
//! a label-free detector over raw features.

pub mod adwin;
pub mod d3;
pub mod ddm;
pub mod eddm;
pub mod hddm;
pub mod page_hinkley;

use serde::{Deserialize, Serialize};

pub use adwin::{Adwin, AdwinParams};
pub use d3::{auc, D3Params, D3};
pub use ddm::{Ddm, DdmParams};
pub use eddm::{Eddm, EddmParams};
pub use hddm::{HddmA, HddmAParams, HddmW, HddmWParams};
pub use page_hinkley::{PageHinkley, PageHinkleyParams};

use crate::disagreement::DisagreementConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorStatus {
    InControl,
    Warning,
    Drift,
}

impl DetectorStatus {
    pub fn is_drift(self) -> bool {
        self == DetectorStatus::Drift
    }
}

pub(crate) fn check_unit(value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::param(format!("error value {value} outside [0,1]")))
    }
}

/// Detector fed one feature vector per instance. It never sees labels.
pub trait FeatureDetector {
    fn update(&mut self, x: &[f64]) -> Result<DetectorStatus>;
    fn reset(&mut self);
    fn name(&self) -> &'static str;
}

/// Which signal a detector consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorFamily {
    Loss,
    Data,
    Disagreement,
}

/// Detector choice plus hyperparameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorConfig {
    Ddm(DdmParams),
    Eddm(EddmParams),
    Adwin(AdwinParams),
    #[serde(alias = "ph")]
    PageHinkley(PageHinkleyParams),
    HddmA(HddmAParams),
    HddmW(HddmWParams),
    D3(D3Params),
    Disagreement(DisagreementConfig),
}

impl DetectorConfig {
    pub const NAMES: [&'static str; 8] = [
        "ddm",
        "eddm",
        "adwin",
        "page_hinkley",
        "hddm_a",
        "hddm_w",
        "d3",
        "disagreement",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorConfig::Ddm(_) => "ddm",
            DetectorConfig::Eddm(_) => "eddm",
            DetectorConfig::Adwin(_) => "adwin",
            DetectorConfig::PageHinkley(_) => "page_hinkley",
            DetectorConfig::HddmA(_) => "hddm_a",
            DetectorConfig::HddmW(_) => "hddm_w",
            DetectorConfig::D3(_) => "d3",
            DetectorConfig::Disagreement(_) => "disagreement",
        }
    }

    pub fn family(&self) -> DetectorFamily {
        match self {
            DetectorConfig::D3(_) => DetectorFamily::Data,
            DetectorConfig::Disagreement(_) => DetectorFamily::Disagreement,
            _ => DetectorFamily::Loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorConfig::Ddm(p) => p.validate(),
            DetectorConfig::Eddm(p) => p.validate(),
            DetectorConfig::Adwin(p) => p.validate(),
            DetectorConfig::PageHinkley(p) => p.validate(),
            DetectorConfig::HddmA(p) => p.validate(),
            DetectorConfig::HddmW(p) => p.validate(),
            DetectorConfig::D3(p) => p.validate(),
            DetectorConfig::Disagreement(p) => p.validate(),
        }
    }

    /// Loss-based detector for this config, if it is one.
    pub fn build_loss(&self) -> Option<LossDetector> {
        Some(match self {
            DetectorConfig::Ddm(p) => LossDetector::Ddm(Ddm::new(p.clone())),
            DetectorConfig::Eddm(p) => LossDetector::Eddm(Eddm::new(p.clone())),
            DetectorConfig::Adwin(p) => LossDetector::Adwin(Adwin::new(p.clone())),
            DetectorConfig::PageHinkley(p) => {
                LossDetector::PageHinkley(PageHinkley::new(p.clone()))
            }
            DetectorConfig::HddmA(p) => LossDetector::HddmA(HddmA::new(p.clone())),
            DetectorConfig::HddmW(p) => LossDetector::HddmW(HddmW::new(p.clone())),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossDetector {
    Ddm(Ddm),
    Eddm(Eddm),
    Adwin(Adwin),
    PageHinkley(PageHinkley),
    HddmA(HddmA),
    HddmW(HddmW),
}

impl LossDetector {
    /// Feed one error value in [0,1].
    pub fn update(&mut self, error: f64) -> Result<DetectorStatus> {
        match self {
            LossDetector::Ddm(d) => d.update(error),
            LossDetector::Eddm(d) => d.update(error),
            LossDetector::Adwin(d) => d.update(error),
            LossDetector::PageHinkley(d) => {
                check_unit(error)?;
                d.update(error)
            }
            LossDetector::HddmA(d) => d.update(error),
            LossDetector::HddmW(d) => d.update(error),
        }
    }

    pub fn reset(&mut self) {
        match self {
            LossDetector::Ddm(d) => d.reset(),
            LossDetector::Eddm(d) => d.reset(),
            LossDetector::Adwin(d) => d.reset(),
            LossDetector::PageHinkley(d) => d.reset(),
            LossDetector::HddmA(d) => d.reset(),
            LossDetector::HddmW(d) => d.reset(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossDetector::Ddm(_) => "ddm",
            LossDetector::Eddm(_) => "eddm",
            LossDetector::Adwin(_) => "adwin",
            LossDetector::PageHinkley(_) => "page_hinkley",
            LossDetector::HddmA(_) => "hddm_a",
            LossDetector::HddmW(_) => "hddm_w",
        }
    }
}
