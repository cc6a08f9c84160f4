use serde::{Deserialize, Serialize};

use super::{check_unit, DetectorStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdmParams {
    pub min_instances: usize,
    pub warning_level: f64,
    pub drift_level: f64,
}

impl Default for DdmParams {
    fn default() -> Self {
        Self {
            min_instances: 30,
            warning_level: 2.0,
            drift_level: 3.0,
        }
    }
}

impl DdmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.warning_level > 0.0 && self.drift_level > self.warning_level) {
            return Err(Error::config("ddm", "need 0 < warning_level < drift_level"));
        }
        Ok(())
    }
}

/// Drift detection method: tracks the error rate `p` and its binomial
/// standard deviation `s`, alarming when `p + s` rises well above the
/// lowest `p_min + s_min` seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ddm {
    params: DdmParams,
    n: u64,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
}

impl Ddm {
    pub fn new(params: DdmParams) -> Self {
        Self {
            params,
            n: 0,
            p: 0.0,
            s: 0.0,
            p_min: f64::MAX,
            s_min: f64::MAX,
        }
    }

    pub fn params(&self) -> &DdmParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    pub fn update(&mut self, error: f64) -> Result<DetectorStatus> {
        check_unit(error)?;
        self.n += 1;
        self.p += (error - self.p) / self.n as f64;
        self.s = (self.p * (1.0 - self.p) / self.n as f64).sqrt();
        if (self.n as usize) < self.params.min_instances {
            return Ok(DetectorStatus::InControl);
        }
        if self.p + self.s <= self.p_min + self.s_min {
            self.p_min = self.p;
            self.s_min = self.s;
        }
        let level = self.p + self.s;
        if level > self.p_min + self.params.drift_level * self.s_min {
            self.reset();
            Ok(DetectorStatus::Drift)
        } else if level > self.p_min + self.params.warning_level * self.s_min {
            Ok(DetectorStatus::Warning)
        } else {
            Ok(DetectorStatus::InControl)
        }
    }
}
