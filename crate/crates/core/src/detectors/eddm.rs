use serde::{Deserialize, Serialize};

use super::{check_unit, DetectorStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EddmParams {
    /// Warning when the distance statistic falls below this share of its max.
    pub warning_ratio: f64,
    pub drift_ratio: f64,
    pub min_errors: usize,
    pub min_instances: usize,
}

impl Default for EddmParams {
    fn default() -> Self {
        Self {
            warning_ratio: 0.95,
            drift_ratio: 0.90,
            min_errors: 30,
            min_instances: 30,
        }
    }
}

impl EddmParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.drift_ratio
            && self.drift_ratio < self.warning_ratio
            && self.warning_ratio < 1.0)
        {
            return Err(Error::config(
                "eddm",
                "need 0 < drift_ratio < warning_ratio < 1",
            ));
        }
        Ok(())
    }
}

/// Early drift detection method: monitors the mean distance between
/// consecutive errors and its spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eddm {
    params: EddmParams,
    n: u64,
    n_errors: u64,
    last_error_at: u64,
    mean: f64,
    m2: f64,
    max_level: f64,
}

impl Eddm {
    pub fn new(params: EddmParams) -> Self {
        Self {
            params,
            n: 0,
            n_errors: 0,
            last_error_at: 0,
            mean: 0.0,
            m2: 0.0,
            max_level: 0.0,
        }
    }

    pub fn params(&self) -> &EddmParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    /// Any value ≥ 0.5 counts as an error.
    pub fn update(&mut self, error: f64) -> Result<DetectorStatus> {
        check_unit(error)?;
        self.n += 1;
        if error < 0.5 {
            return Ok(DetectorStatus::InControl);
        }
        self.n_errors += 1;
        let distance = (self.n - self.last_error_at) as f64;
        self.last_error_at = self.n;
        let old = self.mean;
        self.mean += (distance - self.mean) / self.n_errors as f64;
        self.m2 += (distance - self.mean) * (distance - old);
        let std = (self.m2 / self.n_errors as f64).sqrt();
        let level = self.mean + 2.0 * std;
        let warm = self.n as usize > self.params.min_instances;
        if level > self.max_level {
            if warm {
                self.max_level = level;
            }
            return Ok(DetectorStatus::InControl);
        }
        let ratio = level / self.max_level;
        if warm && self.n_errors as usize > self.params.min_errors {
            if ratio < self.params.drift_ratio {
                self.reset();
                return Ok(DetectorStatus::Drift);
            }
            if ratio < self.params.warning_ratio {
                return Ok(DetectorStatus::Warning);
            }
        }
        Ok(DetectorStatus::InControl)
    }
}
