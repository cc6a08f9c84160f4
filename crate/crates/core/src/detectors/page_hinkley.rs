use serde::{Deserialize, Serialize};

use super::DetectorStatus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageHinkleyParams {
    /// Tolerated deviation per step.
    pub delta: f64,
    /// Alarm threshold on the cumulative deviation.
    pub lambda: f64,
    pub min_instances: usize,
}

impl Default for PageHinkleyParams {
    fn default() -> Self {
        Self {
            delta: 0.005,
            lambda: 50.0,
            min_instances: 30,
        }
    }
}

impl PageHinkleyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || self.delta < 0.0 {
            return Err(Error::config(
                "page_hinkley",
                "lambda must be positive and delta non-negative",
            ));
        }
        Ok(())
    }
}

/// Page-Hinkley test for an increase in the mean of a real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHinkley {
    params: PageHinkleyParams,
    n: u64,
    mean: f64,
    cumulative: f64,
    min_cumulative: f64,
}

impl PageHinkley {
    pub fn new(params: PageHinkleyParams) -> Self {
        Self {
            params,
            n: 0,
            mean: 0.0,
            cumulative: 0.0,
            min_cumulative: 0.0,
        }
    }

    pub fn params(&self) -> &PageHinkleyParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    /// `m_t - min m_t` after the latest update.
    pub fn statistic(&self) -> f64 {
        self.cumulative - self.min_cumulative
    }

    /// Accepts any finite value; error streams use 0/1 or losses in [0,1].
    pub fn update(&mut self, value: f64) -> Result<DetectorStatus> {
        if !value.is_finite() {
            return Err(Error::param("page-hinkley input must be finite"));
        }
        self.n += 1;
        self.mean += (value - self.mean) / self.n as f64;
        self.cumulative += value - self.mean - self.params.delta;
        self.min_cumulative = self.min_cumulative.min(self.cumulative);
        if (self.n as usize) < self.params.min_instances {
            return Ok(DetectorStatus::InControl);
        }
        if self.statistic() > self.params.lambda {
            self.reset();
            return Ok(DetectorStatus::Drift);
        }
        Ok(DetectorStatus::InControl)
    }
}
