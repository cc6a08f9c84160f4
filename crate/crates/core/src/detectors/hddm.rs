//! Hoeffding-bound drift detectors on the mean of a bounded signal.
//! Both variants are one-sided: they react to increases only.

use serde::{Deserialize, Serialize};

use super::{check_unit, DetectorStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HddmAParams {
    pub drift_confidence: f64,
    pub warning_confidence: f64,
}

impl Default for HddmAParams {
    fn default() -> Self {
        Self {
            drift_confidence: 0.001,
            warning_confidence: 0.005,
        }
    }
}

fn validate_confidences(field: &str, drift: f64, warning: f64) -> Result<()> {
    if !(0.0 < drift && drift < 1.0 && 0.0 < warning && warning < 1.0) {
        return Err(Error::config(field, "confidences must lie in (0,1)"));
    }
    if drift > warning {
        return Err(Error::config(
            field,
            "drift_confidence must not exceed warning_confidence",
        ));
    }
    Ok(())
}

impl HddmAParams {
    pub fn validate(&self) -> Result<()> {
        validate_confidences("hddm_a", self.drift_confidence, self.warning_confidence)
    }
}

/// Compares the running mean against the mean at the cut point where
/// `mean + bound` was smallest (the A-test).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HddmA {
    params: HddmAParams,
    n: f64,
    sum: f64,
    n_min: f64,
    sum_min: f64,
}

impl HddmA {
    pub fn new(params: HddmAParams) -> Self {
        Self {
            params,
            n: 0.0,
            sum: 0.0,
            n_min: 0.0,
            sum_min: 0.0,
        }
    }

    pub fn params(&self) -> &HddmAParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    fn mean_increased(&self, confidence: f64) -> bool {
        if self.n_min == self.n {
            return false;
        }
        let m = (self.n - self.n_min) / self.n_min * (1.0 / self.n);
        let bound = (m / 2.0 * (2.0 / confidence).ln()).sqrt();
        self.sum / self.n - self.sum_min / self.n_min >= bound
    }

    pub fn update(&mut self, value: f64) -> Result<DetectorStatus> {
        check_unit(value)?;
        self.n += 1.0;
        self.sum += value;
        if self.n_min == 0.0 {
            self.n_min = self.n;
            self.sum_min = self.sum;
        }
        let ln_inv = (1.0 / self.params.drift_confidence).ln();
        let bound_now = (ln_inv / (2.0 * self.n)).sqrt();
        let bound_min = (ln_inv / (2.0 * self.n_min)).sqrt();
        if self.sum / self.n + bound_now <= self.sum_min / self.n_min + bound_min {
            self.n_min = self.n;
            self.sum_min = self.sum;
        }
        if self.mean_increased(self.params.drift_confidence) {
            self.reset();
            Ok(DetectorStatus::Drift)
        } else if self.mean_increased(self.params.warning_confidence) {
            Ok(DetectorStatus::Warning)
        } else {
            Ok(DetectorStatus::InControl)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HddmWParams {
    pub drift_confidence: f64,
    pub warning_confidence: f64,
    /// EWMA weight of the newest value.
    pub lambda: f64,
}

impl Default for HddmWParams {
    fn default() -> Self {
        Self {
            drift_confidence: 0.001,
            warning_confidence: 0.005,
            lambda: 0.05,
        }
    }
}

impl HddmWParams {
    pub fn validate(&self) -> Result<()> {
        validate_confidences("hddm_w", self.drift_confidence, self.warning_confidence)?;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::config("hddm_w.lambda", "must lie in (0,1)"));
        }
        Ok(())
    }
}

/// EWMA estimate with the sum of squared weights that bounds it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Ewma {
    estimate: Option<f64>,
    weight_sq_sum: f64,
}

impl Ewma {
    const EMPTY: Ewma = Ewma {
        estimate: None,
        weight_sq_sum: 0.0,
    };

    fn push(&mut self, value: f64, lambda: f64) {
        let keep = 1.0 - lambda;
        match self.estimate {
            None => {
                self.estimate = Some(value);
                self.weight_sq_sum = 1.0;
            }
            Some(e) => {
                self.estimate = Some(lambda * value + keep * e);
                self.weight_sq_sum = lambda * lambda + keep * keep * self.weight_sq_sum;
            }
        }
    }
}

/// Weighted-mean variant (W-test) with a McDiarmid bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HddmW {
    params: HddmWParams,
    total: Ewma,
    before_cut: Ewma,
    after_cut: Ewma,
    cut_level: f64,
}

impl HddmW {
    pub fn new(params: HddmWParams) -> Self {
        Self {
            params,
            total: Ewma::EMPTY,
            before_cut: Ewma::EMPTY,
            after_cut: Ewma::EMPTY,
            cut_level: f64::MAX,
        }
    }

    pub fn params(&self) -> &HddmWParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    fn increased(&self, confidence: f64) -> bool {
        let (Some(a), Some(b)) = (self.before_cut.estimate, self.after_cut.estimate) else {
            return false;
        };
        let bound = ((self.before_cut.weight_sq_sum + self.after_cut.weight_sq_sum)
            * (1.0 / confidence).ln()
            / 2.0)
            .sqrt();
        b - a > bound
    }

    pub fn update(&mut self, value: f64) -> Result<DetectorStatus> {
        check_unit(value)?;
        let lambda = self.params.lambda;
        self.total.push(value, lambda);
        let est = self.total.estimate.expect("just pushed");
        let bound =
            (self.total.weight_sq_sum * (1.0 / self.params.drift_confidence).ln() / 2.0).sqrt();
        if est + bound < self.cut_level {
            self.cut_level = est + bound;
            self.before_cut = self.total;
            self.after_cut = Ewma::EMPTY;
        } else {
            self.after_cut.push(value, lambda);
        }
        if self.increased(self.params.drift_confidence) {
            self.reset();
            Ok(DetectorStatus::Drift)
        } else if self.increased(self.params.warning_confidence) {
            Ok(DetectorStatus::Warning)
        } else {
            Ok(DetectorStatus::InControl)
        }
    }
}
