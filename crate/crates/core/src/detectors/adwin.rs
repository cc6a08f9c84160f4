use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{check_unit, DetectorStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdwinParams {
    pub delta: f64,
    /// Buckets kept per size level before the two oldest merge.
    pub max_buckets: usize,
    /// Cut checks run on every `clock`-th insertion.
    pub clock: u64,
    /// Both sub-windows of a cut need at least this many elements.
    pub min_sub_window: usize,
    /// No checks while the window holds this many elements or fewer.
    pub min_window: usize,
}

impl Default for AdwinParams {
    fn default() -> Self {
        Self {
            delta: 0.002,
            max_buckets: 5,
            clock: 32,
            min_sub_window: 5,
            min_window: 10,
        }
    }
}

impl AdwinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("adwin.delta", "must lie in (0,1)"));
        }
        if self.max_buckets < 2 || self.clock == 0 || self.min_sub_window == 0 {
            return Err(Error::config(
                "adwin",
                "max_buckets ≥ 2, clock ≥ 1 and min_sub_window ≥ 1 required",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Bucket {
    total: f64,
    /// Sum of squared deviations from the bucket mean.
    variance: f64,
}

/// Adaptive windowing over an exponential bucket histogram.
///
/// `rows[i]` holds buckets of `2^i` elements, oldest at the front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adwin {
    params: AdwinParams,
    rows: Vec<VecDeque<Bucket>>,
    width: usize,
    total: f64,
    variance: f64,
    time: u64,
}

/// `ε_cut` for sub-windows of `n0` and `n1` elements within a window of
/// `width` elements whose variance (per element) is `var`.
pub fn cut_threshold(
    n0: usize,
    n1: usize,
    width: usize,
    var: f64,
    delta: f64,
    min_sub: usize,
) -> f64 {
    let dd = (2.0 * (width as f64).ln() / delta).ln();
    let m = 1.0 / (n0 - min_sub + 1) as f64 + 1.0 / (n1 - min_sub + 1) as f64;
    (2.0 * m * var * dd).sqrt() + 2.0 / 3.0 * dd * m
}

impl Adwin {
    pub fn new(params: AdwinParams) -> Self {
        Self {
            params,
            rows: Vec::new(),
            width: 0,
            total: 0.0,
            variance: 0.0,
            time: 0,
        }
    }

    pub fn params(&self) -> &AdwinParams {
        &self.params
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.params.clone());
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Population variance of the retained elements.
    pub fn variance(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.variance / self.width as f64
        }
    }

    /// Bucket sizes from oldest to newest.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate().rev() {
            out.extend(std::iter::repeat_n(1usize << i, row.len()));
        }
        out
    }

    pub fn update(&mut self, value: f64) -> Result<DetectorStatus> {
        check_unit(value)?;
        self.insert(value);
        self.time += 1;
        let changed = self.time.is_multiple_of(self.params.clock)
            && self.width > self.params.min_window
            && self.shrink();
        Ok(if changed {
            DetectorStatus::Drift
        } else {
            DetectorStatus::InControl
        })
    }

    fn insert(&mut self, value: f64) {
        self.width += 1;
        if self.width > 1 {
            let prev_mean = self.total / (self.width - 1) as f64;
            self.variance +=
                (self.width - 1) as f64 * (value - prev_mean).powi(2) / self.width as f64;
        }
        self.total += value;
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_back(Bucket {
            total: value,
            variance: 0.0,
        });
        self.compress();
    }

    fn compress(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].len() <= self.params.max_buckets {
                break;
            }
            let a = self.rows[i].pop_front().expect("row overfull");
            let b = self.rows[i].pop_front().expect("row overfull");
            let n = (1usize << i) as f64;
            let (ua, ub) = (a.total / n, b.total / n);
            let merged = Bucket {
                total: a.total + b.total,
                variance: a.variance + b.variance + n * n * (ua - ub).powi(2) / (2.0 * n),
            };
            if i + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[i + 1].push_back(merged);
            i += 1;
        }
    }

    /// Drop the oldest bucket; returns its size.
    fn drop_oldest(&mut self) -> usize {
        let level = self.rows.len() - 1;
        let n1 = 1usize << level;
        let bucket = self.rows[level].pop_front().expect("non-empty window");
        self.width -= n1;
        self.total -= bucket.total;
        let u1 = bucket.total / n1 as f64;
        if self.width == 0 {
            self.variance = 0.0;
        } else {
            let rest_mean = self.total / self.width as f64;
            self.variance -= bucket.variance
                + n1 as f64 * self.width as f64 * (u1 - rest_mean).powi(2)
                    / (n1 + self.width) as f64;
            self.variance = self.variance.max(0.0);
        }
        while self.rows.last().is_some_and(|r| r.is_empty()) {
            self.rows.pop();
        }
        n1
    }

    /// Repeatedly cut the oldest bucket while some split of the window
    /// shows a significant difference in means.
    fn shrink(&mut self) -> bool {
        let mut changed = false;
        'restart: loop {
            let width = self.width;
            let var = self.variance();
            let min_sub = self.params.min_sub_window;
            let (mut n0, mut u0) = (0usize, 0.0);
            let mut n1 = width;
            let mut u1 = self.total;
            let last_level = self.rows.len();
            for level in (0..last_level).rev() {
                let size = 1usize << level;
                let row_len = self.rows[level].len();
                for k in 0..row_len {
                    let t = self.rows[level][k].total;
                    n0 += size;
                    n1 -= size;
                    u0 += t;
                    u1 -= t;
                    if level == 0 && k + 1 == row_len {
                        break 'restart;
                    }
                    if n0 >= min_sub && n1 >= min_sub {
                        let diff = u0 / n0 as f64 - u1 / n1 as f64;
                        let eps = cut_threshold(n0, n1, width, var, self.params.delta, min_sub);
                        if diff.abs() > eps {
                            changed = true;
                            self.drop_oldest();
                            if self.width == 0 {
                                break 'restart;
                            }
                            continue 'restart;
                        }
                    }
                }
            }
            break;
        }
        changed
    }
}
