//! Per-family concept definitions.
//!
//! Each family follows its usual generator definition; the optional range
//! fields let a concept also move the input distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::RngState;

fn default_sea_range() -> [f64; 2] {
    [0.0, 10.0]
}

fn default_unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_true() -> bool {
    true
}

/// SEA: three uniform features, label 1 iff `x0 + x1 <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaParams {
    pub threshold: f64,
    #[serde(default = "default_sea_range")]
    pub x_range: [f64; 2],
    #[serde(default)]
    pub noise: f64,
}

/// Hyperplane: ten uniform features, label 1 iff `w·x >= offset`
/// (default `offset = Σw · mid(x_range)`, i.e. `Σw / 2` on the unit cube).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneParams {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default = "default_unit_range")]
    pub x_range: [f64; 2],
    #[serde(default)]
    pub noise: f64,
}

/// Stagger: size, color and shape, each in {0,1,2}, labelled by one of
/// three boolean rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaggerParams {
    pub rule: u8,
    #[serde(default = "default_true")]
    pub balance_classes: bool,
    #[serde(default)]
    pub noise: f64,
}

/// Sine family: `(x0, x1)` with `x1` uniform on `[0,1]` and `x0` uniform on
/// the concept's context range; label by `x1` against a sine curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineParams {
    /// 1: `x1 < sin(x0)`, 2: its reverse, 3: `x1 < 0.5 + 0.3 sin(3πx0)`, 4: its reverse.
    pub function: u8,
    #[serde(default = "default_unit_range")]
    pub context: [f64; 2],
    #[serde(default)]
    pub noise: f64,
}

fn default_rbf_dim() -> usize {
    10
}

fn default_rbf_centroids() -> usize {
    50
}

/// Random RBF: labelled Gaussian centroids generated from `centroid_seed`.
/// `shift` moves every centroid along its own fixed random direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfParams {
    pub centroid_seed: u64,
    #[serde(default = "default_rbf_dim")]
    pub dim: usize,
    #[serde(default = "default_rbf_centroids")]
    pub n_centroids: usize,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub noise: f64,
}

/// Agrawal loan-application generator with classification functions 1-10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgrawalParams {
    pub function: u8,
    #[serde(default)]
    pub balance_classes: bool,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConceptParams {
    Sea(SeaParams),
    Hyperplane(HyperplaneParams),
    Stagger(StaggerParams),
    AnomalySine(SineParams),
    Rbf(RbfParams),
    Agrawal(AgrawalParams),
}

pub const HYPERPLANE_DIM: usize = 10;

impl ConceptParams {
    pub fn family_name(&self) -> &'static str {
        match self {
            ConceptParams::Sea(_) => "sea",
            ConceptParams::Hyperplane(_) => "hyperplane",
            ConceptParams::Stagger(_) => "stagger",
            ConceptParams::AnomalySine(_) => "anomaly_sine",
            ConceptParams::Rbf(_) => "rbf",
            ConceptParams::Agrawal(_) => "agrawal",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConceptParams::Sea(_) => 3,
            ConceptParams::Hyperplane(p) => p.weights.len(),
            ConceptParams::Stagger(_) => 3,
            ConceptParams::AnomalySine(_) => 2,
            ConceptParams::Rbf(p) => p.dim,
            ConceptParams::Agrawal(_) => 9,
        }
    }

    pub fn noise(&self) -> f64 {
        match self {
            ConceptParams::Sea(p) => p.noise,
            ConceptParams::Hyperplane(p) => p.noise,
            ConceptParams::Stagger(p) => p.noise,
            ConceptParams::AnomalySine(p) => p.noise,
            ConceptParams::Rbf(p) => p.noise,
            ConceptParams::Agrawal(p) => p.noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(self.family_name(), m));
        let noise = self.noise();
        if !(0.0..=1.0).contains(&noise) {
            return fail(format!("noise must lie in [0,1], got {noise}"));
        }
        match self {
            ConceptParams::Sea(p) => {
                if !(p.threshold > 0.0 && p.threshold < 20.0) {
                    return fail(format!(
                        "SEA threshold must lie in (0,20), got {}",
                        p.threshold
                    ));
                }
                check_range(self.family_name(), p.x_range)?;
            }
            ConceptParams::Hyperplane(p) => {
                if p.weights.len() != HYPERPLANE_DIM {
                    return fail(format!(
                        "hyperplane needs {HYPERPLANE_DIM} weights, got {}",
                        p.weights.len()
                    ));
                }
                if p.weights.iter().any(|w| !w.is_finite()) {
                    return fail("hyperplane weights must be finite".into());
                }
                check_range(self.family_name(), p.x_range)?;
            }
            ConceptParams::Stagger(p) => {
                if !(1..=3).contains(&p.rule) {
                    return fail(format!("stagger rule must be 1, 2 or 3, got {}", p.rule));
                }
            }
            ConceptParams::AnomalySine(p) => {
                if !(1..=4).contains(&p.function) {
                    return fail(format!("sine function must be 1..=4, got {}", p.function));
                }
                check_range(self.family_name(), p.context)?;
            }
            ConceptParams::Rbf(p) => {
                if p.dim == 0 || p.n_centroids == 0 {
                    return fail("rbf needs dim >= 1 and n_centroids >= 1".into());
                }
                if !p.shift.is_finite() {
                    return fail("rbf shift must be finite".into());
                }
            }
            ConceptParams::Agrawal(p) => {
                if !(1..=10).contains(&p.function) {
                    return fail(format!(
                        "agrawal function must be 1..=10, got {}",
                        p.function
                    ));
                }
            }
        }
        Ok(())
    }

    /// Noise-free labelling rule, where the family has one. RBF labels come
    /// from the generating centroid and cannot be recovered from `x`.
    pub fn label_of(&self, x: &[f64]) -> Option<u8> {
        match self {
            ConceptParams::Sea(p) => Some((x[0] + x[1] <= p.threshold) as u8),
            ConceptParams::Hyperplane(p) => Some(hyperplane_label(p, x)),
            ConceptParams::Stagger(p) => Some(stagger_label(p.rule, x)),
            ConceptParams::AnomalySine(p) => Some(sine_label(p.function, x)),
            ConceptParams::Rbf(_) => None,
            ConceptParams::Agrawal(p) => Some(agrawal_label(p.function, x)),
        }
    }
}

fn check_range(family: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(Error::config(
            family,
            format!("range must satisfy low < high, got [{}, {}]", r[0], r[1]),
        ));
    }
    Ok(())
}

fn hyperplane_label(p: &HyperplaneParams, x: &[f64]) -> u8 {
    let dot: f64 = p.weights.iter().zip(x).map(|(w, v)| w * v).sum();
    let mid = 0.5 * (p.x_range[0] + p.x_range[1]);
    let offset = p
        .offset
        .unwrap_or_else(|| mid * p.weights.iter().sum::<f64>());
    (dot >= offset) as u8
}

fn stagger_label(rule: u8, x: &[f64]) -> u8 {
    let (size, color, shape) = (x[0] as u8, x[1] as u8, x[2] as u8);
    let positive = match rule {
        // small and red
        1 => size == 0 && color == 0,
        // green or circle
        2 => color == 1 || shape == 0,
        // medium or large
        _ => size == 1 || size == 2,
    };
    positive as u8
}

fn sine_label(function: u8, x: &[f64]) -> u8 {
    let (a, b) = (x[0], x[1]);
    let below = match function {
        1 | 2 => b < a.sin(),
        _ => b < 0.5 + 0.3 * (3.0 * std::f64::consts::PI * a).sin(),
    };
    let positive = if function % 2 == 1 { below } else { !below };
    positive as u8
}

fn in_band(v: f64, lo: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// Agrawal functions; feature order is salary, commission, age, elevel, car,
/// zipcode, hvalue, hyears, loan.
fn agrawal_label(function: u8, x: &[f64]) -> u8 {
    let (salary, commission, age, elevel) = (x[0], x[1], x[2], x[3]);
    let (hvalue, hyears, loan) = (x[6], x[7], x[8]);
    let by_age = |young: bool, middle: bool, old: bool| {
        if age < 40.0 {
            young
        } else if age < 60.0 {
            middle
        } else {
            old
        }
    };
    let low_el = elevel <= 1.0;
    let mid_el = (1.0..=3.0).contains(&elevel);
    let high_el = elevel >= 2.0;
    let positive = match function {
        1 => !(40.0..60.0).contains(&age),
        2 => by_age(
            in_band(salary, 50_000.0, 100_000.0),
            in_band(salary, 75_000.0, 125_000.0),
            in_band(salary, 25_000.0, 75_000.0),
        ),
        3 => by_age(low_el, mid_el, high_el),
        4 => by_age(
            if low_el {
                in_band(salary, 25_000.0, 75_000.0)
            } else {
                in_band(salary, 50_000.0, 100_000.0)
            },
            if mid_el {
                in_band(salary, 50_000.0, 100_000.0)
            } else {
                in_band(salary, 75_000.0, 125_000.0)
            },
            if high_el {
                in_band(salary, 50_000.0, 100_000.0)
            } else {
                in_band(salary, 25_000.0, 75_000.0)
            },
        ),
        5 => by_age(
            if in_band(salary, 50_000.0, 100_000.0) {
                in_band(loan, 100_000.0, 300_000.0)
            } else {
                in_band(loan, 200_000.0, 400_000.0)
            },
            if in_band(salary, 75_000.0, 125_000.0) {
                in_band(loan, 200_000.0, 400_000.0)
            } else {
                in_band(loan, 300_000.0, 500_000.0)
            },
            if in_band(salary, 25_000.0, 75_000.0) {
                in_band(loan, 300_000.0, 500_000.0)
            } else {
                in_band(loan, 100_000.0, 300_000.0)
            },
        ),
        6 => {
            let total = salary + commission;
            by_age(
                in_band(total, 50_000.0, 100_000.0),
                in_band(total, 75_000.0, 125_000.0),
                in_band(total, 25_000.0, 75_000.0),
            )
        }
        7 => 2.0 * (salary + commission) / 3.0 - loan / 5.0 - 20_000.0 > 0.0,
        8 => 2.0 * (salary + commission) / 3.0 - 5_000.0 * elevel - 20_000.0 > 0.0,
        9 => 2.0 * (salary + commission) / 3.0 - 5_000.0 * elevel - loan / 5.0 - 10_000.0 > 0.0,
        _ => {
            let equity = if hyears >= 20.0 {
                hvalue * (hyears - 20.0) / 10.0
            } else {
                0.0
            };
            2.0 * (salary + commission) / 3.0 - 5_000.0 * elevel + equity / 5.0 - 10_000.0 > 0.0
        }
    };
    positive as u8
}

#[derive(Debug, Clone)]
struct Centroid {
    center: Vec<f64>,
    class: u8,
    std_dev: f64,
}

/// A concept ready for sampling, with any derived state (RBF centroids)
/// precomputed.
#[derive(Debug, Clone)]
pub(crate) struct Concept {
    params: ConceptParams,
    centroids: Vec<Centroid>,
    cumulative_weight: Vec<f64>,
    /// Class to emit next when the family balances classes.
    next_class: u8,
}

impl Concept {
    pub(crate) fn new(params: ConceptParams) -> Result<Self> {
        params.validate()?;
        let mut centroids = Vec::new();
        let mut cumulative_weight = Vec::new();
        if let ConceptParams::Rbf(p) = &params {
            let mut rng = RngState::new(p.centroid_seed);
            let mut acc = 0.0;
            for _ in 0..p.n_centroids {
                let mut center: Vec<f64> = (0..p.dim).map(|_| rng.uniform()).collect();
                let class = rng.below(2) as u8;
                let std_dev = rng.uniform();
                acc += rng.uniform();
                let direction = unit_vector(p.dim, &mut rng);
                for (c, d) in center.iter_mut().zip(&direction) {
                    *c += p.shift * d;
                }
                centroids.push(Centroid {
                    center,
                    class,
                    std_dev,
                });
                cumulative_weight.push(acc);
            }
        }
        Ok(Self {
            params,
            centroids,
            cumulative_weight,
            next_class: 0,
        })
    }

    pub(crate) fn params(&self) -> &ConceptParams {
        &self.params
    }

    /// Draws one noise-free `(x, y)` pair.
    pub(crate) fn sample(&mut self, rng: &mut RngState) -> (Vec<f64>, u8) {
        let balance = match &self.params {
            ConceptParams::Stagger(p) => p.balance_classes,
            ConceptParams::Agrawal(p) => p.balance_classes,
            _ => false,
        };
        if !balance {
            return self.sample_raw(rng);
        }
        let wanted = self.next_class;
        self.next_class ^= 1;
        // both classes have positive mass for every rule, so this terminates
        loop {
            let (x, y) = self.sample_raw(rng);
            if y == wanted {
                return (x, y);
            }
        }
    }

    fn sample_raw(&self, rng: &mut RngState) -> (Vec<f64>, u8) {
        match &self.params {
            ConceptParams::Sea(p) => {
                let x: Vec<f64> = (0..3)
                    .map(|_| rng.uniform_range(p.x_range[0], p.x_range[1]))
                    .collect();
                let y = (x[0] + x[1] <= p.threshold) as u8;
                (x, y)
            }
            ConceptParams::Hyperplane(p) => {
                let x: Vec<f64> = (0..p.weights.len())
                    .map(|_| rng.uniform_range(p.x_range[0], p.x_range[1]))
                    .collect();
                let y = hyperplane_label(p, &x);
                (x, y)
            }
            ConceptParams::Stagger(p) => {
                let x: Vec<f64> = (0..3).map(|_| rng.below(3) as f64).collect();
                let y = stagger_label(p.rule, &x);
                (x, y)
            }
            ConceptParams::AnomalySine(p) => {
                let x = vec![rng.uniform_range(p.context[0], p.context[1]), rng.uniform()];
                let y = sine_label(p.function, &x);
                (x, y)
            }
            ConceptParams::Rbf(_) => {
                let total = *self
                    .cumulative_weight
                    .last()
                    .expect("at least one centroid");
                let pick = rng.uniform() * total;
                let idx = self
                    .cumulative_weight
                    .partition_point(|&w| w <= pick)
                    .min(self.centroids.len() - 1);
                let c = &self.centroids[idx];
                let direction = unit_vector(c.center.len(), rng);
                let magnitude = rng.normal() * c.std_dev;
                let x = c
                    .center
                    .iter()
                    .zip(&direction)
                    .map(|(m, d)| m + d * magnitude)
                    .collect();
                (x, c.class)
            }
            ConceptParams::Agrawal(p) => {
                let salary = rng.uniform_range(20_000.0, 150_000.0);
                let commission = if salary >= 75_000.0 {
                    0.0
                } else {
                    rng.uniform_range(10_000.0, 75_000.0)
                };
                let age = rng.below(61) as f64 + 20.0;
                let elevel = rng.below(5) as f64;
                let car = rng.below(20) as f64 + 1.0;
                let zipcode = rng.below(9) as f64;
                let hvalue = (9.0 - zipcode) * 100_000.0 * rng.uniform_range(0.5, 1.5);
                let hyears = rng.below(30) as f64 + 1.0;
                let loan = rng.uniform_range(0.0, 500_000.0);
                let x = vec![
                    salary, commission, age, elevel, car, zipcode, hvalue, hyears, loan,
                ];
                let y = agrawal_label(p.function, &x);
                (x, y)
            }
        }
    }
}

fn unit_vector(dim: usize, rng: &mut RngState) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}
