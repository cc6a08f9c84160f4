//! Synthetic binary-classification streams with scheduled concept drift.

mod families;
pub mod fixtures;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use families::{
    AgrawalParams, ConceptParams, HyperplaneParams, RbfParams, SeaParams, SineParams,
    StaggerParams, HYPERPLANE_DIM,
};

use crate::error::{Error, Result};
use crate::stats::RngState;
use families::Concept;

/// Upper bound on instances held in memory by [`materialize`].
pub const MATERIALIZE_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub x: Vec<f64>,
    pub y: u8,
    pub index: usize,
    pub concept_id: usize,
}

impl Instance {
    pub fn features(&self) -> &[f64] {
        &self.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Abrupt,
    Gradual,
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::Abrupt => "abrupt",
            DriftKind::Gradual => "gradual",
        }
    }
}

impl std::str::FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abrupt" => Ok(DriftKind::Abrupt),
            "gradual" => Ok(DriftKind::Gradual),
            other => Err(Error::config(
                "kind",
                format!("unknown drift kind `{other}`"),
            )),
        }
    }
}

pub const DEFAULT_GRADUAL_WIDTH: usize = 1_000;

fn default_width() -> usize {
    DEFAULT_GRADUAL_WIDTH
}

/// Drift schedule. Recurrence is expressed by repeating entries of
/// `concepts`, which holds one more entry than `positions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub kind: DriftKind,
    #[serde(default = "default_width")]
    pub width: usize,
    pub positions: Vec<usize>,
    pub concepts: Vec<ConceptParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    #[serde(default)]
    pub name: String,
    pub length: usize,
    pub seed: u64,
    pub drift: DriftSpec,
}

impl StreamSpec {
    /// Default schedule: 90,000 instances with a drift every 15,000.
    pub fn with_default_schedule(name: &str, concepts: Vec<ConceptParams>, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            length: 90_000,
            seed,
            drift: DriftSpec {
                kind: DriftKind::Abrupt,
                width: DEFAULT_GRADUAL_WIDTH,
                positions: (1..=5).map(|k| k * 15_000).collect(),
                concepts,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.drift;
        if d.concepts.len() != d.positions.len() + 1 {
            return Err(Error::config(
                "drift.concepts",
                format!(
                    "need {} concepts for {} drift positions, got {}",
                    d.positions.len() + 1,
                    d.positions.len(),
                    d.concepts.len()
                ),
            ));
        }
        if d.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "drift.positions",
                "positions must be strictly increasing",
            ));
        }
        if let Some(&last) = d.positions.last() {
            if last >= self.length {
                return Err(Error::config(
                    "drift.positions",
                    format!("position {last} is not below stream length {}", self.length),
                ));
            }
        }
        if d.kind == DriftKind::Gradual && d.width == 0 {
            return Err(Error::config(
                "drift.width",
                "gradual drift needs width > 0",
            ));
        }
        let family = d.concepts[0].family_name();
        let dim = d.concepts[0].dim();
        for (i, c) in d.concepts.iter().enumerate() {
            c.validate()?;
            if c.family_name() != family || c.dim() != dim {
                return Err(Error::config(
                    format!("drift.concepts[{i}]"),
                    "all concepts of a stream must share family and dimension",
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.drift.concepts[0].dim()
    }

    /// Same concepts on a new schedule: `length` instances with a drift every
    /// `interval`, truncated to the available concepts.
    pub fn rescaled(&self, length: usize, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::config("drift_interval", "must be positive"));
        }
        let max_drifts = self.drift.concepts.len() - 1;
        let positions: Vec<usize> = (1..)
            .map(|k| k * interval)
            .take_while(|&p| p < length)
            .take(max_drifts)
            .collect();
        let concepts = self.drift.concepts[..positions.len() + 1].to_vec();
        let spec = Self {
            length,
            drift: DriftSpec {
                positions,
                concepts,
                ..self.drift.clone()
            },
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let spec: StreamSpec = toml::from_str(text).map_err(|e| Error::Toml {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml {
            origin: self.name.clone(),
            message: e.to_string(),
        })
    }
}

pub fn drift_points(spec: &StreamSpec) -> Vec<usize> {
    spec.drift.positions.clone()
}

/// Probability that instance `index` belongs to the concept after a gradual
/// drift centred at `position`.
pub fn gradual_switch_probability(index: usize, position: usize, width: usize) -> f64 {
    let z = -4.0 * (index as f64 - position as f64) / width as f64;
    1.0 / (1.0 + z.exp())
}

/// Single-owner iterator over a stream.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    spec: StreamSpec,
    concepts: Vec<Concept>,
    rng: RngState,
    cursor: usize,
}

impl StreamGenerator {
    pub fn new(spec: &StreamSpec) -> Result<Self> {
        spec.validate()?;
        let concepts = spec
            .drift
            .concepts
            .iter()
            .cloned()
            .map(Concept::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            concepts,
            rng: RngState::new(spec.seed),
            cursor: 0,
        })
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    pub fn position(&self) -> usize {
        self.cursor
    }

    fn active_concept(&mut self, index: usize) -> usize {
        let d = &self.spec.drift;
        match d.kind {
            DriftKind::Abrupt => d.positions.partition_point(|&p| p <= index),
            DriftKind::Gradual => {
                let u = self.rng.uniform();
                d.positions
                    .iter()
                    .filter(|&&p| u < gradual_switch_probability(index, p, d.width))
                    .count()
            }
        }
    }

    pub fn next_instance(&mut self) -> Result<Instance> {
        if self.cursor >= self.spec.length {
            return Err(Error::EndOfStream(self.spec.length));
        }
        let index = self.cursor;
        let concept_id = self.active_concept(index);
        let concept = &mut self.concepts[concept_id];
        let (x, mut y) = concept.sample(&mut self.rng);
        let noise = concept.params().noise();
        if noise > 0.0 && self.rng.bernoulli(noise) {
            y ^= 1;
        }
        self.cursor += 1;
        Ok(Instance {
            x,
            y,
            index,
            concept_id,
        })
    }
}

impl Iterator for StreamGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        self.next_instance().ok()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.length - self.cursor;
        (left, Some(left))
    }
}

pub fn materialize(spec: &StreamSpec) -> Result<Vec<Instance>> {
    materialize_with_cap(spec, MATERIALIZE_CAP)
}

pub fn materialize_with_cap(spec: &StreamSpec, cap: usize) -> Result<Vec<Instance>> {
    if spec.length > cap {
        return Err(Error::Resource(format!(
            "stream length {} exceeds the materialization cap {cap}",
            spec.length
        )));
    }
    Ok(StreamGenerator::new(spec)?.collect())
}

/// Writes instances as CSV with header `f0..f{d-1},label,concept`.
pub fn write_csv<W: Write>(instances: &[Instance], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = instances.first() {
        let mut header: Vec<String> = (0..first.x.len()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        header.push("concept".into());
        w.write_record(&header)?;
    }
    for inst in instances {
        let mut row: Vec<String> = inst.x.iter().map(|v| v.to_string()).collect();
        row.push(inst.y.to_string());
        row.push(inst.concept_id.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
