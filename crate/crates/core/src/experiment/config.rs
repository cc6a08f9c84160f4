//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use crate::learners::EnsembleConfig;
use crate::stream::{fixtures, DriftKind, StreamSpec};

pub const DEFAULT_WARMUP: usize = 1250;
const PAPER_INTERVAL: usize = 15_000;
const ABRUPT_WINDOW: usize = 7_500;
const GRADUAL_WINDOW: usize = 9_000;

/// Where a stream definition comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamEntry {
    /// Built-in fixture name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    /// Stream TOML file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Drift kinds to run; empty means the stream's own kind.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kinds: Vec<DriftKind>,
}

/// Shrinks every stream to `length` instances with a drift every `interval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub length: usize,
    pub interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub abrupt: usize,
    pub gradual: usize,
}

impl Windows {
    /// 7,500 / 9,000 at the 15,000-instance drift interval, scaled linearly.
    pub fn for_interval(interval: usize) -> Self {
        Self {
            abrupt: ABRUPT_WINDOW * interval / PAPER_INTERVAL,
            gradual: GRADUAL_WINDOW * interval / PAPER_INTERVAL,
        }
    }

    pub fn get(&self, kind: DriftKind) -> usize {
        match kind {
            DriftKind::Abrupt => self.abrupt,
            DriftKind::Gradual => self.gradual,
        }
    }
}

/// Parameter grid keyed by `"<detector type>.<param>"` or
/// `"ensemble.<param>"`; nested parameters use further dots.
pub type TuningGrid = BTreeMap<String, Vec<serde_json::Value>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    labeled: Option<bool>,
    #[serde(default)]
    warmup: Option<usize>,
    #[serde(default)]
    scale: Option<toml::Value>,
    #[serde(default)]
    windows: Option<toml::Value>,
    #[serde(default)]
    streams: Vec<toml::Value>,
    #[serde(default)]
    ensembles: Vec<toml::Value>,
    #[serde(default)]
    detectors: Vec<toml::Value>,
    #[serde(default)]
    tuning: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Prequential training on true labels after the warm-up.
    pub labeled: bool,
    pub warmup: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    pub windows: Windows,
    pub streams: Vec<StreamEntry>,
    pub ensembles: Vec<EnsembleConfig>,
    pub detectors: Vec<DetectorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningGrid>,
    /// Directory relative stream paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn section<T: serde::de::DeserializeOwned>(field: &str, value: toml::Value) -> Result<T> {
    T::deserialize(value).map_err(|e| Error::config(field, e.message().trim().to_string()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Toml {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        let seeds = raw.seeds.unwrap_or_default();
        let scale: Option<Scale> = raw.scale.map(|v| section("scale", v)).transpose()?;
        let windows = match raw.windows {
            Some(v) => section("windows", v)?,
            None => Windows::for_interval(scale.map_or(PAPER_INTERVAL, |s| s.interval)),
        };
        let streams = raw
            .streams
            .into_iter()
            .enumerate()
            .map(|(i, v)| section(&format!("streams[{i}]"), v))
            .collect::<Result<Vec<StreamEntry>>>()?;
        let ensembles = raw
            .ensembles
            .into_iter()
            .enumerate()
            .map(|(i, v)| section(&format!("ensembles[{i}]"), v))
            .collect::<Result<Vec<EnsembleConfig>>>()?;
        let detectors = raw
            .detectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| section(&format!("detectors[{i}]"), v))
            .collect::<Result<Vec<DetectorConfig>>>()?;
        let tuning = raw
            .tuning
            .map(|t| {
                t.into_iter()
                    .map(|(k, v)| {
                        let field = format!("tuning.{k}");
                        let values: Vec<toml::Value> = section(&field, v)?;
                        let values = values
                            .into_iter()
                            .map(|v| {
                                serde_json::to_value(v)
                                    .map_err(|e| Error::config(&field, e.to_string()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok((k, values))
                    })
                    .collect::<Result<TuningGrid>>()
            })
            .transpose()?;
        let cfg = Self {
            name: raw.name,
            out: raw.out,
            seeds,
            labeled: raw.labeled.unwrap_or(true),
            warmup: raw.warmup.unwrap_or(DEFAULT_WARMUP),
            scale,
            windows,
            streams,
            ensembles,
            detectors,
            tuning,
            base_dir: base_dir.to_path_buf(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, &path.display().to_string(), base)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml {
            origin: "experiment config".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.streams.is_empty() {
            return Err(Error::config("streams", "at least one stream is required"));
        }
        if self.ensembles.is_empty() {
            return Err(Error::config(
                "ensembles",
                "at least one ensemble is required",
            ));
        }
        if self.detectors.is_empty() {
            return Err(Error::config(
                "detectors",
                "at least one detector is required",
            ));
        }
        if let Some(s) = self.scale {
            if s.interval == 0 || s.length <= s.interval {
                return Err(Error::config(
                    "scale",
                    "need interval > 0 and length > interval",
                ));
            }
        }
        if self.windows.abrupt == 0 || self.windows.gradual == 0 {
            return Err(Error::config("windows", "window lengths must be positive"));
        }
        for (i, e) in self.ensembles.iter().enumerate() {
            e.validate()
                .map_err(|err| prefix(err, &format!("ensembles[{i}]")))?;
        }
        for (i, d) in self.detectors.iter().enumerate() {
            d.validate()
                .map_err(|err| prefix(err, &format!("detectors[{i}]")))?;
            if !self.labeled && d.build_loss().is_some() {
                return Err(Error::config(
                    format!("detectors[{i}].type"),
                    format!(
                        "`{}` reads the prediction error and needs labeled = true",
                        d.name()
                    ),
                ));
            }
        }
        for (i, s) in self.streams.iter().enumerate() {
            self.resolve_base(i, s)?;
        }
        if let Some(grid) = &self.tuning {
            validate_grid(grid, &self.detectors)?;
        }
        Ok(())
    }

    fn resolve_base(&self, i: usize, entry: &StreamEntry) -> Result<StreamSpec> {
        let field = format!("streams[{i}]");
        let spec = match (&entry.fixture, &entry.path) {
            (Some(name), None) => fixtures::builtin(name).map_err(|e| prefix(e, &field))?,
            (None, Some(path)) => {
                let full = self.base_dir.join(path);
                StreamSpec::load(&full).map_err(|e| match e {
                    Error::Io { source, .. } => Error::config(
                        format!("{field}.path"),
                        format!("{}: {source}", full.display()),
                    ),
                    other => other,
                })?
            }
            _ => {
                return Err(Error::config(
                    field,
                    "give exactly one of `fixture` or `path`",
                ))
            }
        };
        match self.scale {
            Some(s) => spec
                .rescaled(s.length, s.interval)
                .map_err(|e| prefix(e, &field)),
            None => Ok(spec),
        }
    }

    /// Every configured stream variant as `(spec, drift kind)`, in config order.
    pub fn resolved_streams(&self) -> Result<Vec<StreamSpec>> {
        let mut out = Vec::new();
        for (i, entry) in self.streams.iter().enumerate() {
            let base = self.resolve_base(i, entry)?;
            if entry.kinds.is_empty() {
                out.push(base);
            } else {
                for &kind in &entry.kinds {
                    let mut spec = base.clone();
                    spec.drift.kind = kind;
                    out.push(spec);
                }
            }
        }
        Ok(out)
    }
}

fn prefix(err: Error, field: &str) -> Error {
    match err {
        Error::Config { field: f, message } => Error::Config {
            field: format!("{field}.{f}"),
            message,
        },
        other => other,
    }
}

fn validate_grid(grid: &TuningGrid, detectors: &[DetectorConfig]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config("tuning", "grid has no parameters"));
    }
    for (key, values) in grid {
        let field = format!("tuning.{key}");
        if values.is_empty() {
            return Err(Error::config(field, "no values to try"));
        }
        let Some((head, rest)) = key.split_once('.') else {
            return Err(Error::config(
                field,
                "keys look like `<detector>.<param>` or `ensemble.<param>`",
            ));
        };
        if rest.is_empty() {
            return Err(Error::config(field, "missing parameter name"));
        }
        if head != "ensemble" && !detectors.iter().any(|d| d.name() == head) {
            return Err(Error::config(
                field,
                format!("no configured detector of type `{head}`"),
            ));
        }
    }
    Ok(())
}

/// Replaces the value at a dotted path inside a serialized config.
pub(crate) fn set_path(
    target: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<()> {
    let mut cur = target;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(path, "parameter path runs into a non-table value"))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [0]
[[streams]]
fixture = "SEA0"
[[ensembles]]
type = "idt"
n_members = 3
[[detectors]]
type = "ddm"
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, "test", Path::new("."))
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert!(c.labeled);
        assert_eq!(c.warmup, DEFAULT_WARMUP);
        assert_eq!(
            c.windows,
            Windows {
                abrupt: 7500,
                gradual: 9000
            }
        );
        assert_eq!(c.resolved_streams().unwrap().len(), 1);
    }

    #[test]
    fn scale_shrinks_windows() {
        let text = format!("{MINIMAL}\n[scale]\nlength = 30000\ninterval = 5000\n");
        let c = parse(&text).unwrap();
        assert_eq!(
            c.windows,
            Windows {
                abrupt: 2500,
                gradual: 3000
            }
        );
        let s = &c.resolved_streams().unwrap()[0];
        assert_eq!(s.drift.positions, vec![5000, 10000, 15000, 20000, 25000]);
    }

    #[test]
    fn unknown_detector_names_the_field() {
        let text = MINIMAL.replace("type = \"ddm\"", "type = \"foo\"");
        match parse(&text).unwrap_err() {
            Error::Config { field, message } => {
                assert_eq!(field, "detectors[0]");
                assert!(message.contains("foo"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_are_located() {
        let text = MINIMAL.replace("type = \"ddm\"", "type = \"adwin\"\ndelta = 2.0");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("detectors[0]"), "{err}");
        let text = MINIMAL.replace("seeds = [0]", "seeds = []");
        assert!(parse(&text).unwrap_err().to_string().contains("seeds"));
        let text = MINIMAL.replace("SEA0", "nope");
        assert!(parse(&text).unwrap_err().to_string().contains("streams[0]"));
    }

    #[test]
    fn loss_detectors_need_labels() {
        let text = format!("labeled = false\n{MINIMAL}");
        assert!(parse(&text).unwrap_err().is_config());
    }

    #[test]
    fn grid_validation() {
        let ok = format!("{MINIMAL}\n[tuning]\n\"ddm.drift_level\" = [2.0, 3.0]\n");
        assert_eq!(parse(&ok).unwrap().tuning.unwrap().len(), 1);
        let empty = format!("{MINIMAL}\n[tuning]\n");
        assert!(parse(&empty).unwrap_err().to_string().contains("tuning"));
        let no_values = format!("{MINIMAL}\n[tuning]\n\"ddm.drift_level\" = []\n");
        assert!(parse(&no_values).is_err());
        let wrong = format!("{MINIMAL}\n[tuning]\n\"adwin.delta\" = [0.1]\n");
        assert!(parse(&wrong).is_err());
    }

    #[test]
    fn set_path_nested() {
        let mut v = serde_json::json!({"a": {"b": 1}});
        set_path(&mut v, "a.b", serde_json::json!(2)).unwrap();
        set_path(&mut v, "a.c.d", serde_json::json!(3)).unwrap();
        assert_eq!(v, serde_json::json!({"a": {"b": 2, "c": {"d": 3}}}));
    }
}
