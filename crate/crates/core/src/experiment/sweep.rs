use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::set_path;
use super::runner::{execute, plan_runs, write_outputs, ExperimentOutcome, ResultRow};
use super::{fingerprint, ExperimentConfig};
use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use crate::eval::{tuning_score, Candidate};
use crate::learners::EnsembleConfig;

/// Cartesian product of the values for `keys` (with their key suffixes)
/// applied to `base`.
fn expand<T>(base: &T, keys: &[(&str, &str, &[serde_json::Value])]) -> Result<Vec<T>>
where
    T: Serialize + DeserializeOwned,
{
    let mut out = vec![serde_json::to_value(base)?];
    for &(_, path, values) in keys {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for v in &out {
            for value in values {
                let mut w = v.clone();
                set_path(&mut w, path, value.clone())?;
                next.push(w);
            }
        }
        out = next;
    }
    out.into_iter()
        .zip(std::iter::repeat(keys))
        .map(|(v, keys)| {
            serde_json::from_value(v).map_err(|e| {
                let names: Vec<&str> = keys.iter().map(|k| k.0).collect();
                Error::config(format!("tuning.{}", names.join(",")), e.to_string())
            })
        })
        .collect()
}

/// Ensembles and detectors spanned by the tuning grid, plus the number of
/// grid points.
pub fn expand_grid(
    cfg: &ExperimentConfig,
) -> Result<(Vec<EnsembleConfig>, Vec<DetectorConfig>, usize)> {
    let grid = cfg
        .tuning
        .as_ref()
        .ok_or_else(|| Error::config("tuning", "sweep needs a [tuning] grid"))?;
    let size = grid.values().map(Vec::len).product();
    let keys_for = |head: &str| -> Vec<(&str, &str, &[serde_json::Value])> {
        grid.iter()
            .filter_map(|(k, v)| {
                let (h, rest) = k.split_once('.')?;
                (h == head).then_some((k.as_str(), rest, v.as_slice()))
            })
            .collect()
    };
    let ens_keys = keys_for("ensemble");
    let mut ensembles = Vec::new();
    for e in &cfg.ensembles {
        for v in expand(e, &ens_keys)? {
            v.validate()
                .map_err(|err| Error::config("tuning", err.to_string()))?;
            ensembles.push(v);
        }
    }
    let mut detectors = Vec::new();
    for d in &cfg.detectors {
        for v in expand(d, &keys_for(d.name()))? {
            v.validate()
                .map_err(|err| Error::config("tuning", err.to_string()))?;
            detectors.push(v);
        }
    }
    Ok((ensembles, detectors, size))
}

/// One candidate's aggregate over all of its runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub ensemble_type: String,
    pub detector: String,
    pub rank: usize,
    pub fingerprint: String,
    pub score: Option<f64>,
    pub da: f64,
    pub fa: f64,
    pub mtd: Option<f64>,
    pub runs: usize,
    pub config_json: String,
}

/// Groups result rows by (ensemble type, detector) and ranks the distinct
/// configurations inside each group. A candidate's DA and FA are means over
/// its runs; its MTD is the mean over runs that detected anything.
pub fn rank_candidates(rows: &[ResultRow]) -> Vec<TuningRow> {
    let mut groups: BTreeMap<(String, String), BTreeMap<String, Vec<&ResultRow>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.ensemble_type.clone(), r.detector.clone()))
            .or_default()
            .entry(r.config_json.clone())
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((ens, det), configs) in groups {
        let mut by_fp = BTreeMap::new();
        let candidates: Vec<Candidate> = configs
            .iter()
            .map(|(json, runs)| {
                let n = runs.len() as f64;
                let mtds: Vec<f64> = runs.iter().filter_map(|r| r.mtd).collect();
                let fp = fingerprint(json);
                by_fp.insert(fp.clone(), (json.clone(), runs.len()));
                Candidate {
                    fingerprint: fp,
                    da: runs.iter().map(|r| r.da).sum::<f64>() / n,
                    fa: runs.iter().map(|r| r.fa as f64).sum::<f64>() / n,
                    mtd: (!mtds.is_empty()).then(|| mtds.iter().sum::<f64>() / mtds.len() as f64),
                }
            })
            .collect();
        for (rank, r) in tuning_score(&candidates).into_iter().enumerate() {
            let (json, runs) = by_fp[&r.candidate.fingerprint].clone();
            out.push(TuningRow {
                ensemble_type: ens.clone(),
                detector: det.clone(),
                rank: rank + 1,
                fingerprint: r.candidate.fingerprint,
                score: r.score,
                da: r.candidate.da,
                fa: r.candidate.fa,
                mtd: r.candidate.mtd,
                runs,
                config_json: json,
            });
        }
    }
    out
}

#[derive(Deserialize)]
struct TunableOwned {
    ensemble: EnsembleConfig,
    detector: DetectorConfig,
}

pub struct SweepOutcome {
    pub experiment: ExperimentOutcome,
    pub tuning: Vec<TuningRow>,
    /// `(file name, config)` of each group's winner.
    pub best: Vec<(String, ExperimentConfig)>,
    pub warnings: Vec<String>,
}

/// Runs the whole grid and picks a winner per (ensemble type, detector).
pub fn sweep(cfg: &ExperimentConfig, seed_offset: u64, jobs: usize) -> Result<SweepOutcome> {
    let (ensembles, detectors, size) = expand_grid(cfg)?;
    let mut warnings = Vec::new();
    if size == 1 {
        warnings.push("tuning grid has a single point; nothing to compare".to_string());
    }
    let grid_cfg = ExperimentConfig {
        ensembles,
        detectors,
        tuning: None,
        ..cfg.clone()
    };
    let plans = plan_runs(&grid_cfg, seed_offset)?;
    let experiment = execute(&plans, jobs)?;
    let tuning = rank_candidates(&experiment.rows);
    let mut best = Vec::new();
    for t in tuning.iter().filter(|t| t.rank == 1) {
        let winner: TunableOwned = serde_json::from_str(&t.config_json)?;
        let streams = cfg
            .streams
            .iter()
            .map(|s| {
                let mut s = s.clone();
                if let Some(p) = &s.path {
                    let joined = cfg.base_dir.join(p);
                    s.path = Some(fs::canonicalize(&joined).unwrap_or(joined));
                }
                s
            })
            .collect();
        best.push((
            format!("best_{}_{}.toml", t.ensemble_type, t.detector),
            ExperimentConfig {
                out: None,
                streams,
                ensembles: vec![winner.ensemble],
                detectors: vec![winner.detector],
                tuning: None,
                ..cfg.clone()
            },
        ));
    }
    Ok(SweepOutcome {
        experiment,
        tuning,
        best,
        warnings,
    })
}

impl SweepOutcome {
    /// The experiment outputs plus tuning.csv and one best-config file per group.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_outputs(dir, &self.experiment)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &self.tuning {
            w.serialize(t)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Resource(format!("csv buffer: {e}")))?;
        let path = dir.join("tuning.csv");
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        for (name, cfg) in &self.best {
            let path = dir.join(name);
            fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
