use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonical_json, fingerprint, ExperimentConfig};
use crate::detectors::{DetectorConfig, D3};
use crate::disagreement::{DisagreementDetector, GUpdate};
use crate::error::{Error, Result};
use crate::eval::{run_prequential, Monitor, RunOptions, RunOutcome};
use crate::learners::{Ensemble, EnsembleConfig};
use crate::report::render_report;
use crate::stream::StreamSpec;

/// One fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPlan {
    pub run_id: String,
    pub stream: StreamSpec,
    pub window_len: usize,
    pub ensemble: EnsembleConfig,
    pub detector: DetectorConfig,
    pub seed: u64,
    pub labeled: bool,
    pub warmup: usize,
    /// Canonical JSON of the tunable part: ensemble and detector.
    pub config_json: String,
}

#[derive(Serialize)]
struct Tunable<'a> {
    ensemble: &'a EnsembleConfig,
    detector: &'a DetectorConfig,
}

#[derive(Serialize)]
struct RunIdentity<'a> {
    stream: &'a StreamSpec,
    config: &'a str,
    seed: u64,
    labeled: bool,
    warmup: usize,
    window_len: usize,
}

fn effective_detector(detector: &DetectorConfig, labeled: bool) -> Result<DetectorConfig> {
    let mut d = detector.clone();
    if let DetectorConfig::Disagreement(c) = &mut d {
        match (labeled, c.g_update) {
            (true, GUpdate::SelfTrain) => c.g_update = GUpdate::External,
            (true, GUpdate::Frozen) => {
                return Err(Error::config(
                    "disagreement.g_update",
                    "`frozen` needs labeled = false; labeled runs always train g",
                ))
            }
            (false, GUpdate::External) => {
                return Err(Error::config(
                    "disagreement.g_update",
                    "`external` needs labeled = true",
                ))
            }
            _ => {}
        }
    }
    Ok(d)
}

/// Every (stream variant × ensemble × detector × seed) run, sorted by id.
pub fn plan_runs(cfg: &ExperimentConfig, seed_offset: u64) -> Result<Vec<RunPlan>> {
    let streams = cfg.resolved_streams()?;
    let mut plans = Vec::new();
    for base in &streams {
        let window_len = cfg.windows.get(base.drift.kind);
        for ensemble in &cfg.ensembles {
            for detector in &cfg.detectors {
                let detector = effective_detector(detector, cfg.labeled)?;
                let config_json = canonical_json(&Tunable {
                    ensemble,
                    detector: &detector,
                })?;
                for &s in &cfg.seeds {
                    let seed = s.wrapping_add(seed_offset);
                    let mut stream = base.clone();
                    stream.seed = base.seed.wrapping_add(seed);
                    let run_id = fingerprint(&canonical_json(&RunIdentity {
                        stream: &stream,
                        config: &config_json,
                        seed,
                        labeled: cfg.labeled,
                        warmup: cfg.warmup,
                        window_len,
                    })?);
                    plans.push(RunPlan {
                        run_id,
                        stream,
                        window_len,
                        ensemble: ensemble.clone(),
                        detector: detector.clone(),
                        seed,
                        labeled: cfg.labeled,
                        warmup: cfg.warmup,
                        config_json: config_json.clone(),
                    });
                }
            }
        }
    }
    plans.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    plans.dedup_by(|a, b| a.run_id == b.run_id);
    Ok(plans)
}

fn monitor_for(plan: &RunPlan) -> Result<Monitor> {
    if let Some(loss) = plan.detector.build_loss() {
        return Ok(Monitor::Loss(loss));
    }
    Ok(match &plan.detector {
        DetectorConfig::D3(p) => Monitor::Features(Box::new(D3::new(p.clone())?)),
        DetectorConfig::Disagreement(c) => {
            Monitor::Disagreement(DisagreementDetector::new(c.clone(), plan.seed)?)
        }
        _ => unreachable!("loss detectors handled above"),
    })
}

pub fn run_one(plan: &RunPlan) -> Result<RunOutcome> {
    let ensemble = Ensemble::new(plan.ensemble.clone(), plan.stream.dim(), plan.seed)?;
    let opts = RunOptions {
        labeled: plan.labeled,
        warmup: plan.warmup,
        window_len: plan.window_len,
    };
    run_prequential(&plan.stream, ensemble, monitor_for(plan)?, &opts)
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "run_id",
    "stream",
    "detector",
    "ensemble_type",
    "drift_kind",
    "mtd",
    "da",
    "fa",
    "mean_acc",
    "seed",
    "config_json",
];

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub stream: String,
    pub detector: String,
    pub ensemble_type: String,
    pub drift_kind: String,
    pub mtd: Option<f64>,
    pub da: f64,
    pub fa: usize,
    pub mean_acc: f64,
    pub seed: u64,
    pub config_json: String,
}

/// One line of `detections.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub run_id: String,
    pub stream: String,
    pub drift_kind: String,
    pub ensemble_type: String,
    pub detector: String,
    pub seed: u64,
    pub index: usize,
    pub batch_index: Option<u64>,
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub detections: Vec<DetectionRow>,
    /// `(run_id, index, accuracy)`.
    pub traces: Vec<(String, usize, f64)>,
    /// `(run_id, error message)` of runs that failed.
    pub failures: Vec<(String, String)>,
    pub notices: Vec<String>,
}

/// Runs every plan on at most `jobs` threads. A failing run is recorded and
/// does not stop the others.
pub fn execute(plans: &[RunPlan], jobs: usize) -> Result<ExperimentOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| plans.par_iter().map(run_one).collect());
    let mut out = ExperimentOutcome::default();
    for (plan, result) in plans.iter().zip(results) {
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                out.failures.push((plan.run_id.clone(), e.to_string()));
                continue;
            }
        };
        let stream = plan.stream.name.clone();
        let drift_kind = plan.stream.drift.kind.as_str().to_string();
        let ensemble_type = plan.ensemble.kind.as_str().to_string();
        let detector = plan.detector.name().to_string();
        for n in &outcome.notices {
            out.notices.push(format!("{}: {n}", plan.run_id));
        }
        for e in &outcome.events {
            out.detections.push(DetectionRow {
                run_id: plan.run_id.clone(),
                stream: stream.clone(),
                drift_kind: drift_kind.clone(),
                ensemble_type: ensemble_type.clone(),
                detector: detector.clone(),
                seed: plan.seed,
                index: e.index,
                batch_index: e.batch_index,
            });
        }
        for &(i, acc) in &outcome.accuracy_trace {
            out.traces.push((plan.run_id.clone(), i, acc));
        }
        out.rows.push(ResultRow {
            run_id: plan.run_id.clone(),
            stream,
            detector,
            ensemble_type,
            drift_kind,
            mtd: outcome.score.mtd,
            da: outcome.score.da,
            fa: outcome.score.fa,
            mean_acc: outcome.mean_acc,
            seed: plan.seed,
            config_json: plan.config_json.clone(),
        });
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Resource(format!("csv buffer: {e}")))
}

/// Writes results.csv, detections.jsonl, traces.csv and report.md.
pub fn write_outputs(dir: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_bytes = results_csv(&outcome.rows)?;
    write_file(&dir.join("results.csv"), &csv_bytes)?;

    let mut jsonl = Vec::new();
    for d in &outcome.detections {
        serde_json::to_writer(&mut jsonl, d)?;
        jsonl.push(b'\n');
    }
    write_file(&dir.join("detections.jsonl"), &jsonl)?;

    let mut traces = Vec::new();
    writeln!(traces, "run_id,index,accuracy").expect("writing to a Vec");
    for (id, i, acc) in &outcome.traces {
        writeln!(traces, "{id},{i},{acc}").expect("writing to a Vec");
    }
    write_file(&dir.join("traces.csv"), &traces)?;

    let report = render_report(&outcome.rows);
    write_file(&dir.join("report.md"), report.as_bytes())?;
    Ok(())
}
