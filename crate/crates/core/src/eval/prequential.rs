//! Test-then-train runner feeding one drift monitor.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::scoring::{score_detections, Score};
use crate::detectors::{FeatureDetector, LossDetector};
use crate::disagreement::{DisagreementDetector, DriftDecision, GUpdate};
use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::stream::{drift_points, StreamGenerator, StreamSpec};

pub const ACCURACY_WINDOW: usize = 1000;
pub const ACCURACY_EVERY: usize = 500;

/// What watches the stream for drift.
pub enum Monitor {
    /// Fed the ensemble's 0/1 prequential error.
    Loss(LossDetector),
    /// Fed raw feature vectors only.
    Features(Box<dyn FeatureDetector + Send>),
    /// Fed unlabeled batches; may update the ensemble itself.
    Disagreement(DisagreementDetector),
    None,
}

impl Monitor {
    pub fn name(&self) -> &'static str {
        match self {
            Monitor::Loss(d) => d.name(),
            Monitor::Features(d) => d.name(),
            Monitor::Disagreement(_) => "disagreement",
            Monitor::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Whether the ensemble trains on true labels after the warm-up.
    pub labeled: bool,
    /// Leading instances used as labeled initial training data; batches for
    /// the disagreement monitor start right after them.
    pub warmup: usize,
    /// Detection window length used for scoring.
    pub window_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub index: usize,
    pub detector: String,
    pub batch_index: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub events: Vec<DetectionEvent>,
    pub score: Score,
    /// `(index, accuracy over the last 1000 instances)` every 500 instances.
    pub accuracy_trace: Vec<(usize, f64)>,
    pub mean_acc: f64,
    pub decisions: Vec<DriftDecision>,
    pub notices: Vec<String>,
}

struct Tracker {
    window: VecDeque<bool>,
    hits_in_window: usize,
    total_hits: usize,
    seen: usize,
    trace: Vec<(usize, f64)>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            window: VecDeque::with_capacity(ACCURACY_WINDOW + 1),
            hits_in_window: 0,
            total_hits: 0,
            seen: 0,
            trace: Vec::new(),
        }
    }

    fn push(&mut self, index: usize, correct: bool) {
        self.seen += 1;
        self.total_hits += correct as usize;
        self.window.push_back(correct);
        self.hits_in_window += correct as usize;
        if self.window.len() > ACCURACY_WINDOW {
            self.hits_in_window -= self.window.pop_front().expect("non-empty") as usize;
        }
        if (index + 1).is_multiple_of(ACCURACY_EVERY) {
            self.trace
                .push((index, self.hits_in_window as f64 / self.window.len() as f64));
        }
    }
}

/// Prequential run of `ensemble` over `spec` with `monitor`.
///
/// Every instance is predicted before any training on it. With the
/// disagreement monitor, training on a batch waits until the batch has been
/// tested, so the ensemble that pseudo-labels a batch has not seen it.
pub fn run_prequential(
    spec: &StreamSpec,
    mut ensemble: Ensemble,
    mut monitor: Monitor,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    if spec.dim() != ensemble.dim() {
        return Err(Error::config(
            "ensemble",
            format!(
                "stream `{}` has {} features but the ensemble expects {}",
                spec.name,
                spec.dim(),
                ensemble.dim()
            ),
        ));
    }
    if !opts.labeled && matches!(monitor, Monitor::Loss(_)) {
        return Err(Error::config(
            "detectors",
            "loss-based detectors need labeled runs",
        ));
    }
    if let Monitor::Disagreement(d) = &monitor {
        if opts.labeled != (d.config().g_update == GUpdate::External) {
            return Err(Error::config(
                "disagreement.g_update",
                "labeled runs need g_update = \"external\" and unlabeled runs must not use it",
            ));
        }
    }
    let name = monitor.name().to_string();
    let mut gen = StreamGenerator::new(spec)?;
    let mut tracker = Tracker::new();
    let mut events = Vec::new();
    let mut decisions = Vec::new();
    let mut notices = Vec::new();
    let batch_size = match &monitor {
        Monitor::Disagreement(d) => d.config().batch_size,
        _ => 0,
    };
    let mut pending: Vec<(Vec<f64>, u8)> = Vec::with_capacity(batch_size);

    let mut flush = |pending: &mut Vec<(Vec<f64>, u8)>,
                     ensemble: &mut Ensemble,
                     monitor: &mut Monitor,
                     last_index: usize,
                     events: &mut Vec<DetectionEvent>|
     -> Result<()> {
        let Monitor::Disagreement(det) = monitor else {
            return Ok(());
        };
        let features: Vec<Vec<f64>> = pending.iter().map(|(x, _)| x.clone()).collect();
        if features.len() >= det.min_batch() {
            let decision = det.step(ensemble, &features)?;
            if decision.drift {
                events.push(DetectionEvent {
                    index: last_index,
                    detector: "disagreement".into(),
                    batch_index: Some(decision.batch_index),
                });
            }
            decisions.push(decision);
        } else {
            notices.push(format!(
                "skipped final batch of {} instances (minimum {})",
                features.len(),
                det.min_batch()
            ));
        }
        if opts.labeled {
            for (x, y) in pending.iter() {
                ensemble.learn_one(x, *y)?;
            }
        }
        pending.clear();
        Ok(())
    };

    for inst in gen.by_ref() {
        let i = inst.index;
        let (label, _) = ensemble.predict(&inst.x)?;
        let correct = label == inst.y;
        tracker.push(i, correct);
        let warm = i < opts.warmup;
        if warm || opts.labeled {
            ensemble.record_error(!correct);
        }
        if warm {
            ensemble.learn_one(&inst.x, inst.y)?;
            continue;
        }
        match &mut monitor {
            Monitor::Loss(d) => {
                if d.update(if correct { 0.0 } else { 1.0 })?.is_drift() {
                    events.push(DetectionEvent {
                        index: i,
                        detector: name.clone(),
                        batch_index: None,
                    });
                }
            }
            Monitor::Features(d) => {
                if d.update(&inst.x)?.is_drift() {
                    events.push(DetectionEvent {
                        index: i,
                        detector: name.clone(),
                        batch_index: None,
                    });
                }
            }
            Monitor::Disagreement(_) => {
                pending.push((inst.x, inst.y));
                if pending.len() == batch_size {
                    flush(&mut pending, &mut ensemble, &mut monitor, i, &mut events)?;
                }
                continue;
            }
            Monitor::None => {}
        }
        if opts.labeled {
            ensemble.learn_one(&inst.x, inst.y)?;
        }
    }
    if !pending.is_empty() {
        let last = spec.length - 1;
        flush(&mut pending, &mut ensemble, &mut monitor, last, &mut events)?;
    }

    let idx: Vec<usize> = events.iter().map(|e| e.index).collect();
    let score = score_detections(&idx, &drift_points(spec), opts.window_len)?;
    let mean_acc = if tracker.seen == 0 {
        0.0
    } else {
        tracker.total_hits as f64 / tracker.seen as f64
    };
    Ok(RunOutcome {
        events,
        score,
        accuracy_trace: tracker.trace,
        mean_acc,
        decisions,
        notices,
    })
}
