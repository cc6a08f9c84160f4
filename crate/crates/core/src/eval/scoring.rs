use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detection quality of one run against its drift schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Mean delay over detected drifts; `None` when nothing was detected.
    pub mtd: Option<f64>,
    pub da: f64,
    pub fa: usize,
    /// Delay per drift, `None` for missed ones.
    pub delays: Vec<Option<usize>>,
}

/// Scores sorted alarm indices against drift positions with detection
/// windows `[p, p + window_len)`. An alarm belongs to the latest drift whose
/// window holds it; the first alarm in a window is the detection and every
/// other alarm is false.
pub fn score_detections(
    events: &[usize],
    drift_points: &[usize],
    window_len: usize,
) -> Result<Score> {
    if events.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("detection events must be sorted ascending"));
    }
    if drift_points.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("drift points must be sorted ascending"));
    }
    let mut delays: Vec<Option<usize>> = vec![None; drift_points.len()];
    let mut fa = 0;
    for &e in events {
        let owner = drift_points
            .iter()
            .rposition(|&p| p <= e && e < p.saturating_add(window_len));
        match owner {
            Some(d) if delays[d].is_none() => delays[d] = Some(e - drift_points[d]),
            _ => fa += 1,
        }
    }
    let hits: Vec<usize> = delays.iter().flatten().copied().collect();
    let mtd = if hits.is_empty() {
        None
    } else {
        Some(hits.iter().sum::<usize>() as f64 / hits.len() as f64)
    };
    let da = if drift_points.is_empty() {
        0.0
    } else {
        hits.len() as f64 / drift_points.len() as f64
    };
    Ok(Score {
        mtd,
        da,
        fa,
        delays,
    })
}

/// One tuning candidate's aggregate metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub fingerprint: String,
    pub da: f64,
    pub fa: f64,
    pub mtd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub candidate: Candidate,
    /// `None` when the set has a single member and no range to normalize by.
    pub score: Option<f64>,
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// `0.5·DA + 0.3·(1 − FA_norm) + 0.2·(1 − MTD_norm)` with min-max
/// normalization over the set. A missing MTD counts as the set maximum.
/// Sorted best first; equal scores fall back to fingerprint order.
pub fn tuning_score(candidates: &[Candidate]) -> Vec<Ranked> {
    if candidates.len() < 2 {
        return candidates
            .iter()
            .map(|c| Ranked {
                candidate: c.clone(),
                score: None,
            })
            .collect();
    }
    let (fa_lo, fa_hi) = min_max(candidates.iter().map(|c| c.fa));
    let defined = candidates.iter().filter_map(|c| c.mtd);
    let (mtd_lo, mtd_hi) = min_max(defined.clone());
    let mut ranked: Vec<Ranked> = candidates
        .iter()
        .map(|c| {
            let fa_n = normalize(c.fa, fa_lo, fa_hi);
            let mtd_n = match c.mtd {
                Some(m) => normalize(m, mtd_lo, mtd_hi),
                None => 1.0,
            };
            Ranked {
                candidate: c.clone(),
                score: Some(0.5 * c.da + 0.3 * (1.0 - fa_n) + 0.2 * (1.0 - mtd_n)),
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&a.score.unwrap_or(f64::NEG_INFINITY))
            .then_with(|| a.candidate.fingerprint.cmp(&b.candidate.fingerprint))
    });
    ranked
}
