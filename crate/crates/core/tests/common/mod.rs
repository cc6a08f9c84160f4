//! Independent oracles shared by the integration and acceptance suites.
//! None of these call into the code path they check.
#![allow(dead_code)]

use driftbench::stats::RngState;

/// Exact two-sample D statistic by evaluating both ECDFs at every sample point.
pub fn ks_d_naive(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&t| (ecdf(a, t) - ecdf(b, t)).abs())
        .fold(0.0, f64::max)
}

/// Permutation p-value of the D statistic: fraction of random relabelings of
/// the pooled sample whose D is at least the observed one.
pub fn ks_permutation_p(a: &[f64], b: &[f64], resamples: usize, rng: &mut RngState) -> f64 {
    let observed = ks_d_naive(a, b);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut hits = 0usize;
    for _ in 0..resamples {
        // Fisher-Yates
        for i in (1..pooled.len()).rev() {
            let j = rng.below(i + 1);
            pooled.swap(i, j);
        }
        let (pa, pb) = pooled.split_at(a.len());
        if ks_d_naive(pa, pb) >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}

/// Exhaustive window-membership scoring: each event goes to the most recent
/// drift whose window contains it; per drift the first such event is the
/// detection and the rest are false alarms.
pub fn score_bruteforce(
    events: &[usize],
    drifts: &[usize],
    window: usize,
) -> (Option<f64>, f64, usize) {
    let mut first_hit: Vec<Option<usize>> = vec![None; drifts.len()];
    let mut fa = 0usize;
    for &e in events {
        let mut owner = None;
        for (k, &p) in drifts.iter().enumerate() {
            if e >= p && e < p + window {
                match owner {
                    Some(o) if drifts[o] >= p => {}
                    _ => owner = Some(k),
                }
            }
        }
        match owner {
            Some(k) if first_hit[k].is_none() => first_hit[k] = Some(e),
            _ => fa += 1,
        }
    }
    let delays: Vec<f64> = first_hit
        .iter()
        .zip(drifts)
        .filter_map(|(h, &p)| h.map(|e| (e - p) as f64))
        .collect();
    let mtd = if delays.is_empty() {
        None
    } else {
        Some(delays.iter().sum::<f64>() / delays.len() as f64)
    };
    let da = if drifts.is_empty() {
        0.0
    } else {
        delays.len() as f64 / drifts.len() as f64
    };
    (mtd, da, fa)
}

/// Noise-free single-concept stream.
pub fn stationary(
    concept: driftbench::stream::ConceptParams,
    length: usize,
    seed: u64,
) -> Vec<driftbench::stream::Instance> {
    use driftbench::stream::{materialize, DriftKind, DriftSpec, StreamSpec};
    let spec = StreamSpec {
        name: "stationary".into(),
        length,
        seed,
        drift: DriftSpec {
            kind: DriftKind::Abrupt,
            width: 1000,
            positions: vec![],
            concepts: vec![concept],
        },
    };
    materialize(&spec).expect("valid stationary spec")
}

/// Noise-free stream switching abruptly from `a` to `b` at `position`.
pub fn switching(
    a: driftbench::stream::ConceptParams,
    b: driftbench::stream::ConceptParams,
    position: usize,
    length: usize,
    seed: u64,
) -> Vec<driftbench::stream::Instance> {
    use driftbench::stream::{materialize, DriftKind, DriftSpec, StreamSpec};
    let spec = StreamSpec {
        name: "switching".into(),
        length,
        seed,
        drift: DriftSpec {
            kind: DriftKind::Abrupt,
            width: 1000,
            positions: vec![position],
            concepts: vec![a, b],
        },
    };
    materialize(&spec).expect("valid switching spec")
}

pub fn sea_box(threshold: f64, lo: f64) -> driftbench::stream::ConceptParams {
    driftbench::stream::ConceptParams::Sea(driftbench::stream::SeaParams {
        threshold,
        x_range: [lo, lo + 10.0],
        noise: 0.0,
    })
}

pub fn sea(threshold: f64) -> driftbench::stream::ConceptParams {
    driftbench::stream::ConceptParams::Sea(driftbench::stream::SeaParams {
        threshold,
        x_range: [0.0, 10.0],
        noise: 0.0,
    })
}

/// Held-out 0/1 accuracy of any labeler.
pub fn accuracy(predict: impl Fn(&[f64]) -> u8, data: &[driftbench::stream::Instance]) -> f64 {
    let hits = data.iter().filter(|i| predict(&i.x) == i.y).count();
    hits as f64 / data.len() as f64
}

/// ADWIN reference over raw values. It replays the bucket-size layout from
/// the merge rule alone and, at each check, tests every bucket boundary with
/// sums and variance recomputed from scratch.
pub struct AdwinOracle {
    pub values: std::collections::VecDeque<f64>,
    /// Bucket sizes, oldest first.
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub max_buckets: usize,
    pub clock: u64,
    pub min_sub: usize,
    pub min_window: usize,
    time: u64,
}

impl AdwinOracle {
    pub fn new(delta: f64) -> Self {
        Self {
            values: Default::default(),
            sizes: Vec::new(),
            delta,
            max_buckets: 5,
            clock: 32,
            min_sub: 5,
            min_window: 10,
            time: 0,
        }
    }

    fn merge(&mut self) {
        let mut size = 1;
        loop {
            let idx: Vec<usize> = (0..self.sizes.len())
                .filter(|&i| self.sizes[i] == size)
                .collect();
            if idx.len() <= self.max_buckets {
                return;
            }
            // two oldest of this size are adjacent; they become one bucket
            self.sizes[idx[0]] = 2 * size;
            self.sizes.remove(idx[1]);
            size *= 2;
        }
    }

    pub fn update(&mut self, v: f64) -> bool {
        self.values.push_back(v);
        self.sizes.push(1);
        self.merge();
        self.time += 1;
        if !self.time.is_multiple_of(self.clock) || self.values.len() <= self.min_window {
            return false;
        }
        let mut changed = false;
        'outer: loop {
            let n = self.values.len();
            let vals: Vec<f64> = self.values.iter().copied().collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let mut c = 0;
            for &s in &self.sizes[..self.sizes.len() - 1] {
                c += s;
                let (n0, n1) = (c, n - c);
                if n0 < self.min_sub || n1 < self.min_sub {
                    continue;
                }
                let u0: f64 = vals[..c].iter().sum();
                let u1: f64 = vals[c..].iter().sum();
                let dd = (2.0 * (n as f64).ln() / self.delta).ln();
                let m = 1.0 / (n0 - self.min_sub + 1) as f64 + 1.0 / (n1 - self.min_sub + 1) as f64;
                let eps = (2.0 * m * var * dd).sqrt() + 2.0 / 3.0 * dd * m;
                if (u0 / n0 as f64 - u1 / n1 as f64).abs() > eps {
                    let drop = self.sizes.remove(0);
                    for _ in 0..drop {
                        self.values.pop_front();
                    }
                    changed = true;
                    if self.values.is_empty() {
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            break;
        }
        changed
    }
}
