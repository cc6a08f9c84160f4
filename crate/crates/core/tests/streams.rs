mod common;

use driftbench::stream::{
    drift_points, fixtures, materialize, ConceptParams, DriftKind, DriftSpec, Instance, StreamSpec,
};
use proptest::prelude::*;

fn single(concept: ConceptParams, length: usize, seed: u64) -> Vec<Instance> {
    common::stationary(concept, length, seed)
}

fn band(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

/// Agrawal functions written from the generator's published rule table.
fn agrawal_oracle(f: u8, x: &[f64]) -> bool {
    let (sal, com, age, el, hv, hy, loan) = (x[0], x[1], x[2], x[3], x[6], x[7], x[8]);
    let group = if age < 40.0 {
        0
    } else if age < 60.0 {
        1
    } else {
        2
    };
    let sal_bands = [(50e3, 100e3), (75e3, 125e3), (25e3, 75e3)];
    let el_bands = [(0.0, 1.0), (1.0, 3.0), (2.0, 4.0)];
    let disposable = 2.0 * (sal + com) / 3.0;
    match f {
        1 => group != 1,
        2 => band(sal, sal_bands[group].0, sal_bands[group].1),
        3 => band(el, el_bands[group].0, el_bands[group].1),
        4 => {
            let (lo, hi) = el_bands[group];
            let (a, b) = match (group, band(el, lo, hi)) {
                (0, true) => (25e3, 75e3),
                (0, false) => (50e3, 100e3),
                (1, true) => (50e3, 100e3),
                (1, false) => (75e3, 125e3),
                (_, true) => (50e3, 100e3),
                (_, false) => (25e3, 75e3),
            };
            band(sal, a, b)
        }
        5 => {
            let (lo, hi) = sal_bands[group];
            let (a, b) = match (group, band(sal, lo, hi)) {
                (0, true) => (100e3, 300e3),
                (0, false) => (200e3, 400e3),
                (1, true) => (200e3, 400e3),
                (1, false) => (300e3, 500e3),
                (_, true) => (300e3, 500e3),
                (_, false) => (100e3, 300e3),
            };
            band(loan, a, b)
        }
        6 => band(sal + com, sal_bands[group].0, sal_bands[group].1),
        7 => disposable - loan / 5.0 - 20e3 > 0.0,
        8 => disposable - 5e3 * el - 20e3 > 0.0,
        9 => disposable - 5e3 * el - loan / 5.0 - 10e3 > 0.0,
        _ => {
            let equity = if hy >= 20.0 {
                hv * (hy - 20.0) / 10.0
            } else {
                0.0
            };
            disposable - 5e3 * el + equity / 5.0 - 10e3 > 0.0
        }
    }
}

fn oracle(concept: &ConceptParams, x: &[f64]) -> Option<bool> {
    Some(match concept {
        ConceptParams::Sea(p) => x[0] + x[1] <= p.threshold,
        ConceptParams::Hyperplane(p) => {
            let dot: f64 = x.iter().zip(&p.weights).map(|(a, w)| a * w).sum();
            let centre = (p.x_range[0] + p.x_range[1]) / 2.0;
            let offset = p.offset.unwrap_or(centre * p.weights.iter().sum::<f64>());
            dot >= offset
        }
        ConceptParams::Stagger(p) => {
            let (size, color, shape) = (x[0], x[1], x[2]);
            match p.rule {
                1 => size == 0.0 && color == 0.0,
                2 => color == 1.0 || shape == 0.0,
                _ => size != 0.0,
            }
        }
        ConceptParams::AnomalySine(p) => {
            let curve = if p.function <= 2 {
                x[0].sin()
            } else {
                0.5 + 0.3 * (3.0 * std::f64::consts::PI * x[0]).sin()
            };
            (x[1] < curve) == (p.function % 2 == 1)
        }
        ConceptParams::Agrawal(p) => agrawal_oracle(p.function, x),
        ConceptParams::Rbf(_) => return None,
    })
}

#[test]
fn labels_follow_each_concepts_rule() {
    for name in fixtures::names() {
        let spec = fixtures::builtin(name).unwrap();
        for (k, concept) in spec.drift.concepts.iter().enumerate() {
            let data = single(concept.clone(), 10_000, 40 + k as u64);
            let mut flipped = 0usize;
            for inst in &data {
                if let Some(want) = oracle(concept, &inst.x) {
                    flipped += (inst.y != want as u8) as usize;
                    if concept.noise() == 0.0 {
                        assert_eq!(inst.y, want as u8, "{name} concept {k} at {:?}", inst.x);
                    }
                }
            }
            let rate = flipped as f64 / data.len() as f64;
            assert!(
                (rate - concept.noise()).abs() < 0.015,
                "{name} concept {k}: flip rate {rate} vs noise {}",
                concept.noise()
            );
        }
    }
}

#[test]
fn rbf_labels_are_not_constant() {
    for name in ["RBF", "RBF2"] {
        let spec = fixtures::builtin(name).unwrap();
        let data = single(spec.drift.concepts[0].clone(), 10_000, 3);
        let ones = data.iter().filter(|i| i.y == 1).count();
        assert!((1000..9000).contains(&ones), "{name}: {ones}");
    }
}

#[test]
fn gradual_occupancy_follows_the_sigmoid() {
    let (p, w) = (5_000usize, 1_000usize);
    for seed in 0..5 {
        let spec = StreamSpec {
            name: "gradual".into(),
            length: 10_000,
            seed,
            drift: DriftSpec {
                kind: DriftKind::Gradual,
                width: w,
                positions: vec![p],
                concepts: vec![common::sea(8.0), common::sea(9.0)],
            },
        };
        let data = materialize(&spec).unwrap();
        let (lo, hi) = (p - w / 2, p + w / 2);
        let expected: f64 = (lo..hi)
            .map(|i| 1.0 / (1.0 + (-4.0 * (i as f64 - p as f64) / w as f64).exp()))
            .sum::<f64>()
            / (hi - lo) as f64;
        let observed =
            data[lo..hi].iter().filter(|i| i.concept_id == 1).count() as f64 / (hi - lo) as f64;
        assert!(
            (observed - expected).abs() <= 0.05,
            "{observed} vs {expected}"
        );
        assert!(data[..1000].iter().all(|i| i.concept_id == 0));
        assert!(data[9000..].iter().all(|i| i.concept_id == 1));
    }
}

#[test]
fn abrupt_concepts_step_at_the_schedule() {
    let spec = fixtures::builtin("SEA0").unwrap();
    let data = materialize(&spec).unwrap();
    let points = drift_points(&spec);
    assert_eq!(points, vec![15_000, 30_000, 45_000, 60_000, 75_000]);
    for inst in &data {
        let expected = points.iter().filter(|&&p| p <= inst.index).count();
        assert_eq!(inst.concept_id, expected);
    }
}

#[test]
fn classes_are_balanced_enough() {
    for name in ["SEA0", "SEA1", "SEA2", "Stagger", "Agrawal"] {
        let spec = fixtures::builtin(name).unwrap();
        for (k, concept) in spec.drift.concepts.iter().enumerate() {
            let data = single(concept.clone(), 10_000, 7);
            let ones = data.iter().filter(|i| i.y == 1).count();
            assert!(
                (2_000..=8_000).contains(&ones),
                "{name} concept {k}: {ones} positives"
            );
        }
    }
}

#[test]
fn seeds_reproduce_and_differ() {
    let spec = fixtures::builtin("Hyp0")
        .unwrap()
        .rescaled(1_000, 200)
        .unwrap();
    let a = materialize(&spec).unwrap();
    assert_eq!(a, materialize(&spec).unwrap());
    let mut other = spec.clone();
    other.seed += 1;
    assert_ne!(a, materialize(&other).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn instances_are_well_formed(seed in 0u64..10_000, which in 0usize..12) {
        let name = fixtures::names().nth(which).unwrap();
        let spec = fixtures::builtin(name).unwrap().rescaled(600, 100).unwrap();
        let spec = StreamSpec { seed, ..spec };
        let data = materialize(&spec).unwrap();
        prop_assert_eq!(data.len(), 600);
        for (i, inst) in data.iter().enumerate() {
            prop_assert_eq!(inst.index, i);
            prop_assert_eq!(inst.x.len(), spec.dim());
            prop_assert!(inst.y <= 1);
            prop_assert!(inst.x.iter().all(|v| v.is_finite()));
        }
    }
}
