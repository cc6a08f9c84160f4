mod common;

use common::{accuracy, sea, stationary};
use driftbench::learners::{
    Ensemble, EnsembleConfig, EnsembleKind, HoeffdingTree, HoeffdingTreeParams, Member, Mlp,
    MlpParams,
};
use driftbench::stats::{poisson_sample, RngState};
use proptest::prelude::*;

#[test]
fn hoeffding_tree_learns_stationary_sea() {
    let train = stationary(sea(8.0), 10_000, 1);
    let test = stationary(sea(8.0), 2_000, 2);
    let mut tree = HoeffdingTree::new(HoeffdingTreeParams::default());
    for inst in &train {
        tree.learn_one(&inst.x, inst.y, 1.0).unwrap();
    }
    let acc = accuracy(|x| tree.predict(x).unwrap().0, &test);
    assert!(acc >= 0.90, "accuracy {acc}");
}

#[test]
fn mlp_learns_stationary_sea() {
    let train = stationary(sea(8.0), 10_000, 3);
    let test = stationary(sea(8.0), 2_000, 4);
    let mut net = Mlp::new(MlpParams::default(), 3, &mut RngState::new(5)).unwrap();
    for inst in &train {
        net.learn_one(&inst.x, inst.y, 1).unwrap();
    }
    let acc = accuracy(|x| net.predict(x).unwrap().0, &test);
    assert!(acc >= 0.90, "accuracy {acc}");
}

/// Central differences of the summed batch loss, one coordinate at a time.
fn numeric_gradient(net: &Mlp, batch: &[(Vec<f64>, u8)], h: f64) -> Vec<f64> {
    let base = net.parameters();
    (0..base.len())
        .map(|i| {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = base.clone();
            p[i] += h;
            plus.set_parameters(&p).unwrap();
            p[i] -= 2.0 * h;
            minus.set_parameters(&p).unwrap();
            let lp = plus.loss_and_gradient(batch).unwrap().0;
            let lm = minus.loss_and_gradient(batch).unwrap().0;
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let params = MlpParams {
        zero_output_init: false,
        standardize: false,
        hidden: vec![8, 5],
        ..Default::default()
    };
    let mut rng = RngState::new(11);
    let net = Mlp::new(params, 4, &mut rng).unwrap();
    let batch: Vec<(Vec<f64>, u8)> = (0..3)
        .map(|k| ((0..4).map(|_| rng.normal()).collect(), (k % 2) as u8))
        .collect();
    let (_, analytic) = net.loss_and_gradient(&batch).unwrap();
    let numeric = numeric_gradient(&net, &batch, 1e-6);
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(diff / scale <= 1e-4, "relative error {}", diff / scale);
}

#[test]
fn first_split_uses_decisive_feature() {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = RngState::new(1000 + seed);
        let mut tree = HoeffdingTree::new(HoeffdingTreeParams::default());
        let decisive = (seed % 4) as usize;
        while tree.root_split_feature().is_none() {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
            let y = (x[decisive] > 0.4) as u8;
            tree.learn_one(&x, y, 1.0).unwrap();
        }
        hits += (tree.root_split_feature() == Some(decisive)) as usize;
    }
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn poisson_copies_track_lambda_of_error() {
    for (eps, expect) in [(0.25, 1.5), (0.5, 3.0), (0.75, 4.5), (1.0, 6.0)] {
        let lambda = f64::max(0.05, eps * 6.0);
        let mut rng = RngState::new(77);
        let n = 100_000;
        let total: u64 = (0..n)
            .map(|_| poisson_sample(lambda, &mut rng).unwrap() as u64)
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - expect).abs() <= 0.05, "eps {eps}: {mean}");
    }
}

#[test]
fn ensemble_lambda_follows_error_window() {
    let cfg = EnsembleConfig {
        n_members: 3,
        ..Default::default()
    };
    let mut e = Ensemble::new(cfg, 3, 0).unwrap();
    let mut last = 0.0;
    for k in 1..=9 {
        e.clear_error_window();
        for i in 0..100 {
            e.record_error(i < k * 10);
        }
        assert!((e.error_estimate() - k as f64 / 10.0).abs() < 1e-12);
        assert!(e.lambda() >= last);
        last = e.lambda();
    }
}

/// Best-of-100 member accuracy on the test set is an optimistic benchmark,
/// so the comparison is made on means over five seeds.
#[test]
fn ensemble_not_worse_than_best_member() {
    for kind in [EnsembleKind::Idt, EnsembleKind::Mlp] {
        let (mut ens_sum, mut best_sum) = (0.0, 0.0);
        for s in 0..5u64 {
            let train = stationary(sea(8.0), 10_000, 100 + s);
            let test = stationary(sea(8.0), 2_000, 200 + s);
            let cfg = EnsembleConfig {
                kind,
                n_members: 100,
                ..Default::default()
            };
            let mut ens = Ensemble::new(cfg, 3, 300 + s).unwrap();
            for inst in &train {
                ens.observe(&inst.x, inst.y).unwrap();
                ens.learn_one(&inst.x, inst.y).unwrap();
            }
            ens_sum += accuracy(|x| ens.predict(x).unwrap().0, &test);
            best_sum += ens
                .members()
                .iter()
                .map(|m: &Member| accuracy(|x| m.predict(x).unwrap(), &test))
                .fold(0.0, f64::max);
        }
        let (ens_acc, best) = (ens_sum / 5.0, best_sum / 5.0);
        assert!(
            ens_acc >= best - 0.02,
            "{kind:?}: ensemble {ens_acc} best member {best}"
        );
    }
}

#[test]
fn clone_training_leaves_original_predictions() {
    let probe = stationary(sea(8.0), 200, 31);
    let data = stationary(sea(9.0), 1_000, 32);
    for kind in [EnsembleKind::Idt, EnsembleKind::Mlp] {
        let cfg = EnsembleConfig {
            kind,
            n_members: 10,
            ..Default::default()
        };
        let orig = Ensemble::new(cfg, 3, 33).unwrap();
        let before: Vec<_> = probe.iter().map(|i| orig.predict(&i.x).unwrap()).collect();
        let mut copy = orig.clone();
        assert_eq!(
            before,
            probe
                .iter()
                .map(|i| copy.predict(&i.x).unwrap())
                .collect::<Vec<_>>()
        );
        let snap = orig.to_snapshot().unwrap();
        for inst in &data {
            copy.learn_one(&inst.x, inst.y).unwrap();
        }
        let after: Vec<_> = probe.iter().map(|i| orig.predict(&i.x).unwrap()).collect();
        assert_eq!(before, after);
        assert_eq!(snap, orig.to_snapshot().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_node_count_never_decreases(seed in 0u64..1000, cut in 0.1f64..0.9) {
        let mut rng = RngState::new(seed);
        let mut tree = HoeffdingTree::new(HoeffdingTreeParams {
            grace_period: 50,
            ..Default::default()
        });
        let mut last = tree.node_count();
        for _ in 0..2000 {
            let x = [rng.uniform(), rng.uniform()];
            tree.learn_one(&x, (x[0] + 0.3 * x[1] > cut) as u8, 1.0).unwrap();
            prop_assert!(tree.node_count() >= last);
            last = tree.node_count();
        }
    }

    #[test]
    fn tree_distribution_sums_to_one(seed in 0u64..1000) {
        let mut rng = RngState::new(seed);
        let mut tree = HoeffdingTree::new(HoeffdingTreeParams::default());
        for _ in 0..600 {
            let x = [rng.uniform(), rng.uniform(), rng.uniform()];
            tree.learn_one(&x, (x[1] > 0.5) as u8, 1.0).unwrap();
        }
        let p = tree.predict_proba(&[rng.uniform(), rng.uniform(), rng.uniform()]).unwrap();
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mlp_output_stays_in_unit_interval(seed in 0u64..1000, scale in 1.0f64..1e4) {
        let mut rng = RngState::new(seed);
        let mut net = Mlp::new(MlpParams::default(), 2, &mut rng).unwrap();
        for i in 0..300 {
            let x = [rng.normal() * scale, rng.normal()];
            net.learn_one(&x, (i % 3 == 0) as u8, 1 + (i % 4) as u32).unwrap();
        }
        prop_assert!(net.parameters().iter().all(|v| v.is_finite()));
        let p = net.predict_proba(&[scale, -1.0]).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
    }
}
