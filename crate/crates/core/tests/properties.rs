mod common;

use activetree::acquisition::{ec2_cut_weight, ec2_gain, ec2_objective, ig_gain, us_gain, Criterion, ObservationSet};
use activetree::belief::{class_posterior, hypothesis_marginal, BeliefState, DriftConfig, ThetaTable};
use activetree::continuous::{
    build_threshold_grid, exp3_distribution, normalized_gain, select_threshold_exhaustive, ThresholdBandit, ThresholdGrid,
};
use activetree::datastream::{f_measure, Confusion, StaggerObject};
use activetree::hypotheses::HypothesisSet;
use activetree::learner::{ofs_estimate, ofs_update, OfsConfig, OfsState};
use common::*;
use proptest::prelude::*;

fn theta_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = ThetaTable> {
    (1..=max_n, 2..=max_m).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.02f64..0.98, m), n),
            prop::collection::vec(0.05f64..1.0, m),
        )
            .prop_map(|(rows, prior)| {
                let total: f64 = prior.iter().sum();
                ThetaTable::new(rows, prior.iter().map(|p| p / total).collect()).unwrap()
            })
    })
}

/// Table plus a full realization of its features.
fn instance(max_n: usize) -> impl Strategy<Value = (ThetaTable, Vec<bool>)> {
    theta_strategy(max_n, 3).prop_flat_map(|t| {
        let n = t.n();
        (Just(t), prop::collection::vec(any::<bool>(), n))
    })
}

proptest! {
    #[test]
    fn posterior_is_a_distribution((theta, bits) in instance(6), mask in prop::collection::vec(any::<bool>(), 6)) {
        let mut obs = ObservationSet::new();
        for (i, &b) in bits.iter().enumerate() {
            if mask[i] {
                obs.push(i, b, 1.0).unwrap();
            }
        }
        let p = class_posterior(&theta, &obs).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|q| (0.0..=1.0).contains(q)));
    }

    #[test]
    fn posterior_ignores_observation_order((theta, bits) in instance(6)) {
        let mut forward = ObservationSet::new();
        let mut backward = ObservationSet::new();
        for (i, &b) in bits.iter().enumerate() {
            forward.push(i, b, 1.0).unwrap();
        }
        for (i, &b) in bits.iter().enumerate().rev() {
            backward.push(i, b, 1.0).unwrap();
        }
        let (f, b) = (class_posterior(&theta, &forward).unwrap(), class_posterior(&theta, &backward).unwrap());
        for (x, y) in f.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_sum_to_one(theta in theta_strategy(6, 3)) {
        let total: f64 = all_patterns(theta.n()).iter().map(|b| hypothesis_marginal(&theta, b).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditioning_commutes((theta, bits) in instance(5), a in 0usize..5, b in 0usize..5) {
        let n = theta.n();
        let (a, b) = (a % n, b % n);
        prop_assume!(a != b);
        let set = HypothesisSet::enumerate(&theta).unwrap();
        let ab = set.condition(a, bits[a]).unwrap().condition(b, bits[b]).unwrap();
        let ba = set.condition(b, bits[b]).unwrap().condition(a, bits[a]).unwrap();
        for k in 0..set.len() {
            prop_assert_eq!(ab.is_alive(k), ba.is_alive(k));
            prop_assert!((ab.mass(k) - ba.mass(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn alive_masses_renormalize((theta, bits) in instance(5), f in 0usize..5) {
        let f = f % theta.n();
        let set = HypothesisSet::enumerate(&theta).unwrap().condition(f, bits[f]).unwrap();
        let total: f64 = set.alive_indices().map(|k| set.mass(k)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gains_match_reference((theta, bits) in instance(4), mask in prop::collection::vec(any::<bool>(), 4)) {
        let n = theta.n();
        let set = HypothesisSet::enumerate(&theta).unwrap();
        let patterns: Vec<Vec<bool>> = set.members().iter().map(|h| h.bits.clone()).collect();
        let reference = reference_set(&theta, &patterns);
        let mut evidence = Vec::new();
        let mut obs = ObservationSet::new();
        let mut cond = set.clone();
        for i in 0..n {
            if mask[i] {
                evidence.push((i, bits[i]));
                obs.push(i, bits[i], 1.0).unwrap();
                cond = cond.condition(i, bits[i]).unwrap();
            }
        }
        prop_assert!((ec2_cut_weight(&cond) - ec2_cut(&reference, &evidence)).abs() < TOL);
        for u in (0..n).filter(|u| !mask[*u]) {
            prop_assert!((ec2_gain(&cond, u).unwrap() - ec2_gain_ref(&reference, &evidence, u)).abs() < TOL);
            prop_assert!((us_gain(&cond, u).unwrap() - us_gain_ref(&reference, &evidence, u)).abs() < TOL);
            prop_assert!((ig_gain(&theta, &obs, u).unwrap() - ig_gain_ref(&theta, &evidence, u)).abs() < TOL);
        }
    }

    #[test]
    fn ec2_objective_never_increases((theta, bits) in instance(5)) {
        let mut set = HypothesisSet::enumerate(&theta).unwrap();
        let mut last = ec2_objective(&set).unwrap();
        for (i, &b) in bits.iter().enumerate() {
            set = set.condition(i, b).unwrap();
            let now = ec2_objective(&set).unwrap();
            prop_assert!(now <= last + TOL);
            last = now;
        }
        prop_assert!(last.abs() < TOL);
    }

    #[test]
    fn exhaustive_choice_is_scale_invariant(gains in prop::collection::vec(0.0f64..10.0, 1..8), scale in 1e-3f64..1e3) {
        let scaled: Vec<f64> = gains.iter().map(|g| g * scale).collect();
        prop_assert_eq!(select_threshold_exhaustive(&gains), select_threshold_exhaustive(&scaled));
    }

    #[test]
    fn normalized_gains_keep_exhaustive_argmax((theta, _bits) in instance(5)) {
        let set = HypothesisSet::enumerate(&theta).unwrap();
        let raw: Vec<f64> = (0..theta.n()).map(|u| ec2_gain(&set, u).unwrap()).collect();
        let normalized: Vec<f64> = (0..theta.n())
            .map(|u| normalized_gain(Criterion::Ec2, &set, &theta, u).unwrap())
            .collect();
        prop_assert!(normalized.iter().all(|g| (0.0..=1.0).contains(g)));
        prop_assert_eq!(select_threshold_exhaustive(&raw), select_threshold_exhaustive(&normalized));
    }

    #[test]
    fn exp3_distribution_is_valid(sums in prop::collection::vec(-1e6f64..1e6, 1..10), eta in 1e-4f64..10.0) {
        let p = exp3_distribution(&sums, eta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|q| q.is_finite() && *q >= 0.0));
    }

    #[test]
    fn exp3_updates_touch_one_arm(k in 1usize..6, arm in 0usize..6, gain in 0.0f64..1.0, pi in 0.01f64..1.0) {
        let arm = arm % k;
        let grid = ThresholdGrid::new(vec![(0..k).map(|t| t as f64).collect()]).unwrap();
        let mut bandit = ThresholdBandit::new(&grid, 0.01).unwrap();
        bandit.update(0, arm, pi, gain).unwrap();
        for (j, s) in bandit.sums(0).iter().enumerate() {
            prop_assert_eq!(*s, if j == arm { gain / pi } else { 0.0 });
        }
    }

    #[test]
    fn quantile_grid_is_strictly_increasing(values in prop::collection::vec(-100.0f64..100.0, 1..60), k in 1usize..8) {
        let grid = build_threshold_grid(std::slice::from_ref(&values), k).unwrap();
        let t = grid.thresholds(0);
        prop_assert!(!t.is_empty() && t.len() <= k);
        prop_assert!(t.windows(2).all(|w| w[0] < w[1]));
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t.iter().all(|x| (lo..=hi).contains(x)));
    }

    #[test]
    fn belief_update_counts_each_observation(
        (theta, bits) in instance(5),
        label in 0usize..3,
        gamma in 0.0f64..1.0,
        drift in any::<bool>(),
    ) {
        let (n, m) = (theta.n(), theta.m());
        let label = label % m;
        let mut belief = BeliefState::uniform(n, m);
        let mut obs = ObservationSet::new();
        for (i, &b) in bits.iter().enumerate() {
            obs.push(i, b, 1.0).unwrap();
        }
        let d = DriftConfig::constant(n, m, gamma, 1.0, 1.0).unwrap();
        belief.update(&obs, label, drift.then_some(&d)).unwrap();
        for i in 0..n {
            for j in 0..m {
                let mass = belief.alpha(i, j) + belief.beta(i, j);
                prop_assert!(belief.alpha(i, j) > 0.0 && belief.beta(i, j) > 0.0);
                let expected = if j == label { 3.0 } else { 2.0 };
                prop_assert!((mass - expected).abs() < 1e-12);
            }
        }
        prop_assert_eq!(belief.class_counts()[label], 2.0);
    }

    #[test]
    fn ofs_weights_stay_finite(steps in prop::collection::vec((0usize..3, 0usize..3, prop::collection::vec(0.0f64..5.0, 4)), 1..200)) {
        let mut state = OfsState::new(4, 3, &OfsConfig::new(2)).unwrap();
        for (t, p, x) in steps {
            ofs_update(&mut state, &x, t, p).unwrap();
        }
        prop_assert!(state.weights().iter().flatten().all(|w| w.is_finite()));
    }

    #[test]
    fn ofs_estimate_is_zero_unless_selected_and_queried(
        x in any::<bool>(), queried in any::<bool>(), selected in any::<bool>(), eps in 0.0f64..=1.0, b in 1usize..5, extra in 0usize..5,
    ) {
        let e = ofs_estimate(x, queried, selected, b, b + extra, eps);
        prop_assert!(e.value >= 0.0 && e.value.is_finite());
        if !(queried && selected && x) {
            prop_assert_eq!(e.value, 0.0);
        }
    }

    #[test]
    fn stagger_one_hot_has_one_value_per_attribute(size in 0usize..3, color in 0usize..3, shape in 0usize..3) {
        let v = StaggerObject { size, color, shape }.one_hot();
        prop_assert_eq!(v.len(), 9);
        for block in v.chunks(3) {
            prop_assert_eq!(block.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn f_measure_is_bounded(counts in prop::collection::vec(prop::collection::vec(0u64..50, 3), 3)) {
        let f = f_measure(&Confusion::from_counts(counts).unwrap());
        prop_assert!((0.0..=1.0).contains(&f));
    }
}
