use depkit_core::verification::{
    bound_linear_form, propagate_interval, propagate_octagon, tighten_box, verify, DomainKind, Octagon, Verdict,
    VerifyOptions,
};
use depkit_core::{IntervalBox, LinearConstraint, VerificationProblem};
use depkit_testkit::{fixtures, gen, oracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts(domain: DomainKind, budget: usize) -> VerifyOptions {
    VerifyOptions {
        domain,
        split_budget: budget,
        ..Default::default()
    }
}

#[test]
fn propagated_bounds_contain_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let dims = gen::random_dims(&mut rng, 3, 2, 3, 6);
        let net = gen::random_network(&mut rng, &dims, 1.0);
        let b = gen::random_box(&mut rng, 3);
        let ib = propagate_interval(&net, &b).unwrap();
        let ob = propagate_octagon(&net, &Octagon::from_box(&b)).unwrap();
        for _ in 0..500 {
            let x = gen::random_point(&mut rng, &b);
            let (_, trace) = net.forward(&x).unwrap();
            for (l, act) in trace.per_layer.iter().enumerate() {
                assert!(ib[l].contains(act), "interval layer {l}");
                assert!(ob[l].contains(act), "octagon layer {l}");
            }
        }
    }
}

#[test]
fn octagon_bounds_dominate_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let dims = gen::random_dims(&mut rng, 3, 2, 3, 6);
        let net = gen::random_network(&mut rng, &dims, 1.0);
        let b = gen::random_box(&mut rng, 3);
        let ib = propagate_interval(&net, &b).unwrap();
        let ob = propagate_octagon(&net, &Octagon::from_box(&b)).unwrap();
        for (i, o) in ib.iter().zip(&ob) {
            let o = o.interval_box();
            for k in 0..i.dim() {
                assert!(o.lower()[k] >= i.lower()[k] && o.upper()[k] <= i.upper()[k]);
            }
        }
    }
}

#[test]
fn verdicts_match_phase_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 25 {
        let p = gen::random_small_problem(&mut rng);
        let Some(reachable) = oracle::robust_reachability(&p, 1e-9) else {
            continue;
        };
        checked += 1;
        for domain in [DomainKind::Interval, DomainKind::Octagon] {
            let out = verify(&p, &opts(domain, 256)).unwrap();
            match &out.verdict {
                Verdict::Proved { .. } => assert!(!reachable, "{domain:?} proved a reachable risk"),
                Verdict::Counterexample { input, output } => {
                    assert!(reachable, "{domain:?} found a counterexample the oracle rejects");
                    assert_eq!(p.validate_witness(input).as_ref(), Some(output));
                }
                Verdict::Unknown { .. } => panic!("unknown verdict within budget"),
            }
        }
    }
}

#[test]
fn target_vehicle_safe_net_is_proved() {
    for p in fixtures::target_vehicle_problems(false) {
        assert_eq!(oracle::robust_reachability(&p, 1e-9), Some(false));
        for domain in [DomainKind::Interval, DomainKind::Octagon] {
            let out = verify(&p, &opts(domain, 256)).unwrap();
            assert_eq!(out.verdict.name(), "proved", "{domain:?}");
        }
    }
}

#[test]
fn target_vehicle_buggy_net_has_counterexample() {
    let ps = fixtures::target_vehicle_problems(true);
    assert_eq!(oracle::robust_reachability(&ps[0], 1e-9), Some(false));
    assert_eq!(oracle::robust_reachability(&ps[1], 1e-9), Some(true));
    let out = verify(&ps[1], &VerifyOptions::default()).unwrap();
    let Verdict::Counterexample { input, output } = out.verdict else {
        panic!("expected counterexample");
    };
    assert!(input[8] <= fixtures::EMPTY_SLOT);
    assert!(input[9] <= fixtures::EMPTY_SLOT);
    assert_eq!(depkit_core::argmax(&output), 9);
}

#[test]
fn point_box_octagon_bounds_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = gen::random_network(&mut rng, &[2, 4, 3], 1.0);
    let x = [0.25, -0.5];
    let y = net.logits(&x).unwrap();
    let ob = propagate_octagon(&net, &Octagon::from_box(&IntervalBox::point(&x))).unwrap();
    let out = ob.last().unwrap().interval_box();
    for (i, v) in y.iter().enumerate() {
        assert!((out.lower()[i] - v).abs() < 1e-12 && (out.upper()[i] - v).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_idempotent_coherent_and_sound(
        seed in any::<u64>(),
        pairs in prop::collection::vec((0usize..3, 0usize..3, any::<bool>(), any::<bool>(), -1.0f64..2.0), 0..6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gen::random_box(&mut rng, 3);
        let mut o = Octagon::from_box(&b);
        for &(i, j, si, sj, c) in &pairs {
            let s = |v: bool| if v { 1.0 } else { -1.0 };
            o.add_pair(s(si), i, s(sj), j, c);
        }
        let points: Vec<Vec<f64>> = (0..200).map(|_| gen::random_point(&mut rng, &b)).collect();
        match o.strong_closure() {
            None => {
                // no sampled point may satisfy the original constraints
                for x in &points {
                    prop_assert!(!o.contains(x));
                }
            }
            Some(c) => {
                prop_assert!(c.is_coherent());
                prop_assert_eq!(c.strong_closure().unwrap(), c.clone());
                for x in &points {
                    if o.contains(x) {
                        prop_assert!(c.contains(x));
                    }
                }
                let coeffs: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
                let (lo, hi) = bound_linear_form(&coeffs, &c).unwrap();
                for x in points.iter().filter(|x| c.contains(x)) {
                    let v: f64 = coeffs.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    prop_assert!(lo - 1e-9 <= v && v <= hi + 1e-9);
                }
            }
        }
    }

    #[test]
    fn tightening_keeps_feasible_points(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gen::random_box(&mut rng, 3);
        let cs: Vec<LinearConstraint> = (0..2)
            .map(|_| {
                let c: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
                LinearConstraint::le(c, rand::Rng::random_range(&mut rng, -0.5..0.5)).unwrap()
            })
            .collect();
        let t = tighten_box(&b, &cs).unwrap();
        for _ in 0..300 {
            let x = gen::random_point(&mut rng, &b);
            if cs.iter().all(|c| c.is_satisfied(&x)) {
                let t = t.as_ref().expect("feasible point in an empty tightening");
                prop_assert!(t.contains(&x));
            }
        }
    }

    #[test]
    fn counterexamples_always_validate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: VerificationProblem = gen::random_small_problem(&mut rng);
        if let Verdict::Counterexample { input, output } = verify(&p, &VerifyOptions::default()).unwrap().verdict {
            prop_assert_eq!(p.validate_witness(&input), Some(output));
        }
    }
}
