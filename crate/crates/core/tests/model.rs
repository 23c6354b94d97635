use depkit_core::{Error, Network};
use depkit_testkit::{gen, oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest |pre-activation| over all ReLUs at `x`.
fn kink_distance(net: &Network, x: &[f64]) -> f64 {
    let (_, trace) = net.forward(x).unwrap();
    net.relu_layers()
        .iter()
        .flat_map(|&l| trace.layer(l - 1).iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 100 {
        let (input, output) = (rng.random_range(1..=6), rng.random_range(2..=4));
        let dims = gen::random_dims(&mut rng, input, output, 3, 6);
        let net = gen::random_network(&mut rng, &dims, 1.0);
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        if kink_distance(&net, &x) < 1e-3 {
            continue;
        }
        checked += 1;
        let label = rng.random_range(0..net.output_dim());
        let g = net.input_gradient(&x, label).unwrap();
        let fd = oracle::central_difference(|p| net.loss(p, label).unwrap(), &x, 1e-6);
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-4 * scale, "{g:?} vs {fd:?}");
        }
    }
}

#[test]
fn vector_jacobian_matches_logit_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let net = gen::random_network(&mut rng, &[4, 5, 5, 3], 1.0);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        if kink_distance(&net, &x) < 1e-3 {
            continue;
        }
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |p: &[f64]| net.logits(p).unwrap().iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let fd = oracle::central_difference(f, &x, 1e-6);
        let g = net.vector_jacobian(&x, &v).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let dims = gen::random_dims(&mut rng, 5, 3, 3, 7);
        let net = gen::random_network(&mut rng, &dims, 3.0);
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.fingerprint(), net.fingerprint());
    }
}

#[test]
fn identity_model_file() {
    let net = Network::from_json(
        r#"{"format":"depkit/1","input_dim":2,"layers":[{"kind":"affine","weights":[[1,0],[0,1]],"bias":[0,0]}]}"#,
    )
    .unwrap();
    assert_eq!(net.layers().len(), 1);
    assert_eq!(net.output_dim(), 2);
    assert_eq!(net.logits(&[0.25, -3.5]).unwrap(), vec![0.25, -3.5]);
}

#[test]
fn malformed_model_files_are_rejected() {
    let broken_chain = r#"{"format":"depkit/1","input_dim":2,"layers":[
        {"kind":"affine","weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0]},
        {"kind":"affine","weights":[[1,1,1,1]],"bias":[0]}]}"#;
    assert!(matches!(
        Network::from_json(broken_chain),
        Err(Error::DimensionMismatch { .. })
    ));
    let ragged =
        r#"{"format":"depkit/1","input_dim":2,"layers":[{"kind":"affine","weights":[[1,0],[1]],"bias":[0,0]}]}"#;
    assert!(Network::from_json(ragged).is_err());
    let no_format = r#"{"input_dim":1,"layers":[{"kind":"affine","weights":[[1]],"bias":[0]}]}"#;
    assert!(matches!(Network::from_json(no_format), Err(Error::MalformedModel(_))));
    let labels = r#"{"format":"depkit/1","input_dim":1,"class_labels":["a"],"layers":[{"kind":"affine","weights":[[1],[2]],"bias":[0,0]}]}"#;
    assert!(Network::from_json(labels).is_err());
    let empty = r#"{"format":"depkit/1","input_dim":1,"layers":[]}"#;
    assert!(Network::from_json(empty).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_piecewise_linear(seed in any::<u64>(), t in 0.0f64..1.0) {
        // on a segment where no ReLU changes phase, logits interpolate linearly
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = gen::random_network(&mut rng, &[3, 4, 2], 1.0);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-1e-3..1e-3)).collect();
        let phases = |x: &[f64]| net.forward(x).unwrap().1.layer(0).iter().map(|v| *v > 0.0).collect::<Vec<_>>();
        prop_assume!(phases(&a) == phases(&b));
        let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (1.0 - t) * p + t * q).collect();
        let (ya, yb, ym) = (net.logits(&a).unwrap(), net.logits(&b).unwrap(), net.logits(&m).unwrap());
        for i in 0..2 {
            prop_assert!((ym[i] - ((1.0 - t) * ya[i] + t * yb[i])).abs() < 1e-12);
        }
    }
}
