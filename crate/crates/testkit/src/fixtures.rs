//! Hand-built fixtures shared by tests and the shipped example files.

use depkit_core::coverage::{Catalog, CategorySpace, IndicatorConstraint};
use std::path::{Path, PathBuf};

use depkit_core::verification::{argmax_risk, ProblemFile};
use depkit_core::{Affine, IntervalBox, Layer, LinearConstraint, Network, Sample, VerificationProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The five-category scenario space: weather (3), time of day (2),
/// lane (2), road (3), traffic (2).
pub fn scenario_catalog() -> Catalog {
    let space = CategorySpace::from_pairs([
        ("weather", vec!["cloudy", "rainy", "sunny"]),
        ("daytime", vec!["day", "night"]),
        ("lane", vec!["single", "multi"]),
        ("road", vec!["highway", "rural", "urban"]),
        ("traffic", vec!["light", "heavy"]),
    ])
    .unwrap();
    let constraint =
        IndicatorConstraint::new(&space, &[("weather", "sunny", 1), ("daytime", "night", 1)], 0, 1).unwrap();
    Catalog {
        space,
        constraints: vec![constraint],
        items: vec![],
    }
}

/// Encoding of an empty bounding-box slot.
pub const EMPTY_SLOT: f64 = -1.0;

/// Number of bounding-box slots; the input also carries one lane feature.
pub const SLOTS: usize = 10;

/// Target-vehicle selection network: 10 box slots plus an ego-lane offset in,
/// 11 logits out (one per box, then "no target").
///
/// Six hidden ReLUs read slots 0, 1 and the lane feature. With `buggy` set,
/// the logit of box 10 is driven by a lane-only neuron and can win even when
/// its slot is empty.
pub fn target_vehicle_net(buggy: bool) -> Network {
    let d = SLOTS + 1;
    let lane = SLOTS;
    let hidden: [(f64, f64, f64, f64); 6] = [
        // (slot0, slot1, lane, bias)
        (1.0, -0.5, 0.3, 0.1),
        (-0.4, 1.0, 0.5, 0.0),
        (0.6, 0.6, -1.0, 0.2),
        (0.0, 0.0, 2.0, -1.2),
        (-1.0, 0.2, 0.0, 0.3),
        (0.3, -0.8, -0.6, 0.1),
    ];
    let w1: Vec<Vec<f64>> = hidden
        .iter()
        .map(|&(a, b, l, _)| {
            let mut r = vec![0.0; d];
            r[0] = a;
            r[1] = b;
            r[lane] = l;
            r
        })
        .collect();
    let b1: Vec<f64> = hidden.iter().map(|h| h.3).collect();
    // second layer acts on [hidden (6), slots (10)] via a skip built into
    // the weights below: logits read slots directly through a pass-through
    // of the first layer, so the hidden layer also carries the slots.
    let mut w1_full = w1;
    let mut b1_full = b1;
    for s in 0..SLOTS {
        // slot + 1 >= 0 for slots in [-1, 1], so the ReLU is the identity
        let mut r = vec![0.0; d];
        r[s] = 1.0;
        w1_full.push(r);
        b1_full.push(1.0);
    }
    let width = w1_full.len();
    let mut w2 = vec![vec![0.0; width]; SLOTS + 1];
    let mut b2 = vec![0.0; SLOTS + 1];
    for i in 0..SLOTS {
        // box i: 2 * (slot_i + 1), so empty slots score 0 and occupied ones up to 4
        w2[i][6 + i] = 2.0;
        w2[i][i % 6] += 0.25;
    }
    b2[SLOTS] = 0.5;
    w2[SLOTS][0] = 0.3;
    if buggy {
        w2[SLOTS - 1][3] = 6.0;
    }
    Network::new(
        d,
        vec![
            Layer::Affine(Affine::new(w1_full, b1_full).unwrap()),
            Layer::Relu,
            Layer::Affine(Affine::new(w2, b2).unwrap()),
        ],
        Some(
            (1..=SLOTS)
                .map(|i| format!("box{i}"))
                .chain(std::iter::once("none".to_string()))
                .collect(),
        ),
    )
    .unwrap()
}

/// Scene with eight occupied slots: slots 0 and 1 and the lane offset vary
/// over `[-1, 1]`, slots 2..8 are fixed, slots 8 and 9 are constrained empty.
pub fn target_vehicle_region() -> (IntervalBox, Vec<LinearConstraint>) {
    let d = SLOTS + 1;
    let mut lo = vec![-1.0; d];
    let mut hi = vec![1.0; d];
    let fixed = [0.2, -0.3, 0.5, 0.1, -0.6, 0.4];
    for (k, v) in fixed.iter().enumerate() {
        lo[2 + k] = *v;
        hi[2 + k] = *v;
    }
    lo[0] = 0.0;
    let mut constraints = Vec::new();
    for s in [8, 9] {
        let mut c = vec![0.0; d];
        c[s] = 1.0;
        constraints.push(LinearConstraint::le(c, EMPTY_SLOT).unwrap());
    }
    (IntervalBox::new(lo, hi).unwrap(), constraints)
}

/// One problem per forbidden output: argmax is box 9, argmax is box 10.
pub fn target_vehicle_problems(buggy: bool) -> Vec<VerificationProblem> {
    let net = target_vehicle_net(buggy);
    let (b, ic) = target_vehicle_region();
    [SLOTS - 2, SLOTS - 1]
        .into_iter()
        .map(|t| {
            VerificationProblem::new(net.clone(), b.clone(), ic.clone(), argmax_risk(SLOTS + 1, t).unwrap()).unwrap()
        })
        .collect()
}

/// Image shape of the sign classifier fixture.
pub const SIGN_SHAPE: (usize, usize, usize) = (8, 8, 3);

/// Number of traffic-sign classes.
pub const SIGN_CLASSES: usize = 43;

/// A seeded 192-24-43 ReLU classifier over 8x8 RGB images, with one label per
/// logit. Weights are random; it stands in for a trained sign classifier.
pub fn sign_classifier(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, c) = SIGN_SHAPE;
    let net = crate::gen::random_network(&mut rng, &[h * w * c, 24, SIGN_CLASSES], 0.3);
    let labels = (0..SIGN_CLASSES).map(|i| format!("sign{i:02}")).collect();
    Network::new(net.input_dim(), net.layers().to_vec(), Some(labels)).unwrap()
}

/// `n` random images labelled with the classifier's own prediction, so every
/// sample starts out correctly classified.
pub fn sign_dataset(net: &Network, n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            let label = net.predict(&x).unwrap();
            Sample::new(x, label)
        })
        .collect()
}

/// Paths written by [`write_all`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub catalog: PathBuf,
    pub safe_model: PathBuf,
    pub buggy_model: PathBuf,
    pub safe_problem: PathBuf,
    pub buggy_problem: PathBuf,
    pub sign_model: PathBuf,
    pub sign_data: PathBuf,
    pub sign_input: PathBuf,
}

/// Six collected highway scenes over [`scenario_catalog`].
pub fn highway_items() -> Vec<[&'static str; 5]> {
    vec![
        ["sunny", "day", "multi", "highway", "light"],
        ["sunny", "day", "multi", "highway", "heavy"],
        ["cloudy", "day", "multi", "highway", "light"],
        ["cloudy", "night", "multi", "highway", "light"],
        ["rainy", "day", "multi", "highway", "heavy"],
        ["rainy", "night", "multi", "highway", "light"],
    ]
}

fn problem_json(model: &str) -> String {
    let (b, constraints) = target_vehicle_region();
    let file = ProblemFile {
        format: depkit_core::FORMAT_TAG.into(),
        model: model.into(),
        input_box: (b.lower().to_vec(), b.upper().to_vec()),
        input_constraints: constraints,
        risk: None,
        risk_cases: None,
        risk_argmax: Some(vec![SLOTS - 2, SLOTS - 1]),
    };
    serde_json::to_string_pretty(&file).unwrap()
}

/// Writes the catalog, the target-vehicle models and problems, and the sign
/// classifier with a 40-sample dataset and one input into `dir`.
pub fn write_all(dir: &Path) -> std::io::Result<FixtureFiles> {
    let mut cat = scenario_catalog();
    cat.items = highway_items().iter().map(|v| cat.space.item(v).unwrap()).collect();
    let f = FixtureFiles {
        catalog: dir.join("scenarios.json"),
        safe_model: dir.join("target_safe.json"),
        buggy_model: dir.join("target_buggy.json"),
        safe_problem: dir.join("target_safe_problem.json"),
        buggy_problem: dir.join("target_buggy_problem.json"),
        sign_model: dir.join("signs.json"),
        sign_data: dir.join("signs.jsonl"),
        sign_input: dir.join("sign_input.json"),
    };
    std::fs::write(&f.catalog, cat.to_json())?;
    std::fs::write(&f.safe_model, target_vehicle_net(false).to_json())?;
    std::fs::write(&f.buggy_model, target_vehicle_net(true).to_json())?;
    std::fs::write(&f.safe_problem, problem_json("target_safe.json"))?;
    std::fs::write(&f.buggy_problem, problem_json("target_buggy.json"))?;
    let net = sign_classifier(1);
    let data = sign_dataset(&net, 40, 2);
    std::fs::write(&f.sign_model, net.to_json())?;
    std::fs::write(&f.sign_data, depkit_core::dataset::to_jsonl(&data))?;
    let input = serde_json::json!({
        "format": depkit_core::FORMAT_TAG,
        "x": data[0].x,
        "label": data[0].label,
        "shape": [SIGN_SHAPE.0, SIGN_SHAPE.1, SIGN_SHAPE.2],
    });
    std::fs::write(&f.sign_input, serde_json::to_string(&input).unwrap())?;
    Ok(f)
}
