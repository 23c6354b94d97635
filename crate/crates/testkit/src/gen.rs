//! Seeded random generators for networks, problems and coverage spaces.

use rand::Rng;

use depkit_core::{Affine, IntervalBox, Layer, LinearConstraint, Network, VerificationProblem};

/// Affine/ReLU network with the given widths (`dims[0]` is the input), ReLU
/// after every hidden layer, weights and biases uniform in `[-scale, scale]`.
pub fn random_network(rng: &mut impl Rng, dims: &[usize], scale: f64) -> Network {
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        let weights = (0..w[1])
            .map(|_| (0..w[0]).map(|_| rng.random_range(-scale..=scale)).collect())
            .collect();
        let bias = (0..w[1]).map(|_| rng.random_range(-scale..=scale)).collect();
        layers.push(Layer::Affine(Affine::new(weights, bias).unwrap()));
        if i + 2 < dims.len() {
            layers.push(Layer::Relu);
        }
    }
    Network::new(dims[0], layers, None).unwrap()
}

/// Random widths: `input`, 1..=`max_hidden` hidden layers of width 1..=`max_width`,
/// `output`.
pub fn random_dims(rng: &mut impl Rng, input: usize, output: usize, max_hidden: usize, max_width: usize) -> Vec<usize> {
    let hidden = rng.random_range(1..=max_hidden);
    let mut dims = vec![input];
    for _ in 0..hidden {
        dims.push(rng.random_range(1..=max_width));
    }
    dims.push(output);
    dims
}

pub fn random_box(rng: &mut impl Rng, dim: usize) -> IntervalBox {
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a: f64 = rng.random_range(-1.0..1.0);
        let w: f64 = rng.random_range(0.0..1.0);
        lo.push(a);
        hi.push(a + w);
    }
    IntervalBox::new(lo, hi).unwrap()
}

pub fn random_point(rng: &mut impl Rng, b: &IntervalBox) -> Vec<f64> {
    (0..b.dim())
        .map(|i| {
            let (l, u) = (b.lower()[i], b.upper()[i]);
            if l < u {
                rng.random_range(l..=u)
            } else {
                l
            }
        })
        .collect()
}

/// A 2-3-3-2 network on `[0,1]^2` with one random risk constraint
/// `g · y >= b`, `b` drawn from the sampled output range so both answers occur.
pub fn random_small_problem(rng: &mut impl Rng) -> VerificationProblem {
    let net = random_network(rng, &[2, 3, 3, 2], 1.0);
    let input_box = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let g = loop {
        let g: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        if g.iter().any(|v| v.abs() > 0.1) {
            break g;
        }
    };
    let samples: Vec<f64> = (0..64)
        .map(|_| {
            let x = random_point(rng, &input_box);
            let y = net.logits(&x).unwrap();
            g[0] * y[0] + g[1] * y[1]
        })
        .collect();
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let span = (max - min).max(1e-3);
    let b = rng.random_range(max - 0.2 * span..max + 0.3 * span);
    VerificationProblem::new(net, input_box, vec![], vec![LinearConstraint::ge(g, b).unwrap()]).unwrap()
}

/// Category cardinalities: `1..=max_cats` categories of size `2..=max_size`.
pub fn random_sizes(rng: &mut impl Rng, max_cats: usize, max_size: usize) -> Vec<usize> {
    let n = rng.random_range(1..=max_cats);
    (0..n).map(|_| rng.random_range(2..=max_size)).collect()
}

pub fn random_assignment(rng: &mut impl Rng, sizes: &[usize]) -> Vec<usize> {
    sizes.iter().map(|&n| rng.random_range(0..n)).collect()
}

pub fn random_patterns(rng: &mut impl Rng, width: usize, count: usize) -> Vec<Vec<bool>> {
    (0..count)
        .map(|_| (0..width).map(|_| rng.random_bool(0.5)).collect())
        .collect()
}
