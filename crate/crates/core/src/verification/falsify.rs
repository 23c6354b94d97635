use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tighten_box, IntervalBox, VerificationProblem};

const CORNER_LIMIT_DIM: usize = 12;
const PGD_STEPS: usize = 120;
const PGD_STARTS: usize = 16;

/// Searches for a witness input by sampling and projected sign-gradient steps.
///
/// Deterministic for a given seed. Any returned `(x, y)` has been validated
/// exactly: `x` lies in the box and meets every input constraint, and `y` is
/// the network output, which meets every risk constraint.
pub fn find_counterexample(problem: &VerificationProblem, attempts: usize, seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    problem.check().ok()?;
    let region = tighten_box(&problem.input_box, &problem.input_constraints).ok()??;
    search(problem, &region, attempts, seed)
}

fn hinge(problem: &VerificationProblem, x: &[f64], y: &[f64]) -> f64 {
    problem.risk.iter().map(|c| c.violation(y)).sum::<f64>()
        + problem.input_constraints.iter().map(|c| c.violation(x)).sum::<f64>()
}

pub(crate) fn search(
    problem: &VerificationProblem,
    region: &IntervalBox,
    attempts: usize,
    seed: u64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = region.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = vec![region.center()];
    if d <= CORNER_LIMIT_DIM {
        for mask in 0..(1u64 << d) {
            candidates.push(
                (0..d)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            region.upper()[i]
                        } else {
                            region.lower()[i]
                        }
                    })
                    .collect(),
            );
        }
    }
    for _ in 0..attempts {
        candidates.push(
            (0..d)
                .map(|i| {
                    let (l, u) = (region.lower()[i], region.upper()[i]);
                    if l < u {
                        rng.random_range(l..=u)
                    } else {
                        l
                    }
                })
                .collect(),
        );
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for x in candidates {
        if let Some(y) = problem.validate_witness(&x) {
            return Some((x, y));
        }
        let y = problem.net.logits(&x).ok()?;
        scored.push((hinge(problem, &x, &y), x));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored
        .into_iter()
        .take(PGD_STARTS.min(attempts.max(1)))
        .find_map(|(_, x)| descend(problem, region, x))
}

/// Sign-gradient descent on the hinge, with margins pushing strictly inside.
fn descend(problem: &VerificationProblem, region: &IntervalBox, mut x: Vec<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = x.len();
    let widths: Vec<f64> = (0..d).map(|i| region.width(i)).collect();
    let margin = |b: f64| 1e-7 * (1.0 + b.abs());
    let mut eta = 0.2;
    for _ in 0..PGD_STEPS {
        let y = problem.net.logits(&x).ok()?;
        let mut cot = vec![0.0; y.len()];
        let mut gx = vec![0.0; d];
        let mut active = false;
        for c in &problem.risk {
            let (a, b) = c.as_upper();
            let s: f64 = a.iter().zip(&y).map(|(p, q)| p * q).sum();
            if s > b - margin(b) {
                active = true;
                for (g, ai) in cot.iter_mut().zip(&a) {
                    *g += ai;
                }
            }
        }
        for c in &problem.input_constraints {
            let (a, b) = c.as_upper();
            let s: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            if s > b - margin(b) {
                active = true;
                for (g, ai) in gx.iter_mut().zip(&a) {
                    *g += ai;
                }
            }
        }
        if !active {
            return problem.validate_witness(&x).map(|y| (x, y));
        }
        if cot.iter().any(|&v| v != 0.0) {
            let g = problem.net.vector_jacobian(&x, &cot).ok()?;
            for (a, b) in gx.iter_mut().zip(g) {
                *a += b;
            }
        }
        if gx.iter().all(|&v| v == 0.0) {
            break;
        }
        for i in 0..d {
            x[i] -= eta * widths[i] * gx[i].signum() * (gx[i] != 0.0) as u8 as f64;
        }
        region.clamp(&mut x);
        eta *= 0.97;
    }
    problem.validate_witness(&x).map(|y| (x, y))
}
