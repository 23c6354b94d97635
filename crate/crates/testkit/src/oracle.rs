use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;

use depkit_core::{Layer, LinearConstraint, Network, VerificationProblem};

/// Every full assignment of a space with the given cardinalities, in
/// lexicographic order.
pub fn all_assignments(sizes: &[usize]) -> Vec<Vec<usize>> {
    sizes.iter().map(|&n| 0..n).multi_cartesian_product().collect()
}

/// `(subset, values)` pairs of an item for every k-subset of categories.
fn projections(item: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..item.len())
        .combinations(k)
        .map(|s| {
            let v = s.iter().map(|&i| item[i]).collect();
            (s, v)
        })
        .collect()
}

/// Covered tuple count and denominator by explicit enumeration of all
/// assignments.
pub fn brute_coverage(sizes: &[usize], items: &[Vec<usize>], k: usize) -> (usize, usize) {
    let universe: HashSet<_> = all_assignments(sizes).iter().flat_map(|a| projections(a, k)).collect();
    let covered: HashSet<_> = items.iter().flat_map(|a| projections(a, k)).collect();
    (covered.len(), universe.len())
}

/// Largest number of new k-tuples a single feasible assignment adds, or
/// `None` when nothing is feasible.
pub fn brute_best_gain(
    sizes: &[usize],
    items: &[Vec<usize>],
    k: usize,
    feasible: impl Fn(&[usize]) -> bool,
) -> Option<usize> {
    let covered: HashSet<_> = items.iter().flat_map(|a| projections(a, k)).collect();
    all_assignments(sizes)
        .into_iter()
        .filter(|a| feasible(a))
        .map(|a| projections(&a, k).into_iter().filter(|t| !covered.contains(t)).count())
        .max()
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// All bit vectors of width `w`, bit `i` of the counter at position `i`.
pub fn all_patterns(w: usize) -> Vec<Vec<bool>> {
    (0..1u64 << w)
        .map(|m| (0..w).map(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Members of the Hamming ball of radius `gamma` around `set`.
pub fn ball(set: &HashSet<Vec<bool>>, w: usize, gamma: usize) -> BTreeSet<Vec<bool>> {
    all_patterns(w)
        .into_iter()
        .filter(|p| set.iter().any(|q| hamming(p, q) <= gamma))
        .collect()
}

/// Central differences of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Answer of the phase-enumeration oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Reachability {
    /// A witness input exists; one feasible vertex is given.
    Reachable(Vec<f64>),
    Unreachable,
}

/// `a · x <= b` in the free input coordinates.
#[derive(Debug, Clone)]
struct Half {
    a: Vec<f64>,
    b: f64,
}

/// Decides reachability by enumerating every ReLU phase pattern and checking
/// the resulting polyhedron for a vertex.
///
/// Inputs whose box is a single point are substituted as constants, and
/// single-variable input constraints are folded into the box first. At most
/// three free dimensions remain supported. `slack` loosens every remaining inequality;
/// running with a positive and a negative slack tells robust answers from
/// boundary cases.
pub fn phase_enumeration(problem: &VerificationProblem, slack: f64) -> Reachability {
    let net = &problem.net;
    let d = net.input_dim();
    let mut lo = problem.input_box.lower().to_vec();
    let mut hi = problem.input_box.upper().to_vec();
    let mut general: Vec<&LinearConstraint> = Vec::new();
    for c in &problem.input_constraints {
        let nz: Vec<usize> = (0..d).filter(|&i| c.coeffs()[i] != 0.0).collect();
        if let [i] = nz[..] {
            let (a, b) = c.as_upper();
            let v = b / a[i];
            if a[i] > 0.0 {
                hi[i] = hi[i].min(v);
            } else {
                lo[i] = lo[i].max(v);
            }
        } else {
            general.push(c);
        }
    }
    // folded bounds are exact: a dimension squeezed to a point is pinned,
    // not a boundary case
    if (0..d).any(|i| lo[i] > hi[i]) {
        return Reachability::Unreachable;
    }
    let free: Vec<usize> = (0..d).filter(|&i| lo[i] < hi[i]).collect();
    assert!(free.len() <= 3, "oracle supports at most three free inputs");
    let base: Vec<f64> = (0..d)
        .map(|i| if lo[i] < hi[i] { 0.0 } else { lo[i].max(hi[i]) })
        .collect();
    let f = free.len();

    // affine map of the input in free coordinates: x = P z + q
    let rows: Vec<(Vec<f64>, f64)> = (0..d)
        .map(|i| {
            let mut r = vec![0.0; f];
            if let Some(k) = free.iter().position(|&j| j == i) {
                r[k] = 1.0;
            }
            (r, base[i])
        })
        .collect();

    let mut fixed: Vec<Half> = Vec::new();
    for (k, &i) in free.iter().enumerate() {
        let mut a = vec![0.0; f];
        a[k] = 1.0;
        fixed.push(Half { a: a.clone(), b: hi[i] });
        fixed.push(Half {
            a: a.iter().map(|v| -v).collect(),
            b: -lo[i],
        });
    }
    for c in general {
        let (a, b) = c.as_upper();
        fixed.push(compose(&a, b, &rows));
    }

    let mut search = Enumerator {
        net,
        risk: &problem.risk,
        f,
        slack,
    };
    search
        .dfs(0, rows, 0, fixed)
        .map(|z| {
            let mut x = base.clone();
            for (k, &i) in free.iter().enumerate() {
                x[i] = z[k];
            }
            x
        })
        .map_or(Reachability::Unreachable, Reachability::Reachable)
}

struct Enumerator<'a> {
    net: &'a Network,
    risk: &'a [LinearConstraint],
    f: usize,
    slack: f64,
}

impl Enumerator<'_> {
    /// Walks layer `li`; inside a ReLU layer `neuron` is the next neuron to
    /// decide. Neurons whose pre-activation does not depend on the free
    /// inputs have their phase forced; all others branch both ways.
    fn dfs(&mut self, li: usize, mut rows: Vec<(Vec<f64>, f64)>, neuron: usize, halves: Vec<Half>) -> Option<Vec<f64>> {
        let layers = self.net.layers();
        if li == layers.len() {
            let mut all = halves;
            for c in self.risk {
                let (a, b) = c.as_upper();
                all.push(compose(&a, b, &rows));
            }
            return find_vertex(&all, self.f, self.slack);
        }
        match &layers[li] {
            Layer::Affine(a) => {
                let f = self.f;
                let next = a
                    .weights()
                    .iter()
                    .zip(a.bias())
                    .map(|(w, b)| {
                        let mut r = vec![0.0; f];
                        let mut o = *b;
                        for (wk, (rk, ok)) in w.iter().zip(&rows) {
                            for (x, y) in r.iter_mut().zip(rk) {
                                *x += wk * y;
                            }
                            o += wk * ok;
                        }
                        (r, o)
                    })
                    .collect();
                self.dfs(li + 1, next, 0, halves)
            }
            Layer::Relu => {
                if neuron == rows.len() {
                    return self.dfs(li + 1, rows, 0, halves);
                }
                let (r, o) = rows[neuron].clone();
                if r.iter().all(|&v| v == 0.0) {
                    if o < 0.0 {
                        rows[neuron] = (vec![0.0; self.f], 0.0);
                    }
                    return self.dfs(li, rows, neuron + 1, halves);
                }
                // active: -(r z + o) <= 0
                let mut h = halves.clone();
                h.push(Half {
                    a: r.iter().map(|v| -v).collect(),
                    b: o,
                });
                if let Some(z) = self.dfs(li, rows.clone(), neuron + 1, h) {
                    return Some(z);
                }
                let mut h = halves;
                h.push(Half { a: r, b: -o });
                rows[neuron] = (vec![0.0; self.f], 0.0);
                self.dfs(li, rows, neuron + 1, h)
            }
        }
    }
}

/// `a · (P z + q) <= b` as a half-space in z.
fn compose(a: &[f64], b: f64, rows: &[(Vec<f64>, f64)]) -> Half {
    let f = rows.first().map_or(0, |r| r.0.len());
    let mut out = vec![0.0; f];
    let mut off = 0.0;
    for (ai, (r, o)) in a.iter().zip(rows) {
        for (x, y) in out.iter_mut().zip(r) {
            *x += ai * y;
        }
        off += ai * o;
    }
    Half { a: out, b: b - off }
}

/// A vertex of `{z : a·z <= b + slack}`, found by solving every square
/// subsystem. The region is bounded because the box rows are present.
fn find_vertex(halves: &[Half], f: usize, slack: f64) -> Option<Vec<f64>> {
    let tol = |h: &Half| slack * (1.0 + h.b.abs());
    let ok = |z: &[f64]| {
        halves
            .iter()
            .all(|h| h.a.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() <= h.b + tol(h) + 1e-12 * (1.0 + h.b.abs()))
    };
    if f == 0 {
        return ok(&[]).then(Vec::new);
    }
    for pick in (0..halves.len()).combinations(f) {
        let m: Vec<Vec<f64>> = pick.iter().map(|&i| halves[i].a.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&i| halves[i].b + tol(&halves[i])).collect();
        if let Some(z) = solve(m, rhs) {
            if ok(&z) {
                return Some(z);
            }
        }
    }
    None
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let k = m[r][col] / m[col][col];
                if k != 0.0 {
                    let pivot = m[col].clone();
                    for (v, p) in m[r][col..].iter_mut().zip(&pivot[col..]) {
                        *v -= k * p;
                    }
                    rhs[r] -= k * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Oracle answer that holds under both a loosened and a tightened reading of
/// every inequality; `None` for boundary cases.
pub fn robust_reachability(problem: &VerificationProblem, slack: f64) -> Option<bool> {
    let loose = matches!(phase_enumeration(problem, slack), Reachability::Reachable(_));
    let tight = matches!(phase_enumeration(problem, -slack), Reachability::Reachable(_));
    (loose == tight).then_some(loose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use depkit_core::{Affine, IntervalBox};

    #[test]
    fn coverage_oracle_highway_space() {
        let (_, denom) = brute_coverage(&[3, 2, 2, 3, 2], &[], 2);
        assert_eq!(denom, 57);
        assert_eq!(brute_coverage(&[3, 2, 2, 3, 2], &[], 5).1, 72);
        assert_eq!(brute_best_gain(&[3, 2, 2, 3, 2], &[], 2, |_| true), Some(10));
    }

    #[test]
    fn ball_oracle() {
        let set: HashSet<Vec<bool>> = [vec![false; 3]].into_iter().collect();
        assert_eq!(ball(&set, 3, 1).len(), 4);
    }

    #[test]
    fn phase_oracle_on_abs() {
        let net = Network::new(
            2,
            vec![
                Layer::Affine(Affine::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.0, 0.0]).unwrap()),
                Layer::Relu,
                Layer::Affine(Affine::new(vec![vec![1.0, 1.0]], vec![0.0]).unwrap()),
            ],
            None,
        )
        .unwrap();
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let p = |r: f64| {
            // y = |x0 - x1| on the unit square
            VerificationProblem::new(
                net.clone(),
                b.clone(),
                vec![],
                vec![LinearConstraint::ge(vec![1.0], r).unwrap()],
            )
            .unwrap()
        };
        assert_eq!(robust_reachability(&p(0.9), 1e-9), Some(true));
        assert_eq!(robust_reachability(&p(1.1), 1e-9), Some(false));
        assert_eq!(robust_reachability(&p(1.0), 1e-9), None);
    }
}
