//! Octagon abstract domain: conjunctions of `±x_i ± x_j <= c`.
//!
//! Stored as a coherent difference-bound matrix over the 2n signed variables
//! `v_{2i} = x_i`, `v_{2i+1} = -x_i`; entry `(a, b)` bounds `v_a - v_b`.

use super::interval::{Phase, PhaseFixes};
use super::IntervalBox;
use crate::{Affine, Error, Layer, Network, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Octagon {
    n: usize,
    m: Vec<f64>,
}

#[inline]
fn bar(a: usize) -> usize {
    a ^ 1
}

/// Signed-variable index of `sign * x_i`.
#[inline]
fn pos(sign: f64, i: usize) -> usize {
    if sign >= 0.0 {
        2 * i
    } else {
        2 * i + 1
    }
}

const CLOSURE_PASSES: usize = 8;

/// `a + b` nudged upward, so derived bounds never undercut exact ones and
/// rounding cannot manufacture negative cycles.
#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    s + s.abs() * f64::EPSILON + f64::MIN_POSITIVE
}

impl Octagon {
    /// No constraints at all.
    pub fn top(n: usize) -> Self {
        let size = 2 * n;
        let mut m = vec![f64::INFINITY; size * size];
        for a in 0..size {
            m[a * size + a] = 0.0;
        }
        Self { n, m }
    }

    /// The octagon whose only constraints are the box bounds. Already closed.
    pub fn from_box(b: &IntervalBox) -> Self {
        let mut o = Self::top(b.dim());
        for i in 0..b.dim() {
            o.add_upper(i, b.upper()[i]);
            o.add_lower(i, b.lower()[i]);
        }
        o.strong_closure().unwrap_or(o)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn size(&self) -> usize {
        2 * self.n
    }

    /// Bound on `v_a - v_b`.
    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.m[a * self.size() + b]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, v: f64) {
        let s = self.size();
        self.m[a * s + b] = v;
    }

    /// Adds `v_a - v_b <= c` together with its coherent twin.
    fn tighten(&mut self, a: usize, b: usize, c: f64) {
        if c < self.entry(a, b) {
            self.set(a, b, c);
        }
        if c < self.entry(bar(b), bar(a)) {
            self.set(bar(b), bar(a), c);
        }
    }

    pub fn add_upper(&mut self, i: usize, c: f64) {
        self.tighten(2 * i, 2 * i + 1, 2.0 * c);
    }

    pub fn add_lower(&mut self, i: usize, c: f64) {
        self.tighten(2 * i + 1, 2 * i, -2.0 * c);
    }

    /// Adds `si * x_i + sj * x_j <= c` for signs `si, sj` in {+1, -1}.
    pub fn add_pair(&mut self, si: f64, i: usize, sj: f64, j: usize, c: f64) {
        if i == j {
            if (si >= 0.0) == (sj >= 0.0) {
                if si >= 0.0 {
                    self.add_upper(i, c / 2.0);
                } else {
                    self.add_lower(i, -c / 2.0);
                }
            } else if c < 0.0 {
                // 0 <= c is false
                self.set(0, 0, f64::NEG_INFINITY);
            }
            return;
        }
        self.tighten(pos(si, i), bar(pos(sj, j)), c);
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.entry(2 * i, 2 * i + 1) / 2.0
    }

    pub fn lower(&self, i: usize) -> f64 {
        -self.entry(2 * i + 1, 2 * i) / 2.0
    }

    /// Upper bound on `si * x_i + sj * x_j`, `i != j`.
    pub fn pair_upper(&self, si: f64, i: usize, sj: f64, j: usize) -> f64 {
        self.entry(pos(si, i), bar(pos(sj, j)))
    }

    fn unary_upper(&self, s: f64, i: usize) -> f64 {
        if s >= 0.0 {
            self.upper(i)
        } else {
            -self.lower(i)
        }
    }

    pub fn interval_box(&self) -> IntervalBox {
        IntervalBox::from_parts(
            (0..self.n).map(|i| self.lower(i)).collect(),
            (0..self.n).map(|i| self.upper(i)).collect(),
        )
    }

    /// Exact membership test against every stored constraint.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.n {
            return false;
        }
        let val = |a: usize| if a % 2 == 0 { x[a / 2] } else { -x[a / 2] };
        let s = self.size();
        (0..s).all(|a| (0..s).all(|b| val(a) - val(b) <= self.entry(a, b)))
    }

    pub fn is_coherent(&self) -> bool {
        let s = self.size();
        (0..s).all(|a| (0..s).all(|b| self.entry(a, b) == self.entry(bar(b), bar(a))))
    }

    /// Strong closure: shortest paths, unary strengthening and coherence,
    /// repeated to a fixpoint. `None` when the octagon is empty.
    pub fn strong_closure(&self) -> Option<Self> {
        let s = self.size();
        let mut o = self.clone();
        if o.m.iter().any(|v| v.is_nan()) {
            return None;
        }
        for _ in 0..CLOSURE_PASSES {
            let before = o.m.clone();
            for k in 0..s {
                for a in 0..s {
                    let ak = o.m[a * s + k];
                    if ak == f64::INFINITY {
                        continue;
                    }
                    for b in 0..s {
                        let v = add_up(ak, o.m[k * s + b]);
                        if v < o.m[a * s + b] {
                            o.m[a * s + b] = v;
                        }
                    }
                }
            }
            for a in 0..s {
                let half_a = o.m[a * s + bar(a)];
                if half_a == f64::INFINITY {
                    continue;
                }
                for b in 0..s {
                    let v = add_up(half_a, o.m[bar(b) * s + b]) / 2.0;
                    if v < o.m[a * s + b] {
                        o.m[a * s + b] = v;
                    }
                }
            }
            for a in 0..s {
                for b in 0..s {
                    let (x, y) = (o.m[a * s + b], o.m[bar(b) * s + bar(a)]);
                    if y < x {
                        o.m[a * s + b] = y;
                    } else if x < y {
                        o.m[bar(b) * s + bar(a)] = x;
                    }
                }
            }
            let scale =
                o.m.iter()
                    .filter(|v| v.is_finite())
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
            let tol = 1e-12 * (1.0 + scale);
            let mut clamped = false;
            for a in 0..s {
                let d = o.m[a * s + a];
                if d < -tol || d.is_nan() {
                    return None;
                }
                if d < 0.0 {
                    o.m[a * s + a] = 0.0;
                    clamped = true;
                }
            }
            // rounding-level cycles would keep shrinking entries pass after pass
            if clamped || o.m == before {
                break;
            }
        }
        Some(o)
    }

    /// Drops every relation involving `x_i`.
    fn forget(&mut self, i: usize) {
        let s = self.size();
        for a in [2 * i, 2 * i + 1] {
            for b in 0..s {
                if a != b {
                    self.m[a * s + b] = f64::INFINITY;
                    self.m[b * s + a] = f64::INFINITY;
                }
            }
        }
    }
}

/// Upper bound on `c · x` from pairwise constraints, paired greedily by
/// largest remaining magnitude, and never worse than the interval bound.
fn upper_form(c: &[f64], o: &Octagon) -> f64 {
    let mut interval = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        if ci != 0.0 {
            interval += ci.abs() * o.unary_upper(ci.signum(), i);
        }
    }
    let mut r = c.to_vec();
    let mut greedy = 0.0;
    loop {
        let mut first: Option<usize> = None;
        let mut second: Option<usize> = None;
        for i in 0..r.len() {
            if r[i] == 0.0 {
                continue;
            }
            match first {
                None => first = Some(i),
                Some(f) if r[i].abs() > r[f].abs() => {
                    second = first;
                    first = Some(i);
                }
                _ => {
                    if second.is_none_or(|s| r[i].abs() > r[s].abs()) {
                        second = Some(i);
                    }
                }
            }
        }
        let Some(i) = first else { break };
        let Some(j) = second else {
            greedy += r[i].abs() * o.unary_upper(r[i].signum(), i);
            break;
        };
        let m = r[j].abs();
        greedy += m * o.pair_upper(r[i].signum(), i, r[j].signum(), j);
        r[i] -= m * r[i].signum();
        r[j] = 0.0;
        if greedy == f64::INFINITY {
            break;
        }
    }
    greedy.min(interval)
}

/// Sound bounds `(lo, hi)` of `coeffs · x` over the octagon.
pub fn bound_linear_form(coeffs: &[f64], o: &Octagon) -> Result<(f64, f64)> {
    if coeffs.len() != o.dim() {
        return Err(Error::dim("linear form", o.dim(), coeffs.len()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput("linear form".into()));
    }
    let neg: Vec<f64> = coeffs.iter().map(|c| -c).collect();
    Ok((-upper_form(&neg, o), upper_form(coeffs, o)))
}

/// Outward padding for bounds computed in floating point, scaled by the
/// magnitude of the summed terms.
const PAD: f64 = 1e-12;

pub(crate) fn affine_octagon(a: &Affine, x: &Octagon) -> Option<Octagon> {
    let m = a.out_dim();
    let xb = x.interval_box();
    let unary = super::interval::affine_interval(a, &xb);
    let reach: Vec<f64> = (0..x.dim())
        .map(|k| xb.lower()[k].abs().max(xb.upper()[k].abs()))
        .collect();
    let mut y = Octagon::top(m);
    let rows = a.weights();
    let bias = a.bias();
    let mag: Vec<f64> = rows
        .iter()
        .zip(bias)
        .map(|(r, b)| PAD * (1.0 + b.abs() + r.iter().zip(&reach).map(|(w, v)| w.abs() * v).sum::<f64>()))
        .collect();
    for i in 0..m {
        let neg: Vec<f64> = rows[i].iter().map(|w| -w).collect();
        // the interval bound uses the exact same arithmetic as the interval domain
        let hi = (bias[i] + upper_form(&rows[i], x) + mag[i]).min(unary.upper()[i]);
        let lo = (bias[i] - upper_form(&neg, x) - mag[i]).max(unary.lower()[i]);
        y.add_upper(i, hi);
        y.add_lower(i, lo);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let pad = mag[i] + mag[j];
            for (sj, db) in [(-1.0, bias[i] - bias[j]), (1.0, bias[i] + bias[j])] {
                let form: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(p, q)| p + sj * q).collect();
                let neg: Vec<f64> = form.iter().map(|v| -v).collect();
                // y_i + sj*y_j <= db + max(form·x), and >= db + min(form·x)
                y.add_pair(1.0, i, sj, j, db + upper_form(&form, x) + pad);
                y.add_pair(-1.0, i, -sj, j, -db + upper_form(&neg, x) + pad);
            }
        }
    }
    y.strong_closure()
}

/// Returns the post-activation octagon and the (phase-refined) pre-activation box.
pub(crate) fn relu_octagon(pre: &Octagon, layer: usize, fixes: &PhaseFixes) -> Option<(Octagon, IntervalBox)> {
    let mut z = pre.clone();
    let mut fixed = false;
    for i in 0..z.dim() {
        match fixes.get(&(layer, i)) {
            Some(Phase::Active) => {
                z.add_lower(i, 0.0);
                fixed = true;
            }
            Some(Phase::Inactive) => {
                z.add_upper(i, 0.0);
                fixed = true;
            }
            None => {}
        }
    }
    if fixed {
        z = z.strong_closure()?;
    }
    let pre_box = z.interval_box();
    let mut y = z;
    for i in 0..y.dim() {
        let (l, u) = (pre_box.lower()[i], pre_box.upper()[i]);
        if l >= 0.0 {
            continue;
        }
        y.forget(i);
        let s = 2 * y.n;
        y.m[2 * i * s + 2 * i + 1] = 2.0 * u.max(0.0);
        y.m[(2 * i + 1) * s + 2 * i] = 0.0;
    }
    Some((y.strong_closure()?, pre_box))
}

pub(crate) struct OctagonPass {
    pub layers: Vec<Octagon>,
    pub relu_pre: Vec<(usize, IntervalBox)>,
}

pub(crate) fn octagon_pass(net: &Network, input: &Octagon, fixes: &PhaseFixes) -> Option<OctagonPass> {
    let mut layers: Vec<Octagon> = Vec::with_capacity(net.layers().len());
    let mut relu_pre = Vec::new();
    for (li, layer) in net.layers().iter().enumerate() {
        let cur = layers.last().unwrap_or(input);
        let next = match layer {
            Layer::Affine(a) => affine_octagon(a, cur)?,
            Layer::Relu => {
                let (post, pre_box) = relu_octagon(cur, li, fixes)?;
                relu_pre.push((li, pre_box));
                post
            }
        };
        layers.push(next);
    }
    Some(OctagonPass { layers, relu_pre })
}

/// Octagon after each layer, in order. The input is closed first.
pub fn propagate_octagon(net: &Network, input: &Octagon) -> Result<Vec<Octagon>> {
    if input.dim() != net.input_dim() {
        return Err(Error::dim("input octagon", net.input_dim(), input.dim()));
    }
    let start = input.strong_closure().ok_or(Error::EmptyDomain)?;
    Ok(octagon_pass(net, &start, &PhaseFixes::new())
        .ok_or(Error::EmptyDomain)?
        .layers)
}
