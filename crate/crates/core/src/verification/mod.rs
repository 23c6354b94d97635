//! Input/output property verification for ReLU networks.
//!
//! A [`VerificationProblem`] asks whether some input inside a box, satisfying
//! a set of linear input constraints, drives the network's logits into a *risk*
//! region (a conjunction of linear constraints over the outputs). [`verify`]
//! answers with a [`Verdict`]:
//!
//! - `Proved`: no such input exists. Every leaf of the ReLU-phase branch tree
//!   was refuted, either by abstract bounds (interval or octagon domain) or by
//!   an exact LP feasibility check once all phases are fixed.
//! - `Counterexample`: a concrete input, re-validated by a forward pass with
//!   exact floating-point comparisons.
//! - `Unknown`: the split budget ran out with open leaves.

mod bab;
mod falsify;
mod interval;
mod octagon;
mod problem;

pub use bab::{verify, DomainKind, SearchStats, Verdict, VerificationOutcome, VerifyOptions};
pub use falsify::find_counterexample;
pub use interval::propagate_interval;
pub use octagon::{bound_linear_form, propagate_octagon, Octagon};
pub use problem::{argmax_risk, ProblemFile};

use serde::{Deserialize, Serialize};

use crate::{Error, Network, Result};

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds", lower.len(), upper.len()));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("box bounds".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::BadParameters(format!(
                "box lower bound exceeds upper bound at index {i}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Box without validation; propagation results use this.
    pub(crate) fn from_parts(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn point(x: &[f64]) -> Self {
        Self::from_parts(x.to_vec(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) / 2.0)
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Interval bounds of `coeffs · x` over the box.
    pub fn bound_form(&self, coeffs: &[f64]) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, (l, u)) in coeffs.iter().zip(self.lower.iter().zip(&self.upper)) {
            if *c > 0.0 {
                lo += c * l;
                hi += c * u;
            } else if *c < 0.0 {
                lo += c * u;
                hi += c * l;
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// `coeffs · v  (<= | >=)  bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    coeffs: Vec<f64>,
    #[serde(rename = "rel")]
    relation: Relation,
    bound: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, bound: f64) -> Result<Self> {
        if coeffs.iter().chain(std::iter::once(&bound)).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("linear constraint".into()));
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::BadParameters(
                "linear constraint needs a nonzero coefficient".into(),
            ));
        }
        Ok(Self {
            coeffs,
            relation,
            bound,
        })
    }

    pub fn le(coeffs: Vec<f64>, bound: f64) -> Result<Self> {
        Self::new(coeffs, Relation::Le, bound)
    }

    pub fn ge(coeffs: Vec<f64>, bound: f64) -> Result<Self> {
        Self::new(coeffs, Relation::Ge, bound)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `coeffs · v`, accumulated left to right.
    pub fn evaluate(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().zip(v).fold(0.0, |acc, (c, x)| acc + c * x)
    }

    /// Exact check, no tolerance.
    pub fn is_satisfied(&self, v: &[f64]) -> bool {
        let s = self.evaluate(v);
        match self.relation {
            Relation::Le => s <= self.bound,
            Relation::Ge => s >= self.bound,
        }
    }

    /// The same constraint written as `a · v <= b`.
    pub fn as_upper(&self) -> (Vec<f64>, f64) {
        match self.relation {
            Relation::Le => (self.coeffs.clone(), self.bound),
            Relation::Ge => (self.coeffs.iter().map(|c| -c).collect(), -self.bound),
        }
    }

    /// Whether bounds `(lo, hi)` on `coeffs · v` rule the constraint out.
    pub(crate) fn refuted_by(&self, lo: f64, hi: f64) -> bool {
        match self.relation {
            Relation::Le => lo > self.bound,
            Relation::Ge => hi < self.bound,
        }
    }

    /// Amount by which `v` misses the constraint (0 when satisfied).
    pub(crate) fn violation(&self, v: &[f64]) -> f64 {
        let s = self.evaluate(v);
        match self.relation {
            Relation::Le => (s - self.bound).max(0.0),
            Relation::Ge => (self.bound - s).max(0.0),
        }
    }
}

/// Does some `x` in `input_box` satisfying `input_constraints` make the
/// network output satisfy every `risk` constraint?
#[derive(Debug, Clone)]
pub struct VerificationProblem {
    pub net: Network,
    pub input_box: IntervalBox,
    pub input_constraints: Vec<LinearConstraint>,
    pub risk: Vec<LinearConstraint>,
}

impl VerificationProblem {
    pub fn new(
        net: Network,
        input_box: IntervalBox,
        input_constraints: Vec<LinearConstraint>,
        risk: Vec<LinearConstraint>,
    ) -> Result<Self> {
        let p = Self {
            net,
            input_box,
            input_constraints,
            risk,
        };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let d = self.net.input_dim();
        if self.input_box.dim() != d {
            return Err(Error::dim("input box", d, self.input_box.dim()));
        }
        if let Some(c) = self.input_constraints.iter().find(|c| c.dim() != d) {
            return Err(Error::dim("input constraint", d, c.dim()));
        }
        let m = self.net.output_dim();
        if let Some(c) = self.risk.iter().find(|c| c.dim() != m) {
            return Err(Error::dim("risk constraint", m, c.dim()));
        }
        Ok(())
    }

    /// Returns the network output if `x` is a genuine witness: inside the box,
    /// satisfying every input constraint, and with an output satisfying every
    /// risk constraint. All checks are exact.
    pub fn validate_witness(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.input_box.contains(x) {
            return None;
        }
        if !self.input_constraints.iter().all(|c| c.is_satisfied(x)) {
            return None;
        }
        let y = self.net.logits(x).ok()?;
        self.risk.iter().all(|c| c.is_satisfied(&y)).then_some(y)
    }
}

const TIGHTEN_ROUNDS: usize = 100;

/// Shrinks `b` using interval constraint propagation over `constraints`.
///
/// Never removes a point that satisfies all constraints. Returns `None` when
/// the constrained region is empty.
pub fn tighten_box(b: &IntervalBox, constraints: &[LinearConstraint]) -> Result<Option<IntervalBox>> {
    if let Some(c) = constraints.iter().find(|c| c.dim() != b.dim()) {
        return Err(Error::dim("constraint", b.dim(), c.dim()));
    }
    let mut lo = b.lower.clone();
    let mut hi = b.upper.clone();
    let rows: Vec<(Vec<f64>, f64)> = constraints.iter().map(LinearConstraint::as_upper).collect();
    for _ in 0..TIGHTEN_ROUNDS {
        let mut changed = false;
        for (a, beta) in &rows {
            let term_min = |i: usize, lo: &[f64], hi: &[f64]| {
                let c = a[i];
                if c > 0.0 {
                    c * lo[i]
                } else if c < 0.0 {
                    c * hi[i]
                } else {
                    0.0
                }
            };
            let total: f64 = (0..a.len()).map(|i| term_min(i, &lo, &hi)).sum();
            if total > *beta {
                return Ok(None);
            }
            for j in 0..a.len() {
                let c = a[j];
                if c == 0.0 {
                    continue;
                }
                let rest: f64 = (0..a.len()).filter(|&i| i != j).map(|i| term_min(i, &lo, &hi)).sum();
                let limit = (beta - rest) / c;
                if c > 0.0 && limit < hi[j] {
                    hi[j] = limit;
                    changed = true;
                } else if c < 0.0 && limit > lo[j] {
                    lo[j] = limit;
                    changed = true;
                }
                if lo[j] > hi[j] {
                    return Ok(None);
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Some(IntervalBox::from_parts(lo, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> IntervalBox {
        IntervalBox::new(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn tighten_to_point() {
        let c = LinearConstraint::le(vec![1.0, 1.0], 0.0).unwrap();
        let t = tighten_box(&unit_box(2), &[c]).unwrap().unwrap();
        assert_eq!(t, IntervalBox::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap());
    }

    #[test]
    fn tighten_contradiction_is_empty() {
        let c = LinearConstraint::ge(vec![1.0], 2.0).unwrap();
        assert_eq!(tighten_box(&unit_box(1), &[c]).unwrap(), None);
    }

    #[test]
    fn tighten_difference_is_fixpoint() {
        let c = LinearConstraint::le(vec![1.0, -1.0], 0.0).unwrap();
        let t = tighten_box(&unit_box(2), &[c]).unwrap().unwrap();
        assert_eq!(t, unit_box(2));
    }

    #[test]
    fn tighten_chains_through_constraints() {
        // x0 >= 0.5, x1 >= x0 + 0.25  =>  x1 in [0.75, 1]
        let cs = [
            LinearConstraint::ge(vec![1.0, 0.0], 0.5).unwrap(),
            LinearConstraint::ge(vec![-1.0, 1.0], 0.25).unwrap(),
        ];
        let t = tighten_box(&unit_box(2), &cs).unwrap().unwrap();
        assert_eq!(t.lower(), &[0.5, 0.75]);
        assert_eq!(t.upper(), &[0.75, 1.0]);
    }

    #[test]
    fn tighten_dimension_mismatch() {
        let c = LinearConstraint::le(vec![1.0], 0.0).unwrap();
        assert!(matches!(
            tighten_box(&unit_box(2), &[c]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constraint_invariants() {
        assert!(LinearConstraint::le(vec![0.0, 0.0], 1.0).is_err());
        assert!(LinearConstraint::le(vec![f64::NAN], 1.0).is_err());
        let c: LinearConstraint = serde_json::from_str(r#"{"coeffs":[1,-1],"rel":">=","bound":0.5}"#).unwrap();
        assert_eq!(c.relation(), Relation::Ge);
        assert!(c.is_satisfied(&[1.0, 0.5]));
        assert!(!c.is_satisfied(&[1.0, 0.6]));
        assert_eq!(c.as_upper(), (vec![-1.0, 1.0], -0.5));
    }

    #[test]
    fn box_validation() {
        assert!(IntervalBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(IntervalBox::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(IntervalBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
