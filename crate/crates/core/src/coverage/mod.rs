//! Scenario k-projection coverage over discrete categories.
//!
//! A data item assigns one value to every category. For a projection order
//! `k`, every choice of `k` distinct categories together with one value per
//! chosen category is a *k-tuple*; a dataset covers the tuples its items
//! exhibit. The coverage ratio is `covered / denominator`, where the
//! denominator sums, over all k-subsets of categories, the product of their
//! cardinalities.
//!
//! [`propose_next`] searches for the feasible item that covers the most
//! not-yet-covered tuples, honoring [`IndicatorConstraint`]s.

mod catalog;
mod search;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

pub use catalog::Catalog;
pub use search::{attainable_denominator, propose_next, Proposal, SearchStrategy};

use crate::{Error, Result};

/// Default projection order.
pub const DEFAULT_K: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub values: Vec<String>,
}

/// Ordered list of categories, each with an ordered list of values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySpace {
    categories: Vec<Category>,
}

impl CategorySpace {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::InvalidSpace("at least one category required".into()));
        }
        let mut names = HashSet::new();
        for c in &categories {
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate category {:?}", c.name)));
            }
            if c.values.len() < 2 {
                return Err(Error::InvalidSpace(format!(
                    "category {:?} needs at least two values",
                    c.name
                )));
            }
            if c.values.iter().collect::<HashSet<_>>().len() != c.values.len() {
                return Err(Error::InvalidSpace(format!(
                    "category {:?} has duplicate values",
                    c.name
                )));
            }
        }
        Ok(Self { categories })
    }

    /// Convenience constructor from `(name, values)` pairs.
    pub fn from_pairs<N, V>(pairs: impl IntoIterator<Item = (N, Vec<V>)>) -> Result<Self>
    where
        N: Into<String>,
        V: Into<String>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(n, vs)| Category {
                    name: n.into(),
                    values: vs.into_iter().map(Into::into).collect(),
                })
                .collect(),
        )
    }

    /// Anonymous space with the given cardinalities (`c0`, `c1`, ... / `v0`, `v1`, ...).
    pub fn with_cardinalities(sizes: &[usize]) -> Result<Self> {
        Self::from_pairs(
            sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| (format!("c{i}"), (0..n).map(|v| format!("v{v}")).collect::<Vec<_>>())),
        )
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.categories.iter().map(|c| c.values.len()).collect()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn value_index(&self, category: usize, value: &str) -> Option<usize> {
        self.categories.get(category)?.values.iter().position(|v| v == value)
    }

    /// Number of full assignments (equivalence classes).
    pub fn assignment_count(&self) -> Option<u64> {
        self.categories
            .iter()
            .try_fold(1u64, |acc, c| acc.checked_mul(c.values.len() as u64))
    }

    /// Builds an item from value names given in category order.
    pub fn item<S: AsRef<str>>(&self, values: &[S]) -> Result<ScenarioItem> {
        if values.len() != self.len() {
            return Err(Error::InvalidItem(format!(
                "{} values for {} categories",
                values.len(),
                self.len()
            )));
        }
        values
            .iter()
            .enumerate()
            .map(|(c, v)| {
                self.value_index(c, v.as_ref()).ok_or_else(|| {
                    Error::InvalidItem(format!(
                        "unknown value {:?} for category {:?}",
                        v.as_ref(),
                        self.categories[c].name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(ScenarioItem)
    }

    pub fn value_names(&self, item: &ScenarioItem) -> Vec<&str> {
        item.0
            .iter()
            .zip(&self.categories)
            .map(|(&v, c)| c.values[v].as_str())
            .collect()
    }

    pub fn validate_item(&self, item: &ScenarioItem) -> Result<()> {
        if item.0.len() != self.len() {
            return Err(Error::InvalidItem(format!(
                "item has {} entries for {} categories",
                item.0.len(),
                self.len()
            )));
        }
        for (c, (&v, cat)) in item.0.iter().zip(&self.categories).enumerate() {
            if v >= cat.values.len() {
                return Err(Error::InvalidItem(format!(
                    "value index {v} out of range for category {c} ({:?})",
                    cat.name
                )));
            }
        }
        Ok(())
    }
}

/// One value index per category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScenarioItem(pub Vec<usize>);

impl ScenarioItem {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

/// A projected tuple: strictly increasing category indices and one value
/// index per chosen category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KTuple {
    pub categories: Vec<usize>,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicatorTerm {
    pub category: usize,
    pub value: usize,
    pub coefficient: i64,
}

/// `lower <= sum(coefficient * [item[category] == value]) <= upper`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorConstraint {
    terms: Vec<IndicatorTerm>,
    lower: i64,
    upper: i64,
}

impl IndicatorConstraint {
    /// Builds a constraint from `(category, value, coefficient)` names.
    pub fn new<C, V>(space: &CategorySpace, terms: &[(C, V, i64)], lower: i64, upper: i64) -> Result<Self>
    where
        C: AsRef<str>,
        V: AsRef<str>,
    {
        let resolved = terms
            .iter()
            .map(|(c, v, coefficient)| {
                let (c, v) = (c.as_ref(), v.as_ref());
                let category = space
                    .category_index(c)
                    .ok_or_else(|| Error::InvalidConstraint(format!("unknown category {c:?}")))?;
                let value = space
                    .value_index(category, v)
                    .ok_or_else(|| Error::InvalidConstraint(format!("unknown value {v:?} in category {c:?}")))?;
                Ok(IndicatorTerm {
                    category,
                    value,
                    coefficient: *coefficient,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(space, resolved, lower, upper)
    }

    pub fn from_terms(space: &CategorySpace, terms: Vec<IndicatorTerm>, lower: i64, upper: i64) -> Result<Self> {
        if lower > upper {
            return Err(Error::InvalidConstraint(format!(
                "lower bound {lower} exceeds upper bound {upper}"
            )));
        }
        let cards = space.cardinalities();
        for t in &terms {
            if t.category >= cards.len() || t.value >= cards[t.category] {
                return Err(Error::InvalidConstraint(format!(
                    "term ({}, {}) outside the category space",
                    t.category, t.value
                )));
            }
        }
        Ok(Self { terms, lower, upper })
    }

    pub fn terms(&self) -> &[IndicatorTerm] {
        &self.terms
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.upper
    }

    pub fn evaluate(&self, item: &ScenarioItem) -> i64 {
        self.terms
            .iter()
            .filter(|t| item.0[t.category] == t.value)
            .fold(0i64, |acc, t| acc.saturating_add(t.coefficient))
    }

    pub fn is_satisfied(&self, item: &ScenarioItem) -> bool {
        let s = self.evaluate(item);
        self.lower <= s && s <= self.upper
    }
}

/// True iff the item satisfies every constraint.
pub fn is_feasible(item: &ScenarioItem, constraints: &[IndicatorConstraint]) -> bool {
    constraints.iter().all(|c| c.is_satisfied(item))
}

fn check_k(space: &CategorySpace, k: usize) -> Result<()> {
    if k == 0 || k > space.len() {
        return Err(Error::KOutOfRange {
            k,
            categories: space.len(),
        });
    }
    Ok(())
}

/// Sum over all k-subsets of categories of the product of their cardinalities.
pub fn projection_denominator(space: &CategorySpace, k: usize) -> Result<u64> {
    check_k(space, k)?;
    // elementary symmetric polynomial e_k of the cardinalities
    let mut e = vec![0u128; k + 1];
    e[0] = 1;
    for size in space.cardinalities() {
        for j in (1..=k).rev() {
            e[j] = e[j - 1]
                .checked_mul(size as u128)
                .and_then(|t| e[j].checked_add(t))
                .ok_or_else(|| Error::BadParameters("projection denominator overflows".into()))?;
        }
    }
    u64::try_from(e[k]).map_err(|_| Error::BadParameters("projection denominator overflows".into()))
}

/// How the coverage denominator treats constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorMode {
    /// Every k-tuple counts, constraints are ignored.
    #[default]
    All,
    /// Only k-tuples contained in at least one feasible full assignment count.
    Attainable,
}

/// The set of covered k-tuples for one projection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageLedger {
    k: usize,
    cardinalities: Vec<usize>,
    covered: BTreeSet<KTuple>,
    denominator: u64,
}

impl CoverageLedger {
    /// Empty ledger whose denominator counts every k-tuple.
    pub fn new(space: &CategorySpace, k: usize) -> Result<Self> {
        let denominator = projection_denominator(space, k)?;
        Ok(Self {
            k,
            cardinalities: space.cardinalities(),
            covered: BTreeSet::new(),
            denominator,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn covered(&self) -> &BTreeSet<KTuple> {
        &self.covered
    }

    pub fn covered_count(&self) -> usize {
        self.covered.len()
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn ratio(&self) -> f64 {
        self.covered.len() as f64 / self.denominator as f64
    }

    /// `"covered/denominator"`, unreduced.
    pub fn ratio_fraction(&self) -> String {
        format!("{}/{}", self.covered.len(), self.denominator)
    }

    pub fn is_complete(&self) -> bool {
        self.covered.len() as u64 >= self.denominator
    }

    pub fn is_covered(&self, tuple: &KTuple) -> bool {
        self.covered.contains(tuple)
    }

    pub(crate) fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub(crate) fn check_space(&self, space: &CategorySpace) -> Result<()> {
        if self.cardinalities != space.cardinalities() {
            return Err(Error::InvalidSpace(
                "ledger was built for a different category space".into(),
            ));
        }
        Ok(())
    }

    /// All k-tuples exhibited by `item`, in lexicographic subset order.
    pub fn tuples_of<'a>(&self, item: &'a ScenarioItem) -> impl Iterator<Item = KTuple> + 'a {
        (0..item.0.len()).combinations(self.k).map(move |cats| KTuple {
            values: cats.iter().map(|&c| item.0[c]).collect(),
            categories: cats,
        })
    }

    /// Number of tuples `item` would newly cover.
    pub fn gain(&self, item: &ScenarioItem) -> usize {
        self.tuples_of(item).filter(|t| !self.covered.contains(t)).count()
    }

    /// Records `item`; returns how many tuples were newly covered.
    pub fn add(&mut self, item: &ScenarioItem) -> Result<usize> {
        if item.0.len() != self.cardinalities.len() || item.0.iter().zip(&self.cardinalities).any(|(&v, &n)| v >= n) {
            return Err(Error::InvalidItem(format!("{:?} does not fit the ledger", item.0)));
        }
        let tuples: Vec<_> = self.tuples_of(item).collect();
        Ok(tuples.into_iter().filter(|t| self.covered.insert(t.clone())).count())
    }

    /// Per-subset coverage counts: `(categories, covered, total)`.
    pub fn per_subset(&self) -> Vec<(Vec<usize>, usize, u64)> {
        (0..self.cardinalities.len())
            .combinations(self.k)
            .map(|cats| {
                let total = cats.iter().map(|&c| self.cardinalities[c] as u64).product();
                let covered = self.covered.iter().filter(|t| t.categories == cats).count();
                (cats, covered, total)
            })
            .collect()
    }
}

/// Computes the k-projection coverage of `items`.
///
/// With [`DenominatorMode::All`] the constraints are not consulted.
pub fn projection_coverage(
    space: &CategorySpace,
    items: &[ScenarioItem],
    k: usize,
    constraints: &[IndicatorConstraint],
    mode: DenominatorMode,
) -> Result<CoverageLedger> {
    let mut ledger = CoverageLedger::new(space, k)?;
    for item in items {
        space.validate_item(item)?;
        ledger.add(item)?;
    }
    if mode == DenominatorMode::Attainable {
        ledger.denominator = attainable_denominator(space, k, constraints)?;
    }
    Ok(ledger)
}

impl fmt::Display for CoverageLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-projection coverage {} ({:.4})",
            self.k,
            self.ratio_fraction(),
            self.ratio()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn highway() -> CategorySpace {
        CategorySpace::from_pairs([
            ("weather", vec!["cloudy", "rainy", "sunny"]),
            ("day", vec!["day", "night"]),
            ("lane", vec!["inner", "outer"]),
            ("curvature", vec!["straight", "left_bending", "right_bending"]),
            ("surface", vec!["dry", "wet"]),
        ])
        .unwrap()
    }

    #[test]
    fn denominators() {
        let s = highway();
        assert_eq!(projection_denominator(&s, 2).unwrap(), 57);
        assert_eq!(projection_denominator(&s, 5).unwrap(), 72);
        assert_eq!(projection_denominator(&s, 1).unwrap(), 12);
        assert_eq!(s.assignment_count(), Some(72));
        assert!(matches!(projection_denominator(&s, 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(projection_denominator(&s, 6), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn coverage_examples() {
        let s = highway();
        let none = projection_coverage(&s, &[], 2, &[], DenominatorMode::All).unwrap();
        assert_eq!((none.covered_count(), none.denominator()), (0, 57));

        let a = s.item(&["sunny", "day", "inner", "straight", "dry"]).unwrap();
        let one = projection_coverage(&s, std::slice::from_ref(&a), 2, &[], DenominatorMode::All).unwrap();
        assert_eq!(one.ratio_fraction(), "10/57");

        let b = s.item(&["cloudy", "night", "outer", "left_bending", "wet"]).unwrap();
        let two = projection_coverage(&s, &[a.clone(), b, a], 2, &[], DenominatorMode::All).unwrap();
        assert_eq!(two.ratio_fraction(), "20/57");
    }

    #[test]
    fn space_validation() {
        assert!(CategorySpace::from_pairs(Vec::<(&str, Vec<&str>)>::new()).is_err());
        assert!(CategorySpace::from_pairs([("a", vec!["x"])]).is_err());
        assert!(CategorySpace::from_pairs([("a", vec!["x", "x"])]).is_err());
        assert!(CategorySpace::from_pairs([("a", vec!["x", "y"]), ("a", vec!["x", "y"])]).is_err());
        let s = highway();
        assert!(s.item(&["snowy", "day", "inner", "straight", "dry"]).is_err());
        assert!(s.validate_item(&ScenarioItem(vec![0, 0, 0, 3, 0])).is_err());
        assert!(matches!(
            projection_coverage(&s, &[ScenarioItem(vec![0; 4])], 2, &[], DenominatorMode::All),
            Err(Error::InvalidItem(_))
        ));
    }

    #[test]
    fn feasibility_examples() {
        let s = highway();
        let c = IndicatorConstraint::new(&s, &[("weather", "sunny", 1), ("day", "night", 1)], 0, 1).unwrap();
        let bad = s.item(&["sunny", "night", "inner", "straight", "dry"]).unwrap();
        let ok = s.item(&["sunny", "day", "inner", "straight", "dry"]).unwrap();
        assert!(!is_feasible(&bad, std::slice::from_ref(&c)));
        assert!(is_feasible(&ok, &[c]));
        assert!(is_feasible(&bad, &[]));

        assert!(IndicatorConstraint::new(&s, &[("weather", "foggy", 1)], 0, 1).is_err());
        assert!(IndicatorConstraint::new(&s, &[("weather", "sunny", 1)], 2, 1).is_err());
    }

    #[test]
    fn ledger_is_monotone_and_idempotent() {
        let s = highway();
        let mut l = CoverageLedger::new(&s, 2).unwrap();
        let a = ScenarioItem(vec![0, 1, 0, 2, 1]);
        assert_eq!(l.gain(&a), 10);
        assert_eq!(l.add(&a).unwrap(), 10);
        let snapshot = l.clone();
        assert_eq!(l.add(&a).unwrap(), 0);
        assert_eq!(l, snapshot);
        let per = l.per_subset();
        assert_eq!(per.len(), 10);
        assert!(per.iter().all(|(_, c, _)| *c == 1));
        assert_eq!(per.iter().map(|(_, _, t)| t).sum::<u64>(), 57);
    }
}
