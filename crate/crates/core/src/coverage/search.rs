//! Proposal search: the feasible full assignment covering the most uncovered
//! k-tuples.
//!
//! Exact search is a depth-first branch-and-bound over categories in order,
//! trying values in ascending order. At a node with categories `0..depth`
//! fixed, the bound is
//!
//! * tuples whose categories are all fixed and that are still uncovered, plus
//! * one for every k-subset touching a free category for which *some*
//!   completion of the free categories yields an uncovered tuple.
//!
//! Each subset contributes at most one tuple per item, so the bound is
//! admissible. Since leaves are reached in lexicographic order and only a
//! strictly better gain replaces the incumbent, ties resolve to the
//! lexicographically smallest item.

use itertools::Itertools;

use super::{check_k, CategorySpace, CoverageLedger, IndicatorConstraint, ScenarioItem};
use crate::{Error, Result};

/// A proposed item and the number of tuples it newly covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub item: ScenarioItem,
    pub gain: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Branch-and-bound; the gain is the exact maximum.
    #[default]
    Exact,
    /// Category-by-category greedy choice; no optimality promise.
    Greedy,
}

/// Covered-tuple bitmaps per k-subset, indexed by mixed-radix value codes.
struct SubsetTable {
    cards: Vec<usize>,
    subsets: Vec<Vec<usize>>,
    covered: Vec<Vec<bool>>,
    covered_count: Vec<usize>,
    /// Subset indices grouped by their largest category.
    by_last: Vec<Vec<usize>>,
}

impl SubsetTable {
    fn new(cards: &[usize], k: usize) -> Self {
        let subsets: Vec<Vec<usize>> = (0..cards.len()).combinations(k).collect();
        let covered = subsets
            .iter()
            .map(|s| vec![false; s.iter().map(|&c| cards[c]).product()])
            .collect();
        let mut by_last = vec![Vec::new(); cards.len()];
        for (i, s) in subsets.iter().enumerate() {
            by_last[*s.last().expect("k >= 1")].push(i);
        }
        Self {
            cards: cards.to_vec(),
            covered_count: vec![0; subsets.len()],
            subsets,
            covered,
            by_last,
        }
    }

    fn from_ledger(ledger: &CoverageLedger) -> Self {
        let mut t = Self::new(ledger.cardinalities(), ledger.k());
        let index: std::collections::HashMap<&[usize], usize> =
            t.subsets.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let marks: Vec<(usize, usize)> = ledger
            .covered()
            .iter()
            .map(|tuple| {
                let s = index[tuple.categories.as_slice()];
                (s, t.code_of(s, &tuple.values))
            })
            .collect();
        for (s, code) in marks {
            t.mark(s, code);
        }
        t
    }

    fn code_of(&self, subset: usize, values: &[usize]) -> usize {
        self.subsets[subset]
            .iter()
            .zip(values)
            .fold(0, |acc, (&c, &v)| acc * self.cards[c] + v)
    }

    fn item_code(&self, subset: usize, item: &[usize]) -> usize {
        self.subsets[subset]
            .iter()
            .fold(0, |acc, &c| acc * self.cards[c] + item[c])
    }

    fn mark(&mut self, subset: usize, code: usize) {
        if !self.covered[subset][code] {
            self.covered[subset][code] = true;
            self.covered_count[subset] += 1;
        }
    }

    fn add_item(&mut self, item: &[usize]) {
        for s in 0..self.subsets.len() {
            let code = self.item_code(s, item);
            self.mark(s, code);
        }
    }

    fn gain(&self, item: &[usize]) -> usize {
        (0..self.subsets.len())
            .filter(|&s| !self.covered[s][self.item_code(s, item)])
            .count()
    }

    /// Newly covered tuples among subsets whose last category is `depth`,
    /// given values for categories `0..=depth` in `prefix`.
    fn gain_at(&self, depth: usize, prefix: &[usize]) -> usize {
        self.by_last[depth]
            .iter()
            .filter(|&&s| !self.covered[s][self.item_code(s, prefix)])
            .count()
    }

    /// Optimistic count over subsets that still contain a free category.
    fn optimistic(&self, depth: usize, prefix: &[usize]) -> usize {
        let mut total = 0;
        for last in depth..self.cards.len() {
            for &s in &self.by_last[last] {
                if self.can_gain(s, depth, prefix) {
                    total += 1;
                }
            }
        }
        total
    }

    fn can_gain(&self, s: usize, depth: usize, prefix: &[usize]) -> bool {
        let size = self.covered[s].len();
        if self.covered_count[s] == 0 {
            return true;
        }
        if self.covered_count[s] == size {
            return false;
        }
        let cats = &self.subsets[s];
        let free: Vec<usize> = cats.iter().copied().filter(|&c| c >= depth).collect();
        // odometer over the free categories' values
        let mut vals = vec![0usize; free.len()];
        loop {
            let mut code = 0;
            let mut fi = 0;
            for &c in cats {
                let v = if c < depth {
                    prefix[c]
                } else {
                    fi += 1;
                    vals[fi - 1]
                };
                code = code * self.cards[c] + v;
            }
            if !self.covered[s][code] {
                return true;
            }
            let mut i = free.len();
            loop {
                if i == 0 {
                    return false;
                }
                i -= 1;
                vals[i] += 1;
                if vals[i] < self.cards[free[i]] {
                    break;
                }
                vals[i] = 0;
            }
        }
    }
}

/// Per-category contribution ranges for cheap partial-feasibility checks.
struct ConstraintTable {
    rows: Vec<ConstraintRow>,
}

struct ConstraintRow {
    /// contrib[category][value]
    contrib: Vec<Vec<i64>>,
    /// min/max achievable contribution from categories `d..`
    min_suffix: Vec<i64>,
    max_suffix: Vec<i64>,
    lower: i64,
    upper: i64,
}

impl ConstraintTable {
    fn new(cards: &[usize], constraints: &[IndicatorConstraint]) -> Self {
        let rows = constraints
            .iter()
            .map(|c| {
                let mut contrib: Vec<Vec<i64>> = cards.iter().map(|&n| vec![0; n]).collect();
                for t in c.terms() {
                    let e = &mut contrib[t.category][t.value];
                    *e = e.saturating_add(t.coefficient);
                }
                let m = cards.len();
                let mut min_suffix = vec![0i64; m + 1];
                let mut max_suffix = vec![0i64; m + 1];
                for d in (0..m).rev() {
                    let lo = *contrib[d].iter().min().expect("nonempty category");
                    let hi = *contrib[d].iter().max().expect("nonempty category");
                    min_suffix[d] = min_suffix[d + 1].saturating_add(lo);
                    max_suffix[d] = max_suffix[d + 1].saturating_add(hi);
                }
                ConstraintRow {
                    contrib,
                    min_suffix,
                    max_suffix,
                    lower: c.lower(),
                    upper: c.upper(),
                }
            })
            .collect();
        Self { rows }
    }

    /// Whether the partial sums, with categories `depth..` still free, can
    /// still land inside every constraint's range. Exact when `depth == m`.
    fn may_satisfy(&self, depth: usize, sums: &[i64], pins: &[Option<usize>]) -> bool {
        self.rows.iter().zip(sums).all(|(r, &s)| {
            let (mut lo, mut hi) = (s, s);
            if pins.iter().skip(depth).all(Option::is_none) {
                lo = lo.saturating_add(r.min_suffix[depth]);
                hi = hi.saturating_add(r.max_suffix[depth]);
            } else {
                for (c, pin) in pins.iter().enumerate().skip(depth) {
                    match pin {
                        Some(v) => {
                            lo = lo.saturating_add(r.contrib[c][*v]);
                            hi = hi.saturating_add(r.contrib[c][*v]);
                        }
                        None => {
                            lo = lo.saturating_add(*r.contrib[c].iter().min().unwrap());
                            hi = hi.saturating_add(*r.contrib[c].iter().max().unwrap());
                        }
                    }
                }
            }
            lo <= r.upper && hi >= r.lower
        })
    }

    fn push(&self, sums: &mut [i64], category: usize, value: usize) {
        for (s, r) in sums.iter_mut().zip(&self.rows) {
            *s = s.saturating_add(r.contrib[category][value]);
        }
    }

    fn pop(&self, sums: &mut [i64], category: usize, value: usize) {
        for (s, r) in sums.iter_mut().zip(&self.rows) {
            *s = s.saturating_sub(r.contrib[category][value]);
        }
    }
}

struct BranchAndBound<'a> {
    table: &'a SubsetTable,
    constraints: &'a ConstraintTable,
    prefix: Vec<usize>,
    sums: Vec<i64>,
    best: Option<(Vec<usize>, usize)>,
}

impl BranchAndBound<'_> {
    fn dfs(&mut self, depth: usize, exact: usize) {
        let free = vec![None; self.table.cards.len()];
        if !self.constraints.may_satisfy(depth, &self.sums, &free) {
            return;
        }
        let m = self.table.cards.len();
        if depth == m {
            if self.best.as_ref().is_none_or(|(_, g)| exact > *g) {
                self.best = Some((self.prefix.clone(), exact));
            }
            return;
        }
        if let Some((_, best)) = &self.best {
            if exact + self.table.optimistic(depth, &self.prefix) <= *best {
                return;
            }
        }
        for v in 0..self.table.cards[depth] {
            self.prefix.push(v);
            self.constraints.push(&mut self.sums, depth, v);
            let g = self.table.gain_at(depth, &self.prefix);
            self.dfs(depth + 1, exact + g);
            self.constraints.pop(&mut self.sums, depth, v);
            self.prefix.pop();
        }
    }
}

fn exact_best(table: &SubsetTable, constraints: &ConstraintTable) -> Option<(Vec<usize>, usize)> {
    let mut bb = BranchAndBound {
        table,
        constraints,
        prefix: Vec::with_capacity(table.cards.len()),
        sums: vec![0; constraints.rows.len()],
        best: None,
    };
    bb.dfs(0, 0);
    bb.best
}

fn greedy_best(table: &SubsetTable, constraints: &ConstraintTable) -> Option<(Vec<usize>, usize)> {
    let m = table.cards.len();
    let free = vec![None; m];
    let mut prefix = Vec::with_capacity(m);
    let mut sums = vec![0; constraints.rows.len()];
    let mut gain = 0;
    for depth in 0..m {
        let mut choice: Option<(usize, usize)> = None;
        for v in 0..table.cards[depth] {
            constraints.push(&mut sums, depth, v);
            if constraints.may_satisfy(depth + 1, &sums, &free) {
                prefix.push(v);
                let g = table.gain_at(depth, &prefix);
                prefix.pop();
                if choice.is_none_or(|(_, best)| g > best) {
                    choice = Some((v, g));
                }
            }
            constraints.pop(&mut sums, depth, v);
        }
        let (v, g) = choice?;
        constraints.push(&mut sums, depth, v);
        prefix.push(v);
        gain += g;
    }
    Some((prefix, gain))
}

/// Depth-first search for any feasible completion of `pins`.
fn feasible_completion(cards: &[usize], constraints: &ConstraintTable, pins: &[Option<usize>]) -> Option<Vec<usize>> {
    fn go(
        depth: usize,
        cards: &[usize],
        constraints: &ConstraintTable,
        pins: &[Option<usize>],
        prefix: &mut Vec<usize>,
        sums: &mut Vec<i64>,
    ) -> bool {
        if !constraints.may_satisfy(depth, sums, pins) {
            return false;
        }
        if depth == cards.len() {
            return true;
        }
        let values: Vec<usize> = match pins[depth] {
            Some(v) => vec![v],
            None => (0..cards[depth]).collect(),
        };
        for v in values {
            prefix.push(v);
            constraints.push(sums, depth, v);
            if go(depth + 1, cards, constraints, pins, prefix, sums) {
                return true;
            }
            constraints.pop(sums, depth, v);
            prefix.pop();
        }
        false
    }
    let mut prefix = Vec::with_capacity(cards.len());
    let mut sums = vec![0; constraints.rows.len()];
    go(0, cards, constraints, pins, &mut prefix, &mut sums).then_some(prefix)
}

/// Proposes up to `count` items to collect next.
///
/// Proposals are sequential: each one is chosen against the ledger extended by
/// the proposals before it, and its gain is counted the same way. The first
/// proposal is always returned; later ones only while they still add coverage.
pub fn propose_next(
    space: &CategorySpace,
    ledger: &CoverageLedger,
    constraints: &[IndicatorConstraint],
    count: usize,
    strategy: SearchStrategy,
) -> Result<Vec<Proposal>> {
    ledger.check_space(space)?;
    if count == 0 {
        return Err(Error::BadParameters("proposal count must be positive".into()));
    }
    let cards = space.cardinalities();
    let mut table = SubsetTable::from_ledger(ledger);
    let ctable = ConstraintTable::new(&cards, constraints);
    let mut out = Vec::new();
    for round in 0..count {
        let found = match strategy {
            SearchStrategy::Exact => exact_best(&table, &ctable),
            SearchStrategy::Greedy => greedy_best(&table, &ctable)
                .filter(|(item, _)| crate::coverage::is_feasible(&ScenarioItem(item.clone()), constraints))
                .or_else(|| {
                    let free = vec![None; cards.len()];
                    feasible_completion(&cards, &ctable, &free).map(|item| {
                        let g = table.gain(&item);
                        (item, g)
                    })
                }),
        };
        let Some((item, gain)) = found else {
            return Err(Error::NoFeasibleAssignment);
        };
        if round > 0 && gain == 0 {
            break;
        }
        table.add_item(&item);
        out.push(Proposal {
            item: ScenarioItem(item),
            gain,
        });
    }
    Ok(out)
}

/// Number of k-tuples contained in at least one feasible full assignment.
pub fn attainable_denominator(space: &CategorySpace, k: usize, constraints: &[IndicatorConstraint]) -> Result<u64> {
    check_k(space, k)?;
    if constraints.is_empty() {
        return super::projection_denominator(space, k);
    }
    let cards = space.cardinalities();
    let ctable = ConstraintTable::new(&cards, constraints);
    let mut count = 0u64;
    for subset in (0..cards.len()).combinations(k) {
        for values in subset.iter().map(|&c| 0..cards[c]).multi_cartesian_product() {
            let mut pins = vec![None; cards.len()];
            for (&c, &v) in subset.iter().zip(&values) {
                pins[c] = Some(v);
            }
            if feasible_completion(&cards, &ctable, &pins).is_some() {
                count += 1;
            }
        }
    }
    Ok(count)
}
