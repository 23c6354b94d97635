use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::interval::{interval_pass, Phase, PhaseFixes};
use super::octagon::{bound_linear_form, octagon_pass, Octagon};
use super::{falsify, tighten_box, IntervalBox, LinearConstraint, Relation, VerificationProblem};
use crate::{Error, Layer, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    #[default]
    Interval,
    Octagon,
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Self::Interval),
            "octagon" => Ok(Self::Octagon),
            _ => Err(Error::BadParameters(format!("unknown domain {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub domain: DomainKind,
    /// Maximum number of ReLU splits over the whole search.
    pub split_budget: usize,
    /// Random samples drawn by the falsifier; 0 disables it.
    pub attempts: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            domain: DomainKind::Interval,
            split_budget: 4096,
            attempts: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Proved {
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Counterexample {
        input: Vec<f64>,
        output: Vec<f64>,
    },
    Unknown {
        open_leaves: usize,
    },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Proved { .. } => "proved",
            Verdict::Counterexample { .. } => "counterexample",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: usize,
    pub splits: usize,
    pub lp_calls: usize,
    pub abstract_refutations: usize,
    pub lp_refutations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub verdict: Verdict,
    pub stats: SearchStats,
    /// Output bounds over the whole (tightened) input region, when non-empty.
    pub output_bounds: Option<IntervalBox>,
}

const LP_TOL: f64 = 1e-7;

enum OutputState {
    Interval(IntervalBox),
    Octagon(Octagon),
}

impl OutputState {
    fn bound(&self, coeffs: &[f64]) -> (f64, f64) {
        match self {
            OutputState::Interval(b) => b.bound_form(coeffs),
            OutputState::Octagon(o) => {
                let (lo, hi) = bound_linear_form(coeffs, o).expect("output dimension matches");
                let (il, ih) = o.interval_box().bound_form(coeffs);
                (lo.max(il), hi.min(ih))
            }
        }
    }

    fn as_box(&self) -> IntervalBox {
        match self {
            OutputState::Interval(b) => b.clone(),
            OutputState::Octagon(o) => o.interval_box(),
        }
    }
}

struct Node {
    relu_pre: Vec<(usize, IntervalBox)>,
    output: OutputState,
}

struct Search<'a> {
    problem: &'a VerificationProblem,
    region: IntervalBox,
    input_oct: Option<Octagon>,
    stats: SearchStats,
    budget: usize,
}

enum LeafResult {
    Refuted,
    Witness(Vec<f64>, Vec<f64>),
    Open,
}

impl Search<'_> {
    fn analyse(&self, fixes: &PhaseFixes) -> Option<Node> {
        match &self.input_oct {
            None => {
                let pass = interval_pass(&self.problem.net, &self.region, fixes)?;
                Some(Node {
                    relu_pre: pass.relu_pre,
                    output: OutputState::Interval(pass.layers.last().cloned()?),
                })
            }
            Some(start) => {
                let pass = octagon_pass(&self.problem.net, start, fixes)?;
                Some(Node {
                    relu_pre: pass.relu_pre,
                    output: OutputState::Octagon(pass.layers.last().cloned()?),
                })
            }
        }
    }

    fn refutes(&self, node: &Node) -> bool {
        self.problem.risk.iter().any(|c| {
            let (lo, hi) = node.output.bound(c.coeffs());
            c.refuted_by(lo, hi)
        })
    }

    /// Widest unstable, unfixed neuron; ties go to the lowest (layer, neuron).
    fn branch_choice(node: &Node, fixes: &PhaseFixes) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (layer, b) in &node.relu_pre {
            for i in 0..b.dim() {
                let (l, u) = (b.lower()[i], b.upper()[i]);
                if l < 0.0 && u > 0.0 && !fixes.contains_key(&(*layer, i)) {
                    let w = u - l;
                    if best.is_none_or(|(_, bw)| w > bw) {
                        best = Some(((*layer, i), w));
                    }
                }
            }
        }
        best.map(|(k, _)| k)
    }

    fn run(&mut self) -> Verdict {
        let mut stack = vec![PhaseFixes::new()];
        let mut open = 0usize;
        while let Some(fixes) = stack.pop() {
            self.stats.nodes += 1;
            let Some(node) = self.analyse(&fixes) else {
                self.stats.abstract_refutations += 1;
                continue;
            };
            if self.refutes(&node) {
                self.stats.abstract_refutations += 1;
                continue;
            }
            match Self::branch_choice(&node, &fixes) {
                None => match self.leaf(&node, &fixes) {
                    LeafResult::Refuted => self.stats.lp_refutations += 1,
                    LeafResult::Witness(input, output) => return Verdict::Counterexample { input, output },
                    LeafResult::Open => open += 1,
                },
                Some(_) if self.budget == 0 => open += 1,
                Some(key) => {
                    self.budget -= 1;
                    self.stats.splits += 1;
                    let mut active = fixes.clone();
                    active.insert(key, Phase::Active);
                    let mut inactive = fixes;
                    inactive.insert(key, Phase::Inactive);
                    stack.push(inactive);
                    stack.push(active);
                }
            }
        }
        if open == 0 {
            Verdict::Proved { note: None }
        } else {
            Verdict::Unknown { open_leaves: open }
        }
    }

    /// All phases are decided, so the network is affine on this leaf and the
    /// question becomes an LP. Maximises a uniform slack `t` on input and risk
    /// constraints; `t < 0` means the leaf holds no witness.
    fn leaf(&mut self, node: &Node, fixes: &PhaseFixes) -> LeafResult {
        self.stats.lp_calls += 1;
        let net = &self.problem.net;
        let d = net.input_dim();
        // current layer as rows of (A x + c)
        let mut rows: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut r = vec![0.0; d];
                r[i] = 1.0;
                r
            })
            .collect();
        let mut offs = vec![0.0; d];
        let mut phase_rows: Vec<(Vec<f64>, f64, Relation)> = Vec::new();
        let mut pre_iter = node.relu_pre.iter();
        for (li, layer) in net.layers().iter().enumerate() {
            match layer {
                Layer::Affine(a) => {
                    let mut nr = Vec::with_capacity(a.out_dim());
                    let mut no = Vec::with_capacity(a.out_dim());
                    for (w, b) in a.weights().iter().zip(a.bias()) {
                        let mut r = vec![0.0; d];
                        let mut o = *b;
                        for (wk, (rk, ok)) in w.iter().zip(rows.iter().zip(&offs)) {
                            if *wk == 0.0 {
                                continue;
                            }
                            for (x, y) in r.iter_mut().zip(rk) {
                                *x += wk * y;
                            }
                            o += wk * ok;
                        }
                        nr.push(r);
                        no.push(o);
                    }
                    rows = nr;
                    offs = no;
                }
                Layer::Relu => {
                    let (_, pre) = pre_iter.next().expect("one pre box per relu layer");
                    for i in 0..rows.len() {
                        let phase = fixes.get(&(li, i)).copied().unwrap_or(if pre.lower()[i] >= 0.0 {
                            Phase::Active
                        } else {
                            Phase::Inactive
                        });
                        match phase {
                            Phase::Active => {
                                if fixes.contains_key(&(li, i)) {
                                    phase_rows.push((rows[i].clone(), -offs[i], Relation::Ge));
                                }
                            }
                            Phase::Inactive => {
                                if fixes.contains_key(&(li, i)) {
                                    phase_rows.push((rows[i].clone(), -offs[i], Relation::Le));
                                }
                                rows[i].iter_mut().for_each(|v| *v = 0.0);
                                offs[i] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let xs: Vec<_> = (0..d)
            .map(|i| lp.add_var(0.0, (self.region.lower()[i], self.region.upper()[i])))
            .collect();
        let t = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
        let terms = |coeffs: &[f64]| -> Vec<(microlp::Variable, f64)> {
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (xs[i], *c))
                .collect()
        };
        for (r, rhs, rel) in &phase_rows {
            let tm = terms(r);
            if tm.is_empty() {
                let ok = match rel {
                    Relation::Le => 0.0 <= *rhs,
                    _ => 0.0 >= *rhs,
                };
                if !ok {
                    return LeafResult::Refuted;
                }
                continue;
            }
            let op = match rel {
                Relation::Le => ComparisonOp::Le,
                _ => ComparisonOp::Ge,
            };
            lp.add_constraint(&tm, op, *rhs);
        }
        let mut margin_rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &self.problem.input_constraints {
            let (a, b) = c.as_upper();
            if self.region.bound_form(&a).1 <= b {
                continue;
            }
            margin_rows.push((a, b));
        }
        for c in &self.problem.risk {
            let (g, b) = c.as_upper();
            let mut a = vec![0.0; d];
            let mut off = 0.0;
            for (gk, (rk, ok)) in g.iter().zip(rows.iter().zip(&offs)) {
                if *gk == 0.0 {
                    continue;
                }
                for (x, y) in a.iter_mut().zip(rk) {
                    *x += gk * y;
                }
                off += gk * ok;
            }
            margin_rows.push((a, b - off));
        }
        for (a, b) in &margin_rows {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                if *b < 0.0 {
                    return LeafResult::Refuted;
                }
                continue;
            }
            let mut tm = terms(a);
            tm.push((t, norm));
            lp.add_constraint(&tm, ComparisonOp::Le, *b);
        }
        let solution = match lp.solve().map(|o| o.into_solution()) {
            Ok(Ok(s)) => s,
            Ok(Err(_)) => return LeafResult::Open,
            Err(microlp::Error::Infeasible) => return LeafResult::Refuted,
            Err(e) => {
                log::debug!("leaf LP failed: {e}");
                return LeafResult::Open;
            }
        };
        if solution.objective() < -LP_TOL {
            return LeafResult::Refuted;
        }
        let mut x: Vec<f64> = xs.iter().map(|v| solution[*v]).collect();
        self.region.clamp(&mut x);
        match self.problem.validate_witness(&x) {
            Some(y) => LeafResult::Witness(x, y),
            None => LeafResult::Open,
        }
    }
}

/// Decides whether the risk region is reachable from the input region.
pub fn verify(problem: &VerificationProblem, opts: &VerifyOptions) -> Result<VerificationOutcome> {
    problem.check()?;
    let empty = |note: &str| VerificationOutcome {
        verdict: Verdict::Proved {
            note: Some(note.into()),
        },
        stats: SearchStats::default(),
        output_bounds: None,
    };
    let Some(region) = tighten_box(&problem.input_box, &problem.input_constraints)? else {
        return Ok(empty("input region is empty"));
    };
    let input_oct = match opts.domain {
        DomainKind::Interval => None,
        DomainKind::Octagon => {
            let mut o = Octagon::from_box(&region);
            for c in &problem.input_constraints {
                add_octagonal(&mut o, c);
            }
            match o.strong_closure() {
                Some(o) => Some(o),
                None => return Ok(empty("input region is empty")),
            }
        }
    };
    let mut search = Search {
        problem,
        region,
        input_oct,
        stats: SearchStats::default(),
        budget: opts.split_budget,
    };
    let Some(root) = search.analyse(&PhaseFixes::new()) else {
        return Ok(empty("input region is empty"));
    };
    let output_bounds = Some(root.output.as_box());
    let found = (opts.attempts > 0)
        .then(|| falsify::search(problem, &search.region, opts.attempts, opts.seed))
        .flatten();
    if let Some((input, output)) = found {
        return Ok(VerificationOutcome {
            verdict: Verdict::Counterexample { input, output },
            stats: search.stats,
            output_bounds,
        });
    }
    let verdict = search.run();
    Ok(VerificationOutcome {
        verdict,
        stats: search.stats,
        output_bounds,
    })
}

/// Adds constraints of the form `c * (±x_i ± x_j) <= b` exactly; others are
/// left to the box tightening.
fn add_octagonal(o: &mut Octagon, c: &LinearConstraint) {
    let (a, b) = c.as_upper();
    let nz: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
    match nz[..] {
        [i] => {
            if a[i] > 0.0 {
                o.add_upper(i, b / a[i]);
            } else {
                o.add_lower(i, b / a[i]);
            }
        }
        [i, j] if a[i].abs() == a[j].abs() => {
            let s = a[i].abs();
            o.add_pair(a[i].signum(), i, a[j].signum(), j, b / s);
        }
        _ => {}
    }
}
