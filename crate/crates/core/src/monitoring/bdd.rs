//! Reduced ordered BDDs with a shared, hash-consed node store.

use std::collections::HashMap;

use crate::{Error, Result};

/// Node id. `0` and `1` are the terminals.
pub type NodeId = u32;

pub const FALSE: NodeId = 0;
pub const TRUE: NodeId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    low: NodeId,
    high: NodeId,
}

/// Node store over `num_vars` variables, ordered by index.
///
/// Equal functions built in the same store share one id.
#[derive(Debug, Clone)]
pub struct Bdd {
    num_vars: u32,
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeId>,
}

impl Bdd {
    pub fn new(num_vars: usize) -> Self {
        let num_vars = u32::try_from(num_vars).expect("variable count fits in u32");
        let terminal = Node {
            var: num_vars,
            low: 0,
            high: 0,
        };
        Self {
            num_vars,
            nodes: vec![
                terminal,
                Node {
                    high: 1,
                    low: 1,
                    ..terminal
                },
            ],
            unique: HashMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars as usize
    }

    /// Total nodes in the store, terminals included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn var(&self, id: NodeId) -> u32 {
        self.nodes[id as usize].var
    }

    fn mk(&mut self, var: u32, low: NodeId, high: NodeId) -> NodeId {
        if low == high {
            return low;
        }
        let node = Node { var, low, high };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = NodeId::try_from(self.nodes.len()).expect("node table fits in u32");
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    fn check_width(&self, bits: &[bool]) -> Result<()> {
        if bits.len() != self.num_vars() {
            return Err(Error::dim("pattern width", self.num_vars(), bits.len()));
        }
        Ok(())
    }

    /// The function true exactly on `bits`.
    pub fn minterm(&mut self, bits: &[bool]) -> Result<NodeId> {
        self.check_width(bits)?;
        let mut id = TRUE;
        for (v, &b) in bits.iter().enumerate().rev() {
            id = if b {
                self.mk(v as u32, FALSE, id)
            } else {
                self.mk(v as u32, id, FALSE)
            };
        }
        Ok(id)
    }

    pub fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut memo = HashMap::new();
        self.or_rec(a, b, &mut memo)
    }

    fn or_rec(&mut self, a: NodeId, b: NodeId, memo: &mut HashMap<(NodeId, NodeId), NodeId>) -> NodeId {
        if a == TRUE || b == TRUE {
            return TRUE;
        }
        if a == FALSE || a == b {
            return b;
        }
        if b == FALSE {
            return a;
        }
        let key = (a.min(b), a.max(b));
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        let (va, vb) = (self.var(a), self.var(b));
        let v = va.min(vb);
        let (al, ah) = if va == v {
            let n = self.nodes[a as usize];
            (n.low, n.high)
        } else {
            (a, a)
        };
        let (bl, bh) = if vb == v {
            let n = self.nodes[b as usize];
            (n.low, n.high)
        } else {
            (b, b)
        };
        let low = self.or_rec(al, bl, memo);
        let high = self.or_rec(ah, bh, memo);
        let r = self.mk(v, low, high);
        memo.insert(key, r);
        r
    }

    /// `root ∨ minterm(bits)`.
    pub fn insert(&mut self, root: NodeId, bits: &[bool]) -> Result<NodeId> {
        let m = self.minterm(bits)?;
        Ok(self.or(root, m))
    }

    pub fn contains(&self, root: NodeId, bits: &[bool]) -> Result<bool> {
        self.check_width(bits)?;
        let mut id = root;
        while id > TRUE {
            let n = self.nodes[id as usize];
            id = if bits[n.var as usize] { n.high } else { n.low };
        }
        Ok(id == TRUE)
    }

    /// Satisfying assignments over all `num_vars` variables; saturates at
    /// `u128::MAX`.
    pub fn satcount(&self, root: NodeId) -> u128 {
        let mut memo = HashMap::new();
        let c = self.count_rec(root, &mut memo);
        c.saturating_mul(pow2(self.var(root)))
    }

    /// Assignments of variables `var(id)..num_vars`.
    fn count_rec(&self, id: NodeId, memo: &mut HashMap<NodeId, u128>) -> u128 {
        match id {
            FALSE => return 0,
            TRUE => return 1,
            _ => {}
        }
        if let Some(&c) = memo.get(&id) {
            return c;
        }
        let n = self.nodes[id as usize];
        let side = |child: NodeId, memo: &mut HashMap<NodeId, u128>| {
            self.count_rec(child, memo)
                .saturating_mul(pow2(self.var(child) - n.var - 1))
        };
        let c = side(n.low, memo).saturating_add(side(n.high, memo));
        memo.insert(id, c);
        c
    }

    /// The function with variable `var` negated in its argument.
    pub fn flip(&mut self, root: NodeId, var: usize) -> NodeId {
        let mut memo = HashMap::new();
        self.flip_rec(root, var as u32, &mut memo)
    }

    fn flip_rec(&mut self, id: NodeId, var: u32, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        let n = self.nodes[id as usize];
        if n.var > var {
            return id;
        }
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let r = if n.var == var {
            self.mk(var, n.high, n.low)
        } else {
            let low = self.flip_rec(n.low, var, memo);
            let high = self.flip_rec(n.high, var, memo);
            self.mk(n.var, low, high)
        };
        memo.insert(id, r);
        r
    }

    /// Every assignment within Hamming distance `gamma` of one accepted by
    /// `root`. `gamma = 0` returns `root` itself.
    pub fn hamming_relax(&mut self, root: NodeId, gamma: usize) -> Result<NodeId> {
        if gamma > self.num_vars() {
            return Err(Error::BadParameters(format!(
                "gamma {gamma} exceeds pattern width {}",
                self.num_vars
            )));
        }
        let mut cur = root;
        for _ in 0..gamma {
            let mut next = cur;
            for v in 0..self.num_vars() {
                let f = self.flip(cur, v);
                next = self.or(next, f);
            }
            if next == cur {
                break;
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Nodes reachable from `roots`, renumbered children first. Returns the
    /// `[var, low, high]` list for ids `2..` and the renumbered roots.
    pub fn export(&self, roots: &[NodeId]) -> (Vec<[u32; 3]>, Vec<NodeId>) {
        let mut map: HashMap<NodeId, NodeId> = HashMap::from([(FALSE, FALSE), (TRUE, TRUE)]);
        let mut out = Vec::new();
        let mut new_roots = Vec::with_capacity(roots.len());
        for &r in roots {
            let mut stack = vec![(r, false)];
            while let Some((id, expanded)) = stack.pop() {
                if map.contains_key(&id) {
                    continue;
                }
                let n = self.nodes[id as usize];
                if expanded {
                    let new = (out.len() + 2) as NodeId;
                    out.push([n.var, map[&n.low], map[&n.high]]);
                    map.insert(id, new);
                } else {
                    stack.push((id, true));
                    stack.push((n.high, false));
                    stack.push((n.low, false));
                }
            }
            new_roots.push(map[&r]);
        }
        (out, new_roots)
    }

    /// Rebuilds a store from an exported node list, validating order and
    /// reducedness. Returns the store and the remapped roots.
    pub fn import(num_vars: usize, nodes: &[[u32; 3]], roots: &[NodeId]) -> Result<(Self, Vec<NodeId>)> {
        let mut bdd = Self::new(num_vars);
        let mut map: Vec<NodeId> = vec![FALSE, TRUE];
        let bad = |msg: String| Error::MalformedInput(format!("bdd: {msg}"));
        for (k, &[var, low, high]) in nodes.iter().enumerate() {
            let id = k + 2;
            if var >= bdd.num_vars {
                return Err(bad(format!("node {id} has variable {var} out of range")));
            }
            for child in [low, high] {
                if child as usize >= id {
                    return Err(bad(format!("node {id} refers forward to {child}")));
                }
            }
            if low == high {
                return Err(bad(format!("node {id} is redundant")));
            }
            let (l, h) = (map[low as usize], map[high as usize]);
            if bdd.var(l) <= var || bdd.var(h) <= var {
                return Err(bad(format!("node {id} violates the variable order")));
            }
            let before = bdd.nodes.len();
            let new = bdd.mk(var, l, h);
            if bdd.nodes.len() == before {
                return Err(bad(format!("node {id} duplicates an earlier node")));
            }
            map.push(new);
        }
        let roots = roots
            .iter()
            .map(|&r| {
                map.get(r as usize)
                    .copied()
                    .ok_or_else(|| bad(format!("root {r} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((bdd, roots))
    }

    /// Checks reducedness and ordering of everything reachable from `root`.
    pub fn is_well_formed(&self, root: NodeId) -> bool {
        let mut stack = vec![root];
        let mut seen = std::collections::HashSet::new();
        while let Some(id) = stack.pop() {
            if id <= TRUE || !seen.insert(id) {
                continue;
            }
            let n = self.nodes[id as usize];
            if n.low == n.high || self.var(n.low) <= n.var || self.var(n.high) <= n.var {
                return false;
            }
            if self.unique.get(&n) != Some(&id) {
                return false;
            }
            stack.push(n.low);
            stack.push(n.high);
        }
        true
    }
}

fn pow2(e: u32) -> u128 {
    if e >= 128 {
        u128::MAX
    } else {
        1u128 << e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn insert_and_contains() {
        let mut b = Bdd::new(3);
        let r = b.insert(FALSE, &bits("101")).unwrap();
        assert!(b.contains(r, &bits("101")).unwrap());
        assert!(!b.contains(r, &bits("100")).unwrap());
        let count = b.node_count();
        assert_eq!(b.insert(r, &bits("101")).unwrap(), r);
        assert_eq!(b.node_count(), count);
        let r2 = b.insert(r, &bits("110")).unwrap();
        assert!(b.contains(r2, &bits("101")).unwrap());
        assert!(!b.contains(r2, &bits("011")).unwrap());
        assert_eq!(b.satcount(r2), 2);
        assert!(b.contains(r, &bits("10")).is_err());
    }

    #[test]
    fn full_cube_is_true() {
        let mut b = Bdd::new(3);
        let mut r = FALSE;
        for m in 0..8u32 {
            let p: Vec<bool> = (0..3).map(|i| m >> i & 1 == 1).collect();
            r = b.insert(r, &p).unwrap();
        }
        assert_eq!(r, TRUE);
        assert_eq!(b.satcount(TRUE), 8);
        assert_eq!(b.satcount(FALSE), 0);
    }

    #[test]
    fn hamming_ball_of_one_point() {
        let mut b = Bdd::new(3);
        let r = b.minterm(&bits("000")).unwrap();
        assert_eq!(b.hamming_relax(r, 0).unwrap(), r);
        let ball = b.hamming_relax(r, 1).unwrap();
        assert_eq!(b.satcount(ball), 4);
        for (p, want) in [
            ("000", true),
            ("100", true),
            ("010", true),
            ("001", true),
            ("110", false),
        ] {
            assert_eq!(b.contains(ball, &bits(p)).unwrap(), want, "{p}");
        }
        assert!(b.hamming_relax(r, 4).is_err());
    }

    #[test]
    fn insertion_order_gives_same_root() {
        let mut b = Bdd::new(4);
        let ps = ["0110", "1111", "0001", "1000"];
        let mut r1 = FALSE;
        for p in ps {
            r1 = b.insert(r1, &bits(p)).unwrap();
        }
        let mut r2 = FALSE;
        for p in ps.iter().rev() {
            r2 = b.insert(r2, &bits(p)).unwrap();
        }
        assert_eq!(r1, r2);
        assert!(b.is_well_formed(r1));
    }

    #[test]
    fn export_import_round_trip() {
        let mut b = Bdd::new(4);
        let r1 = b.insert(FALSE, &bits("0110")).unwrap();
        let r2 = b.insert(r1, &bits("1011")).unwrap();
        let (nodes, roots) = b.export(&[r1, FALSE, r2]);
        let (c, new_roots) = Bdd::import(4, &nodes, &roots).unwrap();
        assert_eq!(new_roots[1], FALSE);
        for m in 0..16u32 {
            let p: Vec<bool> = (0..4).map(|i| m >> i & 1 == 1).collect();
            assert_eq!(c.contains(new_roots[0], &p).unwrap(), b.contains(r1, &p).unwrap());
            assert_eq!(c.contains(new_roots[2], &p).unwrap(), b.contains(r2, &p).unwrap());
        }
        assert_eq!(c.export(&new_roots), (nodes.clone(), roots.clone()));
        let mut broken = nodes.clone();
        broken[0][1] = broken[0][2];
        assert!(Bdd::import(4, &broken, &roots).is_err());
    }
}
