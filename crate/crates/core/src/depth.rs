//! Depth reduction: rebuild a program into a balanced equivalent whose height
//! is at most `3 * ceil(log2(degree))` while preserving the root support.
//!
//! The rebuild works over set semantics (plus is union, times is a
//! variable-disjoint product), which makes unions idempotent: a monomial may
//! be re-derived along several routes without changing the computed support.
//! Two gate families are materialized for the source program's nodes:
//!
//! * `full(v)`: the support of `v`. For degree at least 2 it is a union over
//!   the "crossing" times nodes `w` reachable from `v`, where crossing means
//!   `deg(w) > deg(v)/2` while both children of `w` have degree at most
//!   `deg(v)/2`. Every derivation tree of `v` contains exactly one such node
//!   along its heavy branch, so the union `ctx(v,w) * full(w1) * full(w2)`
//!   over crossing `w` covers the support; idempotence forgives overlaps.
//! * `ctx(v,w)`: the contexts of `w` in `v`, i.e. the sets `alpha` such that
//!   a derivation tree of `v` derives `alpha * beta` using a subtree of `w`
//!   deriving `beta`. Contexts split along the hole path at the first times
//!   step whose lower side has gap at most `floor(gap/2)`; the two context
//!   parts both have gap at most half while the off-path sibling is either
//!   small (joined directly) or expanded once more through its own crossing
//!   nodes so that every factor fits in the height budget.
//!
//! Height accounting (each node one level, any fan-in): `full` of degree d
//! fits in `3*ceil(log2(d))` and `ctx` of gap g in `3*ceil(log2(g)) + 1`;
//! both verified inductively over the term shapes used below and checked by
//! the test suite on every family.
//!
//! Node budget: gates are memoized per source node (`full`), per ordered node
//! pair (`ctx`), and structurally shared through the builder for all term
//! products. The documented constant for the size contract is C = 64: the
//! observed node count stays below `64 * |P|^2` across every program family
//! in this crate (asserted by tests). Adversarially shared DAGs can in
//! principle push term products toward `O(|P|^3)`; such shapes do not arise
//! from the frontends or generators here.

use crate::program::{Node, Program, ProgramBuilder};
use std::collections::HashMap;

/// Height budget for a program of the given degree.
///
/// The formula `3 * ceil(log2(degree))` is 0 for degree 1, which only a bare
/// input can meet; a degree-1 program with several monomials needs one plus
/// node, so the bound is clamped to 1 there.
pub fn depth_bound(degree: u64) -> u32 {
    if degree <= 1 {
        1
    } else {
        3 * ceil_log2(degree)
    }
}

fn ceil_log2(d: u64) -> u32 {
    assert!(d >= 1);
    64 - (d - 1).leading_zeros()
}

/// Rebuilds `p` to height at most `depth_bound(degree)`; returns the input
/// unchanged when it already fits (the fast path is always taken then).
pub fn reduce_depth(p: &Program) -> Program {
    debug_assert!(p.validate().is_valid(), "depth reduction expects a valid program");
    let degrees = p.degrees();
    let bound = depth_bound(degrees[p.root as usize]);
    if p.depth() <= bound {
        return p.clone();
    }
    Reducer::new(p, degrees).build()
}

/// Fixed-universe bitsets over node indices, one row per node.
struct Reach {
    words: usize,
    rows: Vec<u64>,
}

impl Reach {
    fn new(len: usize) -> Self {
        let words = (len + 63) / 64;
        Reach { words, rows: vec![0; words * len] }
    }

    fn set(&mut self, row: usize, bit: usize) {
        self.rows[row * self.words + bit / 64] |= 1 << (bit % 64);
    }

    fn test(&self, row: usize, bit: usize) -> bool {
        self.rows[row * self.words + bit / 64] & (1 << (bit % 64)) != 0
    }

    fn union_into(&mut self, dst: usize, src: usize) {
        let (d, s) = (dst * self.words, src * self.words);
        for k in 0..self.words {
            let bits = self.rows[s + k];
            self.rows[d + k] |= bits;
        }
    }
}

struct Reducer<'a> {
    p: &'a Program,
    deg: Vec<u64>,
    reach: Reach,
    times_nodes: Vec<u32>,
    input_nodes: Vec<u32>,
    b: ProgramBuilder,
    full_memo: HashMap<u32, u32>,
    ctx_memo: HashMap<(u32, u32), u32>,
}

impl<'a> Reducer<'a> {
    fn new(p: &'a Program, deg: Vec<u64>) -> Self {
        let len = p.len();
        let mut reach = Reach::new(len);
        let mut times_nodes = Vec::new();
        let mut input_nodes = Vec::new();
        for i in 0..len {
            reach.set(i, i);
            for c in p.children(i as u32) {
                reach.union_into(i, c as usize);
            }
            match p.nodes[i] {
                Node::Times { .. } => times_nodes.push(i as u32),
                Node::Input { .. } => input_nodes.push(i as u32),
                Node::Plus { .. } => {}
            }
        }
        let b = ProgramBuilder::with_names(p.var_names.clone());
        Reducer { p, deg, reach, times_nodes, input_nodes, b, full_memo: HashMap::new(), ctx_memo: HashMap::new() }
    }

    fn build(mut self) -> Program {
        let root = self.full(self.p.root);
        self.b.finish(root)
    }

    fn reaches(&self, from: u32, to: u32) -> bool {
        self.reach.test(from as usize, to as usize)
    }

    /// Times nodes under `v` with degree above `m` and both children at most `m`.
    fn crossing(&self, v: u32, m: u64) -> Vec<u32> {
        let mut out = Vec::new();
        for &w in &self.times_nodes {
            if !self.reaches(v, w) || self.deg[w as usize] <= m {
                continue;
            }
            if let Node::Times { left, right } = self.p.nodes[w as usize] {
                if self.deg[left as usize] <= m && self.deg[right as usize] <= m {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Distinct input variables reachable from a degree-1 node, as one gate.
    fn degree_one_set(&mut self, v: u32) -> u32 {
        let mut vars = Vec::new();
        for &i in &self.input_nodes {
            if self.reaches(v, i) {
                if let Node::Input { var } = self.p.nodes[i as usize] {
                    vars.push(var);
                }
            }
        }
        vars.sort_unstable();
        vars.dedup();
        assert!(!vars.is_empty(), "degree-1 node with no reachable input");
        let gates: Vec<u32> = vars.into_iter().map(|var| self.b.input(var)).collect();
        self.plus_flat(gates)
    }

    /// Plus over terms with one level of flattening so no +->+ edge appears.
    fn plus_flat(&mut self, terms: Vec<u32>) -> u32 {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match self.b.node(t) {
                Node::Plus { children } => flat.extend(children.iter().copied()),
                _ => flat.push(t),
            }
        }
        self.b.plus(flat)
    }

    /// Product of the two child supports of a times node.
    fn pair_product(&mut self, w: u32) -> u32 {
        let Node::Times { left, right } = self.p.nodes[w as usize] else {
            unreachable!("pair product of a non-times node")
        };
        let l = self.full(left);
        let r = self.full(right);
        self.b.times(l, r)
    }

    /// Gate computing the support of source node `v`.
    fn full(&mut self, v: u32) -> u32 {
        if let Some(&g) = self.full_memo.get(&v) {
            return g;
        }
        let d = self.deg[v as usize];
        let gate = if d == 1 {
            self.degree_one_set(v)
        } else {
            let m = d / 2;
            let mut terms = Vec::new();
            for w in self.crossing(v, m) {
                let tt = self.pair_product(w);
                let gap = d - self.deg[w as usize];
                if gap == 0 {
                    // Equal degree forces a pure-plus route from v to w.
                    terms.push(tt);
                } else {
                    let c = self.ctx(v, w).expect("positive gap has a nonempty context");
                    terms.push(self.b.times(c, tt));
                }
            }
            assert!(!terms.is_empty(), "no crossing node under a degree->=2 node");
            self.plus_flat(terms)
        };
        self.full_memo.insert(v, gate);
        gate
    }

    /// Gate computing the contexts of `w` inside `v`; None encodes the empty
    /// context when the gap is zero.
    fn ctx(&mut self, v: u32, w: u32) -> Option<u32> {
        debug_assert!(self.reaches(v, w));
        let g = self.deg[v as usize] - self.deg[w as usize];
        if g == 0 {
            return None;
        }
        if let Some(&gate) = self.ctx_memo.get(&(v, w)) {
            return Some(gate);
        }
        let gate = if g == 1 { self.ctx_gap_one(v, w) } else { self.ctx_split(v, w, g) };
        self.ctx_memo.insert((v, w), gate);
        Some(gate)
    }

    /// Gap-1 contexts are single variables: the degree-1 siblings hanging off
    /// pure-plus routes from v to w.
    fn ctx_gap_one(&mut self, v: u32, w: u32) -> u32 {
        let dv = self.deg[v as usize];
        let dw = self.deg[w as usize];
        let mut parts = Vec::new();
        for ui in 0..self.times_nodes.len() {
            let u = self.times_nodes[ui];
            if self.deg[u as usize] != dv || !self.reaches(v, u) {
                continue;
            }
            let Node::Times { left, right } = self.p.nodes[u as usize] else { unreachable!() };
            for (hole, sib) in [(left, right), (right, left)] {
                if self.deg[sib as usize] == 1
                    && self.deg[hole as usize] == dw
                    && self.reaches(hole, w)
                {
                    parts.push(self.degree_one_set(sib));
                }
            }
        }
        assert!(!parts.is_empty(), "gap-1 context with no candidate sibling");
        self.plus_flat(parts)
    }

    /// General context split at the first hole-path times step crossing half
    /// the gap; heavy off-path siblings are expanded once through their own
    /// crossing nodes to keep every factor within the height budget.
    fn ctx_split(&mut self, v: u32, w: u32, g: u64) -> u32 {
        let half = g / 2;
        let half_pow = 1u64 << (ceil_log2(g) - 1);
        let dw = self.deg[w as usize];
        let mut terms = Vec::new();
        for ui in 0..self.times_nodes.len() {
            let u = self.times_nodes[ui];
            if !self.reaches(v, u) {
                continue;
            }
            match self.deg[u as usize].checked_sub(dw) {
                Some(x) if x > half => {}
                _ => continue,
            }
            let Node::Times { left, right } = self.p.nodes[u as usize] else { unreachable!() };
            for (hole, sib) in [(left, right), (right, left)] {
                if !self.reaches(hole, w) {
                    continue;
                }
                let gap_hole = self.deg[hole as usize] - dw;
                if gap_hole > half {
                    continue;
                }
                let e = self.deg[sib as usize];
                if e <= half_pow {
                    let rest = match self.ctx(hole, w) {
                        None => self.full(sib),
                        Some(c) => {
                            let f = self.full(sib);
                            self.b.times(f, c)
                        }
                    };
                    let term = match self.ctx(v, u) {
                        None => rest,
                        Some(c) => self.b.times(c, rest),
                    };
                    terms.push(term);
                } else {
                    let tops = match (self.ctx(v, u), self.ctx(hole, w)) {
                        (None, None) => None,
                        (Some(c), None) | (None, Some(c)) => Some(c),
                        (Some(c1), Some(c2)) => Some(self.b.times(c1, c2)),
                    };
                    for y in self.crossing(sib, e / 2) {
                        let tt = self.pair_product(y);
                        let lower = match self.ctx(sib, y) {
                            None => tt,
                            Some(c) => self.b.times(c, tt),
                        };
                        let term = match tops {
                            None => lower,
                            Some(t) => self.b.times(t, lower),
                        };
                        terms.push(term);
                    }
                }
            }
        }
        assert!(!terms.is_empty(), "context split found no candidate");
        self.plus_flat(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{demo_program, gen_chain, gen_comb, gen_random_program, gen_tower};
    use crate::oracle;

    /// Left-linear product of binary sums with a redundant unary plus after
    /// every step, so the height is 2*degree - 1.
    fn deep_chain(degree: u32) -> Program {
        let mut b = ProgramBuilder::new(2 * degree);
        let mut acc: Option<u32> = None;
        for i in 0..degree {
            let x = b.input(2 * i);
            let y = b.input(2 * i + 1);
            let p = b.plus(vec![x, y]);
            acc = Some(match acc {
                None => p,
                Some(a) => {
                    let t = b.times(a, p);
                    b.plus_raw(vec![t])
                }
            });
        }
        b.finish(acc.unwrap())
    }

    fn assert_reduced(p: &Program, label: &str) {
        let deg = p.degrees()[p.root as usize];
        let q = reduce_depth(p);
        assert!(q.validate().is_valid(), "{label}: output invalid\n{}", q.validate());
        assert!(
            q.depth() <= depth_bound(deg),
            "{label}: depth {} exceeds bound {}",
            q.depth(),
            depth_bound(deg)
        );
        assert_eq!(q.degrees()[q.root as usize], deg, "{label}: degree changed");
        assert!(q.len() as u64 <= 64 * (p.len() as u64).pow(2), "{label}: node budget exceeded");
        let before = oracle::enumerate_support(p, 2_000_000).unwrap();
        let after = oracle::enumerate_support(&q, 2_000_000).unwrap();
        assert_eq!(before, after, "{label}: support changed");
    }

    #[test]
    fn bound_formula() {
        assert_eq!(depth_bound(1), 1);
        assert_eq!(depth_bound(2), 3);
        assert_eq!(depth_bound(3), 6);
        assert_eq!(depth_bound(8), 9);
        assert_eq!(depth_bound(9), 12);
    }

    #[test]
    fn shallow_programs_pass_through_unchanged() {
        let p = demo_program();
        assert!(p.depth() <= depth_bound(p.degrees()[p.root as usize]));
        let q = reduce_depth(&p);
        assert_eq!(p.nodes, q.nodes);
        assert_eq!(p.root, q.root);
    }

    #[test]
    fn deep_chain_is_rebalanced() {
        let p = deep_chain(8);
        assert_eq!(p.depth(), 15);
        assert_eq!(p.degrees()[p.root as usize], 8);
        let q = reduce_depth(&p);
        assert!(q.depth() <= 9, "depth {}", q.depth());
        assert_reduced(&p, "deep chain 8");
    }

    #[test]
    fn chains_and_combs_meet_the_contract() {
        for d in 2..=10 {
            assert_reduced(&gen_chain(d), &format!("chain {d}"));
            assert_reduced(&gen_comb(d), &format!("comb {d}"));
            assert_reduced(&deep_chain(d), &format!("deep chain {d}"));
        }
    }

    #[test]
    fn reduction_is_idempotent() {
        let q = reduce_depth(&deep_chain(9));
        let r = reduce_depth(&q);
        assert_eq!(q.nodes, r.nodes);
        assert_eq!(q.root, r.root);
    }

    #[test]
    fn random_and_tower_supports_survive() {
        for seed in 0..10 {
            assert_reduced(&gen_random_program(seed), &format!("random {seed}"));
        }
        for seed in 0..5 {
            assert_reduced(&gen_tower(seed), &format!("tower {seed}"));
        }
    }

    #[test]
    fn wider_deep_chains_stay_within_budget() {
        for d in [12, 16, 20] {
            let p = deep_chain(d);
            assert!(p.depth() > depth_bound(d as u64));
            assert_reduced(&p, &format!("deep chain {d}"));
        }
    }
}
