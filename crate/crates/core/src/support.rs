//! Capped support computation, effective heights, and membership testing.

use crate::monomial::Monomial;
use crate::program::{Node, Program, VarSet};
use std::collections::HashMap;

/// Support of one node: fully materialized when it fits under the cap.
#[derive(Debug, Clone)]
pub enum NodeSupport {
    /// Sorted (lexicographically ascending) list of distinct monomials.
    Exact(Vec<Monomial>),
    /// More monomials than the cap; not materialized.
    Large,
}

impl NodeSupport {
    pub fn exact(&self) -> Option<&[Monomial]> {
        match self {
            NodeSupport::Exact(v) => Some(v),
            NodeSupport::Large => None,
        }
    }
}

/// Per-node supports up to a size cap, plus the induced effective heights.
///
/// A node has effective height 0 exactly when its support size is at most the
/// cap; otherwise its effective height is 1 + the maximum over its children.
#[derive(Debug, Clone)]
pub struct SupportInfo {
    pub per_node: Vec<NodeSupport>,
    pub effective_height: Vec<u32>,
    pub threshold: u64,
}

impl SupportInfo {
    pub fn root_exact<'a>(&'a self, p: &Program) -> Option<&'a [Monomial]> {
        self.per_node[p.root as usize].exact()
    }
}

/// Computes supports bottom-up, materializing only sets within `threshold`.
///
/// Product sizes are checked before materialization, so the pass never
/// allocates more than `threshold` monomials for a node it then discards.
pub fn capped_support(p: &Program, threshold: u64) -> SupportInfo {
    let mut per_node: Vec<NodeSupport> = Vec::with_capacity(p.len());
    let mut heights = vec![0u32; p.len()];
    for (i, n) in p.nodes.iter().enumerate() {
        let support = match n {
            Node::Input { var } => NodeSupport::Exact(vec![Monomial::single(*var)]),
            Node::Times { left, right } => {
                let (l, r) = (&per_node[*left as usize], &per_node[*right as usize]);
                match (l, r) {
                    (NodeSupport::Exact(a), NodeSupport::Exact(b)) => {
                        let size = a.len() as u128 * b.len() as u128;
                        if size <= threshold as u128 {
                            let mut out = Vec::with_capacity(size as usize);
                            for x in a {
                                for y in b {
                                    let m = x
                                        .union_disjoint(y)
                                        .expect("times children must be variable-disjoint");
                                    out.push(m);
                                }
                            }
                            out.sort_unstable();
                            debug_assert!(out.windows(2).all(|w| w[0] != w[1]), "product support must be duplicate-free");
                            NodeSupport::Exact(out)
                        } else {
                            NodeSupport::Large
                        }
                    }
                    _ => NodeSupport::Large,
                }
            }
            Node::Plus { children } => {
                let mut exact = Vec::new();
                let mut large = false;
                for &c in children {
                    match &per_node[c as usize] {
                        NodeSupport::Exact(v) => exact.push(v),
                        NodeSupport::Large => {
                            large = true;
                            break;
                        }
                    }
                }
                if large {
                    NodeSupport::Large
                } else {
                    let mut out: Vec<Monomial> = exact.iter().flat_map(|v| v.iter().cloned()).collect();
                    out.sort_unstable();
                    out.dedup();
                    if out.len() as u64 <= threshold {
                        NodeSupport::Exact(out)
                    } else {
                        NodeSupport::Large
                    }
                }
            }
        };
        heights[i] = match &support {
            NodeSupport::Exact(_) => 0,
            NodeSupport::Large => {
                1 + p.children(i as u32)
                    .iter()
                    .map(|&c| heights[c as usize])
                    .max()
                    .unwrap_or(0)
            }
        };
        per_node.push(support);
    }
    SupportInfo { per_node, effective_height: heights, threshold }
}

/// The default materialization cap, 16 * numVars * |P|^2, saturating.
pub fn default_threshold(p: &Program) -> u64 {
    let n = p.num_vars as u128;
    let size = p.len() as u128;
    let t = 16u128.saturating_mul(n).saturating_mul(size).saturating_mul(size);
    t.min(u64::MAX as u128) as u64
}

/// Top-down membership test, independent of support enumeration.
///
/// A monomial is in the support of a times node exactly when its restrictions
/// to the two children's variable sets partition it and each restriction lies
/// in the child's support; for plus nodes, when some child contains it.
pub struct MembershipOracle<'a> {
    program: &'a Program,
    var_sets: Vec<VarSet>,
    degrees: Vec<u64>,
    memo: HashMap<(u32, Monomial), bool>,
}

impl<'a> MembershipOracle<'a> {
    pub fn new(program: &'a Program) -> Self {
        MembershipOracle {
            program,
            var_sets: program.var_sets(),
            degrees: program.degrees(),
            memo: HashMap::new(),
        }
    }

    /// Does `alpha` belong to the support of node `q`?
    pub fn contains(&mut self, q: u32, alpha: &Monomial) -> bool {
        if alpha.degree() as u64 != self.degrees[q as usize] {
            return false;
        }
        if let Some(&b) = self.memo.get(&(q, alpha.clone())) {
            return b;
        }
        let result = match &self.program.nodes[q as usize] {
            Node::Input { var } => alpha.vars() == [*var],
            Node::Plus { children } => {
                let children = children.clone();
                children.iter().any(|&c| self.contains(c, alpha))
            }
            Node::Times { left, right } => {
                let (l, r) = (*left, *right);
                let al = alpha.restrict(|v| self.var_sets[l as usize].test(v));
                let ar = alpha.restrict(|v| self.var_sets[r as usize].test(v));
                al.degree() + ar.degree() == alpha.degree() && self.contains(l, &al) && self.contains(r, &ar)
            }
        };
        self.memo.insert((q, alpha.clone()), result);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Program {
        // (a + b) * (c + d)
        Program::parse("input a\ninput b\nplus 0 1\ninput c\ninput d\nplus 3 4\ntimes 2 5\n").unwrap()
    }

    #[test]
    fn support_of_product_of_sums() {
        let p = sample();
        let info = capped_support(&p, 100);
        let root = info.root_exact(&p).unwrap();
        assert_eq!(root.len(), 4);
        assert!(root.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(info.effective_height, vec![0; 7]);
    }

    #[test]
    fn effective_height_tracks_cap() {
        let p = sample();
        let info = capped_support(&p, 2);
        assert!(matches!(info.per_node[6], NodeSupport::Large));
        assert_eq!(info.effective_height[6], 1);
        assert_eq!(info.effective_height[2], 0);
    }

    #[test]
    fn membership_agrees_with_enumeration() {
        let p = sample();
        let info = capped_support(&p, 100);
        let mut oracle = MembershipOracle::new(&p);
        let root = info.root_exact(&p).unwrap();
        for m in root {
            assert!(oracle.contains(p.root, m));
        }
        // a*b has both vars on the same side of the product: not in support.
        let bad = Monomial::from_sorted(vec![0, 1]);
        assert!(!oracle.contains(p.root, &bad));
    }
}
