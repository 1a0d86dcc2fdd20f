//! Canonical derivation trees, last-common-subtree antichains, and mutation classes.

use crate::monomial::Monomial;
use crate::program::{Node, Program};
use crate::support::{MembershipOracle, SupportInfo};
use std::collections::HashMap;

/// One node of a derivation tree.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub program_node: u32,
    /// The part of the derived monomial produced under this node.
    pub restriction: Monomial,
    /// Indices into `DerivationTree::nodes`.
    pub children: Vec<u32>,
    /// True when the node survives in the height-truncated tree, which stops
    /// each branch at the first node of effective height 0.
    pub starred: bool,
}

/// The canonical derivation tree of a monomial at a node.
///
/// At a plus node the tree follows the first child (in stored child order)
/// whose support contains the monomial; at a times node it splits the
/// monomial along the children's variable sets. The subtree rooted at any
/// tree node is itself the canonical tree of its restriction, so two
/// canonical subtrees at the same program node are equal exactly when their
/// restrictions are equal.
#[derive(Debug, Clone)]
pub struct DerivationTree {
    pub root_program_node: u32,
    pub monomial: Monomial,
    /// Preorder storage; nodes[0] is the root.
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("monomial {0} is not in the support of node {1}")]
    NotInSupport(String, u32),
    #[error("support of node {0} exceeds the cap and cannot be enumerated")]
    SupportNotMaterialized(u32),
}

/// Builds the canonical derivation tree of `alpha` at node `q`.
pub fn derivation_tree(
    p: &Program,
    info: &SupportInfo,
    alpha: &Monomial,
    q: u32,
) -> Result<DerivationTree, TreeError> {
    let mut oracle = MembershipOracle::new(p);
    if !oracle.contains(q, alpha) {
        return Err(TreeError::NotInSupport(alpha.to_string(), q));
    }
    let var_sets = p.var_sets();
    let mut nodes: Vec<TreeNode> = Vec::new();
    // Worklist of (program node, restriction, parent tree index, starred).
    let mut stack: Vec<(u32, Monomial, Option<u32>, bool)> = vec![(q, alpha.clone(), None, true)];
    while let Some((node, restriction, parent, starred)) = stack.pop() {
        let idx = nodes.len() as u32;
        if let Some(parent) = parent {
            nodes[parent as usize].children.push(idx);
        }
        let child_starred = starred && info.effective_height[node as usize] >= 1;
        let mut pending: Vec<(u32, Monomial)> = Vec::new();
        match &p.nodes[node as usize] {
            Node::Input { .. } => {}
            Node::Plus { children } => {
                let chosen = children
                    .iter()
                    .copied()
                    .find(|&c| oracle.contains(c, &restriction))
                    .expect("membership holds at the parent, so some child contains the monomial");
                pending.push((chosen, restriction.clone()));
            }
            Node::Times { left, right } => {
                let al = restriction.restrict(|v| var_sets[*left as usize].test(v));
                let ar = restriction.restrict(|v| var_sets[*right as usize].test(v));
                // Push right first so preorder visits left before right.
                pending.push((*right, ar));
                pending.push((*left, al));
            }
        }
        nodes.push(TreeNode { program_node: node, restriction, children: Vec::new(), starred });
        for (child, r) in pending {
            stack.push((child, r, Some(idx), child_starred));
        }
    }
    Ok(DerivationTree { root_program_node: q, monomial: alpha.clone(), nodes })
}

impl DerivationTree {
    /// Program nodes kept by the height-truncated view.
    pub fn starred_nodes(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.nodes.iter().filter(|n| n.starred).map(|n| n.program_node).collect();
        v.sort_unstable();
        v
    }

    fn restriction_map(&self) -> HashMap<u32, &Monomial> {
        // A program node occurs at most once per derivation tree: two
        // occurrences would sit under distinct branches of some times node,
        // contradicting the variable-disjointness of those branches.
        let mut m = HashMap::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let prev = m.insert(n.program_node, &n.restriction);
            debug_assert!(prev.is_none(), "program node repeated within one derivation tree");
        }
        m
    }
}

/// Last common subtree nodeset: the maximal nodes whose subtrees agree in both trees.
///
/// Returned as a sorted list of program node indices; it is always an
/// antichain of the program restricted to either tree.
pub fn lcsn(t1: &DerivationTree, t2: &DerivationTree) -> Vec<u32> {
    let map2 = t2.restriction_map();
    let mut out = Vec::new();
    // Walk t1 from the root; stop descending below a match.
    let mut stack = vec![0u32];
    while let Some(i) = stack.pop() {
        let n = &t1.nodes[i as usize];
        if map2.get(&n.program_node) == Some(&&n.restriction) {
            out.push(n.program_node);
        } else {
            stack.extend(n.children.iter().copied());
        }
    }
    out.sort_unstable();
    out
}

/// Last common subtree nodeset restricted to nodes surviving in either
/// height-truncated tree.
pub fn lcsn_star(t1: &DerivationTree, t2: &DerivationTree) -> Vec<u32> {
    let full = lcsn(t1, t2);
    let mut keep: Vec<u32> = t1.starred_nodes();
    keep.extend(t2.starred_nodes());
    keep.sort_unstable();
    keep.dedup();
    full.into_iter().filter(|q| keep.binary_search(q).is_ok()).collect()
}

/// All monomials of supp(q) whose last common subtree nodeset with `alpha` is
/// exactly `tau` (given sorted).
pub fn mutation_class(
    p: &Program,
    info: &SupportInfo,
    alpha: &Monomial,
    q: u32,
    tau: &[u32],
) -> Result<Vec<Monomial>, TreeError> {
    let support = info.per_node[q as usize]
        .exact()
        .ok_or(TreeError::SupportNotMaterialized(q))?;
    let t_alpha = derivation_tree(p, info, alpha, q)?;
    let mut out = Vec::new();
    for beta in support {
        let t_beta = derivation_tree(p, info, beta, q)?;
        if lcsn(&t_alpha, &t_beta) == tau {
            out.push(beta.clone());
        }
    }
    Ok(out)
}

/// Checks that no member of `set` is an ancestor of another in the program DAG.
pub fn is_antichain(p: &Program, set: &[u32]) -> bool {
    if set.len() <= 1 {
        return true;
    }
    // reach[i] = set members reachable (as descendants) from node i.
    let mut reach: Vec<Vec<u32>> = vec![Vec::new(); p.len()];
    for i in 0..p.len() as u32 {
        let mut r: Vec<u32> = Vec::new();
        for c in p.children(i) {
            r.extend(reach[c as usize].iter().copied());
        }
        if set.contains(&i) {
            if !r.is_empty() {
                return false;
            }
            r.push(i);
        }
        r.sort_unstable();
        r.dedup();
        reach[i as usize] = r;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::demo_program;
    use crate::support::{capped_support, default_threshold};

    fn mono(vars: &[u32]) -> Monomial {
        Monomial::from_vars(vars.to_vec()).unwrap()
    }

    // Variable ids in the demo program follow first appearance:
    // x3=0 x1=1 x2=2 x4=3 x5=4 x6=5 x7=6 x8=7 x9=8.
    const X1: u32 = 1;
    const X2: u32 = 2;
    const X3: u32 = 0;
    const X5: u32 = 4;
    const X6: u32 = 5;
    const X7: u32 = 6;
    const X8: u32 = 7;
    const X9: u32 = 8;

    #[test]
    fn demo_tree_shape_and_size_bound() {
        let p = demo_program();
        let info = capped_support(&p, default_threshold(&p));
        let alpha = mono(&[X3, X5, X8, X9]);
        let t = derivation_tree(&p, &info, &alpha, p.root).unwrap();
        assert_eq!(t.nodes.len(), 11);
        assert!(t.nodes.len() as u64 <= 4 * p.degrees()[p.root as usize]);
        // The canonical tree routes through node 17 (the first root child).
        assert!(t.nodes.iter().any(|n| n.program_node == 17));
    }

    #[test]
    fn demo_lcsn_is_the_frozen_pair() {
        let p = demo_program();
        let info = capped_support(&p, default_threshold(&p));
        let t1 = derivation_tree(&p, &info, &mono(&[X3, X5, X8, X9]), p.root).unwrap();
        let t2 = derivation_tree(&p, &info, &mono(&[X1, X3, X8, X9]), p.root).unwrap();
        // Program nodes 16 and 0 carry the shared subtrees.
        assert_eq!(lcsn(&t1, &t2), vec![0, 16]);
        assert!(is_antichain(&p, &[0, 16]));
    }

    #[test]
    fn demo_lcsn_differs_for_other_pair() {
        let p = demo_program();
        let info = capped_support(&p, default_threshold(&p));
        let t1 = derivation_tree(&p, &info, &mono(&[X1, X3, X8, X9]), p.root).unwrap();
        let t2 = derivation_tree(&p, &info, &mono(&[X1, X3, X6, X7]), p.root).unwrap();
        // Only node 9 heads a shared subtree for this pair.
        assert_eq!(lcsn(&t1, &t2), vec![9]);
    }

    #[test]
    fn demo_mutation_class_frozen() {
        let p = demo_program();
        let info = capped_support(&p, default_threshold(&p));
        let alpha = mono(&[X1, X3, X8, X9]);
        let tau = vec![0, 16];
        let class = mutation_class(&p, &info, &alpha, p.root, &tau).unwrap();
        let expect = vec![mono(&[X2, X3, X8, X9]), mono(&[X3, X5, X8, X9])];
        let mut class_sorted = class;
        class_sorted.sort_unstable();
        let mut expect_sorted = expect;
        expect_sorted.sort_unstable();
        assert_eq!(class_sorted, expect_sorted);
        // Antichain bound: |class| <= |supp(q0)| / (|supp(q6)| * |supp(q13)|).
        let bound = 8 / (2 * 1);
        assert!(class_sorted.len() <= bound);
    }

    #[test]
    fn identical_monomials_meet_at_root() {
        let p = demo_program();
        let info = capped_support(&p, default_threshold(&p));
        let alpha = mono(&[X3, X5, X8, X9]);
        let t1 = derivation_tree(&p, &info, &alpha, p.root).unwrap();
        let t2 = derivation_tree(&p, &info, &alpha, p.root).unwrap();
        assert_eq!(lcsn(&t1, &t2), vec![p.root]);
    }

    #[test]
    fn starred_view_collapses_at_height_zero() {
        let p = demo_program();
        // Cap 1: singleton supports (inputs, nodes 12 and 15) have height 0,
        // so the branch through node 15 stops there.
        let info = capped_support(&p, 1);
        assert_eq!(info.effective_height[15], 0);
        let alpha = mono(&[X3, X5, X8, X9]);
        let t = derivation_tree(&p, &info, &alpha, p.root).unwrap();
        assert_eq!(t.starred_nodes(), vec![0, 6, 7, 8, 9, 15, 16, 17, 19]);
        // Generous cap: everything is height 0, so only the root is starred.
        let info2 = capped_support(&p, default_threshold(&p));
        let t2 = derivation_tree(&p, &info2, &alpha, p.root).unwrap();
        assert_eq!(t2.starred_nodes(), vec![p.root]);
    }
}
