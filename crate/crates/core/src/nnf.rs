//! Negation-normal-form circuits: parsing, decomposability and smoothness
//! analysis, normalization, and conversion to (+,*) programs whose support
//! monomials are exactly the satisfying assignments.

use std::collections::HashMap;

use thiserror::Error;

use crate::monomial::Monomial;
use crate::program::{Program, ProgramBuilder, VarSet};

const MAX_NODES: usize = 1_000_000;

/// One circuit node; children always refer to lower indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NnfNode {
    True,
    False,
    /// Signed variable, 1-based: `v` for the positive literal, `-v` negated.
    Lit(i32),
    And(Vec<u32>),
    Or(Vec<u32>),
}

/// An NNF circuit over variables `1..=num_vars`; the last node is the root.
#[derive(Debug, Clone)]
pub struct Nnf {
    pub nodes: Vec<NnfNode>,
    pub num_vars: u32,
}

#[derive(Debug, Error)]
pub enum NnfError {
    #[error("nnf parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("and-nodes {0:?} have children sharing a variable")]
    NotDecomposable(Vec<u32>),
    #[error("circuit exceeds {0} nodes")]
    TooLarge(usize),
}

fn perr(line: usize, msg: impl Into<String>) -> NnfError {
    NnfError::Parse { line, msg: msg.into() }
}

impl Nnf {
    pub fn root(&self) -> u32 {
        self.nodes.len() as u32 - 1
    }

    /// Parses the `nnf V E n` circuit format: one `L`/`A`/`O` line per node
    /// in topological order, `A 0` for true and `O 0 0` for false.
    pub fn parse(text: &str) -> Result<Nnf, NnfError> {
        let mut header: Option<(usize, usize, u32)> = None;
        let mut nodes: Vec<NnfNode> = Vec::new();
        let mut edges = 0usize;
        for (li, raw) in text.lines().enumerate() {
            let line = li + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tok: Vec<&str> = content.split_whitespace().collect();
            let (v_count, num_vars) = match header {
                Some((v, _, n)) => (v, n),
                None => {
                    if tok.len() != 4 || tok[0] != "nnf" {
                        return Err(perr(line, "expected header `nnf <nodes> <edges> <vars>`"));
                    }
                    let v: usize = tok[1].parse().map_err(|_| perr(line, "bad node count"))?;
                    let e: usize = tok[2].parse().map_err(|_| perr(line, "bad edge count"))?;
                    let n: u32 = tok[3].parse().map_err(|_| perr(line, "bad variable count"))?;
                    if n == 0 {
                        return Err(perr(line, "variable count must be at least 1"));
                    }
                    if v == 0 {
                        return Err(perr(line, "node count must be at least 1"));
                    }
                    if v > MAX_NODES {
                        return Err(NnfError::TooLarge(MAX_NODES));
                    }
                    header = Some((v, e, n));
                    continue;
                }
            };
            if nodes.len() >= v_count {
                return Err(perr(line, "more node lines than declared"));
            }
            let idx = nodes.len() as u32;
            let parse_children = |tok: &[&str], start: usize, line: usize| -> Result<Vec<u32>, NnfError> {
                let c: usize = tok[start].parse().map_err(|_| perr(line, "bad child count"))?;
                if tok.len() != start + 1 + c {
                    return Err(perr(line, "child count does not match listed children"));
                }
                let mut children = Vec::with_capacity(c);
                for t in &tok[start + 1..] {
                    let ch: u32 = t.parse().map_err(|_| perr(line, "bad child index"))?;
                    if ch >= idx {
                        return Err(perr(line, "child index must refer to an earlier node"));
                    }
                    children.push(ch);
                }
                Ok(children)
            };
            match tok[0] {
                "L" => {
                    if tok.len() != 2 {
                        return Err(perr(line, "literal line must be `L <lit>`"));
                    }
                    let l: i64 = tok[1].parse().map_err(|_| perr(line, "bad literal"))?;
                    if l == 0 || l.unsigned_abs() > num_vars as u64 {
                        return Err(perr(line, "literal out of range"));
                    }
                    nodes.push(NnfNode::Lit(l as i32));
                }
                "A" => {
                    let children = parse_children(&tok, 1, line)?;
                    edges += children.len();
                    if children.is_empty() {
                        nodes.push(NnfNode::True);
                    } else {
                        nodes.push(NnfNode::And(children));
                    }
                }
                "O" => {
                    if tok.len() < 3 {
                        return Err(perr(line, "or line must be `O <var> <count> <children...>`"));
                    }
                    let j: u32 = tok[1].parse().map_err(|_| perr(line, "bad decision variable"))?;
                    if j > num_vars {
                        return Err(perr(line, "decision variable out of range"));
                    }
                    let children = parse_children(&tok, 2, line)?;
                    edges += children.len();
                    if children.is_empty() {
                        nodes.push(NnfNode::False);
                    } else {
                        nodes.push(NnfNode::Or(children));
                    }
                }
                other => return Err(perr(line, format!("unknown node kind `{other}`"))),
            }
        }
        let Some((v_count, e_count, num_vars)) = header else {
            return Err(perr(1, "empty input"));
        };
        if nodes.len() != v_count {
            return Err(perr(
                text.lines().count(),
                format!("declared {} nodes but found {}", v_count, nodes.len()),
            ));
        }
        if edges != e_count {
            return Err(perr(
                text.lines().count(),
                format!("declared {} edges but found {}", e_count, edges),
            ));
        }
        Ok(Nnf { nodes, num_vars })
    }

    /// Serializes back to the `nnf V E n` line format.
    pub fn to_text(&self) -> String {
        let edges: usize = self
            .nodes
            .iter()
            .map(|n| match n {
                NnfNode::And(c) | NnfNode::Or(c) => c.len(),
                _ => 0,
            })
            .sum();
        let mut out = format!("nnf {} {} {}\n", self.nodes.len(), edges, self.num_vars);
        for node in &self.nodes {
            match node {
                NnfNode::True => out.push_str("A 0\n"),
                NnfNode::False => out.push_str("O 0 0\n"),
                NnfNode::Lit(l) => out.push_str(&format!("L {l}\n")),
                NnfNode::And(c) => {
                    out.push_str(&format!("A {}", c.len()));
                    for ch in c {
                        out.push_str(&format!(" {ch}"));
                    }
                    out.push('\n');
                }
                NnfNode::Or(c) => {
                    out.push_str(&format!("O 0 {}", c.len()));
                    for ch in c {
                        out.push_str(&format!(" {ch}"));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Variable set mentioned below each node, over `0..num_vars`.
    pub fn var_sets(&self) -> Vec<VarSet> {
        let mut sets: Vec<VarSet> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut s = VarSet::new(self.num_vars);
            match node {
                NnfNode::True | NnfNode::False => {}
                NnfNode::Lit(l) => s.set(l.unsigned_abs() - 1),
                NnfNode::And(children) | NnfNode::Or(children) => {
                    for &c in children {
                        s.union_into(&sets[c as usize]);
                    }
                }
            }
            sets.push(s);
        }
        sets
    }

    /// And-nodes whose children share a variable.
    pub fn check_decomposable(&self) -> Vec<u32> {
        let sets = self.var_sets();
        let mut bad = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NnfNode::And(children) = node {
                let mut acc = VarSet::new(self.num_vars);
                let mut ok = true;
                for &c in children {
                    if !acc.disjoint(&sets[c as usize]) {
                        ok = false;
                        break;
                    }
                    acc.union_into(&sets[c as usize]);
                }
                if !ok {
                    bad.push(i as u32);
                }
            }
        }
        bad
    }

    /// Or-nodes whose children mention different variable sets.
    pub fn check_smooth(&self) -> Vec<u32> {
        let sets = self.var_sets();
        let mut bad = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NnfNode::Or(children) = node {
                let first = &sets[children[0] as usize];
                if children[1..].iter().any(|&c| sets[c as usize] != *first) {
                    bad.push(i as u32);
                }
            }
        }
        bad
    }

    /// Evaluates the root under a full assignment (index v-1 for variable v).
    pub fn eval(&self, assignment: &[bool]) -> bool {
        let mut val = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                NnfNode::True => true,
                NnfNode::False => false,
                NnfNode::Lit(l) => {
                    let b = assignment[(l.unsigned_abs() - 1) as usize];
                    if *l > 0 { b } else { !b }
                }
                NnfNode::And(children) => children.iter().all(|&c| val[c as usize]),
                NnfNode::Or(children) => children.iter().any(|&c| val[c as usize]),
            };
            val.push(v);
        }
        *val.last().unwrap()
    }
}

/// A circuit with constants propagated away and and/or chains flattened.
pub enum Simplified {
    ConstTrue,
    ConstFalse,
    /// Contains only literal, and, or nodes; no or-under-or or and-under-and
    /// edges; every and/or has at least two children; reachable nodes only.
    Circuit(Nnf),
}

/// Propagates constants, flattens nested conjunctions and disjunctions,
/// collapses single-child gates, and drops unreachable nodes.
pub fn simplify(nnf: &Nnf) -> Simplified {
    #[derive(Clone, Copy, PartialEq)]
    enum V {
        Const(bool),
        Idx(u32),
    }
    let mut out: Vec<NnfNode> = Vec::new();
    let mut memo: HashMap<NnfNode, u32> = HashMap::new();
    let mut emit = |out: &mut Vec<NnfNode>, node: NnfNode| -> u32 {
        if let Some(&i) = memo.get(&node) {
            return i;
        }
        out.push(node.clone());
        let i = out.len() as u32 - 1;
        memo.insert(node, i);
        i
    };
    let mut val: Vec<V> = Vec::with_capacity(nnf.nodes.len());
    for node in &nnf.nodes {
        let v = match node {
            NnfNode::True => V::Const(true),
            NnfNode::False => V::Const(false),
            NnfNode::Lit(l) => V::Idx(emit(&mut out, NnfNode::Lit(*l))),
            NnfNode::And(children) | NnfNode::Or(children) => {
                let is_and = matches!(node, NnfNode::And(_));
                let (absorb, neutral) = (V::Const(!is_and), V::Const(is_and));
                let mut kids: Vec<u32> = Vec::new();
                let mut absorbed = false;
                for &c in children {
                    match val[c as usize] {
                        v if v == absorb => {
                            absorbed = true;
                            break;
                        }
                        v if v == neutral => {}
                        V::Idx(i) => {
                            // Flatten a same-kind child into this gate.
                            match (&out[i as usize], is_and) {
                                (NnfNode::And(inner), true) | (NnfNode::Or(inner), false) => {
                                    kids.extend(inner.iter().copied())
                                }
                                _ => kids.push(i),
                            }
                        }
                        V::Const(_) => unreachable!(),
                    }
                }
                if absorbed {
                    absorb
                } else {
                    kids.sort_unstable();
                    kids.dedup();
                    match kids.len() {
                        0 => neutral,
                        1 => V::Idx(kids[0]),
                        _ => {
                            let gate = if is_and { NnfNode::And(kids) } else { NnfNode::Or(kids) };
                            V::Idx(emit(&mut out, gate))
                        }
                    }
                }
            }
        };
        val.push(v);
    }
    match *val.last().unwrap() {
        V::Const(true) => Simplified::ConstTrue,
        V::Const(false) => Simplified::ConstFalse,
        V::Idx(root) => {
            // Keep only nodes reachable from the root, preserving order.
            let mut live = vec![false; out.len()];
            live[root as usize] = true;
            for i in (0..out.len()).rev() {
                if !live[i] {
                    continue;
                }
                if let NnfNode::And(children) | NnfNode::Or(children) = &out[i] {
                    for &c in children {
                        live[c as usize] = true;
                    }
                }
            }
            let mut remap = vec![u32::MAX; out.len()];
            let mut nodes: Vec<NnfNode> = Vec::new();
            for (i, node) in out.into_iter().enumerate() {
                if !live[i] {
                    continue;
                }
                remap[i] = nodes.len() as u32;
                let node = match node {
                    NnfNode::And(c) => NnfNode::And(c.iter().map(|&x| remap[x as usize]).collect()),
                    NnfNode::Or(c) => NnfNode::Or(c.iter().map(|&x| remap[x as usize]).collect()),
                    other => other,
                };
                nodes.push(node);
            }
            debug_assert_eq!(remap[root as usize] as usize, nodes.len() - 1);
            Simplified::Circuit(Nnf { nodes, num_vars: nnf.num_vars })
        }
    }
}

/// Pads a simplified circuit so every or-node's children mention the same
/// variables and the root mentions all of them, using shared per-variable
/// `x or not x` gadgets. The satisfying assignments are unchanged.
pub fn smooth(nnf: &Nnf) -> Nnf {
    let sets = nnf.var_sets();
    let mut out: Vec<NnfNode> = Vec::new();
    let mut lit_memo: HashMap<i32, u32> = HashMap::new();
    let mut gadget_memo: HashMap<u32, u32> = HashMap::new();
    fn gadget(
        out: &mut Vec<NnfNode>,
        lit_memo: &mut HashMap<i32, u32>,
        gadget_memo: &mut HashMap<u32, u32>,
        var: u32,
    ) -> u32 {
        if let Some(&i) = gadget_memo.get(&var) {
            return i;
        }
        let l = *lit_memo.entry(var as i32 + 1).or_insert_with(|| {
            out.push(NnfNode::Lit(var as i32 + 1));
            out.len() as u32 - 1
        });
        let nl = *lit_memo.entry(-(var as i32 + 1)).or_insert_with(|| {
            out.push(NnfNode::Lit(-(var as i32 + 1)));
            out.len() as u32 - 1
        });
        out.push(NnfNode::Or(vec![l, nl]));
        let i = out.len() as u32 - 1;
        gadget_memo.insert(var, i);
        i
    }
    // Wraps `child` so it also mentions every variable of `target` it misses.
    let pad = |out: &mut Vec<NnfNode>,
               lit_memo: &mut HashMap<i32, u32>,
               gadget_memo: &mut HashMap<u32, u32>,
               child: u32,
               child_set: &VarSet,
               target: &VarSet,
               num_vars: u32|
     -> u32 {
        let mut kids = vec![child];
        for v in 0..num_vars {
            if target.test(v) && !child_set.test(v) {
                kids.push(gadget(out, lit_memo, gadget_memo, v));
            }
        }
        if kids.len() == 1 {
            child
        } else {
            out.push(NnfNode::And(kids));
            out.len() as u32 - 1
        }
    };
    let mut remap = vec![u32::MAX; nnf.nodes.len()];
    for (i, node) in nnf.nodes.iter().enumerate() {
        let new = match node {
            NnfNode::True | NnfNode::False => unreachable!("smooth requires a simplified circuit"),
            NnfNode::Lit(l) => *lit_memo.entry(*l).or_insert_with(|| {
                out.push(NnfNode::Lit(*l));
                out.len() as u32 - 1
            }),
            NnfNode::And(children) => {
                let kids: Vec<u32> = children.iter().map(|&c| remap[c as usize]).collect();
                out.push(NnfNode::And(kids));
                out.len() as u32 - 1
            }
            NnfNode::Or(children) => {
                let kids: Vec<u32> = children
                    .iter()
                    .map(|&c| {
                        pad(
                            &mut out,
                            &mut lit_memo,
                            &mut gadget_memo,
                            remap[c as usize],
                            &sets[c as usize],
                            &sets[i],
                            nnf.num_vars,
                        )
                    })
                    .collect();
                out.push(NnfNode::Or(kids));
                out.len() as u32 - 1
            }
        };
        remap[i] = new;
    }
    // Root padding up to the full declared variable universe.
    let root = remap[nnf.nodes.len() - 1];
    let mut full = VarSet::new(nnf.num_vars);
    for v in 0..nnf.num_vars {
        full.set(v);
    }
    let _padded = pad(
        &mut out,
        &mut lit_memo,
        &mut gadget_memo,
        root,
        &sets[nnf.nodes.len() - 1],
        &full,
        nnf.num_vars,
    );
    // The root image is emitted last, and a fresh wrapper is appended last.
    debug_assert_eq!(_padded, out.len() as u32 - 1);
    Nnf { nodes: out, num_vars: nnf.num_vars }
}

/// Maps between program monomials and satisfying assignments.
///
/// Variable `v` (1-based) owns program variable ids `2(v-1)` for the positive
/// literal and `2(v-1)+1` for the negative one.
#[derive(Debug, Clone)]
pub struct DnnfDecoder {
    pub num_vars: u32,
}

impl DnnfDecoder {
    pub fn assignment_to_monomial(&self, assignment: &[bool]) -> Monomial {
        assert_eq!(assignment.len() as u32, self.num_vars);
        Monomial::from_sorted(
            assignment
                .iter()
                .enumerate()
                .map(|(v, &b)| 2 * v as u32 + if b { 0 } else { 1 })
                .collect(),
        )
    }

    /// Inverse mapping; None unless every variable occurs in one polarity.
    pub fn monomial_to_assignment(&self, m: &Monomial) -> Option<Vec<bool>> {
        if m.degree() as u32 != self.num_vars {
            return None;
        }
        let mut assignment = Vec::with_capacity(m.degree());
        for (v, &id) in m.vars().iter().enumerate() {
            if id / 2 != v as u32 {
                return None;
            }
            assignment.push(id % 2 == 0);
        }
        Some(assignment)
    }
}

/// A circuit converted for counting: either unsatisfiable, or a program whose
/// support monomials are exactly the satisfying assignments.
pub enum DnnfBuild {
    Unsatisfiable,
    Present { program: Program, decoder: DnnfDecoder },
}

/// Full pipeline from a parsed circuit to a (+,*) program: simplify, check
/// decomposability, smooth, then translate and-gates to products and or-gates
/// to sums over positive/negative literal variables.
pub fn dnnf_to_program(nnf: &Nnf) -> Result<DnnfBuild, NnfError> {
    let n = nnf.num_vars;
    let circuit = match simplify(nnf) {
        Simplified::ConstFalse => return Ok(DnnfBuild::Unsatisfiable),
        Simplified::ConstTrue => {
            // Product of one `x or not x` gadget per variable.
            let mut b = builder(n);
            let mut acc = None;
            for v in 0..n {
                let pos = b.input(2 * v);
                let neg = b.input(2 * v + 1);
                let or = b.plus(vec![pos, neg]);
                acc = Some(match acc {
                    None => or,
                    Some(a) => b.times(a, or),
                });
            }
            let program = b.finish(acc.unwrap());
            return Ok(DnnfBuild::Present { program, decoder: DnnfDecoder { num_vars: n } });
        }
        Simplified::Circuit(c) => c,
    };
    let bad = circuit.check_decomposable();
    if !bad.is_empty() {
        return Err(NnfError::NotDecomposable(bad));
    }
    let circuit = smooth(&circuit);
    if circuit.nodes.len() > MAX_NODES {
        return Err(NnfError::TooLarge(MAX_NODES));
    }
    debug_assert!(circuit.check_smooth().is_empty());
    let mut b = builder(n);
    let mut map = Vec::with_capacity(circuit.nodes.len());
    for node in &circuit.nodes {
        let idx = match node {
            NnfNode::True | NnfNode::False => unreachable!(),
            NnfNode::Lit(l) => {
                let v = l.unsigned_abs() - 1;
                b.input(2 * v + if *l > 0 { 0 } else { 1 })
            }
            NnfNode::And(children) => {
                let mut it = children.iter().map(|&c| map[c as usize]);
                let first = it.next().unwrap();
                it.fold(first, |acc, c| b.times(acc, c))
            }
            NnfNode::Or(children) => b.plus(children.iter().map(|&c| map[c as usize]).collect()),
        };
        map.push(idx);
    }
    let program = b.finish(*map.last().unwrap());
    Ok(DnnfBuild::Present { program, decoder: DnnfDecoder { num_vars: n } })
}

fn builder(num_vars: u32) -> ProgramBuilder {
    let mut names = Vec::with_capacity(2 * num_vars as usize);
    for v in 1..=num_vars {
        names.push(format!("x{v}"));
        names.push(format!("!x{v}"));
    }
    ProgramBuilder::with_names(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    // (x1 and x2) or (not x1 and x3): 3 models of 8.
    const SAMPLE: &str = "nnf 8 7 3\nL 1\nL 2\nA 2 0 1\nL -1\nL 3\nA 2 3 4\nO 1 2 2 5\nA 1 6\n";

    #[test]
    fn parses_sample() {
        let nnf = Nnf::parse(SAMPLE).unwrap();
        assert_eq!(nnf.nodes.len(), 8);
        assert_eq!(nnf.num_vars, 3);
        assert!(matches!(nnf.nodes[6], NnfNode::Or(_)));
    }

    #[test]
    fn rejects_malformed_input() {
        // Wrong edge count.
        assert!(Nnf::parse("nnf 3 1 2\nL 1\nL 2\nA 2 0 1\n").is_err());
        // Forward reference.
        assert!(Nnf::parse("nnf 2 2 1\nA 2 0 1\nL 1\n").is_err());
        // Literal out of range.
        assert!(Nnf::parse("nnf 1 0 1\nL 2\n").is_err());
        // Node count mismatch.
        assert!(Nnf::parse("nnf 3 0 1\nL 1\n").is_err());
    }

    #[test]
    fn simplify_removes_constants_and_flattens() {
        // or(and(x1, true), false, or(x2, x3)) -> or(x1, x2, x3).
        let text = "nnf 7 7 3\nL 1\nA 0\nA 2 0 1\nO 0 0\nL 2\nL 3\nO 0 5 2 3 4 5 2\n";
        let nnf = Nnf::parse(text).unwrap();
        match simplify(&nnf) {
            Simplified::Circuit(c) => {
                assert_eq!(c.nodes.len(), 4);
                match &c.nodes[3] {
                    NnfNode::Or(kids) => assert_eq!(kids.len(), 3),
                    other => panic!("expected or at root, got {other:?}"),
                }
            }
            _ => panic!("expected a circuit"),
        }
    }

    #[test]
    fn simplify_detects_constants() {
        let t = Nnf::parse("nnf 3 2 1\nL 1\nL -1\nO 1 2 0 1\n").unwrap();
        // x1 or not x1 is not constant-folded (no semantic analysis), but
        // an and with a false child is.
        assert!(matches!(simplify(&t), Simplified::Circuit(_)));
        let f = Nnf::parse("nnf 3 2 1\nL 1\nO 0 0\nA 2 0 1\n").unwrap();
        assert!(matches!(simplify(&f), Simplified::ConstFalse));
        let tt = Nnf::parse("nnf 2 1 1\nA 0\nA 1 0\n").unwrap();
        assert!(matches!(simplify(&tt), Simplified::ConstTrue));
    }

    #[test]
    fn smoothing_fixes_or_nodes() {
        let nnf = Nnf::parse(SAMPLE).unwrap();
        let circuit = match simplify(&nnf) {
            Simplified::Circuit(c) => c,
            _ => panic!(),
        };
        assert_eq!(circuit.check_smooth().len(), 1);
        let smoothed = smooth(&circuit);
        assert!(smoothed.check_smooth().is_empty());
        assert!(smoothed.check_decomposable().is_empty());
        // Same models.
        for bits in 0u32..8 {
            let assignment: Vec<bool> = (0..3).map(|i| bits & (1 << i) != 0).collect();
            assert_eq!(nnf.eval(&assignment), smoothed.eval(&assignment));
        }
    }

    #[test]
    fn program_support_matches_model_count() {
        let nnf = Nnf::parse(SAMPLE).unwrap();
        let models = oracle::brute_dnnf_count(&nnf).unwrap();
        assert_eq!(models, 4);
        match dnnf_to_program(&nnf).unwrap() {
            DnnfBuild::Present { program, decoder } => {
                assert!(program.validate().is_valid());
                let support = oracle::enumerate_support(&program, 10_000).unwrap();
                assert_eq!(support.len() as u64, models);
                for m in &support {
                    let a = decoder.monomial_to_assignment(m).unwrap();
                    assert!(nnf.eval(&a));
                    assert_eq!(decoder.assignment_to_monomial(&a), *m);
                }
            }
            _ => panic!("satisfiable circuit"),
        }
    }

    #[test]
    fn tautology_counts_all_assignments() {
        let nnf = Nnf::parse("nnf 1 0 4\nA 0\n").unwrap();
        match dnnf_to_program(&nnf).unwrap() {
            DnnfBuild::Present { program, .. } => {
                assert!(program.validate().is_valid());
                assert_eq!(oracle::support_size(&program, 1_000_000).unwrap(), 16);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn non_decomposable_is_rejected() {
        // and(and(x1, x2), not x1): the children share variable 1.
        let text = "nnf 5 4 2\nL 1\nL 2\nA 2 0 1\nL -1\nA 2 2 3\n";
        let nnf = Nnf::parse(text).unwrap();
        assert!(matches!(dnnf_to_program(&nnf), Err(NnfError::NotDecomposable(_))));
    }
}
