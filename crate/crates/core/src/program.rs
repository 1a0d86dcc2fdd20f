//! (+,*) program representation, validation, parsing and serialization.
//!
//! Nodes are stored bottom-up: every child index is smaller than its parent's
//! index, the node order is the canonical order on nodes, and the root is a
//! distinguished index (the last node unless declared otherwise).

use crate::monomial::VarId;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Input { var: VarId },
    Plus { children: Vec<u32> },
    Times { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct Program {
    pub nodes: Vec<Node>,
    pub root: u32,
    pub num_vars: u32,
    pub var_names: Vec<String>,
}

/// A fixed-universe bitset used for variable-set bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSet {
    words: Vec<u64>,
}

impl VarSet {
    pub fn new(num_vars: u32) -> Self {
        VarSet { words: vec![0; (num_vars as usize + 63) / 64] }
    }

    pub fn set(&mut self, v: VarId) {
        self.words[(v / 64) as usize] |= 1u64 << (v % 64);
    }

    pub fn test(&self, v: VarId) -> bool {
        self.words
            .get((v / 64) as usize)
            .map_or(false, |w| w & (1u64 << (v % 64)) != 0)
    }

    pub fn union_into(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn disjoint(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RootOutOfRange { root: u32, len: usize },
    ChildNotBelow { node: u32, child: u32 },
    VarOutOfRange { node: u32, var: VarId },
    EmptyPlus { node: u32 },
    PlusChildrenNotSorted { node: u32 },
    PlusPlusEdge { parent: u32, child: u32 },
    InhomogeneousPlus { node: u32, degrees: Vec<u64> },
    TimesSharesVariables { node: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootOutOfRange { root, len } => write!(f, "root {root} out of range for {len} nodes"),
            Violation::ChildNotBelow { node, child } => write!(f, "node {node} references child {child} not strictly below it"),
            Violation::VarOutOfRange { node, var } => write!(f, "node {node} uses variable {var} outside the declared universe"),
            Violation::EmptyPlus { node } => write!(f, "plus node {node} has no children"),
            Violation::PlusChildrenNotSorted { node } => write!(f, "plus node {node} children are not strictly increasing"),
            Violation::PlusPlusEdge { parent, child } => write!(f, "plus node {parent} has plus child {child}"),
            Violation::InhomogeneousPlus { node, degrees } => write!(f, "plus node {node} mixes degrees {degrees:?}"),
            Violation::TimesSharesVariables { node } => write!(f, "times node {node} children share a variable"),
        }
    }
}

/// Outcome of structural validation; empty means the program is well formed.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ProgramParseError {
    pub line: usize,
    pub msg: String,
}

impl Program {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Child indices of a node, in stored order.
    pub fn children(&self, i: u32) -> Vec<u32> {
        match &self.nodes[i as usize] {
            Node::Input { .. } => Vec::new(),
            Node::Plus { children } => children.clone(),
            Node::Times { left, right } => vec![*left, *right],
        }
    }

    /// Per-node degrees; plus nodes take their first child's degree.
    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            deg[i] = match n {
                Node::Input { .. } => 1,
                Node::Plus { children } => children.first().map_or(0, |&c| deg[c as usize]),
                Node::Times { left, right } => deg[*left as usize] + deg[*right as usize],
            };
        }
        deg
    }

    /// Per-node heights: inputs are 0, internal nodes 1 + max child height.
    pub fn heights(&self) -> Vec<u32> {
        let mut h = vec![0u32; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            h[i] = match n {
                Node::Input { .. } => 0,
                Node::Plus { children } => 1 + children.iter().map(|&c| h[c as usize]).max().unwrap_or(0),
                Node::Times { left, right } => 1 + h[*left as usize].max(h[*right as usize]),
            };
        }
        h
    }

    /// Height of the root node.
    pub fn depth(&self) -> u32 {
        self.heights()[self.root as usize]
    }

    /// Per-node variable sets.
    pub fn var_sets(&self) -> Vec<VarSet> {
        let mut sets: Vec<VarSet> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let mut s = VarSet::new(self.num_vars);
            match n {
                Node::Input { var } => s.set(*var),
                Node::Plus { children } => {
                    for &c in children {
                        s.union_into(&sets[c as usize]);
                    }
                }
                Node::Times { left, right } => {
                    s.union_into(&sets[*left as usize]);
                    s.union_into(&sets[*right as usize]);
                }
            }
            sets.push(s);
        }
        sets
    }

    /// Structural validation of every program invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.root as usize >= self.nodes.len() {
            report.violations.push(Violation::RootOutOfRange { root: self.root, len: self.nodes.len() });
            return report;
        }
        // Index order first; the remaining passes rely on it.
        for (i, n) in self.nodes.iter().enumerate() {
            let i = i as u32;
            for c in self.children(i) {
                if c >= i {
                    report.violations.push(Violation::ChildNotBelow { node: i, child: c });
                }
            }
            if let Node::Input { var } = n {
                if *var >= self.num_vars {
                    report.violations.push(Violation::VarOutOfRange { node: i, var: *var });
                }
            }
        }
        if !report.violations.is_empty() {
            return report;
        }
        let deg = self.degrees();
        let sets = self.var_sets();
        for (i, n) in self.nodes.iter().enumerate() {
            let iu = i as u32;
            match n {
                Node::Input { .. } => {}
                Node::Plus { children } => {
                    if children.is_empty() {
                        report.violations.push(Violation::EmptyPlus { node: iu });
                        continue;
                    }
                    if children.windows(2).any(|w| w[0] >= w[1]) {
                        report.violations.push(Violation::PlusChildrenNotSorted { node: iu });
                    }
                    for &c in children {
                        if matches!(self.nodes[c as usize], Node::Plus { .. }) {
                            report.violations.push(Violation::PlusPlusEdge { parent: iu, child: c });
                        }
                    }
                    let degrees: Vec<u64> = children.iter().map(|&c| deg[c as usize]).collect();
                    if degrees.windows(2).any(|w| w[0] != w[1]) {
                        report.violations.push(Violation::InhomogeneousPlus { node: iu, degrees });
                    }
                }
                Node::Times { left, right } => {
                    if !sets[*left as usize].disjoint(&sets[*right as usize]) {
                        report.violations.push(Violation::TimesSharesVariables { node: iu });
                    }
                }
            }
        }
        report
    }

    /// Parses the line-oriented text format.
    ///
    /// Lines: optional `vars <name>...` first, then one node per line
    /// (`input <name>`, `plus <child>...`, `times <left> <right>`), then an
    /// optional `root <index>`. `#` starts a comment. Children must reference
    /// earlier lines, so the listing is bottom-up by construction.
    pub fn parse(text: &str) -> Result<Program, ProgramParseError> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut var_names: Vec<String> = Vec::new();
        let mut var_ids: HashMap<String, VarId> = HashMap::new();
        let mut vars_declared = false;
        let mut root: Option<u32> = None;
        let err = |line: usize, msg: String| ProgramParseError { line, msg };
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if root.is_some() {
                return Err(err(line, "content after root declaration".into()));
            }
            let mut toks = content.split_whitespace();
            let head = toks.next().unwrap();
            match head {
                "vars" => {
                    if vars_declared || !nodes.is_empty() {
                        return Err(err(line, "vars line must appear once, before any node".into()));
                    }
                    vars_declared = true;
                    for name in toks {
                        if var_ids.contains_key(name) {
                            return Err(err(line, format!("duplicate variable {name}")));
                        }
                        var_ids.insert(name.to_string(), var_names.len() as VarId);
                        var_names.push(name.to_string());
                    }
                }
                "input" => {
                    let name = toks.next().ok_or_else(|| err(line, "input requires a variable name".into()))?;
                    if toks.next().is_some() {
                        return Err(err(line, "input takes exactly one name".into()));
                    }
                    let var = match var_ids.get(name) {
                        Some(&v) => v,
                        None if vars_declared => {
                            return Err(err(line, format!("unknown variable {name}")));
                        }
                        None => {
                            let v = var_names.len() as VarId;
                            var_ids.insert(name.to_string(), v);
                            var_names.push(name.to_string());
                            v
                        }
                    };
                    nodes.push(Node::Input { var });
                }
                "plus" | "times" => {
                    let mut children = Vec::new();
                    for t in toks {
                        let c: u32 = t.parse().map_err(|_| err(line, format!("bad child index {t}")))?;
                        if c as usize >= nodes.len() {
                            return Err(err(line, format!("child {c} is not an earlier node")));
                        }
                        children.push(c);
                    }
                    if head == "plus" {
                        if children.is_empty() {
                            return Err(err(line, "plus requires at least one child".into()));
                        }
                        nodes.push(Node::Plus { children });
                    } else {
                        if children.len() != 2 {
                            return Err(err(line, "times requires exactly two children".into()));
                        }
                        nodes.push(Node::Times { left: children[0], right: children[1] });
                    }
                }
                "root" => {
                    let t = toks.next().ok_or_else(|| err(line, "root requires an index".into()))?;
                    let r: u32 = t.parse().map_err(|_| err(line, format!("bad root index {t}")))?;
                    if r as usize >= nodes.len() {
                        return Err(err(line, format!("root {r} is not a node")));
                    }
                    root = Some(r);
                }
                other => {
                    return Err(err(line, format!("unknown directive {other}")));
                }
            }
        }
        if nodes.is_empty() {
            return Err(err(0, "program has no nodes".into()));
        }
        let root = root.unwrap_or(nodes.len() as u32 - 1);
        Ok(Program { root, num_vars: var_names.len() as u32, nodes, var_names })
    }

    /// Serializes back to the text format accepted by `parse`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.var_names.is_empty() {
            out.push_str("vars");
            for n in &self.var_names {
                out.push(' ');
                out.push_str(n);
            }
            out.push('\n');
        }
        for n in &self.nodes {
            match n {
                Node::Input { var } => {
                    out.push_str("input ");
                    out.push_str(&self.var_names[*var as usize]);
                }
                Node::Plus { children } => {
                    out.push_str("plus");
                    for c in children {
                        out.push_str(&format!(" {c}"));
                    }
                }
                Node::Times { left, right } => {
                    out.push_str(&format!("times {left} {right}"));
                }
            }
            out.push('\n');
        }
        if self.root as usize != self.nodes.len() - 1 {
            out.push_str(&format!("root {}\n", self.root));
        }
        out
    }
}

/// Incremental constructor with structural sharing.
pub struct ProgramBuilder {
    nodes: Vec<Node>,
    memo: HashMap<Node, u32>,
    num_vars: u32,
    var_names: Vec<String>,
}

impl ProgramBuilder {
    pub fn new(num_vars: u32) -> Self {
        let var_names = (0..num_vars).map(|v| format!("x{v}")).collect();
        ProgramBuilder { nodes: Vec::new(), memo: HashMap::new(), num_vars, var_names }
    }

    pub fn with_names(var_names: Vec<String>) -> Self {
        ProgramBuilder {
            nodes: Vec::new(),
            memo: HashMap::new(),
            num_vars: var_names.len() as u32,
            var_names,
        }
    }

    fn push(&mut self, node: Node) -> u32 {
        if let Some(&i) = self.memo.get(&node) {
            return i;
        }
        let i = self.nodes.len() as u32;
        self.nodes.push(node.clone());
        self.memo.insert(node, i);
        i
    }

    pub fn input(&mut self, var: VarId) -> u32 {
        assert!(var < self.num_vars);
        self.push(Node::Input { var })
    }

    /// Plus node; children are sorted and deduplicated. A single distinct
    /// child collapses to that child.
    pub fn plus(&mut self, mut children: Vec<u32>) -> u32 {
        assert!(!children.is_empty(), "plus requires children");
        children.sort_unstable();
        children.dedup();
        if children.len() == 1 {
            return children[0];
        }
        self.push(Node::Plus { children })
    }

    /// Plus node kept even when it has a single child.
    pub fn plus_raw(&mut self, mut children: Vec<u32>) -> u32 {
        assert!(!children.is_empty(), "plus requires children");
        children.sort_unstable();
        children.dedup();
        self.push(Node::Plus { children })
    }

    pub fn times(&mut self, left: u32, right: u32) -> u32 {
        self.push(Node::Times { left, right })
    }

    /// The node already stored at index `i`.
    pub fn node(&self, i: u32) -> &Node {
        &self.nodes[i as usize]
    }

    pub fn finish(self, root: u32) -> Program {
        assert!((root as usize) < self.nodes.len());
        Program { nodes: self.nodes, root, num_vars: self.num_vars, var_names: self.var_names }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let text = "vars a b c\ninput a\ninput b\nplus 0 1\ninput c\ntimes 2 3\n";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.root, 4);
        assert_eq!(p.num_vars, 3);
        assert!(p.validate().is_valid());
        let q = Program::parse(&p.to_text()).unwrap();
        assert_eq!(p.nodes, q.nodes);
        assert_eq!(p.root, q.root);
    }

    #[test]
    fn parse_rejects_forward_reference() {
        let e = Program::parse("plus 0\n").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn parse_rejects_unknown_directive() {
        assert!(Program::parse("mul 0 1\n").is_err());
    }

    #[test]
    fn validate_flags_plus_plus_edges_and_inhomogeneity() {
        let text = "input a\ninput b\nplus 0 1\ntimes 0 1\nplus 2 3\n";
        let p = Program::parse(text).unwrap();
        let report = p.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::PlusPlusEdge { parent: 4, child: 2 })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::InhomogeneousPlus { node: 4, .. })));
    }

    #[test]
    fn validate_flags_variable_sharing() {
        let text = "input a\ninput a\ntimes 0 1\n";
        let p = Program::parse(text).unwrap();
        assert!(p
            .validate()
            .violations
            .iter()
            .any(|v| matches!(v, Violation::TimesSharesVariables { node: 2 })));
    }

    #[test]
    fn degrees_and_heights() {
        let text = "input a\ninput b\ntimes 0 1\ninput c\ntimes 2 3\n";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.degrees(), vec![1, 1, 2, 1, 3]);
        assert_eq!(p.heights(), vec![0, 0, 1, 0, 2]);
        assert_eq!(p.depth(), 2);
    }
}
