//! Exact brute-force oracles: full support enumeration, membership-based
//! support reconstruction, word-by-word grammar counting, and assignment
//! enumeration for circuits. Every oracle refuses loudly above its cap
//! instead of silently truncating.

use rand::Rng;
use thiserror::Error;

use crate::grammar::{Grammar, Sym};
use crate::monomial::{Monomial, VarId};
use crate::nnf::Nnf;
use crate::program::{Node, Program};
use crate::support::MembershipOracle;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact enumeration needs {needed} elements, above the cap of {cap}")]
    TooLarge { needed: u128, cap: u64 },
    #[error("program has an empty node, nothing to sample")]
    EmptySupport,
}

fn guard(needed: u128, cap: u64) -> Result<(), OracleError> {
    if needed > cap as u128 {
        Err(OracleError::TooLarge { needed, cap })
    } else {
        Ok(())
    }
}

/// Enumerates every node's support bottom-up, each sorted lexicographically.
pub fn enumerate_all_supports(p: &Program, cap: u64) -> Result<Vec<Vec<Monomial>>, OracleError> {
    let mut supports: Vec<Vec<Monomial>> = Vec::with_capacity(p.len());
    for node in &p.nodes {
        let support = match node {
            Node::Input { var } => vec![Monomial::single(*var)],
            Node::Plus { children } => {
                let mut total: u128 = 0;
                for &c in children {
                    total += supports[c as usize].len() as u128;
                }
                guard(total, cap)?;
                let mut merged: Vec<Monomial> = Vec::with_capacity(total as usize);
                for &c in children {
                    merged.extend_from_slice(&supports[c as usize]);
                }
                merged.sort_unstable();
                merged.dedup();
                merged
            }
            Node::Times { left, right } => {
                let l = &supports[*left as usize];
                let r = &supports[*right as usize];
                guard(l.len() as u128 * r.len() as u128, cap)?;
                let mut product = Vec::with_capacity(l.len() * r.len());
                for a in l {
                    for b in r {
                        let m = a
                            .union_disjoint(b)
                            .expect("product factors must not share variables");
                        product.push(m);
                    }
                }
                product.sort_unstable();
                debug_assert!(product.windows(2).all(|w| w[0] != w[1]));
                product
            }
        };
        supports.push(support);
    }
    Ok(supports)
}

/// The root support, sorted lexicographically.
pub fn enumerate_support(p: &Program, cap: u64) -> Result<Vec<Monomial>, OracleError> {
    let mut all = enumerate_all_supports(p, cap)?;
    Ok(all.swap_remove(p.root as usize))
}

/// Exact size of the root support.
pub fn support_size(p: &Program, cap: u64) -> Result<u64, OracleError> {
    Ok(enumerate_support(p, cap)?.len() as u64)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    acc
}

/// Reconstructs a node's support from the membership test alone, by checking
/// every degree-sized subset of the node's variables. Independent of the
/// bottom-up enumeration, so the two can cross-check each other.
pub fn support_by_membership(p: &Program, q: u32, cap: u64) -> Result<Vec<Monomial>, OracleError> {
    let deg = p.degrees()[q as usize] as usize;
    let var_sets = p.var_sets();
    let vars: Vec<VarId> = (0..p.num_vars).filter(|&v| var_sets[q as usize].test(v)).collect();
    guard(binomial(vars.len(), deg), cap)?;
    let mut oracle = MembershipOracle::new(p);
    let mut found = Vec::new();
    if deg == 0 || deg > vars.len() {
        return Ok(found);
    }
    // Standard next-combination walk over index vectors.
    let mut idx: Vec<usize> = (0..deg).collect();
    loop {
        let m = Monomial::from_sorted(idx.iter().map(|&i| vars[i]).collect());
        if oracle.contains(q, &m) {
            found.push(m);
        }
        let mut i = deg;
        loop {
            if i == 0 {
                return Ok(found);
            }
            i -= 1;
            if idx[i] != i + vars.len() - deg {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..deg {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Draws one monomial uniformly from the root support by full enumeration.
pub fn sample_support_uniform(
    p: &Program,
    cap: u64,
    rng: &mut impl Rng,
) -> Result<Monomial, OracleError> {
    let mut support = enumerate_support(p, cap)?;
    if support.is_empty() {
        return Err(OracleError::EmptySupport);
    }
    let i = rng.gen_range(0..support.len());
    Ok(support.swap_remove(i))
}

/// Counts length-n words of an arbitrary grammar by enumerating all words and
/// deciding each with a least-fixpoint derivability table. Handles epsilon
/// rules, unit cycles, and rules of any length; quadratic tables per word, so
/// strictly a small-case oracle.
pub fn brute_cfg_count_direct(g: &Grammar, n: u32, cap: u64) -> Result<u64, OracleError> {
    let k = g.terminals.len();
    if k == 0 {
        return Ok(0);
    }
    let needed = (k as u128).saturating_pow(n);
    guard(needed, cap)?;
    let mut count = 0u64;
    let mut word = vec![0u32; n as usize];
    loop {
        if derives(g, &word) {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == word.len() {
                return Ok(count);
            }
            word[i] += 1;
            if (word[i] as usize) < k {
                break;
            }
            word[i] = 0;
            i += 1;
        }
    }
}

/// Chaotic-iteration least fixpoint of "nonterminal derives word[i..j)".
fn derives(g: &Grammar, word: &[u32]) -> bool {
    let n = word.len();
    let nt = g.nonterminals.len();
    let mut table = vec![false; nt * (n + 1) * (n + 1)];
    let at = |a: usize, i: usize, j: usize| (a * (n + 1) + i) * (n + 1) + j;
    loop {
        let mut changed = false;
        for r in &g.rules {
            for i in 0..=n {
                for j in i..=n {
                    if table[at(r.lhs as usize, i, j)] {
                        continue;
                    }
                    if match_rhs(&table, at, word, &r.rhs, i, j) {
                        table[at(r.lhs as usize, i, j)] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return table[at(g.start as usize, 0, n)];
        }
    }
}

/// Whether the rule body can spell word[i..j), via forward reachability over
/// split positions.
fn match_rhs(
    table: &[bool],
    at: impl Fn(usize, usize, usize) -> usize,
    word: &[u32],
    rhs: &[Sym],
    i: usize,
    j: usize,
) -> bool {
    let mut reach = vec![false; j + 1];
    reach[i] = true;
    for sym in rhs {
        let mut next = vec![false; j + 1];
        for x in i..=j {
            if !reach[x] {
                continue;
            }
            match sym {
                Sym::T(t) => {
                    if x < j && word[x] == *t {
                        next[x + 1] = true;
                    }
                }
                Sym::N(b) => {
                    for (y, slot) in next.iter_mut().enumerate().take(j + 1).skip(x) {
                        if table[at(*b as usize, x, y)] {
                            *slot = true;
                        }
                    }
                }
            }
        }
        reach = next;
    }
    reach[j]
}

/// Counts length-n words of a normal-form grammar by per-word chart parsing.
pub fn brute_cfg_count_cnf(g: &Grammar, n: u32, cap: u64) -> Result<u64, OracleError> {
    assert!(g.is_cnf(), "chart oracle requires a normal-form grammar");
    assert!(n >= 1);
    let k = g.terminals.len();
    if k == 0 {
        return Ok(0);
    }
    guard((k as u128).saturating_pow(n), cap)?;
    let mut count = 0u64;
    let mut word = vec![0u32; n as usize];
    loop {
        if cyk(g, &word) {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == word.len() {
                return Ok(count);
            }
            word[i] += 1;
            if (word[i] as usize) < k {
                break;
            }
            word[i] = 0;
            i += 1;
        }
    }
}

fn cyk(g: &Grammar, word: &[u32]) -> bool {
    let n = word.len();
    let nt = g.nonterminals.len();
    // chart[(start, len - 1)] is the set of nonterminals deriving that span.
    let mut chart = vec![false; n * n * nt];
    let at = |i: usize, len: usize, a: usize| (i * n + (len - 1)) * nt + a;
    for (i, &c) in word.iter().enumerate() {
        for r in &g.rules {
            if let [Sym::T(t)] = r.rhs.as_slice() {
                if *t == c {
                    chart[at(i, 1, r.lhs as usize)] = true;
                }
            }
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            for r in &g.rules {
                if let [Sym::N(b), Sym::N(c)] = r.rhs.as_slice() {
                    if chart[at(i, len, r.lhs as usize)] {
                        continue;
                    }
                    for split in 1..len {
                        if chart[at(i, split, *b as usize)]
                            && chart[at(i + split, len - split, *c as usize)]
                        {
                            chart[at(i, len, r.lhs as usize)] = true;
                            break;
                        }
                    }
                }
            }
        }
    }
    chart[at(0, n, g.start as usize)]
}

/// Counts satisfying assignments by enumerating all of them.
pub fn brute_dnnf_count(nnf: &Nnf) -> Result<u64, OracleError> {
    guard(1u128 << nnf.num_vars.min(127), 1 << 20)?;
    let n = nnf.num_vars;
    let mut count = 0u64;
    for bits in 0u64..(1u64 << n) {
        let assignment: Vec<bool> = (0..n).map(|i| bits & (1 << i) != 0).collect();
        if nnf.eval(&assignment) {
            count += 1;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::demo_program;

    #[test]
    fn demo_support_is_frozen() {
        let p = demo_program();
        let support = enumerate_support(&p, 10_000).unwrap();
        assert_eq!(support.len(), 8);
        let names: Vec<String> = support.iter().map(|m| m.to_string()).collect();
        // Variable ids by first appearance: x3=0 x1=1 x2=2 x4=3 x5=4 x6=5 x7=6 x8=7 x9=8.
        assert!(names.contains(&"x0*x1*x5*x6".to_string()));
        assert!(names.contains(&"x0*x4*x7*x8".to_string()));
    }

    #[test]
    fn membership_reconstruction_matches_enumeration() {
        let p = demo_program();
        let all = enumerate_all_supports(&p, 10_000).unwrap();
        for q in [4u32, 9, 16, 17, 19] {
            let rebuilt = support_by_membership(&p, q, 1_000_000).unwrap();
            assert_eq!(rebuilt, all[q as usize], "node {q}");
        }
    }

    #[test]
    fn refusal_is_loud() {
        let p = demo_program();
        assert!(matches!(
            enumerate_support(&p, 3),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn direct_and_cnf_grammar_oracles_agree() {
        let g = Grammar::parse("S -> '(' S ')' | S S | '(' ')' ;\n").unwrap();
        let cnf = crate::grammar::to_cnf(&g).unwrap();
        for n in 1..=8u32 {
            let direct = brute_cfg_count_direct(&g, n, 100_000).unwrap();
            let chart = brute_cfg_count_cnf(&cnf, n, 100_000).unwrap();
            assert_eq!(direct, chart, "length {n}");
        }
    }

    #[test]
    fn uniform_sampling_hits_support() {
        use rand::SeedableRng;
        let p = demo_program();
        let support = enumerate_support(&p, 10_000).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = sample_support_uniform(&p, 10_000, &mut rng).unwrap();
            assert!(support.contains(&m));
        }
    }
}
