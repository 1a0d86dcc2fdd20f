//! Deterministic generators: a small worked example, deep structural stress
//! families, and seeded random corpora for grammars, circuits, and programs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::grammar::{Grammar, Rule, Sym};
use crate::nnf::{Nnf, NnfNode};
use crate::program::{Node, Program, ProgramBuilder};

/// A 20-node program with shared subterms, reconvergent plus-routing, and
/// support size 8; used as a fixed reference point across the test suite.
pub fn demo_program() -> Program {
    Program::parse(
        "input x3\n\
         input x1\n\
         input x2\n\
         plus 1 2\n\
         times 0 3\n\
         input x4\n\
         plus 0 5\n\
         input x5\n\
         times 6 7\n\
         plus 4 8\n\
         input x6\n\
         input x7\n\
         times 10 11\n\
         input x8\n\
         input x9\n\
         times 13 14\n\
         plus 12 15\n\
         times 9 16\n\
         times 8 15\n\
         plus 17 18\n",
    )
    .expect("fixture is well formed")
}

/// Left-deep product of `degree` binary sums: depth grows linearly with the
/// degree, so any depth-reduction pass has to rebalance the product spine.
pub fn gen_chain(degree: u32) -> Program {
    assert!(degree >= 1);
    let mut b = ProgramBuilder::new(2 * degree);
    let mut acc: Option<u32> = None;
    for i in 0..degree {
        let x = b.input(2 * i);
        let y = b.input(2 * i + 1);
        let p = b.plus(vec![x, y]);
        acc = Some(match acc {
            None => p,
            Some(a) => b.times(a, p),
        });
    }
    b.finish(acc.unwrap())
}

/// Deep alternation of sums and products built from a two-term recurrence, so
/// both sum fan-ins and product spines pile up along one path.
pub fn gen_comb(degree: u32) -> Program {
    assert!(degree >= 2);
    let mut b = ProgramBuilder::new(2 * degree);
    let mut pluses = Vec::with_capacity(degree as usize);
    for i in 0..degree {
        let x = b.input(2 * i);
        let y = b.input(2 * i + 1);
        pluses.push(b.plus(vec![x, y]));
    }
    let mut prev: Option<u32> = None;
    let mut cur = pluses[0];
    for k in 1..degree as usize {
        let step = b.times(cur, pluses[k]);
        let next = match prev {
            None => step,
            Some(two_back) => {
                let pair = b.times(pluses[k - 1], pluses[k]);
                let leap = b.times(two_back, pair);
                b.plus(vec![step, leap])
            }
        };
        prev = Some(cur);
        cur = next;
    }
    b.finish(cur)
}

fn balanced_split(vars: &[u32], groups: usize) -> Vec<Vec<u32>> {
    let base = vars.len() / groups;
    let extra = vars.len() % groups;
    let mut out = Vec::with_capacity(groups);
    let mut at = 0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        out.push(vars[at..at + size].to_vec());
        at += size;
    }
    out
}

/// Two product towers over overlapping variable groupings joined by a sum:
/// every group sum is wide enough to overflow a small materialization
/// threshold, and the two branches share many support monomials.
pub fn gen_tower(seed: u64) -> Program {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let num_vars: u32 = rng.gen_range(18..=20);
    let groups: usize = rng.gen_range(3..=5);
    let mut vars: Vec<u32> = (0..num_vars).collect();
    vars.shuffle(&mut rng);
    let part1 = balanced_split(&vars, groups);
    // Second grouping: reshuffle the union of two groups, keeping sizes.
    let mut part2 = part1.clone();
    let i = rng.gen_range(0..groups);
    let mut j = rng.gen_range(0..groups - 1);
    if j >= i {
        j += 1;
    }
    let mut pool: Vec<u32> = part2[i].iter().chain(part2[j].iter()).copied().collect();
    pool.shuffle(&mut rng);
    let split_at = part2[i].len();
    part2[i] = pool[..split_at].to_vec();
    part2[j] = pool[split_at..].to_vec();

    let mut b = ProgramBuilder::new(num_vars);
    let branch = |b: &mut ProgramBuilder, part: &[Vec<u32>], rng: &mut ChaCha12Rng| -> u32 {
        let mut order: Vec<usize> = (0..part.len()).collect();
        order.shuffle(rng);
        let mut acc: Option<u32> = None;
        for &g in &order {
            let inputs: Vec<u32> = part[g].iter().map(|&v| b.input(v)).collect();
            let p = b.plus(inputs);
            acc = Some(match acc {
                None => p,
                Some(a) => b.times(a, p),
            });
        }
        acc.unwrap()
    };
    let left = branch(&mut b, &part1, &mut rng);
    let right = branch(&mut b, &part2, &mut rng);
    let root = b.plus(vec![left, right]);
    b.finish(root)
}

/// A single sum over `width` distinct variables.
pub fn gen_wide_plus(width: u32) -> Program {
    assert!(width >= 1);
    let mut b = ProgramBuilder::new(width);
    let inputs: Vec<u32> = (0..width).map(|v| b.input(v)).collect();
    let root = b.plus(inputs);
    b.finish(root)
}

/// Product of `parts` sums, each over `width` fresh variables.
pub fn gen_product_of_pluses(width: u32, parts: u32) -> Program {
    assert!(width >= 1 && parts >= 1);
    let mut b = ProgramBuilder::new(width * parts);
    let mut acc: Option<u32> = None;
    for part in 0..parts {
        let inputs: Vec<u32> = (0..width).map(|k| b.input(part * width + k)).collect();
        let p = b.plus(inputs);
        acc = Some(match acc {
            None => p,
            Some(a) => b.times(a, p),
        });
    }
    b.finish(acc.unwrap())
}

fn prune_unreachable(p: &Program) -> Program {
    let mut live = vec![false; p.len()];
    live[p.root as usize] = true;
    for i in (0..=p.root as usize).rev() {
        if live[i] {
            for c in p.children(i as u32) {
                live[c as usize] = true;
            }
        }
    }
    let mut remap = vec![u32::MAX; p.len()];
    let mut nodes = Vec::new();
    for (i, node) in p.nodes.iter().enumerate() {
        if !live[i] {
            continue;
        }
        remap[i] = nodes.len() as u32;
        let node = match node {
            Node::Input { var } => Node::Input { var: *var },
            Node::Plus { children } => {
                Node::Plus { children: children.iter().map(|&c| remap[c as usize]).collect() }
            }
            Node::Times { left, right } => {
                Node::Times { left: remap[*left as usize], right: remap[*right as usize] }
            }
        };
        nodes.push(node);
    }
    Program {
        nodes,
        root: remap[p.root as usize],
        num_vars: p.num_vars,
        var_names: p.var_names.clone(),
    }
}

/// A random valid program with bounded support size: inputs plus a few dozen
/// randomly attached sums (between equal-degree nodes) and variable-disjoint
/// products, pruned to the part reachable from a high-degree root.
pub fn gen_random_program(seed: u64) -> Program {
    for attempt in 0u64..100 {
        let mut rng = ChaCha12Rng::seed_from_u64(
            seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(attempt),
        );
        let num_vars: u32 = rng.gen_range(6..=10);
        let mut b = ProgramBuilder::new(num_vars);
        // (index, degree, variable mask, support bound, is a sum)
        let mut pool: Vec<(u32, u64, u64, u64, bool)> = Vec::new();
        for v in 0..num_vars {
            let i = b.input(v);
            pool.push((i, 1, 1 << v, 1, false));
        }
        let steps = rng.gen_range(8..=16);
        for _ in 0..steps {
            if rng.gen_bool(0.45) {
                // Sum of 2-3 equal-degree nodes that are not sums themselves.
                let (_, d, _, _, _) = pool[rng.gen_range(0..pool.len())];
                let candidates: Vec<usize> = (0..pool.len())
                    .filter(|&k| pool[k].1 == d && !pool[k].4)
                    .collect();
                if candidates.len() < 2 {
                    continue;
                }
                let want = rng.gen_range(2..=3.min(candidates.len()));
                let picked: Vec<usize> =
                    candidates.choose_multiple(&mut rng, want).copied().collect();
                let bound: u64 = picked.iter().map(|&k| pool[k].3).sum();
                if bound > 500 {
                    continue;
                }
                let mask = picked.iter().fold(0u64, |m, &k| m | pool[k].2);
                let children: Vec<u32> = picked.iter().map(|&k| pool[k].0).collect();
                let idx = b.plus(children);
                pool.push((idx, d, mask, bound, true));
            } else {
                // Product of two variable-disjoint nodes.
                for _try in 0..20 {
                    let x = rng.gen_range(0..pool.len());
                    let y = rng.gen_range(0..pool.len());
                    if x == y || pool[x].2 & pool[y].2 != 0 {
                        continue;
                    }
                    let bound = pool[x].3.saturating_mul(pool[y].3);
                    if bound > 500 {
                        continue;
                    }
                    let idx = b.times(pool[x].0, pool[y].0);
                    pool.push((idx, pool[x].1 + pool[y].1, pool[x].2 | pool[y].2, bound, false));
                    break;
                }
            }
        }
        // Latest node among those of maximal degree.
        let best = pool.iter().max_by_key(|e| e.1).unwrap();
        if best.1 < 2 {
            continue;
        }
        let program = prune_unreachable(&b.finish(best.0));
        debug_assert!(program.validate().is_valid());
        return program;
    }
    unreachable!("random program generation kept degenerating");
}

/// A random grammar over at most 4 nonterminals and 3 terminals, seeded with
/// a guaranteed terminal rule (and usually a recursive one) so most slices
/// are nonempty.
pub fn gen_grammar(seed: u64) -> Grammar {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x67);
    let nt_count = rng.gen_range(2..=4usize);
    let t_count = rng.gen_range(1..=3usize);
    let nonterminals: Vec<String> =
        ["S", "A", "B", "C"][..nt_count].iter().map(|s| s.to_string()).collect();
    let terminals: Vec<String> = ["a", "b", "c"][..t_count].iter().map(|s| s.to_string()).collect();
    let mut rules: Vec<Rule> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let push = |rules: &mut Vec<Rule>, seen: &mut std::collections::HashSet<Rule>, r: Rule| {
        if seen.insert(r.clone()) {
            rules.push(r);
        }
    };
    push(&mut rules, &mut seen, Rule { lhs: 0, rhs: vec![Sym::T(rng.gen_range(0..t_count as u32))] });
    if rng.gen_bool(0.6) {
        push(
            &mut rules,
            &mut seen,
            Rule { lhs: 0, rhs: vec![Sym::T(rng.gen_range(0..t_count as u32)), Sym::N(0)] },
        );
    }
    let extra = rng.gen_range(3..=8);
    for _ in 0..extra {
        let lhs = rng.gen_range(0..nt_count as u32);
        let len = *[0usize, 1, 1, 2, 2, 2, 3, 3].choose(&mut rng).unwrap();
        let rhs: Vec<Sym> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.55) {
                    Sym::T(rng.gen_range(0..t_count as u32))
                } else {
                    Sym::N(rng.gen_range(0..nt_count as u32))
                }
            })
            .collect();
        push(&mut rules, &mut seen, Rule { lhs, rhs });
    }
    Grammar { nonterminals, terminals, rules, start: 0 }
}

/// A random decomposable circuit over 4-10 variables. Or-children may mention
/// different variable subsets and constants appear occasionally, so the
/// simplification and smoothing passes both get exercised.
pub fn gen_dnnf(seed: u64) -> Nnf {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0xd1);
    let num_vars: u32 = rng.gen_range(4..=10);
    let mut nodes: Vec<NnfNode> = Vec::new();
    fn build(rng: &mut ChaCha12Rng, nodes: &mut Vec<NnfNode>, vars: &[u32], budget: u32) -> u32 {
        let roll = rng.gen_range(0u32..100);
        if vars.len() == 1 || budget == 0 || roll < 20 {
            let v = vars[rng.gen_range(0..vars.len())];
            let node = match rng.gen_range(0u32..12) {
                0 => NnfNode::True,
                1 => NnfNode::False,
                2..=6 => NnfNode::Lit(v as i32 + 1),
                _ => NnfNode::Lit(-(v as i32 + 1)),
            };
            nodes.push(node);
            nodes.len() as u32 - 1
        } else if roll < 60 {
            // Conjunction over a random partition: decomposable by construction.
            let mut shuffled = vars.to_vec();
            shuffled.shuffle(rng);
            let parts = rng.gen_range(2..=3.min(shuffled.len()));
            let children: Vec<u32> = balanced_split(&shuffled, parts)
                .iter()
                .map(|part| build(rng, nodes, part, budget - 1))
                .collect();
            nodes.push(NnfNode::And(children));
            nodes.len() as u32 - 1
        } else {
            let arity = rng.gen_range(2..=3);
            let children: Vec<u32> =
                (0..arity).map(|_| build(rng, nodes, vars, budget - 1)).collect();
            nodes.push(NnfNode::Or(children));
            nodes.len() as u32 - 1
        }
    }
    let vars: Vec<u32> = (0..num_vars).collect();
    build(&mut rng, &mut nodes, &vars, 7);
    Nnf { nodes, num_vars }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn demo_matches_frozen_truths() {
        let p = demo_program();
        assert_eq!(p.len(), 20);
        assert!(p.validate().is_valid());
        assert_eq!(p.degrees()[p.root as usize], 4);
        assert_eq!(p.depth(), 5);
        assert_eq!(oracle::support_size(&p, 10_000).unwrap(), 8);
    }

    #[test]
    fn chain_and_comb_are_deep_and_valid() {
        for d in 2..=10u32 {
            let chain = gen_chain(d);
            assert!(chain.validate().is_valid(), "chain {d}");
            assert_eq!(chain.depth(), d);
            assert_eq!(oracle::support_size(&chain, 100_000).unwrap(), 1 << d);
            let comb = gen_comb(d);
            assert!(comb.validate().is_valid(), "comb {d}");
            assert!(comb.depth() >= 2 * (d - 1));
            assert_eq!(oracle::support_size(&comb, 100_000).unwrap(), 1 << d);
        }
    }

    #[test]
    fn towers_have_mid_sized_supports() {
        for seed in 0..20u64 {
            let p = gen_tower(seed);
            assert!(p.validate().is_valid(), "tower {seed}");
            let size = oracle::support_size(&p, 100_000).unwrap();
            assert!((200..=5000).contains(&size), "tower {seed} support {size}");
        }
    }

    #[test]
    fn random_programs_are_valid_and_bounded() {
        for seed in 0..30u64 {
            let p = gen_random_program(seed);
            assert!(p.validate().is_valid(), "seed {seed}");
            let size = oracle::support_size(&p, 100_000).unwrap();
            assert!(size <= 500, "seed {seed} support {size}");
            assert!(p.degrees()[p.root as usize] >= 2, "seed {seed}");
        }
    }

    #[test]
    fn random_grammars_round_trip_and_count() {
        for seed in 0..20u64 {
            let g = gen_grammar(seed);
            let round = Grammar::parse(&g.to_text()).unwrap();
            assert_eq!(round.rules.len(), g.rules.len(), "seed {seed}");
            // Count words two independent ways.
            let cnf = crate::grammar::to_cnf(&g).unwrap();
            for n in 1..=4u32 {
                let direct = oracle::brute_cfg_count_direct(&g, n, 100_000).unwrap();
                let chart = oracle::brute_cfg_count_cnf(&cnf, n, 100_000).unwrap();
                assert_eq!(direct, chart, "seed {seed} length {n}");
            }
        }
    }

    #[test]
    fn random_circuits_parse_back_and_count() {
        for seed in 0..20u64 {
            let nnf = gen_dnnf(seed);
            let round = Nnf::parse(&nnf.to_text()).unwrap();
            assert_eq!(round.nodes.len(), nnf.nodes.len(), "seed {seed}");
            let models = oracle::brute_dnnf_count(&nnf).unwrap();
            match crate::nnf::dnnf_to_program(&nnf).unwrap() {
                crate::nnf::DnnfBuild::Unsatisfiable => assert_eq!(models, 0, "seed {seed}"),
                crate::nnf::DnnfBuild::Present { program, .. } => {
                    assert!(program.validate().is_valid(), "seed {seed}");
                    let size = oracle::support_size(&program, 2_000_000).unwrap();
                    assert_eq!(size, models, "seed {seed}");
                }
            }
        }
    }
}
