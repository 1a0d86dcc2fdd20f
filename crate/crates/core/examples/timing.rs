// timing probe for criterion-2 shaped workloads
use std::time::Instant;
use suppcount::engine::{Mode, Overrides};
use suppcount::gen::gen_tower;
use suppcount::numeric::rat_frac;
use suppcount::oracle;
use suppcount::program::Node;
use suppcount::stats::run_coverage_trials;

fn main() {
    let overrides = Overrides {
        ns: Some(200),
        nt: Some(9),
        theta: Some(1_000_000),
        threshold: Some(4),
        m: Some(9),
    };
    for seed in [0u64, 1, 2] {
        let p = gen_tower(seed);
        let supports = oracle::enumerate_all_supports(&p, 1 << 21).unwrap();
        println!("tower {seed}: n={} nodes={}", p.num_vars, p.len());
        for q in 0..p.len() {
            let kind = match &p.nodes[q] {
                Node::Input { .. } => continue,
                Node::Times { left, right } => format!("times({left},{right})"),
                Node::Plus { children } => format!("plus{:?}", children),
            };
            let kids: Vec<usize> =
                p.children(q as u32).into_iter().map(|c| supports[c as usize].len()).collect();
            println!(
                "  node {q}: {kind} |supp|={} kids={:?}",
                supports[q].len(),
                kids
            );
        }
        let truth = supports[p.root as usize].len();
        let t0 = Instant::now();
        let rep = run_coverage_trials(
            &p,
            &rat_frac(1, 2),
            &rat_frac(1, 2),
            Mode::Practical,
            &overrides,
            10,
            1000,
        )
        .unwrap();
        let dt = t0.elapsed();
        println!(
            "tower {seed}: |supp|={truth} 10 trials in {:.2?} ({:.0?}/trial) hits={} aborts={}",
            dt,
            dt / 10,
            rep.hits,
            rep.abort_rate * 10.0
        );
    }
}
