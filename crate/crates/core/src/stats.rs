//! Statistical validation harness: seeded coverage trials against the exact
//! oracles, and inclusion-frequency probes at nodes whose acceptance
//! probability is deterministic.

use crate::engine::{
    counter, decimal_or_sig, height_zero_keep_prefix, height_zero_pvalue, CountRequest,
    EngineError, Mode, Overrides, Params,
};
use crate::monomial::Monomial;
use crate::numeric::{parse_decimal, rat_u64, Rat};
use crate::oracle::{self, OracleError};
use crate::program::Program;
use crate::pvalue::PValue;
use crate::rng::run_seeds;
use crate::support::capped_support;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Enumeration budget for ground-truth counts.
pub const ORACLE_CAP: u64 = 2_000_000;

const Z95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("bad request: {0}")]
    BadRequest(String),
}

/// 95% Wilson score lower confidence bound for hits/trials, clamped to [0, 1].
pub fn wilson_lower_bound(hits: u64, trials: u64) -> f64 {
    assert!(hits <= trials, "more hits than trials");
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let ph = hits as f64 / n;
    let z2 = Z95 * Z95;
    let center = ph + z2 / (2.0 * n);
    let margin = Z95 * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - margin) / (1.0 + z2 / n)).clamp(0.0, 1.0)
}

/// Outcome of repeated counting runs against an exact reference count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trials: u64,
    /// Trials whose reported estimate landed inside (1 +- epsilon) * exact.
    pub hits: u64,
    pub empirical_coverage: f64,
    pub wilson_lower_bound: f64,
    /// Fraction of trials that returned 0 (a majority of aborted runs).
    pub abort_rate: f64,
    pub seed_base: u64,
    pub exact: u64,
    pub epsilon: String,
}

/// Runs `counter` with seeds seedBase, seedBase+1, ... and scores each
/// reported estimate against the exact support size. Hits are judged on the
/// reported decimal string, so the report is reproducible byte for byte.
pub fn run_coverage_trials(
    p: &Program,
    epsilon: &Rat,
    delta: &Rat,
    mode: Mode,
    overrides: &Overrides,
    trials: u64,
    seed_base: u64,
) -> Result<TrialReport, StatsError> {
    if trials == 0 {
        return Err(StatsError::BadRequest("trials must be at least 1".into()));
    }
    let exact = oracle::support_size(p, ORACLE_CAP)?;
    let exact_rat = rat_u64(exact);
    let lo = (rat_u64(1) - epsilon) * &exact_rat;
    let hi = (rat_u64(1) + epsilon) * &exact_rat;
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, bool), StatsError> {
            let req = CountRequest {
                epsilon: epsilon.clone(),
                delta: delta.clone(),
                seed: seed_base.wrapping_add(i),
                mode,
                overrides: overrides.clone(),
                jobs: None,
            };
            let report = counter(p, &req)?;
            let est = parse_decimal(&report.estimate)
                .map_err(|e| StatsError::BadRequest(format!("unparseable estimate: {e}")))?;
            let hit = est >= lo && est <= hi;
            Ok((hit, report.estimate == "0"))
        })
        .collect::<Result<_, _>>()?;
    let hits = outcomes.iter().filter(|(h, _)| *h).count() as u64;
    let zeros = outcomes.iter().filter(|(_, z)| *z).count() as u64;
    Ok(TrialReport {
        trials,
        hits,
        empirical_coverage: hits as f64 / trials as f64,
        wilson_lower_bound: wilson_lower_bound(hits, trials),
        abort_rate: zeros as f64 / trials as f64,
        seed_base,
        exact,
        epsilon: decimal_or_sig(epsilon),
    })
}

/// Outcome of an inclusion-frequency probe at one effective-height-0 node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub node: u32,
    pub targets: Vec<String>,
    /// The exact inclusion probability: p(q) per target, independent.
    pub expected: f64,
    pub trials: u64,
    pub hits: u64,
    pub frequency: f64,
    pub sigma: f64,
    pub within_three_sigma: bool,
}

/// Frequency with which `alpha` appears in the first sample set of node `q`
/// across independently seeded runs; the exact probability is
/// min(1, 16n/|supp(q)|) at an effective-height-0 node.
pub fn inclusion_frequency_probe(
    p: &Program,
    q: u32,
    alpha: &Monomial,
    params: &Params,
    trials: u64,
    seed_base: u64,
) -> Result<ProbeReport, StatsError> {
    probe_core(p, q, &[alpha], params, trials, seed_base)
}

/// Frequency with which two distinct monomials appear together in the first
/// sample set of node `q`; height-0 thinning is elementwise independent, so
/// the exact probability is p(q)^2.
pub fn co_inclusion_frequency_probe(
    p: &Program,
    q: u32,
    alpha: &Monomial,
    beta: &Monomial,
    params: &Params,
    trials: u64,
    seed_base: u64,
) -> Result<ProbeReport, StatsError> {
    probe_core(p, q, &[alpha, beta], params, trials, seed_base)
}

fn probe_core(
    p: &Program,
    q: u32,
    targets: &[&Monomial],
    params: &Params,
    trials: u64,
    seed_base: u64,
) -> Result<ProbeReport, StatsError> {
    if trials == 0 {
        return Err(StatsError::BadRequest("trials must be at least 1".into()));
    }
    if !p.validate().is_valid() {
        return Err(StatsError::BadRequest("invalid program".into()));
    }
    if q as usize >= p.len() {
        return Err(StatsError::BadRequest(format!("node {q} out of range")));
    }
    let info = capped_support(p, params.threshold);
    let supp = info.per_node[q as usize].exact().ok_or_else(|| {
        StatsError::BadRequest(format!(
            "node {q} is not at effective height 0 under threshold {}",
            params.threshold
        ))
    })?;
    let mut positions = Vec::with_capacity(targets.len());
    for t in targets {
        let pos = supp
            .binary_search(t)
            .map_err(|_| StatsError::BadRequest("monomial not in the node's support".into()))?;
        if positions.contains(&pos) {
            return Err(StatsError::BadRequest("probe targets must be distinct".into()));
        }
        positions.push(pos);
    }
    let pv = height_zero_pvalue(params.num_vars, supp.len() as u64);
    let per_target = match &pv {
        PValue::One => 1.0,
        PValue::HeightZero(r) => {
            let num = r.numer().to_f64().expect("small numerator");
            let den = r.denom().to_f64().expect("small denominator");
            num / den
        }
        PValue::Form { .. } => unreachable!("height-0 probabilities are never grid values"),
    };
    let expected = per_target.powi(targets.len() as i32);
    let prefix = positions.iter().max().copied().unwrap_or(0) + 1;
    let seeds = run_seeds(seed_base, trials as usize);
    let hits = seeds
        .par_iter()
        .map(|seed| {
            let keeps = height_zero_keep_prefix(params, seed, q, 0, supp.len() as u64, prefix);
            u64::from(positions.iter().all(|&i| keeps[i]))
        })
        .sum::<u64>();
    let frequency = hits as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    Ok(ProbeReport {
        node: q,
        targets: targets.iter().map(|t| monomial_label(p, t)).collect(),
        expected,
        trials,
        hits,
        frequency,
        sigma,
        within_three_sigma: (frequency - expected).abs() <= 3.0 * sigma,
    })
}

fn monomial_label(p: &Program, m: &Monomial) -> String {
    let names: Vec<&str> =
        m.vars().iter().map(|&v| p.var_names[v as usize].as_str()).collect();
    names.join("*")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::count_core;
    use crate::gen::{demo_program, gen_product_of_pluses, gen_tower, gen_wide_plus};
    use crate::numeric::rat_frac;

    fn probe_params(p: &Program, threshold: u64) -> Params {
        let overrides = Overrides {
            ns: Some(1),
            nt: Some(1),
            theta: Some(1_000_000),
            threshold: Some(threshold),
            m: Some(1),
        };
        Params::derive(p, &rat_frac(1, 2), &rat_frac(1, 2), Mode::Practical, &overrides).unwrap()
    }

    #[test]
    fn wilson_matches_reference_values() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(wilson_lower_bound(150, 200), 0.6856577652038048));
        assert!(close(wilson_lower_bound(190, 200), 0.9104209437021562));
        assert!(close(wilson_lower_bound(200, 200), 0.9811539940816792));
        assert!(close(wilson_lower_bound(10, 10), 0.7224598312333834));
        assert_eq!(wilson_lower_bound(0, 10), 0.0);
    }

    #[test]
    fn coverage_is_total_on_the_exact_path() {
        let p = demo_program();
        let report = run_coverage_trials(
            &p,
            &rat_frac(1, 2),
            &rat_frac(1, 2),
            Mode::Practical,
            &Overrides::default(),
            25,
            5,
        )
        .unwrap();
        assert_eq!(report.hits, 25);
        assert_eq!(report.empirical_coverage, 1.0);
        assert!((report.wilson_lower_bound - 0.8668035060468212).abs() < 1e-9);
        assert_eq!(report.abort_rate, 0.0);
        assert_eq!(report.exact, 8);
        assert_eq!(report.epsilon, "0.5");
    }

    #[test]
    fn zero_trials_are_rejected() {
        let p = demo_program();
        let err = run_coverage_trials(
            &p,
            &rat_frac(1, 2),
            &rat_frac(1, 2),
            Mode::Practical,
            &Overrides::default(),
            0,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, StatsError::BadRequest(_)));
    }

    #[test]
    fn coverage_reports_replay_exactly() {
        let p = gen_tower(3);
        let overrides = Overrides {
            ns: Some(50),
            nt: Some(5),
            theta: Some(1_000_000),
            threshold: Some(4),
            m: Some(5),
        };
        let run = || {
            run_coverage_trials(
                &p,
                &rat_frac(1, 2),
                &rat_frac(1, 2),
                Mode::Practical,
                &overrides,
                10,
                99,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.hits <= a.trials);
    }

    #[test]
    fn saturated_nodes_keep_everything() {
        // supp(root) = 16 <= 16n, so p(root) = 1 and every draw keeps alpha.
        let p = gen_wide_plus(16);
        let params = probe_params(&p, 1 << 20);
        let supp = oracle::enumerate_support(&p, 1 << 20).unwrap();
        let report =
            inclusion_frequency_probe(&p, p.root, &supp[0], &params, 200, 17).unwrap();
        assert_eq!(report.expected, 1.0);
        assert_eq!(report.hits, 200);
        assert_eq!(report.frequency, 1.0);
        assert!(report.within_three_sigma);
    }

    #[test]
    fn half_probability_node_matches_binomial() {
        // 128 variables, |supp(root)| = 4096 = 2 * 16n: p(root) = 1/2.
        let p = gen_product_of_pluses(64, 2);
        let params = probe_params(&p, 1 << 20);
        let supp = oracle::enumerate_support(&p, 1 << 20).unwrap();
        let report =
            inclusion_frequency_probe(&p, p.root, &supp[0], &params, 4000, 11).unwrap();
        assert_eq!(report.expected, 0.5);
        assert!(report.within_three_sigma, "frequency {}", report.frequency);
    }

    #[test]
    fn co_inclusion_matches_the_product_rule() {
        let p = gen_product_of_pluses(64, 2);
        let params = probe_params(&p, 1 << 20);
        let supp = oracle::enumerate_support(&p, 1 << 20).unwrap();
        let report = co_inclusion_frequency_probe(
            &p, p.root, &supp[0], &supp[1], &params, 4000, 23,
        )
        .unwrap();
        assert_eq!(report.expected, 0.25);
        assert!(report.within_three_sigma, "frequency {}", report.frequency);
    }

    #[test]
    fn probes_replay_the_engine_bit_for_bit() {
        let p = gen_product_of_pluses(64, 2);
        let params = probe_params(&p, 1 << 20);
        let info = capped_support(&p, params.threshold);
        let supp = info.per_node[p.root as usize].exact().unwrap().to_vec();
        let seed = run_seeds(3, 1)[0];
        let run = count_core(&p, &info, &params, &seed, true).unwrap();
        let diag = run.diag.unwrap();
        let keeps =
            height_zero_keep_prefix(&params, &seed, p.root, 0, supp.len() as u64, supp.len());
        let replayed: Vec<Monomial> = supp
            .iter()
            .zip(&keeps)
            .filter(|(_, &k)| k)
            .map(|(m, _)| m.clone())
            .collect();
        assert_eq!(diag.root_set0, replayed);
        assert!(matches!(diag.root_pvalue, PValue::HeightZero(_)));
    }

    #[test]
    fn probes_reject_sampled_nodes_and_foreign_monomials() {
        let p = gen_product_of_pluses(64, 2);
        let low = probe_params(&p, 4);
        let supp = oracle::enumerate_support(&p, 1 << 20).unwrap();
        let err = inclusion_frequency_probe(&p, p.root, &supp[0], &low, 10, 0).unwrap_err();
        assert!(matches!(err, StatsError::BadRequest(_)));
        let params = probe_params(&p, 1 << 20);
        let foreign = Monomial::from_sorted(vec![0, 1]);
        let err = inclusion_frequency_probe(&p, p.root, &foreign, &params, 10, 0).unwrap_err();
        assert!(matches!(err, StatsError::BadRequest(_)));
        let err = co_inclusion_frequency_probe(&p, p.root, &supp[0], &supp[0], &params, 10, 0)
            .unwrap_err();
        assert!(matches!(err, StatsError::BadRequest(_)));
    }
}
