//! The randomized counter: grid-rounded acceptance probabilities per node,
//! replayable per-repetition sample sets, and median amplification across
//! independent runs.
//!
//! Each run walks the program bottom-up. A node whose support was
//! materialized (effective height 0) gets the exact probability
//! min(1, 16n/|supp|) and ns*nt thinned copies of its support. A times node
//! multiplies its children's sample sets pairwise and rethins; a plus node
//! unions its children's sets (dropping monomials already covered by an
//! earlier sibling), calibrates a fresh probability from the median batch
//! size of the union, and rethins. Every stored probability is rounded down
//! onto the acceptance grid for the node's effective height, so the number
//! of distinct probabilities stays polynomial and runs are replayable. The
//! run's output is 16n / p(root); a run that pushes any sample set to theta
//! monomials or falls off the grid reports 0 instead. The counter takes the
//! lower median over m independent runs.
//!
//! Randomness discipline: every Bernoulli draw comes from the substream of a
//! (node, repetition, phase) triple of the run seed, and within a stream the
//! draw order is fixed by set order, so results are bit-identical for any
//! thread count.

use crate::depth::reduce_depth;
use crate::monomial::Monomial;
use crate::numeric::{format_sig, ln2, ln_rat, rat_u64, Fix, Rat};
use crate::program::{Node, Program};
use crate::pvalue::{cmp_expo, round_down, ByteStream, Expo, Kappa, KeepSampler, PValue};
use crate::rng::{run_seeds, substream, Phase};
use crate::support::{capped_support, default_threshold, MembershipOracle, SupportInfo};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::HashMap;
use thiserror::Error;

/// The largest ns * nt a single run will materialize sample sets for.
pub const MAX_REPS: u64 = 1 << 31;

/// Largest pair-product list worth interning once up front (ids, 4 bytes
/// each); bigger products fall back to building pairs lazily per rep.
const PRODUCT_CACHE_LIMIT: u128 = 1 << 22;

/// How engine parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// All parameters may be overridden; the times rule for two probability-1
    /// children uses the tighter floor min(1, 16n / (|S(a)| * |S(b)|)).
    Practical,
    /// Parameters come from the analysis formulas only; overrides are
    /// rejected, and the times rule is applied verbatim.
    PaperStrict,
}

/// Optional parameter overrides; honored in practical mode only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub ns: Option<u64>,
    pub nt: Option<u64>,
    pub theta: Option<u64>,
    pub threshold: Option<u64>,
    pub m: Option<u32>,
}

impl Overrides {
    pub fn any(&self) -> bool {
        self.ns.is_some()
            || self.nt.is_some()
            || self.theta.is_some()
            || self.threshold.is_some()
            || self.m.is_some()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Fully resolved parameters for one counting job.
#[derive(Debug, Clone)]
pub struct Params {
    pub mode: Mode,
    pub num_vars: u32,
    pub kappa: Kappa,
    /// Repetitions per batch.
    pub ns: u64,
    /// Number of batches; a run keeps ns * nt sample sets per node.
    pub nt: u64,
    /// Sample-set size at which a run gives up and reports 0.
    pub theta: u64,
    /// Support-materialization cap; at or below it a node is exact.
    pub threshold: u64,
    /// Independent runs to take the median over.
    pub m: u32,
    pub epsilon: Rat,
    pub delta: Rat,
}

impl Params {
    /// Resolves parameters for an already depth-reduced program.
    ///
    /// Defaults follow the analysis: ns = ceil(12/kappa^2), nt = 8n|P|,
    /// theta = 512 ns nt n |P|, threshold = 16n|P|^2, m = ceil(16 ln(1/delta)).
    pub fn derive(
        p: &Program,
        epsilon: &Rat,
        delta: &Rat,
        mode: Mode,
        overrides: &Overrides,
    ) -> Result<Params, EngineError> {
        if !epsilon.is_positive() {
            return Err(EngineError::BadParams("epsilon must be positive".into()));
        }
        if !delta.is_positive() || *delta >= rat_u64(1) {
            return Err(EngineError::BadParams("delta must lie in (0, 1)".into()));
        }
        if mode == Mode::PaperStrict && overrides.any() {
            return Err(EngineError::BadParams(
                "parameter overrides require practical mode".into(),
            ));
        }
        let n = p.num_vars;
        if n == 0 {
            return Err(EngineError::BadParams("program has no variables".into()));
        }
        let size = p.len() as u64;
        let kappa = Kappa::derive(epsilon, n);
        let ns = match overrides.ns {
            Some(v) => v,
            None => ns_from_kappa(&kappa)?,
        };
        let nt = match overrides.nt {
            Some(v) => v,
            None => 8u64
                .checked_mul(n as u64)
                .and_then(|x| x.checked_mul(size))
                .ok_or_else(|| EngineError::BadParams("derived nt overflows u64".into()))?,
        };
        let theta = match overrides.theta {
            Some(v) => v,
            None => 512u64
                .checked_mul(ns)
                .and_then(|x| x.checked_mul(nt))
                .and_then(|x| x.checked_mul(n as u64))
                .and_then(|x| x.checked_mul(size))
                .ok_or_else(|| EngineError::BadParams("derived theta overflows u64".into()))?,
        };
        let threshold = overrides.threshold.unwrap_or_else(|| default_threshold(p));
        let m = match overrides.m {
            Some(v) => v,
            None => m_from_delta(delta)?,
        };
        for (name, v) in [("ns", ns), ("nt", nt), ("theta", theta), ("threshold", threshold)] {
            if v == 0 {
                return Err(EngineError::BadParams(format!("{name} must be at least 1")));
            }
        }
        if m == 0 {
            return Err(EngineError::BadParams("m must be at least 1".into()));
        }
        Ok(Params {
            mode,
            num_vars: n,
            kappa,
            ns,
            nt,
            theta,
            threshold,
            m,
            epsilon: epsilon.clone(),
            delta: delta.clone(),
        })
    }

    /// Sample sets per node for one run, capped for feasibility.
    pub fn reps(&self) -> Result<usize, EngineError> {
        match self.ns.checked_mul(self.nt) {
            Some(r) if r <= MAX_REPS => Ok(r as usize),
            _ => Err(EngineError::BadParams(format!(
                "ns * nt = {} * {} exceeds the {} sample sets a run can hold; \
                 override ns and nt in practical mode",
                self.ns, self.nt, MAX_REPS
            ))),
        }
    }
}

/// ceil(12 / kappa^2), exact in the rational regime and certified by interval
/// refinement in the ln-2 regime (where the value is irrational, so the
/// ceiling separates at some precision).
fn ns_from_kappa(kappa: &Kappa) -> Result<u64, EngineError> {
    let big = match kappa {
        Kappa::Rational(k) => {
            let (num, den) = (k.numer().clone(), k.denom().clone());
            let a = BigInt::from(12) * &den * &den;
            let b = &num * &num;
            (&a + &b - BigInt::from(1)) / &b
        }
        Kappa::LogTwoOver(d) => {
            let target = Rat::from(BigInt::from(12) * d * d);
            smallest_multiple_reaching(&target, &|prec| {
                let f = ln2(prec);
                f.mul(&f)
            })
        }
    };
    big.to_u64()
        .ok_or_else(|| EngineError::BadParams("derived ns exceeds u64".into()))
}

/// ceil(16 ln(1/delta)), at least 1.
fn m_from_delta(delta: &Rat) -> Result<u32, EngineError> {
    let inv = delta.recip();
    let c = ceil_enclosed(&|prec| ln_rat(&inv, prec).scale_rat(&rat_u64(16)));
    let m = c.to_u32().ok_or_else(|| EngineError::BadParams("derived m exceeds u32".into()))?;
    Ok(m.max(1))
}

/// The unique ceiling of an irrational value given by enclosures.
fn ceil_enclosed(value: &dyn Fn(u32) -> Fix) -> BigInt {
    let mut prec = 192u32;
    loop {
        if let Some(f) = value(prec).neg().floor_unique() {
            return -f;
        }
        prec = prec.saturating_mul(4);
        assert!(prec <= 1 << 22, "ceiling enclosure failed to separate");
    }
}

/// The smallest positive integer t with t * d >= target, where d is the
/// positive irrational value enclosed by `denom` at each precision.
fn smallest_multiple_reaching(target: &Rat, denom: &dyn Fn(u32) -> Fix) -> BigInt {
    let mut prec = 192u32;
    loop {
        let d = denom(prec);
        let mid = d.mid_rat();
        if mid.is_positive() {
            let guess = (target / &mid).ceil().to_integer();
            for g in [&guess - BigInt::from(1), guess.clone(), &guess + BigInt::from(1)] {
                if g.is_positive() {
                    let above = d
                        .scale_rat(&Rat::from(g.clone()))
                        .add(&Fix::from_rat(&-target.clone(), prec))
                        .sign();
                    let below = d
                        .scale_rat(&Rat::from(&g - BigInt::from(1)))
                        .add(&Fix::from_rat(&-target.clone(), prec))
                        .sign();
                    if above == Some(Ordering::Greater) && below == Some(Ordering::Less) {
                        return g;
                    }
                }
            }
        }
        prec = prec.saturating_mul(4);
        assert!(prec <= 1 << 22, "multiple search failed to separate");
    }
}

/// The outcome of one independent run.
#[derive(Debug, Clone)]
pub enum RunEstimate {
    /// The run aborted: a sample set reached theta or the grid ran out.
    Zero,
    /// 16n / p(root).
    Value(Expo),
}

/// One run's result, with optional extra output for statistical probes.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub estimate: RunEstimate,
    pub aborted: bool,
    /// Which special rules fired ("times-both-one-floor", "theta-abort", ...).
    pub deviations: Vec<&'static str>,
    pub diag: Option<RunDiag>,
}

/// Per-run diagnostics for inclusion-frequency probes.
#[derive(Debug, Clone)]
pub struct RunDiag {
    pub root_pvalue: PValue,
    /// The first repetition's root sample set, materialized.
    pub root_set0: Vec<Monomial>,
}

/// Monomials seen by one run, interned to compact ids.
struct Arena {
    map: HashMap<Monomial, u32>,
    items: Vec<Monomial>,
}

impl Arena {
    fn new() -> Arena {
        Arena { map: HashMap::new(), items: Vec::new() }
    }

    fn intern(&mut self, m: Monomial) -> u32 {
        if let Some(&id) = self.map.get(&m) {
            return id;
        }
        let id = self.items.len() as u32;
        self.items.push(m.clone());
        self.map.insert(m, id);
        id
    }

    fn get(&self, id: u32) -> &Monomial {
        &self.items[id as usize]
    }
}

/// Dense sibling-membership cache, one byte per (program node, interned
/// monomial): 0 unknown, 1 member, 2 non-member. Arena ids are compact, so
/// flat slots beat hashing on the millions of repeated lookups per run.
struct MemberTable {
    slots: Vec<Vec<u8>>,
}

impl MemberTable {
    fn new(nodes: usize) -> MemberTable {
        MemberTable { slots: vec![Vec::new(); nodes] }
    }

    fn contains(
        &mut self,
        e: u32,
        id: u32,
        arena: &Arena,
        oracle: &mut MembershipOracle,
    ) -> bool {
        let slot = &mut self.slots[e as usize];
        let i = id as usize;
        if i >= slot.len() {
            slot.resize(i + 1, 0);
        }
        match slot[i] {
            1 => true,
            2 => false,
            _ => {
                let b = oracle.contains(e, arena.get(id));
                slot[i] = if b { 1 } else { 2 };
                b
            }
        }
    }
}

/// Sample sets of one node: one shared set when p = 1 (thinning keeps
/// everything, so all repetitions agree), otherwise one set per repetition.
enum NodeSets {
    Uniform(Vec<u32>),
    PerR(Vec<Vec<u32>>),
    /// The root's sets are read only for diagnostics; when nobody will read
    /// them the thinning work (and its randomness) is skipped entirely.
    Skipped,
}

impl NodeSets {
    fn at(&self, r: usize) -> &[u32] {
        match self {
            NodeSets::Uniform(v) => v,
            NodeSets::PerR(per) => &per[r],
            NodeSets::Skipped => panic!("sample sets were skipped for this node"),
        }
    }
}

/// What processing one node produced: its probability and sets, or an abort.
enum Step {
    Done(PValue, NodeSets),
    Abort(&'static str),
}

/// Immutable per-run context shared by the node processors.
struct Ctx<'a> {
    info: &'a SupportInfo,
    params: &'a Params,
    run_seed: &'a [u8; 32],
    reps: usize,
}

impl<'a> Ctx<'a> {
    fn n(&self) -> u32 {
        self.params.num_vars
    }

    fn kappa(&self) -> &Kappa {
        &self.params.kappa
    }

    fn sixteen_n(&self) -> u64 {
        16 * self.n() as u64
    }

    /// Effective height of `q`; the grid level for its probability.
    fn level(&self, q: u32) -> u32 {
        self.info.effective_height[q as usize]
    }

    /// The size of a probability-1 node's (uniform) sample set.
    fn uniform_len(&self, q: u32, sets: &[Option<NodeSets>]) -> Result<u64, EngineError> {
        match &sets[q as usize] {
            Some(NodeSets::Uniform(v)) => Ok(v.len() as u64),
            _ => Err(EngineError::Invariant(format!(
                "node {q} should hold a uniform sample set"
            ))),
        }
    }

    /// Materialized support with probability min(1, 16n/|supp|) and ns*nt
    /// independently thinned copies.
    fn height_zero(&self, q: u32, supp: &[Monomial], need_sets: bool, arena: &mut Arena) -> Step {
        let size = supp.len() as u64;
        if size >= self.params.theta {
            return Step::Abort("theta-abort");
        }
        let pv = height_zero_pvalue(self.n(), size);
        if !need_sets {
            return Step::Done(pv, NodeSets::Skipped);
        }
        let ids: Vec<u32> = supp.iter().map(|m| arena.intern(m.clone())).collect();
        if pv.is_one() {
            return Step::Done(PValue::One, NodeSets::Uniform(ids));
        }
        let sampler = KeepSampler::from_pvalue(&pv, self.kappa(), self.n());
        let mut per = Vec::with_capacity(self.reps);
        for r in 0..self.reps {
            let mut rng = substream(self.run_seed, q, r as u32, Phase::Offer);
            let mut out = Vec::new();
            if !sampler.thin_ids(&ids, &mut rng, self.params.theta, &mut out) {
                return Step::Abort("theta-abort");
            }
            per.push(out);
        }
        Step::Done(pv, NodeSets::PerR(per))
    }

    /// Times node: target probability from the children's, pairwise products
    /// rethinned by p / (p_a p_b).
    fn times_node(
        &self,
        q: u32,
        a: u32,
        b: u32,
        pvals: &[Option<PValue>],
        sets: &[Option<NodeSets>],
        need_sets: bool,
        arena: &mut Arena,
        notes: &mut Vec<&'static str>,
    ) -> Result<Step, EngineError> {
        let pa = required(pvals, a)?;
        let pb = required(pvals, b)?;
        let n = self.n();
        let target = match (pa.is_one(), pb.is_one()) {
            (true, true) => match self.params.mode {
                Mode::Practical => {
                    // Tighter floor for two saturated children; keeps the
                    // estimator calibrated to the product set's true size.
                    note(notes, "times-both-one-floor");
                    let la = self.uniform_len(a, sets)?;
                    let lb = self.uniform_len(b, sets)?;
                    Expo::from_rat(Rat::new(
                        self.sixteen_n().into(),
                        BigInt::from(la) * BigInt::from(lb),
                    ))
                }
                Mode::PaperStrict => {
                    let la = self.uniform_len(a, sets)?;
                    Expo::from_rat(Rat::new(1.into(), la.into()))
                }
            },
            (true, false) => {
                let la = self.uniform_len(a, sets)?;
                pb.to_expo(n).scale(&Rat::new(1.into(), la.into()))
            }
            (false, true) => {
                let lb = self.uniform_len(b, sets)?;
                pa.to_expo(n).scale(&Rat::new(1.into(), lb.into()))
            }
            (false, false) => pa
                .to_expo(n)
                .mul(&pb.to_expo(n))
                .scale(&Rat::new(1.into(), self.sixteen_n().into())),
        };
        let pq = match round_down(&target, self.level(q), self.kappa(), n) {
            Ok(p) => p,
            Err(_) => {
                note(notes, "grid-underflow-abort");
                return Ok(Step::Abort("grid-underflow-abort"));
            }
        };
        self.check_monotone(q, &pq, &[pa, pb])?;
        let keep = pq.to_expo(n).div(&pa.to_expo(n).mul(&pb.to_expo(n)));
        self.check_fraction(q, &keep)?;
        if !need_sets {
            // The probability is already fixed; the pair products would only
            // feed a parent or the diagnostics, and nobody is asking.
            return Ok(Step::Done(pq, NodeSets::Skipped));
        }
        if pq.is_one() {
            // Both children saturated and the product is small: keep all.
            let mut out = Vec::new();
            match self.product_into(sets[a as usize].as_ref(), sets[b as usize].as_ref(), 0, None, arena, &mut out)? {
                true => Ok(Step::Done(pq, NodeSets::Uniform(out))),
                false => Ok(Step::Abort("theta-abort")),
            }
        } else {
            let sampler = KeepSampler::new(&keep, self.kappa());
            // Rep-independent children mean rep-independent pair products,
            // so intern the product list once and let each rep thin plain
            // ids. Draw order per rep is unchanged: one Bernoulli per pair
            // in row-major set order.
            let prebuilt = match (&sets[a as usize], &sets[b as usize]) {
                (Some(NodeSets::Uniform(xs)), Some(NodeSets::Uniform(ys)))
                    if (xs.len() as u128) * (ys.len() as u128) <= PRODUCT_CACHE_LIMIT =>
                {
                    let mut ids = Vec::with_capacity(xs.len() * ys.len());
                    for &x in xs {
                        for &y in ys {
                            let m = arena.get(x).union_disjoint(arena.get(y)).ok_or_else(
                                || EngineError::Invariant("times children share a variable".into()),
                            )?;
                            ids.push(arena.intern(m));
                        }
                    }
                    Some(ids)
                }
                _ => None,
            };
            let mut per = Vec::with_capacity(self.reps);
            for r in 0..self.reps {
                let mut rng = substream(self.run_seed, q, r as u32, Phase::Filter);
                let mut out = Vec::new();
                let ok = match &prebuilt {
                    Some(ids) => sampler.thin_ids(ids, &mut rng, self.params.theta, &mut out),
                    None => {
                        let mut src = ByteStream::new(&mut rng);
                        self.product_into(
                            sets[a as usize].as_ref(),
                            sets[b as usize].as_ref(),
                            r,
                            Some((&sampler, &mut src)),
                            arena,
                            &mut out,
                        )?
                    }
                };
                if !ok {
                    return Ok(Step::Abort("theta-abort"));
                }
                per.push(out);
            }
            Ok(Step::Done(pq, NodeSets::PerR(per)))
        }
    }

    /// Pairwise products of two sample sets into `out`, optionally thinned;
    /// returns false when theta is reached. One Bernoulli draw per pair, in
    /// set order, whether or not the pair is kept.
    fn product_into(
        &self,
        sa: Option<&NodeSets>,
        sb: Option<&NodeSets>,
        r: usize,
        mut thin: Option<(&KeepSampler, &mut ByteStream<'_, rand_chacha::ChaCha12Rng>)>,
        arena: &mut Arena,
        out: &mut Vec<u32>,
    ) -> Result<bool, EngineError> {
        let (sa, sb) = match (sa, sb) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(EngineError::Invariant("times child lacks sample sets".into())),
        };
        for &x in sa.at(r) {
            for &y in sb.at(r) {
                if let Some((sampler, src)) = thin.as_mut() {
                    if !sampler.sample_stream(src) {
                        continue;
                    }
                }
                let m = arena
                    .get(x)
                    .union_disjoint(arena.get(y))
                    .ok_or_else(|| {
                        EngineError::Invariant("times children share a variable".into())
                    })?;
                out.push(arena.intern(m));
                if out.len() as u64 >= self.params.theta {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Plus node: thin each child's sets to the smallest child probability,
    /// drop monomials an earlier sibling's support already covers, calibrate
    /// the node's probability from the median batch size, and rethin.
    fn plus_node(
        &self,
        q: u32,
        cs: &[u32],
        pvals: &[Option<PValue>],
        sets: &[Option<NodeSets>],
        need_sets: bool,
        arena: &mut Arena,
        oracle: &mut MembershipOracle,
        member_cache: &mut MemberTable,
        notes: &mut Vec<&'static str>,
    ) -> Result<Step, EngineError> {
        let n = self.n();
        let kappa = self.kappa();
        let child_pvals: Vec<&PValue> =
            cs.iter().map(|&c| required(pvals, c)).collect::<Result<_, _>>()?;
        let rho = child_pvals
            .iter()
            .min_by(|a, b| cmp_expo(&a.to_expo(n), &b.to_expo(n), kappa))
            .expect("plus nodes have at least one child");
        let rho_expo = rho.to_expo(n);
        let samplers: Vec<KeepSampler> = child_pvals
            .iter()
            .map(|pc| KeepSampler::new(&rho_expo.div(&pc.to_expo(n)), kappa))
            .collect();
        // The union of thinned child sets is bounded by k * theta while it
        // is being built; crossing that is an abort, same as theta itself.
        let union_cap = (cs.len() as u64).saturating_mul(self.params.theta);
        let uniform_inputs = samplers.iter().all(|s| s.is_always())
            && cs.iter().all(|&c| matches!(&sets[c as usize], Some(NodeSets::Uniform(_))));
        let mut build_union = |r: usize| -> Result<Option<Vec<u32>>, EngineError> {
            let mut rng = substream(self.run_seed, q, r as u32, Phase::Offer);
            let mut src = ByteStream::new(&mut rng);
            let mut out = Vec::new();
            for (i, &c) in cs.iter().enumerate() {
                let cset = sets[c as usize]
                    .as_ref()
                    .ok_or_else(|| EngineError::Invariant("plus child lacks sample sets".into()))?;
                for &id in cset.at(r) {
                    let keep = samplers[i].sample_stream(&mut src);
                    if !keep {
                        continue;
                    }
                    // The same monomial id recurs across repetitions, so
                    // sibling membership is cached per (node, id).
                    let mut seen = false;
                    for &e in &cs[..i] {
                        if member_cache.contains(e, id, arena, oracle) {
                            seen = true;
                            break;
                        }
                    }
                    if seen {
                        continue;
                    }
                    out.push(id);
                    if out.len() as u64 >= union_cap {
                        return Ok(None);
                    }
                }
            }
            Ok(Some(out))
        };
        let unions: Vec<Vec<u32>>;
        let med: u128;
        if uniform_inputs {
            // No randomness is consumed and every repetition agrees, so
            // build the union once; each batch sums to ns * |union|.
            let u = match build_union(0)? {
                Some(u) => u,
                None => {
                    note(notes, "union-cap-abort");
                    return Ok(Step::Abort("union-cap-abort"));
                }
            };
            med = self.params.ns as u128 * u.len() as u128;
            unions = vec![u];
        } else {
            let mut per = Vec::with_capacity(self.reps);
            for r in 0..self.reps {
                match build_union(r)? {
                    Some(u) => per.push(u),
                    None => {
                        note(notes, "union-cap-abort");
                        return Ok(Step::Abort("union-cap-abort"));
                    }
                }
            }
            let mut sums: Vec<u128> = (0..self.params.nt as usize)
                .map(|j| {
                    per[j * self.params.ns as usize..(j + 1) * self.params.ns as usize]
                        .iter()
                        .map(|s| s.len() as u128)
                        .sum()
                })
                .collect();
            sums.sort_unstable();
            med = sums[(sums.len() - 1) / 2];
            unions = per;
        }
        let target = if med == 0 {
            // All sampled unions were empty; fall back to the floor rho.
            note(notes, "median-zero");
            rho_expo.clone()
        } else {
            let rho_hat = rho_expo.scale(&Rat::new(
                BigInt::from(self.sixteen_n()) * BigInt::from(self.params.ns),
                BigInt::from(med),
            ));
            if cmp_expo(&rho_hat, &rho_expo, kappa) == Ordering::Less {
                rho_hat
            } else {
                rho_expo.clone()
            }
        };
        let pq = match round_down(&target, self.level(q), kappa, n) {
            Ok(p) => p,
            Err(_) => {
                note(notes, "grid-underflow-abort");
                return Ok(Step::Abort("grid-underflow-abort"));
            }
        };
        self.check_monotone(q, &pq, &child_pvals)?;
        let keep = pq.to_expo(n).div(&rho_expo);
        self.check_fraction(q, &keep)?;
        if pq.is_one() {
            // rho = 1, so every child was saturated and the union is the
            // same for all repetitions; keep-all preserves it.
            if !uniform_inputs {
                return Err(EngineError::Invariant(format!(
                    "p(node {q}) is 1 but a child was thinned"
                )));
            }
            if !need_sets {
                return Ok(Step::Done(pq, NodeSets::Skipped));
            }
            let mut it = unions.into_iter();
            let first = it.next().expect("at least one union set");
            return Ok(Step::Done(pq, NodeSets::Uniform(first)));
        }
        if !need_sets {
            // The calibration already fixed the probability; rethinning the
            // unions would only feed a parent or the diagnostics.
            return Ok(Step::Done(pq, NodeSets::Skipped));
        }
        let sampler = KeepSampler::new(&keep, kappa);
        let mut per = Vec::with_capacity(self.reps);
        for r in 0..self.reps {
            let u = if uniform_inputs { &unions[0] } else { &unions[r] };
            let mut rng = substream(self.run_seed, q, r as u32, Phase::Filter);
            let mut out = Vec::new();
            if !sampler.thin_ids(u, &mut rng, self.params.theta, &mut out) {
                return Ok(Step::Abort("theta-abort"));
            }
            per.push(out);
        }
        Ok(Step::Done(pq, NodeSets::PerR(per)))
    }

    /// Stored probabilities never exceed 1 or any child's probability.
    fn check_monotone(&self, q: u32, pq: &PValue, children: &[&PValue]) -> Result<(), EngineError> {
        let n = self.n();
        let kappa = self.kappa();
        let e = pq.to_expo(n);
        if cmp_expo(&e, &Expo::one(), kappa) == Ordering::Greater {
            return Err(EngineError::Invariant(format!("p(node {q}) exceeds 1")));
        }
        for pc in children {
            if cmp_expo(&e, &pc.to_expo(n), kappa) == Ordering::Greater {
                return Err(EngineError::Invariant(format!(
                    "p(node {q}) exceeds a child's probability"
                )));
            }
        }
        Ok(())
    }

    /// Thinning ratios are genuine probabilities.
    fn check_fraction(&self, q: u32, t: &Expo) -> Result<(), EngineError> {
        if cmp_expo(t, &Expo::one(), self.kappa()) == Ordering::Greater {
            return Err(EngineError::Invariant(format!(
                "thinning ratio at node {q} exceeds 1"
            )));
        }
        Ok(())
    }
}

/// The acceptance probability of a node whose materialized support has
/// `size` monomials: min(1, 16n/size).
pub fn height_zero_pvalue(num_vars: u32, size: u64) -> PValue {
    assert!(size >= 1, "valid programs have nonempty supports");
    let sixteen_n = 16 * num_vars as u64;
    if sixteen_n >= size {
        PValue::One
    } else {
        PValue::HeightZero(Rat::new(sixteen_n.into(), size.into()))
    }
}

/// Replays the first `count` keep decisions a run draws for repetition `r`
/// of a height-0 node with `size` support monomials: same substream, same
/// sampler, same order as the engine itself.
pub fn height_zero_keep_prefix(
    params: &Params,
    run_seed: &[u8; 32],
    q: u32,
    r: u32,
    size: u64,
    count: usize,
) -> Vec<bool> {
    let pv = height_zero_pvalue(params.num_vars, size);
    let sampler = KeepSampler::from_pvalue(&pv, &params.kappa, params.num_vars);
    let mut rng = substream(run_seed, q, r, Phase::Offer);
    let mut src = ByteStream::new(&mut rng);
    (0..count).map(|_| sampler.sample_stream(&mut src)).collect()
}

fn required(pvals: &[Option<PValue>], q: u32) -> Result<&PValue, EngineError> {
    pvals[q as usize]
        .as_ref()
        .ok_or_else(|| EngineError::Invariant(format!("node {q} processed before its child")))
}

fn note(notes: &mut Vec<&'static str>, tag: &'static str) {
    if !notes.contains(&tag) {
        notes.push(tag);
    }
}

/// One independent run over an already depth-reduced program whose root
/// support exceeds the cap. `info` must come from `capped_support` with
/// `params.threshold`.
pub fn count_core(
    p: &Program,
    info: &SupportInfo,
    params: &Params,
    run_seed: &[u8; 32],
    want_diag: bool,
) -> Result<RunResult, EngineError> {
    let reps = params.reps()?;
    if params.threshold == 0 {
        return Err(EngineError::BadParams("threshold must be at least 1".into()));
    }
    let len = p.len();
    let ctx = Ctx { info, params, run_seed, reps };
    // Only nodes the root depends on are processed; stray nodes would burn
    // randomness and could even abort a run that never looks at them.
    let reachable = reachable_mask(p);
    let mut pending = vec![0u32; len];
    for q in 0..len {
        if reachable[q] {
            for c in p.children(q as u32) {
                pending[c as usize] += 1;
            }
        }
    }
    pending[p.root as usize] += 1;
    let mut arena = Arena::new();
    let mut oracle = MembershipOracle::new(p);
    let mut member_cache = MemberTable::new(len);
    let mut pvals: Vec<Option<PValue>> = vec![None; len];
    let mut sets: Vec<Option<NodeSets>> = (0..len).map(|_| None).collect();
    let mut notes: Vec<&'static str> = Vec::new();
    let abort = |notes: Vec<&'static str>| RunResult {
        estimate: RunEstimate::Zero,
        aborted: true,
        deviations: notes,
        diag: None,
    };
    for q in 0..len as u32 {
        if !reachable[q as usize] {
            continue;
        }
        // The root's sets are read only by the diagnostics; everything the
        // estimate needs is p(root).
        let need_sets = q != p.root || want_diag;
        let step = if let Some(supp) = info.per_node[q as usize].exact() {
            ctx.height_zero(q, supp, need_sets, &mut arena)
        } else {
            match &p.nodes[q as usize] {
                Node::Input { .. } => {
                    return Err(EngineError::Invariant(
                        "an input's support exceeded the cap".into(),
                    ))
                }
                Node::Times { left, right } => {
                    ctx.times_node(q, *left, *right, &pvals, &sets, need_sets, &mut arena, &mut notes)?
                }
                Node::Plus { children } => ctx.plus_node(
                    q,
                    children,
                    &pvals,
                    &sets,
                    need_sets,
                    &mut arena,
                    &mut oracle,
                    &mut member_cache,
                    &mut notes,
                )?,
            }
        };
        match step {
            Step::Abort(tag) => {
                note(&mut notes, tag);
                return Ok(abort(notes));
            }
            Step::Done(pv, ns) => {
                pvals[q as usize] = Some(pv);
                sets[q as usize] = Some(ns);
                for c in p.children(q) {
                    let slot = &mut pending[c as usize];
                    *slot -= 1;
                    if *slot == 0 {
                        sets[c as usize] = None;
                    }
                }
            }
        }
    }
    let p_root = pvals[p.root as usize]
        .clone()
        .ok_or_else(|| EngineError::Invariant("root was never processed".into()))?;
    let estimate = Expo::from_rat(rat_u64(ctx.sixteen_n())).div(&p_root.to_expo(ctx.n()));
    let diag = if want_diag {
        let root_sets = sets[p.root as usize]
            .as_ref()
            .ok_or_else(|| EngineError::Invariant("root sample sets were freed".into()))?;
        Some(RunDiag {
            root_pvalue: p_root,
            root_set0: root_sets.at(0).iter().map(|&id| arena.get(id).clone()).collect(),
        })
    } else {
        None
    };
    Ok(RunResult { estimate: RunEstimate::Value(estimate), aborted: false, deviations: notes, diag })
}

fn reachable_mask(p: &Program) -> Vec<bool> {
    let mut mask = vec![false; p.len()];
    let mut stack = vec![p.root];
    while let Some(q) = stack.pop() {
        if mask[q as usize] {
            continue;
        }
        mask[q as usize] = true;
        stack.extend(p.children(q));
    }
    mask
}

/// Everything the counter needs besides the program itself.
#[derive(Debug, Clone)]
pub struct CountRequest {
    pub epsilon: Rat,
    pub delta: Rat,
    pub seed: u64,
    pub mode: Mode,
    pub overrides: Overrides,
    /// Worker threads for the runs; None uses the process default. The
    /// output is bit-identical either way.
    pub jobs: Option<usize>,
}

impl CountRequest {
    pub fn new(epsilon: Rat, delta: Rat) -> CountRequest {
        CountRequest {
            epsilon,
            delta,
            seed: 0,
            mode: Mode::Practical,
            overrides: Overrides::default(),
            jobs: None,
        }
    }
}

/// One run's contribution to the report.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub estimate: String,
    pub aborted: bool,
}

/// The counter's full, serializable output.
#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub schema_version: u32,
    /// Decimal estimate of the root's support size; exact integer when
    /// `exact` is set, 24 significant digits otherwise.
    pub estimate: String,
    pub exact: bool,
    pub mode: Mode,
    pub num_vars: u32,
    pub input_size: u64,
    pub reduced_size: u64,
    pub depth: u32,
    pub epsilon: String,
    pub delta: String,
    pub seed: u64,
    pub ns: u64,
    pub nt: u64,
    pub theta: u64,
    pub threshold: u64,
    pub m: u32,
    pub kappa: String,
    pub runs: u32,
    pub runs_aborted: u32,
    pub deviations: Vec<String>,
    pub run_estimates: Vec<RunSummary>,
}

/// Estimates the support size of `p`: validate, reduce depth, materialize
/// supports up to the cap (returning the exact count if the root fits), and
/// otherwise take the lower median of m independent randomized runs.
pub fn counter(p: &Program, req: &CountRequest) -> Result<CountReport, EngineError> {
    let report = p.validate();
    if !report.is_valid() {
        return Err(EngineError::InvalidProgram(report.to_string()));
    }
    let reduced = reduce_depth(p);
    let params = Params::derive(&reduced, &req.epsilon, &req.delta, req.mode, &req.overrides)?;
    let info = capped_support(&reduced, params.threshold);
    let base = |estimate: String, exact: bool| CountReport {
        schema_version: 1,
        estimate,
        exact,
        mode: params.mode,
        num_vars: params.num_vars,
        input_size: p.len() as u64,
        reduced_size: reduced.len() as u64,
        depth: reduced.depth(),
        epsilon: decimal_or_sig(&params.epsilon),
        delta: decimal_or_sig(&params.delta),
        seed: req.seed,
        ns: params.ns,
        nt: params.nt,
        theta: params.theta,
        threshold: params.threshold,
        m: params.m,
        kappa: kappa_label(&params.kappa),
        runs: 0,
        runs_aborted: 0,
        deviations: Vec::new(),
        run_estimates: Vec::new(),
    };
    if let Some(supp) = info.root_exact(&reduced) {
        return Ok(base(supp.len().to_string(), true));
    }
    params.reps()?;
    let seeds = run_seeds(req.seed, params.m as usize);
    let run_one = |i: usize| count_core(&reduced, &info, &params, &seeds[i], false);
    let results: Vec<RunResult> = match req.jobs {
        Some(j) if j >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| EngineError::BadParams(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..params.m as usize).into_par_iter().map(run_one).collect::<Result<_, _>>()
            })?
        }
        _ => (0..params.m as usize).into_par_iter().map(run_one).collect::<Result<_, _>>()?,
    };
    let mut ordered: Vec<&RunEstimate> = results.iter().map(|r| &r.estimate).collect();
    ordered.sort_by(|a, b| cmp_run(a, b, &params.kappa));
    let median = ordered[(ordered.len() - 1) / 2];
    let estimate = match median {
        RunEstimate::Zero => "0".to_string(),
        RunEstimate::Value(e) => e.decimal(&params.kappa, 24),
    };
    let mut deviations: Vec<String> = Vec::new();
    for r in &results {
        for d in &r.deviations {
            if !deviations.iter().any(|x| x == d) {
                deviations.push(d.to_string());
            }
        }
    }
    deviations.sort();
    let mut report = base(estimate, false);
    report.runs = params.m;
    report.runs_aborted = results.iter().filter(|r| r.aborted).count() as u32;
    report.deviations = deviations;
    report.run_estimates = results
        .iter()
        .map(|r| RunSummary {
            estimate: match &r.estimate {
                RunEstimate::Zero => "0".to_string(),
                RunEstimate::Value(e) => e.decimal(&params.kappa, 24),
            },
            aborted: r.aborted,
        })
        .collect();
    Ok(report)
}

/// Orders run estimates with 0 first; ties inside the grid are broken
/// consistently by the exact comparison.
pub fn cmp_run(a: &RunEstimate, b: &RunEstimate, kappa: &Kappa) -> Ordering {
    match (a, b) {
        (RunEstimate::Zero, RunEstimate::Zero) => Ordering::Equal,
        (RunEstimate::Zero, RunEstimate::Value(_)) => Ordering::Less,
        (RunEstimate::Value(_), RunEstimate::Zero) => Ordering::Greater,
        (RunEstimate::Value(x), RunEstimate::Value(y)) => cmp_expo(x, y, kappa),
    }
}

fn kappa_label(k: &Kappa) -> String {
    match k {
        Kappa::Rational(r) => format_sig(r, 24),
        Kappa::LogTwoOver(d) => format!("ln(2)/{d}"),
    }
}

/// Exact decimal when the denominator is 2^a 5^b, else 17 significant digits.
pub(crate) fn decimal_or_sig(r: &Rat) -> String {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two) == BigInt::from(0) {
        den /= &two;
        twos += 1;
    }
    while (&den % &five) == BigInt::from(0) {
        den /= &five;
        fives += 1;
    }
    if den != BigInt::from(1) {
        return format_sig(r, 17);
    }
    let k = twos.max(fives);
    let scaled = r.numer() * BigInt::from(2).pow(k - twos.min(k)) * BigInt::from(5).pow(k - fives.min(k));
    let neg = scaled.is_negative();
    let digits = scaled.magnitude().to_string();
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    if k == 0 {
        s.push_str(&digits);
        return s;
    }
    let k = k as usize;
    if digits.len() > k {
        s.push_str(&digits[..digits.len() - k]);
        s.push('.');
        s.push_str(&digits[digits.len() - k..]);
    } else {
        s.push_str("0.");
        for _ in 0..k - digits.len() {
            s.push('0');
        }
        s.push_str(&digits);
    }
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{demo_program, gen_product_of_pluses, gen_random_program, gen_tower};
    use crate::numeric::rat_frac;
    use crate::oracle;

    fn practical(overrides: Overrides) -> CountRequest {
        let mut req = CountRequest::new(rat_frac(1, 2), rat_frac(1, 2));
        req.overrides = overrides;
        req
    }

    #[test]
    fn params_match_the_formulas() {
        let p = demo_program();
        assert_eq!((p.num_vars, p.len()), (9, 20));
        let params =
            Params::derive(&p, &rat_u64(1), &rat_frac(1, 4), Mode::PaperStrict, &Overrides::default())
                .unwrap();
        assert_eq!(params.kappa, Kappa::Rational(rat_frac(1, 4000)));
        assert_eq!(params.ns, 192_000_000);
        assert_eq!(params.nt, 1440);
        assert_eq!(params.theta, 25_480_396_800_000_000);
        assert_eq!(params.threshold, 57_600);
        assert_eq!(params.m, 23);
        assert!(params.reps().is_err());
    }

    #[test]
    fn symbolic_kappa_sample_count_matches_a_float_check() {
        let p = demo_program();
        // eps = 3 exceeds 4 ln 2, so kappa = ln(2)/1000 symbolically.
        let params =
            Params::derive(&p, &rat_u64(3), &rat_frac(1, 4), Mode::PaperStrict, &Overrides::default())
                .unwrap();
        assert_eq!(params.kappa, Kappa::LogTwoOver(BigInt::from(1000)));
        let v = 12.0 * 1.0e6 / (2f64.ln() * 2f64.ln());
        assert!((v - v.round()).abs() > 1e-3, "float check needs separation");
        assert_eq!(params.ns, v.ceil() as u64);
    }

    #[test]
    fn parameter_validation_rejects_bad_inputs() {
        let p = demo_program();
        let err = |e: &Rat, d: &Rat| {
            Params::derive(&p, e, d, Mode::Practical, &Overrides::default()).unwrap_err()
        };
        assert!(matches!(err(&rat_u64(0), &rat_frac(1, 2)), EngineError::BadParams(_)));
        assert!(matches!(err(&rat_u64(1), &rat_u64(1)), EngineError::BadParams(_)));
        assert!(matches!(err(&rat_u64(1), &rat_u64(0)), EngineError::BadParams(_)));
        let with_ns = Overrides { ns: Some(5), ..Overrides::default() };
        let strict =
            Params::derive(&p, &rat_u64(1), &rat_frac(1, 2), Mode::PaperStrict, &with_ns);
        assert!(matches!(strict.unwrap_err(), EngineError::BadParams(_)));
        let zero_theta = Overrides { theta: Some(0), ..Overrides::default() };
        let z = Params::derive(&p, &rat_u64(1), &rat_frac(1, 2), Mode::Practical, &zero_theta);
        assert!(matches!(z.unwrap_err(), EngineError::BadParams(_)));
    }

    #[test]
    fn small_supports_are_counted_exactly() {
        let report = counter(&demo_program(), &CountRequest::new(rat_frac(1, 2), rat_frac(1, 2)))
            .unwrap();
        assert!(report.exact);
        assert_eq!(report.estimate, "8");
        assert_eq!(report.runs, 0);
        for seed in 0..5 {
            let p = gen_random_program(seed);
            let truth = oracle::support_size(&p, 1 << 20).unwrap();
            let report = counter(&p, &CountRequest::new(rat_frac(1, 2), rat_frac(1, 2))).unwrap();
            assert!(report.exact);
            assert_eq!(report.estimate, truth.to_string());
        }
    }

    #[test]
    fn product_of_two_fans_is_estimated_tightly() {
        // Two 64-way fans over disjoint variables: support 4096. With a tiny
        // materialization cap the run estimates instead of enumerating, and
        // every probability before the root is forced to 1, so the estimate
        // is 16n / roundDown(16n/4096) = 4096 up to one grid step.
        let p = gen_product_of_pluses(64, 2);
        let req = practical(Overrides {
            ns: Some(64),
            nt: Some(3),
            theta: Some(1_000_000),
            threshold: Some(4),
            m: Some(3),
        });
        let report = counter(&p, &req).unwrap();
        assert!(!report.exact);
        assert_eq!(report.runs, 3);
        assert_eq!(report.runs_aborted, 0);
        let est: f64 = report.estimate.parse().unwrap();
        assert!((est - 4096.0).abs() < 41.0, "estimate {est} strays from 4096");
        assert!(report.deviations.iter().any(|d| d == "times-both-one-floor"));
    }

    #[test]
    fn tower_estimate_lands_near_the_truth() {
        let p = gen_tower(0);
        let truth = oracle::support_size(&p, 1 << 20).unwrap() as f64;
        let mut req = practical(Overrides {
            ns: Some(200),
            nt: Some(9),
            theta: Some(1_000_000),
            threshold: Some(4),
            m: Some(9),
        });
        req.seed = 42;
        let report = counter(&p, &req).unwrap();
        assert_eq!(report.runs_aborted, 0);
        let est: f64 = report.estimate.parse().unwrap();
        assert!(
            est > truth * 0.4 && est < truth * 2.5,
            "estimate {est} far from true size {truth}"
        );
    }

    #[test]
    fn reports_are_reproducible_and_thread_count_free() {
        let p = gen_tower(3);
        let mut req = practical(Overrides {
            ns: Some(50),
            nt: Some(5),
            theta: Some(1_000_000),
            threshold: Some(4),
            m: Some(5),
        });
        req.seed = 7;
        let a = counter(&p, &req).unwrap();
        let b = counter(&p, &req).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        req.jobs = Some(1);
        let one = counter(&p, &req).unwrap();
        req.jobs = Some(4);
        let four = counter(&p, &req).unwrap();
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&four).unwrap()
        );
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&one).unwrap());
    }

    #[test]
    fn theta_of_one_aborts_every_run() {
        let p = gen_tower(1);
        let req = practical(Overrides {
            ns: Some(10),
            nt: Some(3),
            theta: Some(1),
            threshold: Some(4),
            m: Some(4),
        });
        let report = counter(&p, &req).unwrap();
        assert_eq!(report.estimate, "0");
        assert_eq!(report.runs_aborted, 4);
        assert!(report.deviations.iter().any(|d| d == "theta-abort"));
    }

    #[test]
    fn decimal_rendering_of_request_parameters() {
        assert_eq!(decimal_or_sig(&rat_frac(1, 10)), "0.1");
        assert_eq!(decimal_or_sig(&rat_frac(1, 4)), "0.25");
        assert_eq!(decimal_or_sig(&rat_u64(3)), "3");
        assert_eq!(decimal_or_sig(&rat_frac(25, 1000)), "0.025");
        // A third does not terminate; it falls back to significant digits.
        assert!(decimal_or_sig(&rat_frac(1, 3)).starts_with("0.33333333333333333"));
    }

    #[test]
    fn invalid_programs_are_rejected_up_front() {
        let mut p = demo_program();
        p.root = p.len() as u32 + 5;
        let err = counter(&p, &CountRequest::new(rat_frac(1, 2), rat_frac(1, 2))).unwrap_err();
        assert!(matches!(err, EngineError::InvalidProgram(_)));
    }
}
