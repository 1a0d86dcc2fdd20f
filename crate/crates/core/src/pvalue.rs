//! Exact symbolic probability values of the form c * exp(kappa * j).
//!
//! The sampling engine keeps every probability in this closed form so that
//! comparisons, floors, and grid rounding are decided exactly: by rational
//! arithmetic when an exact escape applies, and otherwise by certified
//! interval evaluation at escalating precision, which terminates because the
//! compared quantities can only be equal in the escaped cases.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::numeric::{exp2_frac, exp_rat, ln2, rat_u64, Fix, Rat};

/// Hard cap on |kappa * j| in any materialized exponential; the engine
/// rejects programs that would exceed it before sampling starts.
pub const MAX_EXPONENT: u32 = 128;

const PREC_START: u32 = 128;
const PREC_LIMIT: u32 = 1 << 21;

/// The grid constant kappa, kept symbolic in the regime where it contains
/// ln 2 so that powers of two stay exactly representable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kappa {
    /// kappa = eps / (4 (n+1)^3) for a rational accuracy target eps.
    Rational(Rat),
    /// kappa = ln2 / d with d = (n+1)^3; exp(kappa j) = 2^(j/d).
    LogTwoOver(BigInt),
}

impl Kappa {
    /// kappa = min(eps, 4 ln 2) / (4 (n+1)^3). The minimum is decided by an
    /// exact interval comparison; the two sides are never equal because
    /// 4 ln 2 is irrational.
    pub fn derive(epsilon: &Rat, num_vars: u32) -> Kappa {
        assert!(epsilon.is_positive(), "accuracy target must be positive");
        let d = BigInt::from(num_vars + 1).pow(3);
        if rat_lt_four_ln2(epsilon) {
            Kappa::Rational(epsilon / Rat::from(4 * d))
        } else {
            Kappa::LogTwoOver(d)
        }
    }

    /// Whether every exponent magnitude up to `j_abs` is safe to materialize.
    /// Uses the rational over-approximation ln 2 < 3/4 in the symbolic case.
    pub fn exponent_ok(&self, j_abs: i128) -> bool {
        let j = BigInt::from(j_abs);
        match self {
            Kappa::Rational(k) => k * Rat::from(j) <= rat_u64(MAX_EXPONENT as u64),
            Kappa::LogTwoOver(d) => BigInt::from(3u32) * j <= BigInt::from(4 * MAX_EXPONENT) * d,
        }
    }

}

fn rat_lt_four_ln2(r: &Rat) -> bool {
    let mut prec = PREC_START;
    loop {
        let t = ln2(prec).scale_rat(&rat_u64(4)).add(&Fix::from_rat(&-r.clone(), prec));
        if let Some(s) = t.sign() {
            return s == Ordering::Greater;
        }
        prec *= 4;
        assert!(prec <= PREC_LIMIT, "comparison with 4 ln 2 failed to separate");
    }
}

/// A positive real c * exp(kappa * j) with rational c > 0 and integer j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expo {
    pub c: Rat,
    pub j: i128,
}

impl Expo {
    pub fn new(c: Rat, j: i128) -> Expo {
        assert!(c.is_positive(), "coefficient must be positive");
        Expo { c, j }
    }

    pub fn one() -> Expo {
        Expo { c: Rat::one(), j: 0 }
    }

    pub fn from_rat(c: Rat) -> Expo {
        Expo::new(c, 0)
    }

    pub fn mul(&self, o: &Expo) -> Expo {
        Expo::new(&self.c * &o.c, self.j.checked_add(o.j).expect("exponent overflow"))
    }

    pub fn div(&self, o: &Expo) -> Expo {
        Expo::new(&self.c / &o.c, self.j.checked_sub(o.j).expect("exponent overflow"))
    }

    pub fn scale(&self, r: &Rat) -> Expo {
        Expo::new(&self.c * r, self.j)
    }

    /// An enclosing interval for the value, tight to roughly `prec` bits.
    pub fn value_fix(&self, kappa: &Kappa, prec: u32) -> Fix {
        if self.j == 0 {
            return Fix::from_rat(&self.c, prec);
        }
        match kappa {
            Kappa::Rational(k) => {
                let y = k * Rat::from(BigInt::from(self.j));
                exp_rat(&y, prec + 64).scale_rat(&self.c).with_prec(prec)
            }
            Kappa::LogTwoOver(d) => {
                // c * 2^(j/d) = (c * 2^q) * 2^f with f in [0, 1).
                let (q, r) = BigInt::from(self.j).div_mod_floor(d);
                let scale = &self.c * two_pow(&q);
                let f = Rat::new(r, d.clone());
                if f.is_zero() {
                    return Fix::from_rat(&scale, prec);
                }
                exp2_frac(&f, prec + 64).scale_rat(&scale).with_prec(prec)
            }
        }
    }

    /// Exact rational value when one is known: j = 0, or the symbolic regime
    /// with d dividing j.
    fn exact_rat(&self, kappa: &Kappa) -> Option<Rat> {
        if self.j == 0 {
            return Some(self.c.clone());
        }
        if let Kappa::LogTwoOver(d) = kappa {
            let (q, r) = BigInt::from(self.j).div_mod_floor(d);
            if r.is_zero() {
                return Some(&self.c * two_pow(&q));
            }
        }
        None
    }

    /// Decimal rendering for reports, accurate to `sig` significant digits.
    pub fn decimal(&self, kappa: &Kappa, sig: usize) -> String {
        if let Some(r) = self.exact_rat(kappa) {
            return crate::numeric::format_sig(&r, sig);
        }
        let f = self.value_fix(kappa, 64 + 8 * sig as u32);
        crate::numeric::format_sig(&f.mid_rat(), sig)
    }
}

fn two_pow(e: &BigInt) -> Rat {
    let mag = e.magnitude().to_usize().expect("power of two exponent too large");
    assert!(mag <= 4096, "power of two exponent too large");
    let big = BigInt::one() << mag;
    if e.is_negative() {
        Rat::new(BigInt::one(), big)
    } else {
        Rat::from(big)
    }
}

/// Total order on expo values. Exact escapes: equal exponents, equal
/// coefficients, and exactly-rational values; otherwise interval separation,
/// which must terminate because equality is impossible outside the escapes.
pub fn cmp_expo(a: &Expo, b: &Expo, kappa: &Kappa) -> Ordering {
    if a.j == b.j {
        return a.c.cmp(&b.c);
    }
    if a.c == b.c {
        return a.j.cmp(&b.j);
    }
    match (a.exact_rat(kappa), b.exact_rat(kappa)) {
        (Some(ra), Some(rb)) => return ra.cmp(&rb),
        _ => {
            // Ratio escape: a/b may be exactly rational even when neither
            // side is, namely when d divides the exponent difference.
            let ratio = a.div(b);
            if let Some(r) = ratio.exact_rat(kappa) {
                return r.cmp(&Rat::one());
            }
        }
    }
    let mut prec = PREC_START;
    loop {
        let va = a.value_fix(kappa, prec);
        let vb = b.value_fix(kappa, prec);
        let diff = va.add(&vb.scale_rat(&-Rat::one()));
        if let Some(s) = diff.sign() {
            return s;
        }
        prec *= 4;
        assert!(prec <= PREC_LIMIT, "expo comparison failed to separate");
    }
}

/// Largest integer <= x.
pub fn floor_expo(x: &Expo, kappa: &Kappa) -> BigInt {
    if let Some(r) = x.exact_rat(kappa) {
        return r.floor().to_integer();
    }
    let mut prec = PREC_START;
    loop {
        if let Some(f) = x.value_fix(kappa, prec).floor_unique() {
            return f;
        }
        prec *= 4;
        assert!(prec <= PREC_LIMIT, "expo floor failed to separate");
    }
}

/// Smallest integer >= x.
pub fn ceil_expo(x: &Expo, kappa: &Kappa) -> BigInt {
    if let Some(r) = x.exact_rat(kappa) {
        return r.ceil().to_integer();
    }
    // Not exactly rational, hence not an integer.
    floor_expo(x, kappa) + 1
}

/// Smallest integer > x (handles integer x exactly).
pub fn least_int_greater(x: &Expo, kappa: &Kappa) -> BigInt {
    floor_expo(x, kappa) + 1
}

/// A stored probability: 1, an exact rational from a materialized support, or
/// a grid value 16n exp(+-kappa 2^level) / ell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PValue {
    One,
    HeightZero(Rat),
    Form { negative: bool, level: u32, ell: BigInt },
}

impl PValue {
    pub fn is_one(&self) -> bool {
        matches!(self, PValue::One)
    }

    pub fn to_expo(&self, num_vars: u32) -> Expo {
        match self {
            PValue::One => Expo::one(),
            PValue::HeightZero(r) => Expo::new(r.clone(), 0),
            PValue::Form { negative, level, ell } => {
                assert!(*level < 100, "grid level out of range");
                let c = Rat::new(BigInt::from(16u64 * num_vars as u64), ell.clone());
                let j = 1i128 << level;
                Expo::new(c, if *negative { -j } else { j })
            }
        }
    }

    pub fn decimal(&self, kappa: &Kappa, num_vars: u32, sig: usize) -> String {
        self.to_expo(num_vars).decimal(kappa, sig)
    }
}

/// Exact Bernoulli sampling of "keep with probability t" for an expo value
/// t in (0, 1]. The fast path compares one 128-bit draw against a window
/// precomputed from a certified enclosure of t; a draw landing inside the
/// enclosure gap (probability about 2^-120) is resolved exactly by extending
/// the draw and tightening the enclosure, so the keep probability is exactly
/// t, not a rounding of it.
#[derive(Debug, Clone)]
pub struct KeepSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Always,
    Window { keep_below: u128, drop_at: Option<u128>, t: Expo, kappa: Kappa },
}

impl KeepSampler {
    pub fn new(t: &Expo, kappa: &Kappa) -> KeepSampler {
        match cmp_expo(t, &Expo::one(), kappa) {
            Ordering::Greater => panic!("keep probability above one"),
            Ordering::Equal => KeepSampler { kind: SamplerKind::Always },
            Ordering::Less => {
                // Enclosure at 127 bits; doubling rescales it to the 128-bit
                // draw domain with one spare bit, so 2*lo always fits.
                let f = t.value_fix(kappa, 127);
                let lo = f.lo.max(BigInt::zero());
                let keep_below = (lo << 1u32).to_u128().expect("window overflow");
                let drop_at = (f.hi << 1u32).to_u128();
                KeepSampler {
                    kind: SamplerKind::Window { keep_below, drop_at, t: t.clone(), kappa: kappa.clone() },
                }
            }
        }
    }

    pub fn from_pvalue(p: &PValue, kappa: &Kappa, num_vars: u32) -> KeepSampler {
        KeepSampler::new(&p.to_expo(num_vars), kappa)
    }

    pub fn is_always(&self) -> bool {
        matches!(self.kind, SamplerKind::Always)
    }

    /// One Bernoulli trial. Probability-one samplers consume no randomness;
    /// all others consume one 64-bit word almost surely, extending the draw
    /// only while its dyadic interval straddles a decision boundary.
    pub fn sample(&self, rng: &mut impl rand::RngCore) -> bool {
        match &self.kind {
            SamplerKind::Always => true,
            SamplerKind::Window { keep_below, drop_at, t, kappa } => {
                let hi = rng.next_u64();
                if hi < (*keep_below >> 64) as u64 {
                    return true;
                }
                if drop_at.is_some_and(|d| hi > (d >> 64) as u64) {
                    return false;
                }
                let x = ((hi as u128) << 64) | rng.next_u64() as u128;
                if x < *keep_below {
                    true
                } else if drop_at.is_some_and(|d| x >= d) {
                    false
                } else {
                    resolve_boundary(x, t, kappa, rng)
                }
            }
        }
    }

    /// One Bernoulli trial off a byte stream: a single byte decides almost
    /// surely, widening byte by byte only while the draw's dyadic interval
    /// straddles the window. Exactly the draw `thin_ids` makes per element.
    pub fn sample_stream<R: rand::RngCore>(&self, src: &mut ByteStream<'_, R>) -> bool {
        match &self.kind {
            SamplerKind::Always => true,
            SamplerKind::Window { keep_below, drop_at, t, kappa } => {
                let b = src.byte() as u128;
                if b < (*keep_below >> 120) {
                    return true;
                }
                if drop_at.is_some_and(|d| b >= ceil_shift(d, 120)) {
                    return false;
                }
                widen_stream(b, 8, *keep_below, *drop_at, t, kappa, src)
            }
        }
    }

    /// Thin a slice by one Bernoulli trial per element, appending kept ids
    /// to `out`; the draw sequence matches calling `sample_stream` once per
    /// id on one stream. Returns false as soon as `out` reaches `cap`.
    pub fn thin_ids(
        &self,
        ids: &[u32],
        rng: &mut impl rand::RngCore,
        cap: u64,
        out: &mut Vec<u32>,
    ) -> bool {
        match &self.kind {
            SamplerKind::Always => {
                for &id in ids {
                    out.push(id);
                    if out.len() as u64 >= cap {
                        return false;
                    }
                }
                true
            }
            SamplerKind::Window { keep_below, drop_at, t, kappa } => {
                let kb = *keep_below;
                let kb8 = (kb >> 120) as u32;
                // A missing window top can never drop on a prefix; the
                // unreachable sentinel encodes that (bytes stay below 256).
                let da8 = drop_at.map_or(u32::MAX, |d| ceil_shift(d, 120) as u32);
                let mut src = ByteStream::new(rng);
                for &id in ids {
                    let b = src.byte() as u32;
                    let keep = if b < kb8 {
                        true
                    } else if b >= da8 {
                        false
                    } else {
                        widen_stream(b as u128, 8, kb, *drop_at, t, kappa, &mut src)
                    };
                    if keep {
                        out.push(id);
                        if out.len() as u64 >= cap {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

/// Byte-granular reader over a word RNG: bytes come little-endian out of
/// each 64-bit word, words in stream order. Independent streams never share
/// a reader, so partial words at the end of a loop are simply dropped.
pub struct ByteStream<'r, R: rand::RngCore> {
    rng: &'r mut R,
    buf: u64,
    left: u32,
}

impl<'r, R: rand::RngCore> ByteStream<'r, R> {
    pub fn new(rng: &'r mut R) -> ByteStream<'r, R> {
        ByteStream { rng, buf: 0, left: 0 }
    }

    #[inline]
    pub fn byte(&mut self) -> u8 {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 8;
        }
        let b = self.buf as u8;
        self.buf >>= 8;
        self.left -= 1;
        b
    }
}

/// Smallest y with y * 2^s >= d.
#[inline]
fn ceil_shift(d: u128, s: u32) -> u128 {
    (d >> s) + u128::from(d & ((1u128 << s) - 1) != 0)
}

/// Continues a prefix draw of `bits` bits against the window [kb, da):
/// a prefix x means U lies in [x, x+1) / 2^bits, so widen a byte at a time
/// until that interval clears one side of the window.
fn widen_stream<R: rand::RngCore>(
    mut x: u128,
    mut bits: u32,
    kb: u128,
    da: Option<u128>,
    t: &Expo,
    kappa: &Kappa,
    src: &mut ByteStream<'_, R>,
) -> bool {
    while bits < 128 {
        x = (x << 8) | src.byte() as u128;
        bits += 8;
        let s = 128 - bits;
        if x < (kb >> s) {
            return true;
        }
        if da.is_some_and(|d| x >= ceil_shift(d, s)) {
            return false;
        }
    }
    // x is now a full 128-bit draw sitting inside the window.
    resolve_boundary_stream(x, t, kappa, src)
}

/// Byte-stream variant of `resolve_boundary`: same scheme, with the draw
/// extended eight bits at a time.
fn resolve_boundary_stream<R: rand::RngCore>(
    x: u128,
    t: &Expo,
    kappa: &Kappa,
    src: &mut ByteStream<'_, R>,
) -> bool {
    let mut x = BigInt::from(x);
    let mut bits: u32 = 128;
    loop {
        let prec = bits + 16;
        let f = t.value_fix(kappa, prec);
        let shift = prec - bits;
        let xs = &x << shift;
        if &xs + (BigInt::one() << shift) <= f.lo {
            return true;
        }
        if xs >= f.hi {
            return false;
        }
        x = (x << 8) | BigInt::from(src.byte());
        bits += 8;
        assert!(bits <= 4096, "boundary draw failed to resolve");
    }
}

/// Decides "uniform U < t" exactly when the first 128 draw bits x leave it
/// open: U lies in [x, x+1) / 2^128, so keep extending the draw until the
/// dyadic interval for U separates from an enclosure of t.
fn resolve_boundary(x: u128, t: &Expo, kappa: &Kappa, rng: &mut impl rand::RngCore) -> bool {
    let mut x = BigInt::from(x);
    let mut bits: u32 = 128;
    loop {
        let prec = bits + 16;
        let f = t.value_fix(kappa, prec);
        let shift = prec - bits;
        let xs = &x << shift;
        if &xs + (BigInt::one() << shift) <= f.lo {
            return true;
        }
        if xs >= f.hi {
            return false;
        }
        x = (x << 64) | BigInt::from(rng.next_u64());
        bits += 64;
        assert!(bits <= 4096, "boundary draw failed to resolve");
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("no acceptable value at level {level} lies at or below the requested probability")]
    Underflow { level: u32 },
}

/// Rounds v in (0, 1] down onto the acceptable grid for a node of effective
/// height `level`: the largest value among 1 and 16n exp(+-kappa 2^level)/ell
/// with 1 <= ell <= 2^n that is <= v (grid values additionally < 1).
pub fn round_down(
    v: &Expo,
    level: u32,
    kappa: &Kappa,
    num_vars: u32,
) -> Result<PValue, GridError> {
    assert!(level >= 1, "grid levels start at effective height 1");
    assert!(level < 100, "grid level out of range");
    if cmp_expo(v, &Expo::one(), kappa) != Ordering::Less {
        return Ok(PValue::One);
    }
    let ell_max = BigInt::one() << num_vars;
    let sixteen_n = rat_u64(16 * num_vars as u64);
    let mut best: Option<(PValue, Expo)> = None;
    for negative in [false, true] {
        let j = {
            let m = 1i128 << level;
            if negative {
                -m
            } else {
                m
            }
        };
        let e = Expo::new(sixteen_n.clone(), j);
        // Smallest ell making the grid value both <= v and < 1.
        let from_v = ceil_expo(&e.div(v), kappa);
        let from_one = least_int_greater(&e, kappa);
        let ell = from_v.max(from_one).max(BigInt::one());
        if ell > ell_max {
            continue;
        }
        let value = e.scale(&Rat::new(BigInt::one(), ell.clone()));
        debug_assert_eq!(cmp_expo(&value, v, kappa).max(Ordering::Equal), Ordering::Equal);
        let candidate = PValue::Form { negative, level, ell };
        best = match best {
            None => Some((candidate, value)),
            Some((bp, bv)) => {
                if cmp_expo(&value, &bv, kappa) == Ordering::Greater {
                    Some((candidate, value))
                } else {
                    Some((bp, bv))
                }
            }
        };
    }
    match best {
        Some((p, _)) => Ok(p),
        None => Err(GridError::Underflow { level }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat_frac;

    fn rational_kappa() -> Kappa {
        // eps = 1, n = 9: kappa = 1/4000.
        Kappa::derive(&rat_u64(1), 9)
    }

    #[test]
    fn kappa_regimes() {
        assert_eq!(rational_kappa(), Kappa::Rational(rat_frac(1, 4000)));
        // eps = 3 exceeds 4 ln 2 ~ 2.77.
        assert_eq!(Kappa::derive(&rat_u64(3), 9), Kappa::LogTwoOver(BigInt::from(1000)));
        // eps = 2.772 < 2.77258...; eps = 2.7726 > that.
        assert!(matches!(Kappa::derive(&rat_frac(2772, 1000), 9), Kappa::Rational(_)));
        assert!(matches!(Kappa::derive(&rat_frac(27726, 10000), 9), Kappa::LogTwoOver(_)));
    }

    #[test]
    fn comparison_exact_escapes() {
        let k = rational_kappa();
        // Same exponent: rational order.
        assert_eq!(
            cmp_expo(&Expo::new(rat_frac(1, 3), 5), &Expo::new(rat_frac(1, 2), 5), &k),
            Ordering::Less
        );
        // Same coefficient: exponent order.
        assert_eq!(
            cmp_expo(&Expo::new(rat_u64(5), 3), &Expo::new(rat_u64(5), 1), &k),
            Ordering::Greater
        );
        // Symbolic regime with divisible exponent difference: exact equality.
        let k2 = Kappa::LogTwoOver(BigInt::from(8));
        assert_eq!(
            cmp_expo(&Expo::new(rat_u64(1), 8), &Expo::new(rat_u64(2), 0), &k2),
            Ordering::Equal
        );
        assert_eq!(
            cmp_expo(&Expo::new(rat_u64(1), 16), &Expo::new(rat_u64(4), 0), &k2),
            Ordering::Equal
        );
    }

    #[test]
    fn comparison_interval_path() {
        let k = rational_kappa();
        // exp(4000 * kappa) = e against rationals bracketing e.
        let e1 = Expo::new(rat_u64(1), 4000);
        assert_eq!(cmp_expo(&e1, &Expo::from_rat(rat_frac(2718281828, 1_000_000_000)), &k), Ordering::Greater);
        assert_eq!(cmp_expo(&e1, &Expo::from_rat(rat_frac(2718281829, 1_000_000_000)), &k), Ordering::Less);
    }

    #[test]
    fn floors_and_ceilings() {
        let k = rational_kappa();
        // 3 e^(1/2) = 4.946...
        let x = Expo::new(rat_u64(3), 2000);
        assert_eq!(floor_expo(&x, &k), BigInt::from(4));
        assert_eq!(ceil_expo(&x, &k), BigInt::from(5));
        assert_eq!(least_int_greater(&x, &k), BigInt::from(5));
        // Symbolic regime: 3/2 * 2^(12/8) = 4.2426..., and exactly 6 at j=16.
        let k2 = Kappa::LogTwoOver(BigInt::from(8));
        let y = Expo::new(rat_frac(3, 2), 12);
        assert_eq!(floor_expo(&y, &k2), BigInt::from(4));
        assert_eq!(ceil_expo(&y, &k2), BigInt::from(5));
        let z = Expo::new(rat_frac(3, 2), 16);
        assert_eq!(floor_expo(&z, &k2), BigInt::from(6));
        assert_eq!(ceil_expo(&z, &k2), BigInt::from(6));
        assert_eq!(least_int_greater(&z, &k2), BigInt::from(7));
    }

    #[test]
    fn round_down_picks_best_family() {
        let k = rational_kappa();
        let n = 9;
        // v = 1/2 at level 1: the negative family wins with ell = 288.
        let v = Expo::from_rat(rat_frac(1, 2));
        match round_down(&v, 1, &k, n).unwrap() {
            PValue::Form { negative, level, ell } => {
                assert!(negative);
                assert_eq!(level, 1);
                assert_eq!(ell, BigInt::from(288));
            }
            other => panic!("expected a grid value, got {other:?}"),
        }
        // Values at or above one round to one.
        assert_eq!(round_down(&Expo::from_rat(rat_u64(2)), 1, &k, n).unwrap(), PValue::One);
        assert_eq!(round_down(&Expo::one(), 1, &k, n).unwrap(), PValue::One);
    }

    #[test]
    fn round_down_result_is_at_most_v_and_maximal() {
        let k = rational_kappa();
        let n = 9;
        for (num, den) in [(1u64, 2u64), (1, 3), (9, 10), (143, 144), (2, 7), (3, 10)] {
            let v = Expo::from_rat(rat_frac(num, den));
            let p = round_down(&v, 1, &k, n).unwrap();
            let pe = p.to_expo(n);
            assert_ne!(cmp_expo(&pe, &v, &k), Ordering::Greater, "{num}/{den}");
            // Bumping ell down by one must overshoot v or leave the grid.
            if let PValue::Form { negative, level, ell } = p {
                if ell > BigInt::one() {
                    let bigger =
                        PValue::Form { negative, level, ell: ell - 1 }.to_expo(n);
                    let fits = cmp_expo(&bigger, &v, &k) != Ordering::Greater
                        && cmp_expo(&bigger, &Expo::one(), &k) == Ordering::Less;
                    assert!(!fits, "{num}/{den}: rounded value was not maximal");
                }
            }
        }
    }

    #[test]
    fn round_down_underflows_below_grid() {
        let k = rational_kappa();
        // Smallest level-1 grid value is about 16*9*e^(-kappa*2)/2^9 = 0.28;
        // far below that there is nothing to round to.
        let v = Expo::from_rat(rat_frac(1, 1_000_000));
        assert_eq!(round_down(&v, 1, &k, 9), Err(GridError::Underflow { level: 1 }));
    }

    #[test]
    fn exponent_guard() {
        let k = rational_kappa();
        assert!(k.exponent_ok(4000 * 128));
        assert!(!k.exponent_ok(4000 * 129));
        let k2 = Kappa::LogTwoOver(BigInt::from(1000));
        assert!(k2.exponent_ok(128_000));
        assert!(!k2.exponent_ok(200_000));
    }

    #[test]
    fn sampler_frequencies_track_probabilities() {
        use rand::RngCore;
        let k = rational_kappa();
        let seed = crate::rng::run_seeds(11, 1)[0];
        // Probability one: always keeps, consumes nothing.
        let one = KeepSampler::new(&Expo::one(), &k);
        let mut r = crate::rng::substream(&seed, 0, 0, crate::rng::Phase::Filter);
        let before = crate::rng::substream(&seed, 0, 0, crate::rng::Phase::Filter).next_u64();
        assert!(one.sample(&mut r));
        assert_eq!(r.next_u64(), before);
        // Rational and irrational targets: 20000 draws each, loose 3-sigma band.
        for (t, expect) in [
            (Expo::from_rat(rat_frac(1, 4)), 0.25),
            (Expo::new(rat_frac(1, 2), -2000), 0.5f64 * (-0.5f64).exp()),
        ] {
            let s = KeepSampler::new(&t, &k);
            let mut r = crate::rng::substream(&seed, 1, 0, crate::rng::Phase::Offer);
            let n = 20_000;
            let hits = (0..n).filter(|_| s.sample(&mut r)).count();
            let freq = hits as f64 / n as f64;
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((freq - expect).abs() < 3.5 * sigma, "freq {freq} vs {expect}");
        }
    }

    #[test]
    fn sampler_boundary_draws_resolve_exactly() {
        struct Fixed(Vec<u64>, usize);
        impl rand::RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                let v = self.0[self.1];
                self.1 += 1;
                v
            }
            fn fill_bytes(&mut self, _d: &mut [u8]) {
                unimplemented!()
            }
            fn try_fill_bytes(&mut self, _d: &mut [u8]) -> Result<(), rand::Error> {
                unimplemented!()
            }
        }
        let k = rational_kappa();
        let s = KeepSampler::new(&Expo::from_rat(rat_frac(1, 3)), &k);
        // The 127-bit enclosure of 1/3 has a two-draw gap starting at 2*lo.
        let lo = ((1u128 << 127) - 2) / 3;
        let certain_keep = 2 * lo;
        let gap = 2 * lo + 1;
        let split = |x: u128| vec![(x >> 64) as u64, x as u64];
        // In-gap draw: the next word decides, 0 keeps and all-ones drops.
        let mut words = split(gap);
        words.push(0);
        assert!(s.sample(&mut Fixed(words, 0)));
        let mut words = split(gap);
        words.push(u64::MAX);
        assert!(!s.sample(&mut Fixed(words, 0)));
        // One below the gap keeps without extra words.
        assert!(s.sample(&mut Fixed(split(certain_keep), 0)));
        // At the gap's upper edge the window rejects outright.
        assert!(!s.sample(&mut Fixed(split(2 * lo + 2), 0)));
    }

    #[test]
    fn byte_draws_decide_exactly_like_the_window() {
        use num_bigint::Sign;
        use rand::RngCore;
        struct Tape(Vec<u8>, usize);
        impl rand::RngCore for Tape {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                let mut w = [0u8; 8];
                w.copy_from_slice(&self.0[self.1..self.1 + 8]);
                self.1 += 8;
                u64::from_le_bytes(w)
            }
            fn fill_bytes(&mut self, _d: &mut [u8]) {
                unimplemented!()
            }
            fn try_fill_bytes(&mut self, _d: &mut [u8]) -> Result<(), rand::Error> {
                unimplemented!()
            }
        }
        let k = rational_kappa();
        let cases = vec![
            Expo::from_rat(rat_frac(1, 3)),
            Expo::from_rat(rat_frac(1, 1024)),
            Expo::from_rat(rat_frac(1023, 1024)),
            Expo::new(rat_frac(1, 2), -2000),
            Expo::new(rat_frac(320, 1536), 4),
        ];
        let seed = crate::rng::run_seeds(3, 1)[0];
        let mut rng = crate::rng::substream(&seed, 0, 0, crate::rng::Phase::Offer);
        for t in &cases {
            let s = KeepSampler::new(t, &k);
            let kb = match &s.kind {
                SamplerKind::Window { keep_below, .. } => *keep_below,
                SamplerKind::Always => panic!("cases are strictly below one"),
            };
            let prec = 4096u32;
            let f = t.value_fix(&k, prec);
            let mut undecided = 0;
            for case in 0..600 {
                let mut tape = vec![0u8; 512];
                rng.fill_bytes(&mut tape);
                // Odd cases copy a prefix of the window bound onto the tape
                // so the draw starts out straddling and must widen.
                if case % 2 == 1 {
                    let depth = 1 + case % 6;
                    tape[..depth].copy_from_slice(&kb.to_be_bytes()[..depth]);
                }
                let mut src_rng = Tape(tape.clone(), 0);
                let mut src = ByteStream::new(&mut src_rng);
                let got = s.sample_stream(&mut src);
                // Reference: the whole tape read as one binary expansion,
                // decided against a 4096-bit enclosure of t.
                let u = num_bigint::BigInt::from_bytes_be(Sign::Plus, &tape);
                if &u + BigInt::one() <= f.lo {
                    assert!(got, "tape below the window was dropped");
                } else if u >= f.hi {
                    assert!(!got, "tape above the window was kept");
                } else {
                    undecided += 1;
                }
            }
            assert!(undecided <= 1, "window enclosure too wide for the test");
        }
    }

    #[test]
    fn slice_thinning_matches_per_element_draws() {
        let k = rational_kappa();
        let t = Expo::from_rat(rat_frac(5, 16));
        let s = KeepSampler::new(&t, &k);
        let seed = crate::rng::run_seeds(9, 1)[0];
        let ids: Vec<u32> = (0..500).collect();
        let mut r1 = crate::rng::substream(&seed, 7, 3, crate::rng::Phase::Filter);
        let mut out = Vec::new();
        assert!(s.thin_ids(&ids, &mut r1, u64::MAX, &mut out));
        let mut r2 = crate::rng::substream(&seed, 7, 3, crate::rng::Phase::Filter);
        let mut src = ByteStream::new(&mut r2);
        let manual: Vec<u32> =
            ids.iter().copied().filter(|_| s.sample_stream(&mut src)).collect();
        assert_eq!(out, manual);
        assert!(out.len() > 100 && out.len() < 220, "kept {} of 500", out.len());
    }

    #[test]
    fn decimal_rendering() {
        let k = rational_kappa();
        let x = Expo::new(rat_u64(1), 4000);
        let s = x.decimal(&k, 12);
        assert!(s.starts_with("2.7182818284"), "{s}");
        assert_eq!(Expo::from_rat(rat_frac(1, 4)).decimal(&k, 12), "0.25");
        assert_eq!(
            PValue::Form { negative: false, level: 1, ell: BigInt::from(288) }
                .to_expo(9)
                .decimal(&k, 6),
            "0.50025"
        );
    }
}
