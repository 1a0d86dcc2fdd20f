//! Exact rational and certified interval arithmetic.
//!
//! All randomized-engine decisions (comparisons, floors, grid rounding) are
//! made either on exact rationals or on dyadic intervals that are certified
//! to contain the true real value. Interval widths only ever err outward, so
//! escalating the working precision decides every comparison whose operands
//! are not equal; equality cases are recognized symbolically beforehand.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;

pub type Rat = BigRational;

/// Builds a rational from a u64.
pub fn rat_u64(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Builds a rational from a numerator/denominator pair of u64s.
pub fn rat_frac(num: u64, den: u64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecimalError {
    #[error("empty decimal literal")]
    Empty,
    #[error("invalid decimal literal {0:?}")]
    Invalid(String),
}

/// Parses a decimal literal such as `0.25`, `-3`, or `1.5e-2` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rat, DecimalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(DecimalError::Empty);
    }
    let bad = || DecimalError::Invalid(s.to_string());
    let (mantissa, exp_part) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(i) => (&digits[..i], &digits[i + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut num: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let mut den = BigInt::one();
    for c in frac_part.chars() {
        num = num * 10 + (c as u8 - b'0');
        den *= 10;
    }
    if sign < 0 {
        num = -num;
    }
    let mut r = Rat::new(num, den);
    if let Some(e) = exp_part {
        let e: i32 = e.parse().map_err(|_| bad())?;
        let ten = Rat::from_integer(BigInt::from(10));
        if e >= 0 {
            for _ in 0..e {
                r *= ten.clone();
            }
        } else {
            for _ in 0..-e {
                r /= ten.clone();
            }
        }
    }
    Ok(r)
}

/// Formats a rational as a plain decimal string with up to `sig` significant digits.
///
/// Terminating decimals shorter than `sig` digits print exactly; anything else
/// is rounded half away from zero at the `sig`-th significant digit. The
/// output is deterministic and never uses exponent notation.
pub fn format_sig(r: &Rat, sig: usize) -> String {
    assert!(sig > 0);
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let num = a.numer().clone();
    let den = a.denom().clone();
    // Count digits of the integer part.
    let int_part: BigInt = &num / &den;
    let int_digits = if int_part.is_zero() { 0 } else { int_part.to_string().len() };
    let ten = BigInt::from(10);
    if int_digits > sig {
        // Round away the excess integer digits, then pad with zeros.
        let drop = int_digits - sig;
        let den2 = &den * ten.pow(drop as u32);
        let (q, rem) = num.div_rem(&den2);
        let mut scaled = q;
        if &rem * 2 >= den2 {
            scaled += 1;
        }
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&scaled.to_string());
        out.push_str(&"0".repeat(drop));
        return out;
    }
    // frac_digits: how many digits after the point we keep.
    let frac_digits = if int_digits >= sig {
        0
    } else {
        // Find leading zeros when the value is < 1.
        let mut lead = 0usize;
        if int_part.is_zero() {
            let mut x = num.clone() * &ten;
            while &x / &den == BigInt::zero() {
                lead += 1;
                x *= &ten;
            }
        }
        sig - int_digits + lead
    };
    let scale = ten.pow(frac_digits as u32);
    // Round half away from zero on num*scale/den.
    let scaled_num = &num * &scale;
    let (q, rem) = scaled_num.div_rem(&den);
    let mut scaled = q;
    if &rem * 2 >= den {
        scaled += 1;
    }
    let s = scaled.to_string();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if frac_digits == 0 {
        out.push_str(&s);
    } else if s.len() > frac_digits {
        let (i, f) = s.split_at(s.len() - frac_digits);
        let f = f.trim_end_matches('0');
        out.push_str(i);
        if !f.is_empty() {
            out.push('.');
            out.push_str(f);
        }
    } else {
        let f = format!("{}{}", "0".repeat(frac_digits - s.len()), s);
        let f = f.trim_end_matches('0');
        if f.is_empty() {
            out.push('0');
        } else {
            out.push_str("0.");
            out.push_str(f);
        }
    }
    out
}

/// A dyadic interval `[lo, hi] * 2^-prec` certified to contain a real value.
#[derive(Debug, Clone)]
pub struct Fix {
    pub lo: BigInt,
    pub hi: BigInt,
    pub prec: u32,
}

impl Fix {
    pub fn exact_zero(prec: u32) -> Self {
        Fix { lo: BigInt::zero(), hi: BigInt::zero(), prec }
    }

    /// Encloses an exact rational at the given precision.
    pub fn from_rat(r: &Rat, prec: u32) -> Self {
        let scaled_num = r.numer() << prec;
        let lo = scaled_num.div_floor(r.denom());
        let hi = scaled_num.div_ceil(r.denom());
        Fix { lo, hi, prec }
    }

    pub fn add(&self, o: &Fix) -> Fix {
        assert_eq!(self.prec, o.prec);
        Fix { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi, prec: self.prec }
    }

    pub fn neg(&self) -> Fix {
        Fix { lo: -self.hi.clone(), hi: -self.lo.clone(), prec: self.prec }
    }

    pub fn mul(&self, o: &Fix) -> Fix {
        assert_eq!(self.prec, o.prec);
        let cands = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Fix { lo: shr_floor(&lo, self.prec), hi: shr_ceil(&hi, self.prec), prec: self.prec }
    }

    /// Multiplies by an exact rational with outward rounding.
    pub fn scale_rat(&self, r: &Rat) -> Fix {
        let a = mul_rat_dir(&self.lo, r, false);
        let b = mul_rat_dir(&self.lo, r, true);
        let c = mul_rat_dir(&self.hi, r, false);
        let d = mul_rat_dir(&self.hi, r, true);
        let lo = [&a, &b, &c, &d].into_iter().min().unwrap().clone();
        let hi = [a.clone(), b, c, d].into_iter().max().unwrap();
        Fix { lo, hi, prec: self.prec }
    }

    /// Converts to a coarser or finer precision, rounding outward.
    pub fn with_prec(&self, prec: u32) -> Fix {
        if prec == self.prec {
            return self.clone();
        }
        if prec > self.prec {
            let shift = prec - self.prec;
            Fix { lo: &self.lo << shift, hi: &self.hi << shift, prec }
        } else {
            let shift = self.prec - prec;
            Fix { lo: shr_floor(&self.lo, shift), hi: shr_ceil(&self.hi, shift), prec }
        }
    }

    /// Widens the upper bound by `ulps` units in the last place.
    pub fn widen_hi(&mut self, ulps: u64) {
        self.hi += BigInt::from(ulps);
    }

    /// Sign of the enclosed value versus zero, when decided.
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo.is_positive() {
            Some(Ordering::Greater)
        } else if self.hi.is_negative() {
            Some(Ordering::Less)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// The floor of the enclosed value, when the interval pins it down.
    pub fn floor_unique(&self) -> Option<BigInt> {
        let f_lo = shr_floor(&self.lo, self.prec);
        let f_hi = shr_floor(&self.hi, self.prec);
        if f_lo == f_hi {
            Some(f_lo)
        } else {
            None
        }
    }

    /// Midpoint as a rational; used only for display.
    pub fn mid_rat(&self) -> Rat {
        let two = BigInt::from(2);
        Rat::new(&self.lo + &self.hi, two << self.prec)
    }

    /// Interval width in units of 2^-prec.
    pub fn width(&self) -> BigInt {
        &self.hi - &self.lo
    }
}

fn shr_floor(x: &BigInt, shift: u32) -> BigInt {
    x >> shift
}

fn shr_ceil(x: &BigInt, shift: u32) -> BigInt {
    -((-x) >> shift)
}

fn mul_rat_dir(x: &BigInt, r: &Rat, up: bool) -> BigInt {
    let num = x * r.numer();
    if up {
        num.div_ceil(r.denom())
    } else {
        num.div_floor(r.denom())
    }
}

/// Certified enclosure of ln 2 at the given precision.
pub fn ln2(prec: u32) -> Fix {
    // ln 2 = 2 atanh(1/3) = 2 sum_{k>=0} (1/3)^(2k+1) / (2k+1).
    let guard = 32;
    let g = prec + guard;
    let scale = BigInt::one() << g;
    let mut sum = BigInt::zero();
    let mut pow3 = BigInt::from(3);
    let nine = BigInt::from(9);
    let mut k: u64 = 0;
    loop {
        let term = (&scale / &pow3) / BigInt::from(2 * k + 1);
        if term.is_zero() {
            break;
        }
        sum += term;
        pow3 *= &nine;
        k += 1;
    }
    // Each floored term loses < 1 ulp; the tail after the first zero term is < 2 ulps.
    let lo = &sum * 2;
    let hi = (&sum + BigInt::from(k + 2)) * 2;
    Fix { lo, hi, prec: g }.with_prec(prec)
}

/// Certified enclosure of ln x for rational x > 0.
pub fn ln_rat(x: &Rat, prec: u32) -> Fix {
    assert!(x.is_positive(), "ln of non-positive rational");
    if x.is_one() {
        return Fix::exact_zero(prec);
    }
    let guard = 48;
    let g = prec + guard;
    // Normalize x = 2^k * m with m in [1, 2).
    let nbits = x.numer().bits() as i64;
    let dbits = x.denom().bits() as i64;
    let mut k = nbits - dbits;
    let two = Rat::from_integer(BigInt::from(2));
    let mut m = if k >= 0 {
        x / Rat::from_integer(BigInt::one() << (k as u64))
    } else {
        x * Rat::from_integer(BigInt::one() << ((-k) as u64))
    };
    if m < Rat::one() {
        k -= 1;
        m *= &two;
    } else if m >= two {
        k += 1;
        m /= &two;
    }
    debug_assert!(m >= Rat::one() && m < two);
    // ln m = 2 atanh(t), t = (m-1)/(m+1) in [0, 1/3).
    let t = (&m - Rat::one()) / (&m + Rat::one());
    let tf = Fix::from_rat(&t, g);
    let t2 = tf.mul(&tf);
    let mut p = tf.clone();
    let mut sum = tf;
    let mut odd: u64 = 3;
    loop {
        p = p.mul(&t2);
        let term = Fix {
            lo: p.lo.div_floor(&BigInt::from(odd)),
            hi: p.hi.div_ceil(&BigInt::from(odd)),
            prec: g,
        };
        sum = sum.add(&term);
        if p.lo.magnitude() <= &BigUint::one() && p.hi.magnitude() <= &BigUint::one() {
            // The remaining terms shrink geometrically (t^2 < 1/9) from a
            // value already below one ulp, so the tail is under 2 ulps.
            sum.lo -= 2;
            sum.hi += 2;
            break;
        }
        odd += 2;
        assert!(odd < 1 << 40, "ln series failed to converge");
    }
    let atanh2 = Fix { lo: &sum.lo * 2, hi: &sum.hi * 2, prec: g };
    let l2 = ln2(g);
    let (a, b) = (&l2.lo * k, &l2.hi * k);
    let kterm = Fix { lo: a.clone().min(b.clone()), hi: a.max(b), prec: g };
    atanh2.add(&kterm).with_prec(prec)
}

/// Certified enclosure of e^y for an interval-valued exponent with |y| <= 1.
fn exp_small(y: &Fix) -> Fix {
    let g = y.prec;
    let one = Fix { lo: BigInt::one() << g, hi: BigInt::one() << g, prec: g };
    let mut sum = one.clone();
    let mut p = one;
    let mut k: u64 = 1;
    loop {
        p = p.mul(y);
        p = Fix {
            lo: p.lo.div_floor(&BigInt::from(k)),
            hi: p.hi.div_ceil(&BigInt::from(k)),
            prec: g,
        };
        sum = sum.add(&p);
        if k > 2 && p.lo.magnitude() <= &BigUint::one() && p.hi.magnitude() <= &BigUint::one() {
            // Remaining tail is geometrically below 2 ulps in either direction.
            sum.lo -= 2;
            sum.hi += 2;
            break;
        }
        k += 1;
        assert!(k < 10_000, "exp series failed to converge");
    }
    sum
}

/// Certified enclosure of e^y for rational y.
pub fn exp_rat(y: &Rat, prec: u32) -> Fix {
    let guard = 64;
    let g = prec + guard;
    let w = y.floor().to_integer();
    let f = y - Rat::from_integer(w.clone());
    let ef = exp_small(&Fix::from_rat(&f, g));
    let e1 = exp_small(&Fix::from_rat(&Rat::one(), g));
    let ew = pow_fix(&e1, &w, g);
    ef.mul(&ew).with_prec(prec)
}

/// Interval power with integer (possibly negative) exponent.
fn pow_fix(base: &Fix, e: &BigInt, g: u32) -> Fix {
    let one = Fix { lo: BigInt::one() << g, hi: BigInt::one() << g, prec: g };
    if e.is_zero() {
        return one;
    }
    let mag = e.magnitude().clone();
    let mut result = one;
    let mut b = base.clone();
    let bits = mag.bits();
    for i in 0..bits {
        if mag.bit(i) {
            result = result.mul(&b);
        }
        if i + 1 < bits {
            b = b.mul(&b);
        }
    }
    if e.is_negative() {
        recip_fix(&result)
    } else {
        result
    }
}

/// Interval reciprocal; requires the interval to exclude zero.
fn recip_fix(x: &Fix) -> Fix {
    assert!(x.lo.is_positive(), "reciprocal of interval touching zero");
    let g = x.prec;
    let scale = BigInt::one() << (2 * g);
    Fix { lo: scale.div_floor(&x.hi), hi: scale.div_ceil(&x.lo), prec: g }
}

/// Certified enclosure of 2^f for rational f in [0, 1).
pub fn exp2_frac(f: &Rat, prec: u32) -> Fix {
    assert!(!f.is_negative() && f < &Rat::one());
    if f.is_zero() {
        let one = BigInt::one() << prec;
        return Fix { lo: one.clone(), hi: one, prec };
    }
    let guard = 64;
    let g = prec + guard;
    let y = ln2(g).scale_rat(f);
    exp_small(&y).with_prec(prec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn approx(f: &Fix) -> f64 {
        let mid = f.mid_rat();
        mid.numer().to_f64().unwrap() / mid.denom().to_f64().unwrap()
    }

    #[test]
    fn parses_decimals() {
        assert_eq!(parse_decimal("0.25").unwrap(), rat_frac(1, 4));
        assert_eq!(parse_decimal("-3").unwrap(), -rat_u64(3));
        assert_eq!(parse_decimal("1.5e-2").unwrap(), rat_frac(3, 200));
        assert_eq!(parse_decimal("2e3").unwrap(), rat_u64(2000));
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("x").is_err());
    }

    #[test]
    fn formats_significant_digits() {
        assert_eq!(format_sig(&rat_u64(0), 24), "0");
        assert_eq!(format_sig(&rat_u64(42), 24), "42");
        assert_eq!(format_sig(&rat_frac(1, 4), 24), "0.25");
        assert_eq!(format_sig(&rat_frac(1, 3), 5), "0.33333");
        assert_eq!(format_sig(&rat_frac(2, 3), 5), "0.66667");
        assert_eq!(format_sig(&(-rat_frac(1, 8)), 24), "-0.125");
        assert_eq!(format_sig(&rat_frac(123456, 1), 3), "123000");
    }

    #[test]
    fn ln2_matches_reference() {
        let f = ln2(128);
        let v = approx(&f);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(f.width() <= BigInt::from(64));
    }

    #[test]
    fn ln_rat_matches_reference() {
        for (num, den) in [(1u64, 1u64), (2, 1), (3, 1), (1, 2), (7, 5), (1000, 3), (1, 1000)] {
            let f = ln_rat(&rat_frac(num, den), 128);
            let v = approx(&f);
            let expect = (num as f64 / den as f64).ln();
            assert!((v - expect).abs() < 1e-10, "ln({num}/{den}) = {v} vs {expect}");
        }
    }

    #[test]
    fn exp_rat_matches_reference() {
        for (num, den, sign) in [(1u64, 1u64, 1i64), (1, 2, 1), (5, 2, 1), (1, 3, -1), (7, 1, -1), (20, 1, 1)] {
            let mut y = rat_frac(num, den);
            if sign < 0 {
                y = -y;
            }
            let f = exp_rat(&y, 128);
            let v = approx(&f);
            let expect = (sign as f64 * num as f64 / den as f64).exp();
            assert!((v - expect).abs() / expect < 1e-10, "exp({sign}*{num}/{den}) = {v} vs {expect}");
        }
    }

    #[test]
    fn exp2_frac_matches_reference() {
        for (num, den) in [(0u64, 1u64), (1, 2), (1, 3), (9, 10)] {
            let f = exp2_frac(&rat_frac(num, den), 128);
            let v = approx(&f);
            let expect = (num as f64 / den as f64).exp2();
            assert!((v - expect).abs() / expect < 1e-10);
        }
    }

    #[test]
    fn interval_floor_is_sound() {
        let f = Fix::from_rat(&rat_frac(7, 2), 64);
        assert_eq!(f.floor_unique().unwrap(), BigInt::from(3));
        let g = ln2(64);
        assert_eq!(g.floor_unique().unwrap(), BigInt::zero());
    }
}
