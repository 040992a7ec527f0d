//! Primitives of the m-adic sequence space.
//!
//! The space is 𝕋 = {0, 1, …, m−1}^ℕ. For two sequences a, b let n(a, b)
//! be the first position at which they differ; the ultrametric is
//! d(a, b) = m^{−n(a,b)+1}. The closed ball of radius m^{−n} around x is
//! the set of sequences matching x in the first n positions, so finite
//! digit prefixes address both truncated points and intervals.
//!
//! The scaling factor w = m^α with rational α = p/q is irrational in
//! general and is never materialized as a float. A value of the form
//! coeff · w^pow ([`WScaled`]) is compared to another by raising both
//! sides to the q-th power, which reduces every ordering question to a
//! comparison of big integers.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// AlphaParam: the pair (m, α = p/q) with exact ⌊w⌋, ⌈w⌉
// ---------------------------------------------------------------------------

/// The exponent parameter (m, α) with α = p/q ∈ (0, 1) in lowest terms.
///
/// Derived data: w = m^{p/q} and the exact integers ⌊w⌋, ⌈w⌉, obtained by
/// integer q-th roots so that ⌊w⌋^q ≤ m^p < (⌊w⌋+1)^q holds exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphaParam {
    m: u64,
    p: u32,
    q: u32,
    floor_w: u64,
    ceil_w: u64,
}

impl AlphaParam {
    /// Builds the parameter, reducing p/q and checking 0 < p/q < 1, m ≥ 2.
    pub fn new(m: u64, p: u32, q: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidAlpha(format!("base m={m} must be at least 2")));
        }
        if p == 0 || q == 0 {
            return Err(Error::InvalidAlpha("p and q must be positive".into()));
        }
        if p >= q {
            return Err(Error::InvalidAlpha(format!(
                "alpha={p}/{q} must lie strictly inside (0, 1)"
            )));
        }
        let g = p.gcd(&q);
        let (p, q) = (p / g, q / g);
        let mp = BigUint::from(m).pow(p);
        let floor_big = mp.nth_root(q);
        let exact = floor_big.pow(q) == mp;
        let floor_w: u64 = u64::try_from(&floor_big)
            .map_err(|_| Error::InvalidAlpha("floor(m^alpha) exceeds u64".into()))?;
        let ceil_w = if exact { floor_w } else { floor_w + 1 };
        Ok(AlphaParam { m, p, q, floor_w, ceil_w })
    }

    /// Parses "p/q" (rationals only; decimals are rejected).
    pub fn parse(m: u64, s: &str) -> Result<Self> {
        let (p, q) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidAlpha(format!(
                "alpha must be a rational like 5/6, got {s:?}"
            )))?;
        let p: u32 = p.trim().parse().map_err(|_| {
            Error::InvalidAlpha(format!("bad numerator in alpha {s:?}"))
        })?;
        let q: u32 = q.trim().parse().map_err(|_| {
            Error::InvalidAlpha(format!("bad denominator in alpha {s:?}"))
        })?;
        Self::new(m, p, q)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// ⌊m^α⌋, exact.
    pub fn floor_w(&self) -> u64 {
        self.floor_w
    }

    /// ⌈m^α⌉, exact.
    pub fn ceil_w(&self) -> u64 {
        self.ceil_w
    }

    /// True when w = m^α is an integer (m^p is a perfect q-th power).
    pub fn is_degenerate(&self) -> bool {
        self.floor_w == self.ceil_w
    }

    /// The same α over the base m^d (one digit of the lifted space spans
    /// d digits of the original one, so the scaling factor becomes w^d).
    pub fn lift(&self, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParam("block size d must be >= 1".into()));
        }
        let m = self
            .m
            .checked_pow(d)
            .ok_or_else(|| Error::InvalidParam(format!("lifted base {}^{d} overflows", self.m)))?;
        Self::new(m, self.p, self.q)
    }

    /// Exact ordering of a·w^i vs b·w^j. Coefficients must be ≥ 0.
    ///
    /// For sh = min(i, j) the comparison is equivalent to
    /// a·w^{i−sh} vs b·w^{j−sh}; raising to the q-th power leaves
    /// m^{p(i−sh)}·a^q vs m^{p(j−sh)}·b^q, an integer comparison after
    /// cross-multiplying the denominators.
    pub fn cmp_scaled(&self, a: &WScaled, b: &WScaled) -> Ordering {
        debug_assert!(!a.coeff.is_negative() && !b.coeff.is_negative());
        if a.coeff.is_zero() || b.coeff.is_zero() {
            return a.coeff.cmp(&b.coeff);
        }
        let sh = a.pow.min(b.pow);
        let ea = (a.pow - sh) as u32;
        let eb = (b.pow - sh) as u32;
        let lhs = self.scaled_qth_power_shifted(&a.coeff, ea, b.coeff.denom());
        let rhs = self.scaled_qth_power_shifted(&b.coeff, eb, a.coeff.denom());
        lhs.cmp(&rhs)
    }

    /// m^{p·e} · numer(c)^q · other_den^q, the q-th power of c·w^e with the
    /// opposing denominator cross-multiplied in.
    fn scaled_qth_power_shifted(&self, c: &BigRational, e: u32, other_den: &BigInt) -> BigInt {
        let mut v = c.numer().pow(self.q) * other_den.pow(self.q);
        if e > 0 {
            v *= BigInt::from(self.m).pow(self.p * e);
        }
        v
    }

    /// Exact ordering of w·t against the rational c (t, c of any sign).
    pub fn cmp_w_times(&self, t: &BigRational, c: &BigRational) -> Ordering {
        match (t.is_negative() || t.is_zero(), c.is_negative() || c.is_zero()) {
            (false, true) => return Ordering::Greater,
            (true, false) => return Ordering::Less,
            (true, true) => {
                if t.is_zero() {
                    return BigRational::zero().cmp(c);
                }
                if c.is_zero() {
                    return t.cmp(&BigRational::zero());
                }
                // both strictly negative: |w·t| vs |c| with the order flipped
                let lhs = self.qth_power_times_mp(&-t.clone());
                let rhs = pow_q(&-c.clone(), self.q);
                return rhs.cmp(&lhs);
            }
            (false, false) => {}
        }
        let lhs = self.qth_power_times_mp(t);
        let rhs = pow_q(c, self.q);
        lhs.cmp(&rhs)
    }

    /// (w·t)^q = m^p · t^q as an exact rational (t > 0).
    fn qth_power_times_mp(&self, t: &BigRational) -> BigRational {
        pow_q(t, self.q) * BigRational::from_integer(BigInt::from(self.m).pow(self.p))
    }

    /// (coeff·w^pow)^q as an exact rational. Requires coeff ≥ 0.
    pub fn qth_power(&self, x: &WScaled) -> BigRational {
        debug_assert!(!x.coeff.is_negative());
        let cq = pow_q(&x.coeff, self.q);
        let e = self.p as i64 * x.pow;
        let mp = BigInt::from(self.m).pow(e.unsigned_abs() as u32);
        if e >= 0 {
            cq * BigRational::from_integer(mp)
        } else {
            cq / BigRational::from_integer(mp)
        }
    }

    /// floor(x·10^k), exact, for x = coeff·w^pow ≥ 0. k may be negative.
    fn floor_times_pow10(&self, x: &WScaled, k: i64) -> BigUint {
        if x.coeff.is_zero() {
            return BigUint::zero();
        }
        let v = self.qth_power(x);
        let ten = BigInt::from(10u32).pow((k.unsigned_abs() as u32) * self.q);
        let (num, den) = if k >= 0 {
            (v.numer() * &ten, v.denom().clone())
        } else {
            (v.numer().clone(), v.denom() * &ten)
        };
        // floor(y^{1/q}) = floor(floor(y)^{1/q}) for rational y >= 0
        let fl = (num / den).to_biguint().expect("positive by construction");
        fl.nth_root(self.q)
    }

    /// round(x·10^k) to nearest, ties away from zero; exact.
    fn round_times_pow10(&self, x: &WScaled, k: i64) -> BigUint {
        let t = self.floor_times_pow10(x, k);
        // x·10^k >= t + 1/2  ⟺  2^q·(x·10^k)^q >= (2t+1)^q
        let v = self.qth_power(x);
        let ten = BigInt::from(10u32).pow((k.unsigned_abs() as u32) * self.q);
        let lhs = if k >= 0 {
            v * BigRational::from_integer(ten)
        } else {
            v / BigRational::from_integer(ten)
        } * BigRational::from_integer(BigInt::from(2u32).pow(self.q));
        let rhs = BigRational::from_integer(
            (BigInt::from(2u32) * BigInt::from(t.clone()) + BigInt::one()).pow(self.q),
        );
        if lhs >= rhs {
            t + BigUint::one()
        } else {
            t
        }
    }

    /// Decimal rendering of x with a fixed number of digits after the
    /// point, correctly rounded (display only; orderings stay exact).
    pub fn approx_fixed(&self, x: &WScaled, decimals: usize) -> String {
        let scaled = self.round_times_pow10(x, decimals as i64);
        let mut s = scaled.to_string();
        if decimals == 0 {
            return s;
        }
        if s.len() <= decimals {
            s = format!("{}{}", "0".repeat(decimals + 1 - s.len()), s);
        }
        let cut = s.len() - decimals;
        format!("{}.{}", &s[..cut], &s[cut..])
    }

    /// Decimal rendering of x to `sig` significant digits, correctly
    /// rounded.
    pub fn approx_sig(&self, x: &WScaled, sig: usize) -> String {
        assert!(sig >= 1);
        if x.coeff.is_zero() {
            return "0".into();
        }
        // decimal exponent e10: x ∈ [10^e10, 10^{e10+1})
        let ipart = self.floor_times_pow10(x, 0);
        let mut e10: i64 = if ipart.is_zero() {
            let mut k = 1i64;
            while self.floor_times_pow10(x, k).is_zero() {
                k += 1;
            }
            -k
        } else {
            ipart.to_string().len() as i64 - 1
        };
        // rounding can carry into one more digit (e.g. 9.99 → 10.0)
        let mut digits = self.round_times_pow10(x, sig as i64 - 1 - e10);
        if digits.to_string().len() > sig {
            e10 += 1;
            digits = self.round_times_pow10(x, sig as i64 - 1 - e10);
        }
        let ds = digits.to_string();
        if e10 >= sig as i64 - 1 {
            // integer with trailing zeros
            format!("{}{}", ds, "0".repeat((e10 - (sig as i64 - 1)) as usize))
        } else if e10 >= 0 {
            let cut = (e10 + 1) as usize;
            format!("{}.{}", &ds[..cut], &ds[cut..])
        } else {
            format!("0.{}{}", "0".repeat((-e10 - 1) as usize), ds)
        }
    }
}

impl fmt::Display for AlphaParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={} alpha={}/{}", self.m, self.p, self.q)
    }
}

fn pow_q(r: &BigRational, q: u32) -> BigRational {
    BigRational::new_raw(r.numer().pow(q), r.denom().pow(q))
}

// ---------------------------------------------------------------------------
// WScaled: exact values coeff·w^pow
// ---------------------------------------------------------------------------

/// An exact value coeff·w^pow for the w of some [`AlphaParam`].
///
/// Equality derives structurally; equal values with different
/// representations (e.g. 1·w² and 2·w⁰ when w² = 2) compare `Equal`
/// only through [`AlphaParam::cmp_scaled`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WScaled {
    pub pow: i64,
    pub coeff: BigRational,
}

impl WScaled {
    pub fn new(pow: i64, coeff: BigRational) -> Self {
        WScaled { pow, coeff }
    }

    pub fn from_rational(coeff: BigRational) -> Self {
        WScaled { pow: 0, coeff }
    }

    pub fn one() -> Self {
        WScaled { pow: 0, coeff: BigRational::one() }
    }

    /// The exact quotient a/b (coeffs must be nonzero in b).
    pub fn ratio(a: &WScaled, b: &WScaled) -> Self {
        WScaled { pow: a.pow - b.pow, coeff: &a.coeff / &b.coeff }
    }
}

// ---------------------------------------------------------------------------
// Prefix: finite digit strings addressing points and intervals
// ---------------------------------------------------------------------------

/// A finite digit sequence over {0, …, base−1}. The empty prefix has
/// level 0 and denotes the whole space.
///
/// Position 1 is the first coordinate. The textual form concatenates
/// digits bare for base ≤ 10 ("0120"), dot-separated for larger bases
/// ("0.12.3"); the empty prefix is spelled "eps".
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Prefix {
    base: u64,
    digits: Vec<u32>,
}

impl Prefix {
    /// The empty prefix (the whole space).
    pub fn root(base: u64) -> Self {
        Prefix { base, digits: Vec::new() }
    }

    pub fn new(base: u64, digits: Vec<u32>) -> Result<Self> {
        for &d in &digits {
            if u64::from(d) >= base {
                return Err(Error::DigitOutOfRange { digit: d, base });
            }
        }
        Ok(Prefix { base, digits })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// The length n; this prefix addresses an interval of level n.
    pub fn level(&self) -> usize {
        self.digits.len()
    }

    pub fn is_root(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn child(&self, digit: u32) -> Result<Self> {
        if u64::from(digit) >= self.base {
            return Err(Error::DigitOutOfRange { digit, base: self.base });
        }
        let mut digits = self.digits.clone();
        digits.push(digit);
        Ok(Prefix { base: self.base, digits })
    }

    pub fn parent(&self) -> Option<Self> {
        if self.digits.is_empty() {
            None
        } else {
            let mut digits = self.digits.clone();
            digits.pop();
            Some(Prefix { base: self.base, digits })
        }
    }

    /// The ancestor of level n (n ≤ level).
    pub fn truncate(&self, n: usize) -> Self {
        Prefix { base: self.base, digits: self.digits[..n.min(self.digits.len())].to_vec() }
    }

    /// True when `other` matches this prefix on all of its positions.
    pub fn is_prefix_of(&self, other: &Prefix) -> bool {
        self.base == other.base
            && self.digits.len() <= other.digits.len()
            && other.digits[..self.digits.len()] == self.digits[..]
    }

    /// Parses the textual form ("eps", "0120", "0.12.3").
    pub fn parse(base: u64, s: &str) -> Result<Self> {
        if s == "eps" {
            return Ok(Prefix::root(base));
        }
        if s.is_empty() {
            return Err(Error::InvalidParam(
                "empty prefix must be spelled \"eps\"".into(),
            ));
        }
        let digits: Vec<u32> = if base <= 10 {
            s.chars()
                .map(|c| {
                    c.to_digit(10).ok_or_else(|| {
                        Error::InvalidParam(format!("bad digit {c:?} in prefix {s:?}"))
                    })
                })
                .collect::<Result<_>>()?
        } else {
            s.split('.')
                .map(|part| {
                    part.parse::<u32>().map_err(|_| {
                        Error::InvalidParam(format!("bad digit {part:?} in prefix {s:?}"))
                    })
                })
                .collect::<Result<_>>()?
        };
        Prefix::new(base, digits)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "eps");
        }
        if self.base <= 10 {
            for d in &self.digits {
                write!(f, "{d}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// Outcome of scanning two prefixes for their first differing position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstDifference {
    /// 1-based position of the first differing digit.
    Position(usize),
    /// All positions agree and the lengths are equal.
    Identical,
}

/// First differing position of a and b, compared over the overlap of
/// their lengths. Exhaustion without a difference at unequal lengths is
/// an error (a point against its own ancestor has no such position).
pub fn first_difference(a: &Prefix, b: &Prefix) -> Result<FirstDifference> {
    if a.base != b.base {
        return Err(Error::AlphabetMismatch(a.base, b.base));
    }
    for (i, (da, db)) in a.digits.iter().zip(b.digits.iter()).enumerate() {
        if da != db {
            return Ok(FirstDifference::Position(i + 1));
        }
    }
    if a.digits.len() == b.digits.len() {
        Ok(FirstDifference::Identical)
    } else {
        Err(Error::PrefixExtends)
    }
}

/// The ultrametric d(a, b) = m^{−n(a,b)+1} as an exact rational;
/// identical prefixes are at distance 0.
pub fn distance(a: &Prefix, b: &Prefix) -> Result<BigRational> {
    match first_difference(a, b)? {
        FirstDifference::Identical => Ok(BigRational::zero()),
        FirstDifference::Position(n) => {
            let m = BigInt::from(a.base);
            Ok(if n >= 1 {
                BigRational::new(BigInt::one(), m.pow((n - 1) as u32))
            } else {
                unreachable!("positions are 1-based")
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Interval: a ball B_n(x), addressed by its defining prefix
// ---------------------------------------------------------------------------

/// An m-adic interval of level n: the set of sequences matching a fixed
/// prefix of length n. Two intervals of equal level are disjoint or
/// identical.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Interval {
    prefix: Prefix,
}

impl Interval {
    pub fn new(prefix: Prefix) -> Self {
        Interval { prefix }
    }

    pub fn whole_space(base: u64) -> Self {
        Interval { prefix: Prefix::root(base) }
    }

    pub fn prefix(&self) -> &Prefix {
        &self.prefix
    }

    pub fn level(&self) -> usize {
        self.prefix.level()
    }

    pub fn base(&self) -> u64 {
        self.prefix.base()
    }

    /// The m subintervals of level n+1, in digit order. Their union is
    /// this interval and they are pairwise disjoint.
    pub fn children(&self) -> Vec<Interval> {
        (0..self.base())
            .map(|d| {
                Interval::new(
                    self.prefix
                        .child(d as u32)
                        .expect("digit below base by construction"),
                )
            })
            .collect()
    }

    /// Membership of a (truncated) point: b ∈ B_n(a) iff b matches the
    /// defining prefix on the first n positions.
    pub fn contains(&self, point: &Prefix) -> bool {
        self.prefix.is_prefix_of(point)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pfx(base: u64, digits: &[u32]) -> Prefix {
        Prefix::new(base, digits.to_vec()).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn alpha_floor_ceil_exact() {
        let a = AlphaParam::new(2, 1, 2).unwrap();
        assert_eq!((a.floor_w(), a.ceil_w()), (1, 2));
        assert!(!a.is_degenerate());

        let a = AlphaParam::new(3, 5, 6).unwrap();
        // 2^6 = 64 <= 3^5 = 243 < 3^6 = 729
        assert_eq!((a.floor_w(), a.ceil_w()), (2, 3));

        let a = AlphaParam::new(4, 1, 2).unwrap();
        assert_eq!((a.floor_w(), a.ceil_w()), (2, 2));
        assert!(a.is_degenerate());

        let a = AlphaParam::new(5, 1, 3).unwrap();
        assert_eq!((a.floor_w(), a.ceil_w()), (1, 2));
    }

    #[test]
    fn alpha_reduces_and_rejects() {
        let a = AlphaParam::new(2, 2, 4).unwrap();
        assert_eq!((a.p(), a.q()), (1, 2));
        assert!(AlphaParam::new(1, 1, 2).is_err());
        assert!(AlphaParam::new(2, 3, 2).is_err());
        assert!(AlphaParam::new(2, 2, 2).is_err());
        assert!(AlphaParam::new(2, 0, 2).is_err());
        assert!(AlphaParam::parse(2, "0.5").is_err());
        assert!(AlphaParam::parse(2, "1/2").is_ok());
    }

    #[test]
    fn alpha_invariants_hold_on_a_sweep() {
        for m in 2u64..=16 {
            for q in 2u32..=8 {
                for p in 1..q {
                    let a = AlphaParam::new(m, p, q).unwrap();
                    let mp = BigUint::from(m).pow(a.p());
                    let fl = BigUint::from(a.floor_w());
                    assert!(fl.pow(a.q()) <= mp);
                    assert!((fl + 1u32).pow(a.q()) > mp);
                    // w < m strictly, but ⌈w⌉ may equal m (w ∈ (m−1, m))
                    assert!(a.floor_w() >= 1 && a.floor_w() < m);
                    assert!(a.ceil_w() <= m);
                    assert!(a.ceil_w() - a.floor_w() <= 1);
                }
            }
        }
    }

    #[test]
    fn cmp_scaled_orders_w_powers() {
        let a = AlphaParam::new(2, 1, 2).unwrap(); // w = sqrt(2)
        let w1 = WScaled::new(1, BigRational::one());
        let two = WScaled::from_rational(rat(2, 1));
        let w2 = WScaled::new(2, BigRational::one());
        assert_eq!(a.cmp_scaled(&w1, &two), Ordering::Less);
        assert_eq!(a.cmp_scaled(&w2, &two), Ordering::Equal);
        assert_eq!(a.cmp_scaled(&w1, &WScaled::one()), Ordering::Greater);
        // negative powers: w^{-1} = 1/sqrt(2) < 3/4
        let winv = WScaled::new(-1, BigRational::one());
        assert_eq!(a.cmp_scaled(&winv, &WScaled::from_rational(rat(3, 4))), Ordering::Less);
        assert_eq!(a.cmp_scaled(&winv, &WScaled::from_rational(rat(7, 10))), Ordering::Greater);
    }

    #[test]
    fn cmp_w_times_signs_and_magnitudes() {
        let a = AlphaParam::new(2, 1, 2).unwrap(); // w = sqrt(2) ≈ 1.4142
        // w·(1/2) ≈ 0.707 vs 7/10
        assert_eq!(a.cmp_w_times(&rat(1, 2), &rat(7, 10)), Ordering::Greater);
        assert_eq!(a.cmp_w_times(&rat(1, 2), &rat(3, 4)), Ordering::Less);
        // sign cases
        assert_eq!(a.cmp_w_times(&rat(1, 2), &rat(-1, 10)), Ordering::Greater);
        assert_eq!(a.cmp_w_times(&rat(-1, 2), &rat(1, 10)), Ordering::Less);
        assert_eq!(a.cmp_w_times(&BigRational::zero(), &BigRational::zero()), Ordering::Equal);
        // both negative: w·(-1/2) ≈ -0.707 vs -3/4 → greater
        assert_eq!(a.cmp_w_times(&rat(-1, 2), &rat(-3, 4)), Ordering::Greater);
        assert_eq!(a.cmp_w_times(&rat(-1, 2), &rat(-7, 10)), Ordering::Less);
    }

    #[test]
    fn approx_fixed_matches_known_digits() {
        let a = AlphaParam::new(2, 1, 2).unwrap();
        let w = WScaled::new(1, BigRational::one());
        assert_eq!(a.approx_fixed(&w, 6), "1.414214");
        assert_eq!(a.approx_fixed(&WScaled::one(), 6), "1.000000");
        assert_eq!(a.approx_fixed(&WScaled::from_rational(rat(3, 2)), 6), "1.500000");
        let half_w = WScaled::new(1, rat(1, 2)); // ≈ 0.7071068
        assert_eq!(a.approx_fixed(&half_w, 6), "0.707107");
        assert_eq!(a.approx_fixed(&WScaled::from_rational(rat(0, 1)), 3), "0.000");
        // rounding carries across the point: 0.9995 → 1.00
        assert_eq!(a.approx_fixed(&WScaled::from_rational(rat(9995, 10000)), 2), "1.00");
    }

    #[test]
    fn approx_sig_matches_f64_reference() {
        let a = AlphaParam::new(2, 1, 2).unwrap();
        let w = WScaled::new(1, BigRational::one());
        assert_eq!(a.approx_sig(&w, 15), "1.41421356237310");
        assert_eq!(a.approx_sig(&w, 3), "1.41");
        assert_eq!(a.approx_sig(&WScaled::new(2, BigRational::one()), 4), "2.000");
        // small value: w/1000 ≈ 0.00141421...
        let small = WScaled::new(1, rat(1, 1000));
        assert_eq!(a.approx_sig(&small, 4), "0.001414");
        // large value: 100·w ≈ 141.42
        let large = WScaled::new(1, rat(100, 1));
        assert_eq!(a.approx_sig(&large, 2), "140");
        assert_eq!(a.approx_sig(&large, 5), "141.42");
        // decimal render of a big rational with few digits: 9.99 at 2 sig → 10
        let near_ten = WScaled::from_rational(rat(999, 100));
        assert_eq!(a.approx_sig(&near_ten, 2), "10");
    }

    #[test]
    fn approx_against_f64_randomized() {
        // spot-verify the exact renderer against floating point where the
        // float is comfortably accurate
        let a = AlphaParam::new(3, 5, 6).unwrap();
        let w = 3f64.powf(5.0 / 6.0);
        for (pow, num, den) in [(1i64, 1i64, 2i64), (3, 7, 5), (0, 22, 7), (5, 1, 97)] {
            let x = WScaled::new(pow, rat(num, den));
            let f = w.powi(pow as i32) * (num as f64) / (den as f64);
            let rendered: f64 = a.approx_fixed(&x, 6).parse().unwrap();
            assert!(
                (rendered - f).abs() < 1e-5,
                "pow={pow} num={num} den={den}: {rendered} vs {f}"
            );
        }
    }

    #[test]
    fn first_difference_positions() {
        assert_eq!(
            first_difference(&pfx(3, &[0, 1, 2]), &pfx(3, &[0, 2, 2])).unwrap(),
            FirstDifference::Position(2)
        );
        assert_eq!(
            first_difference(&pfx(2, &[1, 1]), &pfx(2, &[1, 1])).unwrap(),
            FirstDifference::Identical
        );
        assert_eq!(
            first_difference(&pfx(2, &[0, 0, 0, 1]), &pfx(2, &[0, 0, 0, 0])).unwrap(),
            FirstDifference::Position(4)
        );
        assert!(matches!(
            first_difference(&pfx(2, &[0]), &pfx(3, &[0])),
            Err(Error::AlphabetMismatch(2, 3))
        ));
        assert!(matches!(
            first_difference(&pfx(2, &[0]), &pfx(2, &[0, 1])),
            Err(Error::PrefixExtends)
        ));
    }

    #[test]
    fn distance_values() {
        assert_eq!(
            distance(&pfx(2, &[0, 1]), &pfx(2, &[1, 1])).unwrap(),
            BigRational::one()
        );
        assert_eq!(distance(&pfx(3, &[0, 1, 2]), &pfx(3, &[0, 2, 2])).unwrap(), rat(1, 3));
        assert_eq!(distance(&pfx(2, &[0, 1]), &pfx(2, &[0, 1])).unwrap(), BigRational::zero());
    }

    #[test]
    fn children_split_in_digit_order() {
        let root = Interval::whole_space(2);
        let kids = root.children();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].prefix().digits(), &[0]);
        assert_eq!(kids[1].prefix().digits(), &[1]);

        let iv = Interval::new(pfx(3, &[2]));
        let kids = iv.children();
        assert_eq!(kids.len(), 3);
        assert_eq!(kids[2].prefix().digits(), &[2, 2]);

        let iv = Interval::new(pfx(2, &[1, 0]));
        let kids = iv.children();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].prefix().digits(), &[1, 0, 0]);
        assert_eq!(kids[1].prefix().digits(), &[1, 0, 1]);
    }

    #[test]
    fn ultrametric_inequality_exhaustive_small() {
        // all triples of equal-length prefixes for m=2, len<=4 and m=3, len<=3
        for (m, max_len) in [(2u64, 4usize), (3, 3)] {
            let mut all: Vec<Vec<Prefix>> = Vec::new();
            for len in 0..=max_len {
                let mut level: Vec<Prefix> = Vec::new();
                let count = (m as usize).pow(len as u32);
                for idx in 0..count {
                    let mut digits = Vec::with_capacity(len);
                    let mut rem = idx;
                    for _ in 0..len {
                        digits.push((rem % m as usize) as u32);
                        rem /= m as usize;
                    }
                    level.push(Prefix::new(m, digits).unwrap());
                }
                all.push(level);
            }
            for level in &all {
                for a in level {
                    for b in level {
                        let dab = distance(a, b).unwrap();
                        let dba = distance(b, a).unwrap();
                        assert_eq!(dab, dba);
                        assert_eq!(dab.is_zero(), a == b);
                        for c in level {
                            let dac = distance(a, c).unwrap();
                            let dbc = distance(b, c).unwrap();
                            assert!(dac <= dab.clone().max(dbc));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ball_membership_matches_distance() {
        // b ∈ B_n(a) ⟺ first n digits agree ⟺ d(a,b) ≤ m^{−n}
        let m = 3u64;
        let pts: Vec<Prefix> = (0..27)
            .map(|idx| {
                let digits = vec![(idx / 9) as u32, (idx / 3 % 3) as u32, (idx % 3) as u32];
                Prefix::new(m, digits).unwrap()
            })
            .collect();
        for a in &pts {
            for n in 0..=3usize {
                let ball = Interval::new(a.truncate(n));
                for b in &pts {
                    let inside = ball.contains(b);
                    let agree = a.digits()[..n] == b.digits()[..n];
                    assert_eq!(inside, agree);
                    let d = distance(a, b).unwrap();
                    let radius = BigRational::new(BigInt::one(), BigInt::from(m).pow(n as u32));
                    assert_eq!(inside, d <= radius);
                }
            }
        }
    }

    #[test]
    fn prefix_text_round_trip() {
        let p = pfx(3, &[0, 1, 2, 0]);
        assert_eq!(p.to_string(), "0120");
        assert_eq!(Prefix::parse(3, "0120").unwrap(), p);
        let p = pfx(16, &[0, 12, 3]);
        assert_eq!(p.to_string(), "0.12.3");
        assert_eq!(Prefix::parse(16, "0.12.3").unwrap(), p);
        assert_eq!(Prefix::parse(5, "eps").unwrap(), Prefix::root(5));
        assert_eq!(Prefix::root(5).to_string(), "eps");
        assert!(Prefix::parse(3, "031").is_err());
        assert!(Prefix::parse(16, "0.15.3").is_ok());
        assert!(Prefix::parse(16, "0.16.3").is_err());
    }

    #[test]
    fn lift_squares_the_scale() {
        let a = AlphaParam::new(3, 5, 6).unwrap();
        let l = a.lift(2).unwrap();
        assert_eq!(l.m(), 9);
        assert_eq!((l.p(), l.q()), (5, 6));
        // w' = 9^{5/6} = w², floor 6, ceil 7: 6^6 = 46656 <= 9^5 = 59049 < 7^6 = 117649
        assert_eq!((l.floor_w(), l.ceil_w()), (6, 7));
        // degenerate after lifting: (2, 1/2) → base 4, w' = 2
        let d = AlphaParam::new(2, 1, 2).unwrap().lift(2).unwrap();
        assert!(d.is_degenerate());
    }
}
