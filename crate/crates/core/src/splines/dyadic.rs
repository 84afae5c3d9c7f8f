//! Exact dyadic rationals `numerator / 2^k`.
//!
//! All knots and parameter boxes produced by refinement and splitting stay on
//! this lattice, so nestedness and adjacency can be decided with integer
//! arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::Error;

/// Largest supported denominator exponent.
pub const MAX_LOG2_DENOMINATOR: u32 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: i64,
    log2_denominator: u32,
}

impl DyadicRational {
    pub const ZERO: Self = Self { numerator: 0, log2_denominator: 0 };
    pub const ONE: Self = Self { numerator: 1, log2_denominator: 0 };
    pub const HALF: Self = Self { numerator: 1, log2_denominator: 1 };

    /// Builds `numerator / 2^log2_denominator` in canonical form.
    pub fn new(numerator: i64, log2_denominator: u32) -> Self {
        assert!(log2_denominator <= MAX_LOG2_DENOMINATOR, "dyadic denominator 2^{log2_denominator} too large");
        Self::canonical(numerator as i128, log2_denominator)
    }

    pub fn from_int(v: i64) -> Self {
        Self { numerator: v, log2_denominator: 0 }
    }

    fn canonical(mut num: i128, mut exp: u32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        while exp > 0 && num % 2 == 0 {
            num /= 2;
            exp -= 1;
        }
        assert!(exp <= MAX_LOG2_DENOMINATOR && num.abs() < (1i128 << 62), "dyadic rational out of range");
        Self { numerator: num as i64, log2_denominator: exp }
    }

    pub fn numerator(self) -> i64 {
        self.numerator
    }

    pub fn log2_denominator(self) -> u32 {
        self.log2_denominator
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (1u64 << self.log2_denominator) as f64
    }

    /// Numerators of `self` and `other` over the common denominator.
    fn aligned(self, other: Self) -> (i128, i128, u32) {
        let exp = self.log2_denominator.max(other.log2_denominator);
        let a = (self.numerator as i128) << (exp - self.log2_denominator);
        let b = (other.numerator as i128) << (exp - other.log2_denominator);
        (a, b, exp)
    }

    pub fn midpoint(self, other: Self) -> Self {
        let (a, b, exp) = self.aligned(other);
        Self::canonical(a + b, exp + 1)
    }

    /// `self * 2^-k`.
    pub fn halve_n(self, k: u32) -> Self {
        Self::canonical(self.numerator as i128, self.log2_denominator + k)
    }

    /// If `self == ±2^e` for some integer `e` (possibly negative), returns `e`.
    pub fn power_of_two_exponent(self) -> Option<i32> {
        let n = self.numerator.unsigned_abs();
        if n == 0 || !n.is_power_of_two() {
            return None;
        }
        Some(n.trailing_zeros() as i32 - self.log2_denominator as i32)
    }

    /// Exact division by a (signed) power of two; `None` for other divisors.
    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        let e = rhs.power_of_two_exponent()?;
        let sign: i128 = if rhs.numerator < 0 { -1 } else { 1 };
        let num = sign * self.numerator as i128;
        if e >= 0 {
            let e = e as u32;
            // num / 2^(log2 + e)
            Some(Self::canonical(num, self.log2_denominator + e))
        } else {
            let shift = (-e) as u32;
            if shift <= self.log2_denominator {
                Some(Self::canonical(num, self.log2_denominator - shift))
            } else {
                Some(Self::canonical(num << (shift - self.log2_denominator), 0))
            }
        }
    }

    pub fn abs(self) -> Self {
        Self { numerator: self.numerator.abs(), log2_denominator: self.log2_denominator }
    }

    pub fn is_zero(self) -> bool {
        self.numerator == 0
    }

    /// Whether the value lies in the closed unit interval.
    pub fn in_unit_interval(self) -> bool {
        self >= Self::ZERO && self <= Self::ONE
    }

    /// Parses `3/8`, `-1`, `0.375` (finite binary fractions only).
    pub fn parse(s: &str) -> Result<Self, Error> {
        let err = |msg: &str| Error::Parse { location: format!("'{s}'"), message: msg.to_string() };
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err("bad numerator"))?;
            let d: u64 = d.trim().parse().map_err(|_| err("bad denominator"))?;
            if d == 0 || !d.is_power_of_two() {
                return Err(err("denominator must be a power of two"));
            }
            let k = d.trailing_zeros();
            if k > MAX_LOG2_DENOMINATOR {
                return Err(err("denominator too large"));
            }
            return Ok(Self::new(n, k));
        }
        // exact decimal: N / 10^d is dyadic iff 5^d divides N
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty()
            || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
            || frac_part.len() > 25
        {
            return Err(err("not a number"));
        }
        let digits = format!("{int_part}{frac_part}");
        let n: i128 = digits.parse().map_err(|_| err("not a number"))?;
        let d = frac_part.len() as u32;
        let five = 5i128.pow(d);
        if n % five != 0 {
            return Err(err("value is not a dyadic rational"));
        }
        let n = if neg { -(n / five) } else { n / five };
        if d > MAX_LOG2_DENOMINATOR || n.abs() >= (1i128 << 62) {
            return Err(err("value out of range"));
        }
        Ok(Self::canonical(n, d))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for DyadicRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b, exp) = self.aligned(rhs);
        Self::canonical(a + b, exp)
    }
}

impl Sub for DyadicRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (a, b, exp) = self.aligned(rhs);
        Self::canonical(a - b, exp)
    }
}

impl Mul for DyadicRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::canonical(self.numerator as i128 * rhs.numerator as i128, self.log2_denominator + rhs.log2_denominator)
    }
}

impl Neg for DyadicRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self { numerator: -self.numerator, log2_denominator: self.log2_denominator }
    }
}

impl From<i64> for DyadicRational {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl FromStr for DyadicRational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::parse(s)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_denominator == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}", self.numerator, 1u64 << self.log2_denominator)
        }
    }
}
