//! Exact rational arithmetic helpers and the mixed exact/approximate number
//! type produced by numeric expressions.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back on a lossy quotient when either part overflows f64.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact square root when both numerator and denominator are perfect squares.
pub fn exact_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// Parse `4`, `-4.5`, `3/2` or `-1/3`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        if !is_digits(n) || !is_digits(d) {
            return None;
        }
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Rational::new(n.parse().ok()?, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        if !is_digits(int) || !is_digits(frac) {
            return None;
        }
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let digits: BigInt = format!("{int}{frac}").parse().ok()?;
        Rational::new(digits, scale)
    } else {
        if !is_digits(body) {
            return None;
        }
        Rational::from_integer(body.parse().ok()?)
    };
    Some(if neg { -value } else { value })
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Canonical text form: exact decimal when the expansion terminates,
/// otherwise `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if d != BigInt::from(1) {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = (r * Rational::from_integer(BigInt::from(10).pow(places))).to_integer();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let places = places as usize;
    let padded = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int, frac) = padded.split_at(padded.len() - places);
    format!("{}{int}.{frac}", if neg { "-" } else { "" })
}

/// A numeric value: exact while only rational operations are involved,
/// approximate once a square root, an angle or π enters.
#[derive(Clone, Debug, PartialEq)]
pub enum Num {
    Exact(Rational),
    Approx(f64),
}

impl Num {
    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => to_f64(r),
            Num::Approx(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Num::Exact(_))
    }

    pub fn add(&self, other: &Num) -> Num {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => Num::Exact(a + b),
            _ => Num::Approx(self.to_f64() + other.to_f64()),
        }
    }

    pub fn sub(&self, other: &Num) -> Num {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => Num::Exact(a - b),
            _ => Num::Approx(self.to_f64() - other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Num) -> Num {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => Num::Exact(a * b),
            _ => Num::Approx(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(&self) -> Num {
        match self {
            Num::Exact(a) => Num::Exact(-a),
            Num::Approx(v) => Num::Approx(-v),
        }
    }

    /// Ordering used for `<`, `<=`, `>`, `>=`.
    pub fn partial_cmp_num(&self, other: &Num) -> Option<Ordering> {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }

    /// Equality: exact on rationals, within `eps` once either side is approximate.
    pub fn eq_within(&self, other: &Num, eps: f64) -> bool {
        match (self, other) {
            (Num::Exact(a), Num::Exact(b)) => a == b,
            _ => (self.to_f64() - other.to_f64()).abs() <= eps,
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) => f.write_str(&format_rational(r)),
            Num::Approx(v) => write!(f, "{v}"),
        }
    }
}
