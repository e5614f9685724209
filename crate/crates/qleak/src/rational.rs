//! Exact rational arithmetic helpers.
//!
//! Every probability handled by the crate is a [`Prob`], an arbitrary
//! precision rational. Decimal literals are read exactly (`0.25` is `1/4`).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number used for probabilities and derived quantities.
pub type Prob = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{0}`")]
pub struct RationalParseError(pub String);

pub fn zero() -> Prob {
    Prob::zero()
}

pub fn one() -> Prob {
    Prob::one()
}

pub fn ratio(num: i64, den: i64) -> Prob {
    Prob::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Prob {
    Prob::from_integer(BigInt::from(n))
}

/// Parses `num/den`, an integer, or a decimal such as `0.25` or `.5`.
pub fn parse_rational(text: &str) -> Result<Prob, RationalParseError> {
    let t = text.trim();
    let bad = || RationalParseError(text.to_string());
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_int(n.trim()).ok_or_else(bad)?;
        let d = parse_int(d.trim()).ok_or_else(bad)?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Prob::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let d = num::pow(BigInt::from(10), frac.len());
    let r = Prob::new(n, d);
    Ok(if neg { -r } else { r })
}

fn parse_int(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix('-').unwrap_or(s);
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Canonical exact rendering: `n` for integers, `n/d` otherwise.
pub fn fmt_rational(r: &Prob) -> String {
    r.to_string()
}

pub fn to_f64(r: &Prob) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Short decimal approximation for human-oriented output.
pub fn fmt_decimal(r: &Prob) -> String {
    let v = to_f64(r);
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn is_probability(r: &Prob) -> bool {
    !r.is_negative() && *r <= Prob::one()
}

pub fn sum<'a>(items: impl IntoIterator<Item = &'a Prob>) -> Prob {
    items.into_iter().fold(Prob::zero(), |acc, x| acc + x)
}
