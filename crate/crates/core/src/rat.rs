//! Exact rational arithmetic used for every rate, bound and flow value.
//!
//! All model rates are rationals and every solver works over them, so
//! feasibility verdicts and table reproductions are exact rather than
//! tolerance-bound.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type Rat = num_rational::BigRational;

/// Shorthand for `p/q` with small integer literals.
pub fn rat(p: i64, q: i64) -> Rat {
    assert!(q != 0, "zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Rational from an integer.
pub fn rint(p: i64) -> Rat {
    Rat::from_integer(BigInt::from(p))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// Parses `"p/q"` or `"p"`. Whitespace around the tokens is ignored.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = num
        .parse()
        .map_err(|_| format!("bad rational numerator in {s:?}"))?;
    let q: BigInt = den
        .parse()
        .map_err(|_| format!("bad rational denominator in {s:?}"))?;
    if q.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Rat::new(p, q))
}

/// Formats a rational as `p` when the denominator is one, `p/q` otherwise.
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Binomial coefficient as a rational, used by the binomial migration law.
pub fn binomial(n: u32, k: u32) -> Rat {
    if k > n {
        return zero();
    }
    let mut acc = one();
    for i in 0..k {
        acc *= Rat::new(BigInt::from(n - i), BigInt::from(i + 1));
    }
    acc
}

/// `base^exp` for small non-negative exponents.
pub fn pow(base: &Rat, exp: u32) -> Rat {
    let mut acc = one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Positive part `max(r, 0)`.
pub fn pos_part(r: &Rat) -> Rat {
    if r.is_negative() {
        zero()
    } else {
        r.clone()
    }
}

/// Lossy conversion for statistics and event sampling. Exact paths never
/// round-trip through this.
pub fn to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
