//! Helpers for exact rational scores: parsing and text formatting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Formats `r` as `p/q`, or just `p` when the value is an integer.
pub fn fraction_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact decimal expansion when the denominator only has factors 2 and 5,
/// otherwise the `p/q` form.
pub fn exact_string(r: &BigRational) -> String {
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let ten = BigInt::from(10);
    let mut digits = 0usize;
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return fraction_string(r);
    }
    digits += twos.max(fives);
    if digits == 0 {
        return r.numer().to_string();
    }
    let scaled = r * BigRational::from_integer(ten.pow(digits as u32));
    let int = scaled.to_integer();
    let neg = int.is_negative();
    let mut s = int.abs().to_string();
    if s.len() <= digits {
        s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
    }
    let (whole, frac) = s.split_at(s.len() - digits);
    format!("{}{}.{}", if neg { "-" } else { "" }, whole, frac)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `p/q`, a decimal like `0.85`, or a percentage like `85%`.
pub fn parse_ratio(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some(pct) = text.strip_suffix('%') {
        return parse_ratio(pct).map(|r| r / BigRational::from_integer(BigInt::from(100)));
    }
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = BigInt::from(10).pow(frac.len() as u32);
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// Half-up rounding of a non-negative rational to `places` decimals.
pub fn round_half_up(r: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10).pow(places);
    let scaled = r * BigRational::from_integer(scale.clone());
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let k = (scaled + half).floor().to_integer();
    fixed_point(&k, places as usize)
}

/// Renders the integer `k` as `k / 10^places` in fixed-point notation.
pub(crate) fn fixed_point(k: &BigInt, places: usize) -> String {
    let mut s = k.to_string();
    if places == 0 {
        return s;
    }
    if s.len() <= places {
        s = format!("{}{}", "0".repeat(places + 1 - s.len()), s);
    }
    let (whole, frac) = s.split_at(s.len() - places);
    format!("{whole}.{frac}")
}
