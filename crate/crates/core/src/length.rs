//! Exact lengths as `i64` rationals, plus the `"p/q"` string form used by
//! every file format.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Length = Ratio<i64>;

pub fn parse_length(s: &str) -> Result<Length> {
    let s = s.trim();
    let bad = || Error::ParseLength(s.to_string());
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Ratio::new(p, q))
        }
        None => {
            let p: i64 = s.parse().map_err(|_| bad())?;
            Ok(Ratio::from_integer(p))
        }
    }
}

pub fn format_length(l: &Length) -> String {
    format!("{}/{}", l.numer(), l.denom())
}

pub fn to_f64(l: &Length) -> f64 {
    *l.numer() as f64 / *l.denom() as f64
}

/// Least common multiple of the denominators, with overflow detection.
pub fn common_denominator<'a>(lengths: impl IntoIterator<Item = &'a Length>) -> Result<i64> {
    let mut den: i64 = 1;
    for l in lengths {
        let d = *l.denom();
        let g = den.gcd(&d);
        den = (den / g).checked_mul(d).ok_or(Error::Overflow)?;
    }
    Ok(den)
}

/// Numerator of `l` over the common denominator `den`.
pub fn scale_to(l: &Length, den: i64) -> Result<i64> {
    let factor = den / l.denom();
    l.numer().checked_mul(factor).ok_or(Error::Overflow)
}

pub fn serialize<S: Serializer>(l: &Length, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_length(l))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Length, D::Error> {
    let s = String::deserialize(d)?;
    parse_length(&s).map_err(serde::de::Error::custom)
}
