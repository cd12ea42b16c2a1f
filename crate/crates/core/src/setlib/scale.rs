use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_ratio(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

/// `2^{-j}` exactly.
pub fn q_dyadic(j: u32) -> Q {
    Q::new(BigInt::one(), BigInt::one() << j as usize)
}

/// Exact value of a finite float.
pub fn q_from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::InvalidParam(format!("non-finite value {x}")))
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn q_parse(s: &str) -> Result<Q> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        Ok(Q::new(p, q))
    } else if let Ok(n) = s.parse::<BigInt>() {
        Ok(Q::from_integer(n))
    } else {
        let x: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
        q_from_f64(x)
    }
}

pub fn q_fmt(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Natural log of a positive rational, accurate even when the value
/// under- or overflows `f64`.
pub fn q_ln(q: &Q) -> f64 {
    fn big_ln(n: &BigInt) -> f64 {
        let bits = n.bits();
        if bits <= 1000 {
            return n.to_f64().unwrap_or(f64::NAN).ln();
        }
        let shift = bits - 60;
        let top = (n >> shift as usize).to_f64().unwrap_or(f64::NAN);
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
    if !q.is_positive() {
        return f64::NAN;
    }
    big_ln(q.numer()) - big_ln(q.denom())
}

/// `ceil(q)` as an integer count; `q` must be nonnegative.
pub fn q_ceil_u64(q: &Q) -> u64 {
    debug_assert!(!q.is_negative());
    q.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// An exact positive scale `δ`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scale(Q);

impl Scale {
    pub fn new(q: Q) -> Result<Self> {
        if !q.is_positive() {
            return Err(Error::InvalidParam(format!("scale must be positive, got {}", q_fmt(&q))));
        }
        Ok(Scale(q))
    }

    pub fn dyadic(j: u32) -> Self {
        Scale(q_dyadic(j))
    }

    pub fn triadic(j: u32) -> Self {
        Scale(Q::new(BigInt::one(), num_traits::pow(BigInt::from(3), j as usize)))
    }

    pub fn decimal(j: u32) -> Self {
        Scale(Q::new(BigInt::one(), num_traits::pow(BigInt::from(10), j as usize)))
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        Self::new(q_from_f64(x)?)
    }

    pub fn value(&self) -> &Q {
        &self.0
    }

    pub fn as_f64(&self) -> f64 {
        q_to_f64(&self.0)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&q_fmt(&self.0))
    }
}

/// A named grid of decreasing scales, textual form `dyadic:1..12`,
/// `triadic:1..12`, `decimal:1..12` or a comma list of rationals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ScaleGrid {
    Dyadic { lo: u32, hi: u32 },
    Triadic { lo: u32, hi: u32 },
    Decimal { lo: u32, hi: u32 },
    List(Vec<Scale>),
}

impl ScaleGrid {
    pub fn scales(&self) -> Vec<Scale> {
        match self {
            ScaleGrid::Dyadic { lo, hi } => (*lo..=*hi).map(Scale::dyadic).collect(),
            ScaleGrid::Triadic { lo, hi } => (*lo..=*hi).map(Scale::triadic).collect(),
            ScaleGrid::Decimal { lo, hi } => (*lo..=*hi).map(Scale::decimal).collect(),
            ScaleGrid::List(v) => {
                let mut v = v.clone();
                v.sort_by(|a, b| b.cmp(a));
                v.dedup();
                v
            }
        }
    }
}

impl fmt::Display for ScaleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleGrid::Dyadic { lo, hi } => write!(f, "dyadic:{lo}..{hi}"),
            ScaleGrid::Triadic { lo, hi } => write!(f, "triadic:{lo}..{hi}"),
            ScaleGrid::Decimal { lo, hi } => write!(f, "decimal:{lo}..{hi}"),
            ScaleGrid::List(v) => {
                let parts: Vec<String> = v.iter().map(|s| s.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for ScaleGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some((kind, range)) = s.split_once(':') {
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| Error::Parse(format!("expected lo..hi in `{s}`")))?;
            let lo: u32 = lo.trim().parse().map_err(|_| Error::Parse(format!("bad range in `{s}`")))?;
            let hi: u32 = hi.trim().parse().map_err(|_| Error::Parse(format!("bad range in `{s}`")))?;
            if lo > hi {
                return Err(Error::Parse(format!("empty range in `{s}`")));
            }
            return match kind {
                "dyadic" => Ok(ScaleGrid::Dyadic { lo, hi }),
                "triadic" => Ok(ScaleGrid::Triadic { lo, hi }),
                "decimal" => Ok(ScaleGrid::Decimal { lo, hi }),
                other => Err(Error::Parse(format!("unknown scale grid `{other}`"))),
            };
        }
        let v = s
            .split(',')
            .map(|p| Scale::new(q_parse(p)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaleGrid::List(v))
    }
}

impl From<ScaleGrid> for String {
    fn from(g: ScaleGrid) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for ScaleGrid {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_and_print() {
        for s in ["dyadic:1..12", "triadic:2..5", "decimal:1..3"] {
            let g: ScaleGrid = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        let g: ScaleGrid = "1/4,1/2,1/8".parse().unwrap();
        let v = g.scales();
        assert_eq!(v[0], Scale::new(q_ratio(1, 2)).unwrap());
        assert_eq!(v[2], Scale::dyadic(3));
        assert!("dyadic:3..1".parse::<ScaleGrid>().is_err());
        assert!("0".parse::<ScaleGrid>().is_err());
    }

    #[test]
    fn exact_values() {
        assert_eq!(Scale::triadic(2).value(), &q_ratio(1, 9));
        assert_eq!(q_parse("3/12").unwrap(), q_ratio(1, 4));
        assert_eq!(q_parse("0.5").unwrap(), q_ratio(1, 2));
        assert_eq!(q_ceil_u64(&q_ratio(7, 2)), 4);
    }
}
