//! Benchmark functions: constant, affine, Weierstrass series, Cantor function.
//!
//! All generators depend on the first coordinate only, so the declared
//! moduli hold in the max norm in every dimension.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::sampled::{Modulus, SampledFunction};
use crate::error::{Error, Result};
use crate::setlib::scale::{q_int, Q};
use crate::setlib::DyadicCubeSet;

pub const DEFAULT_WEIERSTRASS_TERMS: u32 = 25;
/// Ternary digits resolved by the Cantor function recursion.
pub const CANTOR_LEVELS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TestFunction {
    Constant { c: f64 },
    Affine { c: f64 },
    /// `Σ_{n<terms} a^n cos(2π b^n x)`
    Weierstrass { a: f64, b: u64, terms: u32 },
    Cantor,
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::Constant { c } | TestFunction::Affine { c } if !c.is_finite() => {
                Err(Error::InvalidParam(format!("coefficient must be finite, got {c}")))
            }
            TestFunction::Weierstrass { a, b, terms } => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidParam(format!("weierstrass needs 0 < a < 1, got {a}")));
                }
                if b < 3 || b % 2 == 0 {
                    return Err(Error::InvalidParam(format!("weierstrass needs an odd integer b >= 3, got {b}")));
                }
                if a * b as f64 <= 1.0 {
                    return Err(Error::InvalidParam(format!("weierstrass needs ab > 1, got {}", a * b as f64)));
                }
                if terms == 0 || terms > 40 {
                    return Err(Error::InvalidParam(format!("weierstrass terms must lie in 1..=40, got {terms}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Declared modulus of continuity.
    pub fn modulus(&self) -> Modulus {
        match *self {
            TestFunction::Constant { .. } => Modulus::zero(),
            TestFunction::Affine { c } => Modulus::lipschitz(c),
            TestFunction::Weierstrass { a, b, .. } => {
                let b = b as f64;
                let c = (2.0 * PI / (a * b - 1.0) + 2.0 / (1.0 - a)) / a;
                Modulus::Holder { c, alpha: (1.0 / a).ln() / b.ln() }
            }
            TestFunction::Cantor => Modulus::Holder { c: 2.0, alpha: 2f64.ln() / 3f64.ln() },
        }
    }

    /// Value at `x` (first coordinate).
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Constant { c } => c,
            TestFunction::Affine { c } => c * x,
            TestFunction::Weierstrass { a, b, terms } => weierstrass(a, b, terms, x),
            TestFunction::Cantor => cantor_f64(x),
        }
    }

    /// Value at the grid point `i 2^{-m}`.
    pub fn grid_value(&self, i: u64, depth: u32) -> f64 {
        match *self {
            TestFunction::Weierstrass { a, b, terms } if depth <= 64 => weierstrass_dyadic(a, b, terms, i as u128, depth),
            TestFunction::Cantor if depth <= 64 => cantor_dyadic(i as u128, depth),
            _ => self.value(i as f64 * 2f64.powi(-(depth as i32))),
        }
    }
}

/// Samples a generator on the full cube at grid depth `m`.
pub fn make_test_function(f: &TestFunction, dim: u32, depth: u32) -> Result<SampledFunction> {
    f.validate()?;
    let domain = DyadicCubeSet::full(dim, 0)?;
    let g = f.clone();
    SampledFunction::from_vertex_fn(domain, depth, f.modulus(), move |idx| g.grid_value(idx[0], depth))
}

/// Fractional part of `b^n i / 2^m`, exact.
fn weierstrass_dyadic(a: f64, b: u64, terms: u32, i: u128, depth: u32) -> f64 {
    let modulus: u128 = 1u128 << depth;
    let mask = modulus - 1;
    let denom = modulus as f64;
    let mut bn: u128 = 1;
    let mut an = 1.0;
    let mut acc = 0.0;
    for _ in 0..terms {
        let phase = ((bn * (i & mask)) & mask) as f64 / denom;
        acc += an * (2.0 * PI * phase).cos();
        bn = (bn * b as u128) & mask;
        an *= a;
    }
    acc
}

fn weierstrass(a: f64, b: u64, terms: u32, x: f64) -> f64 {
    // Every finite double is `mant 2^exp`; integer parts drop out of the
    // phase, so the exact form applies whenever `-exp <= 64`.
    if x.is_finite() {
        let (mant, exp) = decompose(x.abs());
        if exp >= 0 {
            return weierstrass_dyadic(a, b, terms, 0, 0);
        }
        if -exp <= 64 {
            let depth = (-exp) as u32;
            let i = (mant as u128) & ((1u128 << depth) - 1);
            return weierstrass_dyadic(a, b, terms, i, depth);
        }
    }
    let mut acc = 0.0;
    let mut an = 1.0;
    let mut bn = 1.0;
    for _ in 0..terms {
        acc += an * (2.0 * PI * (bn * x).fract()).cos();
        an *= a;
        bn *= b as f64;
    }
    acc
}

/// `x = mant 2^exp` with `mant` odd (or zero).
fn decompose(x: f64) -> (u64, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if raw_exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), raw_exp - 1075) };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    (mant, exp)
}

/// Cantor function at `i / 2^m`, exact up to `CANTOR_LEVELS` ternary digits.
fn cantor_dyadic(i: u128, depth: u32) -> f64 {
    let den: u128 = 1u128 << depth;
    if i >= den {
        return 1.0;
    }
    let mut p = i;
    let mut bits: u64 = 0;
    for level in 0..CANTOR_LEVELS {
        let t = 3 * p;
        let bit = 1u64 << (63 - level);
        if t < den {
            p = t;
        } else if t > 2 * den {
            bits |= bit;
            p = t - 2 * den;
        } else {
            bits |= bit;
            break;
        }
    }
    bits as f64 / 2f64.powi(64)
}

fn cantor_f64(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let (mant, exp) = decompose(x);
    if exp < 0 && -exp <= 120 {
        return cantor_dyadic(mant as u128, (-exp) as u32);
    }
    let q = Q::from_float(x).unwrap_or_else(Q::zero);
    crate::setlib::scale::q_to_f64(&cantor_q(&q))
}

/// Cantor function at an exact rational, resolved to `CANTOR_LEVELS` digits.
pub fn cantor_q(x: &Q) -> Q {
    let one = Q::one();
    if x <= &Q::zero() {
        return Q::zero();
    }
    if x >= &one {
        return one;
    }
    let third = Q::new(BigInt::from(1), BigInt::from(3));
    let two_thirds = &third * q_int(2);
    let mut p = x.clone();
    let mut acc = Q::zero();
    let mut w = Q::new(BigInt::from(1), BigInt::from(2));
    for _ in 0..CANTOR_LEVELS {
        if p < third {
            p *= q_int(3);
        } else if p > two_thirds {
            acc += &w;
            p = p * q_int(3) - q_int(2);
        } else {
            acc += &w;
            break;
        }
        w /= q_int(2);
    }
    acc
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Constant { c } => write!(f, "constant(c={c})"),
            TestFunction::Affine { c } => write!(f, "affine(c={c})"),
            TestFunction::Weierstrass { a, b, terms } => write!(f, "weierstrass(a={a},b={b},terms={terms})"),
            TestFunction::Cantor => f.write_str("cantor"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((n, rest)) => (
                n.trim(),
                rest.strip_suffix(')').ok_or_else(|| Error::Parse(format!("missing `)` in `{s}`")))?,
            ),
            None => (s, ""),
        };
        let mut params = std::collections::HashMap::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse(format!("bad parameter `{part}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("bad number in `{part}`")))?;
            params.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, default: Option<f64>| {
            params
                .get(k)
                .copied()
                .or(default)
                .ok_or_else(|| Error::Parse(format!("`{name}` needs parameter `{k}`")))
        };
        let allowed: &[&str] = match name {
            "constant" | "affine" => &["c"],
            "weierstrass" => &["a", "b", "terms"],
            "cantor" => &[],
            other => return Err(Error::Parse(format!("unknown function `{other}`"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown parameter `{k}` for `{name}`")));
        }
        let f = match name {
            "constant" => TestFunction::Constant { c: get("c", Some(0.0))? },
            "affine" => TestFunction::Affine { c: get("c", Some(1.0))? },
            "weierstrass" => {
                let b = get("b", Some(3.0))?;
                let terms = get("terms", Some(DEFAULT_WEIERSTRASS_TERMS as f64))?;
                if b.fract() != 0.0 || terms.fract() != 0.0 || b < 0.0 || terms < 0.0 {
                    return Err(Error::Parse("weierstrass b and terms must be integers".into()));
                }
                TestFunction::Weierstrass { a: get("a", Some(0.5))?, b: b as u64, terms: terms as u32 }
            }
            _ => TestFunction::Cantor,
        };
        f.validate()?;
        Ok(f)
    }
}

impl From<TestFunction> for String {
    fn from(f: TestFunction) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for TestFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setlib::scale::q_ratio;

    #[test]
    fn affine_values() {
        let f = make_test_function(&TestFunction::Affine { c: 2.0 }, 1, 10).unwrap();
        for i in [0u64, 1, 512, 1024] {
            assert_eq!(f.vertex_value(&[i]).unwrap(), 2.0 * i as f64 / 1024.0);
        }
        assert_eq!(f.evaluate(&[0.25]).unwrap(), 0.5);
    }

    #[test]
    fn weierstrass_series() {
        let w = TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 };
        let f = make_test_function(&w, 1, 12).unwrap();
        let geometric: f64 = (0..25).map(|n| 0.5f64.powi(n)).sum();
        assert!((f.vertex_value(&[0]).unwrap() - geometric).abs() < 1e-12);
        assert!((geometric - 2.0).abs() < 1e-7);
        for i in 1..4096u64 {
            let a = f.vertex_value(&[i]).unwrap();
            let b = f.vertex_value(&[4096 - i]).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // Direct summation agrees with the exact phase.
        let x: f64 = 0.3;
        let direct: f64 = (0..25).map(|n| 0.5f64.powi(n) * (2.0 * PI * 3f64.powi(n) * x).cos()).sum();
        assert!((w.value(x) - direct).abs() < 1e-6);
        assert!(TestFunction::Weierstrass { a: 0.3, b: 3, terms: 5 }.validate().is_err());
        assert!(TestFunction::Weierstrass { a: 0.5, b: 4, terms: 5 }.validate().is_err());
    }

    #[test]
    fn cantor_values() {
        assert_eq!(cantor_q(&q_ratio(1, 3)), q_ratio(1, 2));
        assert_eq!(cantor_q(&q_ratio(2, 3)), q_ratio(1, 2));
        assert_eq!(cantor_q(&q_ratio(1, 9)), q_ratio(1, 4));
        assert_eq!(cantor_q(&q_ratio(7, 9)), q_ratio(3, 4));
        let f = make_test_function(&TestFunction::Cantor, 1, 8).unwrap();
        assert_eq!(f.vertex_value(&[256]).unwrap(), 1.0);
        assert_eq!(f.vertex_value(&[0]).unwrap(), 0.0);
        assert_eq!(f.vertex_value(&[128]).unwrap(), 0.5);
        let tol = f.modulus().eval(f.spacing());
        assert!((f.evaluate(&[1.0 / 3.0]).unwrap() - 0.5).abs() <= tol);
        // Digit algorithm agrees with the rational recursion on the grid.
        for i in 0..=256u64 {
            let exact = crate::setlib::scale::q_to_f64(&cantor_q(&q_ratio(i as i64, 256)));
            assert!((f.vertex_value(&[i]).unwrap() - exact).abs() < 1e-15, "i={i}");
        }
    }

    #[test]
    fn names_roundtrip() {
        for s in ["constant(c=3)", "affine(c=-2)", "weierstrass(a=0.5,b=3,terms=25)", "cantor"] {
            assert_eq!(s.parse::<TestFunction>().unwrap().to_string(), s);
        }
        assert!("affine(k=2)".parse::<TestFunction>().is_err());
        assert!("sine".parse::<TestFunction>().is_err());
    }
}
