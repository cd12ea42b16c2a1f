//! Functions sampled on a uniform vertex grid with multilinear interpolation.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setlib::scale::{q_to_f64, Q};
use crate::setlib::DyadicCubeSet;

/// Largest vertex grid a sampled function may carry.
pub const MAX_VERTICES: usize = 1 << 24;

/// A nondecreasing bound `ω̄` with `|f(x) - f(y)| <= ω̄(|x - y|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Modulus {
    /// `c t^alpha`
    Holder { c: f64, alpha: f64 },
    /// Step bound: `ω̄(t)` is the value at the smallest tabulated `t_i >= t`
    /// (the last value beyond the table).
    Table(Vec<(f64, f64)>),
}

impl Modulus {
    pub fn zero() -> Self {
        Modulus::Holder { c: 0.0, alpha: 1.0 }
    }

    pub fn lipschitz(c: f64) -> Self {
        Modulus::Holder { c: c.abs(), alpha: 1.0 }
    }

    pub fn table(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParam("empty modulus table".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut running = 0.0f64;
        for p in pairs.iter_mut() {
            if !(p.0 > 0.0) || !(p.1 >= 0.0) || !p.1.is_finite() {
                return Err(Error::InvalidParam(format!("bad modulus table entry {}:{}", p.0, p.1)));
            }
            running = running.max(p.1);
            p.1 = running;
        }
        Ok(Modulus::Table(pairs))
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Modulus::Holder { c, alpha } => {
                if *c == 0.0 {
                    0.0
                } else {
                    c * t.powf(*alpha)
                }
            }
            Modulus::Table(pairs) => {
                let i = pairs.partition_point(|p| p.0 < t);
                pairs.get(i).unwrap_or(&pairs[pairs.len() - 1]).1
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Modulus::Holder { c, .. } => *c == 0.0,
            Modulus::Table(pairs) => pairs.iter().all(|p| p.1 == 0.0),
        }
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulus::Holder { c, alpha } => write!(f, "holder {} {}", num17(*c), num17(*alpha)),
            Modulus::Table(pairs) => {
                f.write_str("table")?;
                for (t, v) in pairs {
                    write!(f, " {}:{}", num17(*t), num17(*v))?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Modulus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t: Vec<&str> = s.split_whitespace().collect();
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{v}` in modulus")));
        match t.as_slice() {
            ["holder", c, alpha] => Ok(Modulus::Holder { c: num(c)?, alpha: num(alpha)? }),
            ["table", pairs @ ..] => {
                let pairs = pairs
                    .iter()
                    .map(|p| {
                        let (a, b) = p.split_once(':').ok_or_else(|| Error::Parse(format!("bad table pair `{p}`")))?;
                        Ok((num(a)?, num(b)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Modulus::table(pairs)
            }
            _ => Err(Error::Parse(format!("bad modulus `{s}`"))),
        }
    }
}

impl From<Modulus> for String {
    fn from(m: Modulus) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Modulus {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// 17 significant digits.
pub fn num17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// Values of a function on the vertices `i 2^{-m}` of `[0,1]^d`, restricted
/// to the vertices of a domain cube set; multilinear inside each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    dim: u32,
    depth: u32,
    domain: DyadicCubeSet,
    /// Dense over all `(2^m + 1)^d` vertices; NaN off the domain.
    values: Vec<f64>,
    modulus: Modulus,
}

impl SampledFunction {
    /// Samples `f` (given the vertex multi-index) at every domain vertex.
    pub fn from_vertex_fn<F>(domain: DyadicCubeSet, depth: u32, modulus: Modulus, f: F) -> Result<Self>
    where
        F: Fn(&[u64]) -> f64 + Sync,
    {
        let dim = domain.dim();
        if domain.depth() > depth {
            return Err(Error::InvalidParam(format!(
                "domain depth {} exceeds grid depth {depth}",
                domain.depth()
            )));
        }
        let n = (1u64 << depth) + 1;
        let total = (n as u128).pow(dim);
        if total > MAX_VERTICES as u128 {
            return Err(Error::InvalidParam(format!("grid of {total} vertices exceeds {MAX_VERTICES}")));
        }
        let mask = vertex_mask(&domain, depth)?;
        use rayon::prelude::*;
        let values: Vec<f64> = (0..total as u64)
            .into_par_iter()
            .map(|lin| {
                if !mask[lin as usize] {
                    return f64::NAN;
                }
                let idx = unpack_vertex(lin, dim, n);
                f(&idx)
            })
            .collect();
        if let Some(bad) = values.iter().zip(&mask).position(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::InvalidParam(format!("non-finite value at vertex {bad}")));
        }
        Ok(SampledFunction { dim, depth, domain, values, modulus })
    }

    /// Same function sampled on the coarser vertex grid of `depth`; the
    /// modulus carries over unchanged.
    pub fn coarsen(&self, depth: u32) -> Result<Self> {
        if depth > self.depth || depth < self.domain.depth() {
            return Err(Error::InvalidParam(format!(
                "depth {depth} outside [{}, {}]",
                self.domain.depth(),
                self.depth
            )));
        }
        let shift = self.depth - depth;
        let n = self.side_vertices();
        Self::from_vertex_fn(self.domain.clone(), depth, self.modulus.clone(), |idx| {
            let fine: Vec<u64> = idx.iter().map(|&i| i << shift).collect();
            self.values[pack_vertex(&fine, n) as usize]
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn spacing(&self) -> f64 {
        2f64.powi(-(self.depth as i32))
    }

    pub fn domain(&self) -> &DyadicCubeSet {
        &self.domain
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn with_modulus(mut self, modulus: Modulus) -> Self {
        self.modulus = modulus;
        self
    }

    /// Vertices per axis.
    pub fn side_vertices(&self) -> u64 {
        (1u64 << self.depth) + 1
    }

    pub fn vertex_value(&self, idx: &[u64]) -> Option<f64> {
        let v = self.values[pack_vertex(idx, self.side_vertices()) as usize];
        v.is_finite().then_some(v)
    }

    /// Domain vertices with values, lexicographic.
    pub fn domain_values(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, &v)| (i as u64, v))
    }

    pub fn unpack_vertex(&self, lin: u64) -> Vec<u64> {
        unpack_vertex(lin, self.dim, self.side_vertices())
    }

    /// Multilinear interpolation of the containing cell.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim as usize || !self.domain.contains_point(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        self.interpolate(x).ok_or_else(|| Error::OutsideDomain(x.to_vec()))
    }

    fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let cells = 1u64 << self.depth;
        let scale = cells as f64;
        let d = self.dim as usize;
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for &v in x {
            let t = v * scale;
            let c = (t.floor().max(0.0) as u64).min(cells - 1);
            base.push(c);
            frac.push((t - c as f64).clamp(0.0, 1.0));
        }
        let n = self.side_vertices();
        let mut acc = 0.0;
        for corner in 0..(1u32 << d) {
            let mut w = 1.0;
            let mut lin = 0u64;
            for i in 0..d {
                let bit = (corner >> (d - 1 - i)) & 1;
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                lin = lin * n + base[i] + bit as u64;
            }
            if w == 0.0 {
                continue;
            }
            let v = self.values[lin as usize];
            if !v.is_finite() {
                return None;
            }
            acc += w * v;
        }
        Some(acc)
    }

    /// Min and max over the closed box `[lo, hi]` (clipped to `[0,1]^d`,
    /// domain vertices only). Exact for the interpolant: extremes of a
    /// multilinear function on a box sit at its corners, so it suffices to
    /// test the grid coordinates inside the box together with its faces.
    pub fn range_f64(&self, lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
        let cells = 1u64 << self.depth;
        let scale = cells as f64;
        let coords: Vec<Vec<f64>> = (0..self.dim as usize)
            .map(|i| {
                let a = lo[i].clamp(0.0, 1.0);
                let b = hi[i].clamp(0.0, 1.0);
                let mut c = vec![a];
                let first = (a * scale).floor() as u64 + 1;
                let last = ((b * scale).ceil() as u64).saturating_sub(1);
                for k in first..=last.min(cells) {
                    let v = k as f64 / scale;
                    if v > a && v < b {
                        c.push(v);
                    }
                }
                if b > a {
                    c.push(b);
                }
                c
            })
            .collect();
        let mut best: Option<(f64, f64)> = None;
        let mut pos = vec![0usize; coords.len()];
        let mut p = vec![0.0; coords.len()];
        loop {
            for i in 0..pos.len() {
                p[i] = coords[i][pos[i]];
            }
            if self.domain.contains_point(&p) {
                if let Some(v) = self.interpolate(&p) {
                    best = Some(match best {
                        None => (v, v),
                        Some((a, b)) => (a.min(v), b.max(v)),
                    });
                }
            }
            let mut axis = 0;
            while axis < pos.len() {
                pos[axis] += 1;
                if pos[axis] < coords[axis].len() {
                    break;
                }
                pos[axis] = 0;
                axis += 1;
            }
            if axis == pos.len() {
                return best;
            }
        }
    }

    /// Maps every domain value through `g`.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut().filter(|v| v.is_finite()) {
            *v = g(*v);
        }
        out
    }

    /// Largest absolute difference of adjacent vertex values.
    pub fn max_adjacent_jump(&self) -> f64 {
        let n = self.side_vertices();
        let d = self.dim as usize;
        let mut best = 0.0f64;
        for (lin, v) in self.domain_values() {
            let idx = unpack_vertex(lin, self.dim, n);
            for axis in 0..d {
                if idx[axis] + 1 < n {
                    let mut nb = idx.clone();
                    nb[axis] += 1;
                    let w = self.values[pack_vertex(&nb, n) as usize];
                    if w.is_finite() {
                        best = best.max((w - v).abs());
                    }
                }
            }
        }
        best
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "d {} m {} domain {} domain_depth {}",
            self.dim,
            self.depth,
            self.domain.len(),
            self.domain.depth()
        );
        for idx in self.domain.indices() {
            let parts: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(out, "{}", parts.join(" "));
        }
        out.push_str("values\n");
        for (_, v) in self.domain_values() {
            out.push_str(&num17(v));
            out.push('\n');
        }
        let _ = writeln!(out, "modulus {}", self.modulus);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty function file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad function header `{header}`"));
        let (dim, depth, count, ddepth) = match h.as_slice() {
            ["d", d, "m", m, "domain", c, "domain_depth", dd] => (
                d.parse::<u32>().map_err(|_| bad())?,
                m.parse::<u32>().map_err(|_| bad())?,
                c.parse::<usize>().map_err(|_| bad())?,
                dd.parse::<u32>().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        let mut idx = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated domain list".into()))?;
            let v = line
                .split_whitespace()
                .map(str::parse::<u64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("bad domain cube `{line}`")))?;
            idx.push(v);
        }
        let domain = DyadicCubeSet::new(dim, ddepth, &idx)?;
        if lines.next() != Some("values") {
            return Err(Error::Parse("expected `values`".into()));
        }
        let mut vals = Vec::new();
        let mut modulus = None;
        for line in lines {
            if let Some(rest) = line.strip_prefix("modulus ") {
                modulus = Some(rest.parse::<Modulus>()?);
                break;
            }
            vals.push(line.parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{line}`")))?);
        }
        let modulus = modulus.ok_or_else(|| Error::Parse("missing modulus line".into()))?;
        let mask = vertex_mask(&domain, depth)?;
        let expected = mask.iter().filter(|&&m| m).count();
        if expected != vals.len() {
            return Err(Error::Parse(format!("expected {expected} values, found {}", vals.len())));
        }
        let mut it = vals.into_iter();
        let values: Vec<f64> = mask.iter().map(|&m| if m { it.next().unwrap_or(f64::NAN) } else { f64::NAN }).collect();
        Ok(SampledFunction { dim, depth, domain, values, modulus })
    }
}

/// Closed-cube membership of each grid vertex in the domain.
fn vertex_mask(domain: &DyadicCubeSet, depth: u32) -> Result<Vec<bool>> {
    let dim = domain.dim();
    let n = (1u64 << depth) + 1;
    let total = (n as u128).pow(dim) as usize;
    let mut mask = vec![false; total];
    let shift = depth - domain.depth();
    let per = 1u64 << shift;
    for idx in domain.indices() {
        let lo: Vec<u64> = idx.iter().map(|k| k << shift).collect();
        let mut off = vec![0u64; dim as usize];
        loop {
            let v: Vec<u64> = lo.iter().zip(&off).map(|(a, b)| a + b).collect();
            mask[pack_vertex(&v, n) as usize] = true;
            let mut axis = 0;
            while axis < off.len() {
                off[axis] += 1;
                if off[axis] <= per {
                    break;
                }
                off[axis] = 0;
                axis += 1;
            }
            if axis == off.len() {
                break;
            }
        }
    }
    Ok(mask)
}

pub fn pack_vertex(idx: &[u64], n: u64) -> u64 {
    idx.iter().fold(0u64, |acc, &k| acc * n + k)
}

pub fn unpack_vertex(mut lin: u64, dim: u32, n: u64) -> Vec<u64> {
    let mut out = vec![0u64; dim as usize];
    for slot in out.iter_mut().rev() {
        *slot = lin % n;
        lin /= n;
    }
    out
}

/// `f64` coordinates of an exact point.
pub fn point_f64(x: &[Q]) -> Vec<f64> {
    x.iter().map(q_to_f64).collect()
}

/// Integer grid coordinate `floor(q 2^m)` clamped to `[0, 2^m]`.
pub fn grid_floor(q: &Q, depth: u32) -> u64 {
    let scaled = q * Q::from_integer(BigInt::from(1u64) << depth as usize);
    scaled.floor().to_integer().to_u64().unwrap_or(0).min(1u64 << depth)
}
