//! Sets of closed dyadic cubes in `[0,1]^d`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;

use super::intervals::IntervalSet;
use super::scale::{q_dyadic, q_from_f64, q_int, Q};
use crate::error::{Error, Result};

/// Largest number of cubes a set may hold.
pub const MAX_CELLS: usize = 1 << 26;

/// `d * m` must stay below this so a multi-index packs into one `u64`.
pub const MAX_INDEX_BITS: u32 = 63;

/// A subset of `[0,1]^d` given as a union of closed cubes
/// `Π [k_i 2^{-m}, (k_i + 1) 2^{-m}]` at a common depth `m`.
///
/// Multi-indices are packed row-major (first coordinate most significant)
/// and kept sorted, so iteration order is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicCubeSet {
    dim: u32,
    depth: u32,
    cells: Vec<u64>,
}

fn check_shape(dim: u32, depth: u32) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParam("dimension must be positive".into()));
    }
    if dim * depth > MAX_INDEX_BITS {
        return Err(Error::InvalidParam(format!(
            "dimension {dim} at depth {depth} exceeds the {MAX_INDEX_BITS}-bit index limit"
        )));
    }
    Ok(())
}

impl DyadicCubeSet {
    pub fn new(dim: u32, depth: u32, indices: &[Vec<u64>]) -> Result<Self> {
        check_shape(dim, depth)?;
        let side = 1u64 << depth;
        let mut cells = Vec::with_capacity(indices.len());
        for idx in indices {
            if idx.len() != dim as usize {
                return Err(Error::InvalidParam(format!(
                    "multi-index {idx:?} has {} entries, expected {dim}",
                    idx.len()
                )));
            }
            if let Some(bad) = idx.iter().find(|&&k| k >= side) {
                return Err(Error::InvalidParam(format!(
                    "index {bad} out of range 0..{side} at depth {depth}"
                )));
            }
            cells.push(pack(idx, depth));
        }
        Self::from_packed(dim, depth, cells)
    }

    /// Builds from packed indices; sorts and removes duplicates.
    pub fn from_packed(dim: u32, depth: u32, mut cells: Vec<u64>) -> Result<Self> {
        check_shape(dim, depth)?;
        if cells.len() > MAX_CELLS {
            return Err(Error::InvalidParam(format!("more than {MAX_CELLS} cubes")));
        }
        let limit = 1u64 << (dim * depth);
        if let Some(bad) = cells.iter().find(|&&c| c >= limit) {
            return Err(Error::InvalidParam(format!("packed index {bad} out of range")));
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(DyadicCubeSet { dim, depth, cells })
    }

    pub fn empty(dim: u32, depth: u32) -> Result<Self> {
        Self::from_packed(dim, depth, Vec::new())
    }

    pub fn full(dim: u32, depth: u32) -> Result<Self> {
        check_shape(dim, depth)?;
        let total = 1u64 << (dim * depth);
        if total as usize > MAX_CELLS {
            return Err(Error::InvalidParam(format!("full set at depth {depth} exceeds {MAX_CELLS} cubes")));
        }
        Ok(DyadicCubeSet { dim, depth, cells: (0..total).collect() })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn packed(&self) -> &[u64] {
        &self.cells
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-(self.depth as i32))
    }

    pub fn unpack(&self, packed: u64) -> Vec<u64> {
        unpack(packed, self.dim, self.depth)
    }

    pub fn indices(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        self.cells.iter().map(move |&c| unpack(c, self.dim, self.depth))
    }

    pub fn contains_index(&self, idx: &[u64]) -> bool {
        self.cells.binary_search(&pack(idx, self.depth)).is_ok()
    }

    /// Closed-cube membership: points on a shared face belong to every
    /// cube touching them.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        if x.len() != self.dim as usize || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return false;
        }
        let side = (1u64 << self.depth) as f64;
        let candidates: Vec<Vec<u64>> = x
            .iter()
            .map(|&v| {
                let t = v * side;
                let c = (t.floor() as u64).min((1u64 << self.depth) - 1);
                let mut out = vec![c];
                if t == t.floor() && c > 0 && (c as f64) == t {
                    out.push(c - 1);
                }
                out
            })
            .collect();
        self.any_in_product(&candidates)
    }

    /// Exact closed-cube membership for a rational point.
    pub fn contains_point_q(&self, x: &[Q]) -> bool {
        if x.len() != self.dim as usize {
            return false;
        }
        let zero = q_int(0);
        let one = q_int(1);
        let scale = Q::from_integer(BigInt::from(1u64) << self.depth as usize);
        let mut candidates = Vec::with_capacity(x.len());
        for v in x {
            if v < &zero || v > &one {
                return false;
            }
            let t = v * &scale;
            let fl = t.floor();
            let c: u64 = fl.to_integer().try_into().unwrap_or(u64::MAX).min((1u64 << self.depth) - 1);
            let mut out = vec![c];
            if t.is_integer() && c > 0 && Q::from_integer(BigInt::from(c)) == t {
                out.push(c - 1);
            }
            candidates.push(out);
        }
        self.any_in_product(&candidates)
    }

    fn any_in_product(&self, candidates: &[Vec<u64>]) -> bool {
        let mut idx = vec![0u64; candidates.len()];
        let mut pos = vec![0usize; candidates.len()];
        loop {
            for (i, p) in pos.iter().enumerate() {
                idx[i] = candidates[i][*p];
            }
            if self.contains_index(&idx) {
                return true;
            }
            let mut axis = 0;
            loop {
                if axis == pos.len() {
                    return false;
                }
                pos[axis] += 1;
                if pos[axis] < candidates[axis].len() {
                    break;
                }
                pos[axis] = 0;
                axis += 1;
            }
        }
    }

    /// Exact corners of a cube.
    pub fn cube_bounds(&self, packed: u64) -> (Vec<Q>, Vec<Q>) {
        let h = q_dyadic(self.depth);
        let idx = self.unpack(packed);
        let lo: Vec<Q> = idx.iter().map(|&k| Q::from_integer(BigInt::from(k)) * &h).collect();
        let hi: Vec<Q> = lo.iter().map(|l| l + &h).collect();
        (lo, hi)
    }

    pub fn cube_center(&self, packed: u64) -> Vec<f64> {
        let h = self.side();
        self.unpack(packed).iter().map(|&k| (k as f64 + 0.5) * h).collect()
    }

    /// Same point set at a finer depth.
    pub fn refine(&self, depth: u32) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidParam(format!("refine to depth {depth} below {}", self.depth)));
        }
        check_shape(self.dim, depth)?;
        let extra = depth - self.depth;
        let per = 1usize << (extra * self.dim);
        if self.cells.len().saturating_mul(per) > MAX_CELLS {
            return Err(Error::InvalidParam(format!("refinement to depth {depth} exceeds {MAX_CELLS} cubes")));
        }
        let mut out = Vec::with_capacity(self.cells.len() * per);
        let sub = 1u64 << extra;
        for idx in self.indices() {
            let base: Vec<u64> = idx.iter().map(|k| k << extra).collect();
            let mut off = vec![0u64; self.dim as usize];
            loop {
                let child: Vec<u64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
                out.push(pack(&child, depth));
                let mut axis = 0;
                loop {
                    if axis == off.len() {
                        break;
                    }
                    off[axis] += 1;
                    if off[axis] < sub {
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
        Self::from_packed(self.dim, depth, out)
    }

    /// Cube hull at a coarser depth: a coarse cube is kept iff some child is.
    pub fn coarsen(&self, depth: u32) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::InvalidParam(format!("coarsen to depth {depth} above {}", self.depth)));
        }
        let shift = self.depth - depth;
        let out = self
            .indices()
            .map(|idx| {
                let parent: Vec<u64> = idx.iter().map(|k| k >> shift).collect();
                pack(&parent, depth)
            })
            .collect();
        Self::from_packed(self.dim, depth, out)
    }

    fn aligned(&self, other: &Self) -> Result<(Self, Self)> {
        if self.dim != other.dim {
            return Err(Error::InvalidParam(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let depth = self.depth.max(other.depth);
        Ok((self.refine(depth)?, other.refine(depth)?))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let mut cells = a.cells;
        cells.extend(b.cells);
        Self::from_packed(a.dim, a.depth, cells)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let cells = a.cells.into_iter().filter(|c| b.cells.binary_search(c).is_ok()).collect();
        Self::from_packed(a.dim, a.depth, cells)
    }

    /// Cubes of `self` not present in `other` (cube-level difference).
    pub fn difference(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let cells = a.cells.into_iter().filter(|c| b.cells.binary_search(c).is_err()).collect();
        Self::from_packed(a.dim, a.depth, cells)
    }

    pub fn is_subset_of(&self, other: &Self) -> Result<bool> {
        let (a, b) = self.aligned(other)?;
        Ok(a.cells.iter().all(|c| b.cells.binary_search(c).is_ok()))
    }

    /// Exact interval form of a one-dimensional set.
    pub fn to_intervals(&self) -> Result<IntervalSet> {
        if self.dim != 1 {
            return Err(Error::InvalidParam("interval form needs dimension 1".into()));
        }
        let h = q_dyadic(self.depth);
        let raw = self
            .cells
            .iter()
            .map(|&k| {
                let lo = Q::from_integer(BigInt::from(k)) * &h;
                let hi = &lo + &h;
                (lo, hi)
            })
            .collect();
        IntervalSet::new(raw)
    }

    /// Outer rasterization: every cube meeting a (closed) interval.
    pub fn from_intervals(set: &IntervalSet, depth: u32) -> Result<Self> {
        check_shape(1, depth)?;
        let scale = Q::from_integer(BigInt::from(1u64) << depth as usize);
        let top = (1u64 << depth) - 1;
        let mut cells = BTreeSet::new();
        for (lo, hi) in set.intervals() {
            let zero = q_int(0);
            let one = q_int(1);
            if hi < &zero || lo > &one {
                continue;
            }
            let (first, last) = cell_span(&(lo * &scale), &(hi * &scale), top);
            if last - first + cells.len() as u64 > MAX_CELLS as u64 {
                return Err(Error::InvalidParam(format!("rasterization exceeds {MAX_CELLS} cubes")));
            }
            cells.extend(first..=last);
        }
        Self::from_packed(1, depth, cells.into_iter().collect())
    }

    /// `E^{⋈d}`: cubes with at least one coordinate index in `E`.
    pub fn cross_power(&self, d: u32) -> Result<Self> {
        if self.dim != 1 {
            return Err(Error::InvalidParam("cross power needs a one-dimensional set".into()));
        }
        check_shape(d, self.depth)?;
        let mut acc = self.clone();
        for _ in 1..d {
            acc = acc.cross_product(self)?;
        }
        Ok(acc)
    }

    /// `E ⋈ F = (E × [0,1]^{d_F}) ∪ ([0,1]^{d_E} × F)`.
    pub fn cross_product(&self, other: &Self) -> Result<Self> {
        let depth = self.depth.max(other.depth);
        let a = self.refine(depth)?;
        let b = other.refine(depth)?;
        let dim = a.dim + b.dim;
        check_shape(dim, depth)?;
        let wa = 1u64 << (a.dim * depth);
        let wb = 1u64 << (b.dim * depth);
        let count = (a.len() as u128) * wb as u128 + (b.len() as u128) * wa as u128;
        if count > MAX_CELLS as u128 {
            return Err(Error::InvalidParam(format!("cross product exceeds {MAX_CELLS} cubes")));
        }
        let shift = b.dim * depth;
        let mut cells = Vec::with_capacity(count as usize);
        for &ca in &a.cells {
            cells.extend((0..wb).map(|cb| (ca << shift) | cb));
        }
        for ca in 0..wa {
            cells.extend(b.cells.iter().map(|&cb| (ca << shift) | cb));
        }
        Self::from_packed(dim, depth, cells)
    }

    /// Connected components, cubes counted as adjacent when their closures
    /// meet. Returned groups hold packed indices.
    pub fn components(&self) -> Vec<Vec<u64>> {
        let dim = self.dim as usize;
        let top = (1u64 << self.depth) - 1;
        let lookup: HashMap<u64, usize> = self.cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut seen = vec![false; self.cells.len()];
        let mut out = Vec::new();
        for start in 0..self.cells.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut group = vec![self.cells[start]];
            let mut queue = VecDeque::from([self.cells[start]]);
            while let Some(c) = queue.pop_front() {
                let idx = self.unpack(c);
                let mut off = vec![-1i64; dim];
                loop {
                    let nb: Option<Vec<u64>> = idx
                        .iter()
                        .zip(&off)
                        .map(|(&k, &o)| {
                            let v = k as i64 + o;
                            (v >= 0 && v as u64 <= top).then_some(v as u64)
                        })
                        .collect();
                    if let Some(nb) = nb {
                        if let Some(&j) = lookup.get(&pack(&nb, self.depth)) {
                            if !seen[j] {
                                seen[j] = true;
                                group.push(self.cells[j]);
                                queue.push_back(self.cells[j]);
                            }
                        }
                    }
                    let mut axis = 0;
                    while axis < dim {
                        off[axis] += 1;
                        if off[axis] <= 1 {
                            break;
                        }
                        off[axis] = -1;
                        axis += 1;
                    }
                    if axis == dim {
                        break;
                    }
                }
            }
            group.sort_unstable();
            out.push(group);
        }
        out
    }

    /// Exact bounding box of a group of cubes.
    pub fn bounding_box(&self, group: &[u64]) -> (Vec<Q>, Vec<Q>) {
        let dim = self.dim as usize;
        let mut lo = vec![u64::MAX; dim];
        let mut hi = vec![0u64; dim];
        for &c in group {
            for (i, k) in self.unpack(c).into_iter().enumerate() {
                lo[i] = lo[i].min(k);
                hi[i] = hi[i].max(k + 1);
            }
        }
        let h = q_dyadic(self.depth);
        (
            lo.iter().map(|&k| Q::from_integer(BigInt::from(k)) * &h).collect(),
            hi.iter().map(|&k| Q::from_integer(BigInt::from(k)) * &h).collect(),
        )
    }

    /// Cubes whose closure meets the closed box `[lo, hi]`.
    pub fn from_box(dim: u32, depth: u32, lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_shape(dim, depth)?;
        let top = (1u64 << depth) - 1;
        let scale = Q::from_integer(BigInt::from(1u64) << depth as usize);
        let mut ranges = Vec::with_capacity(dim as usize);
        for i in 0..dim as usize {
            let a = q_from_f64(lo[i].clamp(0.0, 1.0))?;
            let b = q_from_f64(hi[i].clamp(0.0, 1.0))?;
            ranges.push(cell_span(&(a * &scale), &(b * &scale), top));
        }
        let count: u128 = ranges.iter().map(|(a, b)| (b - a + 1) as u128).product();
        if count > MAX_CELLS as u128 {
            return Err(Error::InvalidParam(format!("box rasterization exceeds {MAX_CELLS} cubes")));
        }
        let mut cells = Vec::with_capacity(count as usize);
        let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        loop {
            cells.push(pack(&idx, depth));
            let mut axis = 0;
            while axis < idx.len() {
                idx[axis] += 1;
                if idx[axis] <= ranges[axis].1 {
                    break;
                }
                idx[axis] = ranges[axis].0;
                axis += 1;
            }
            if axis == idx.len() {
                break;
            }
        }
        Self::from_packed(dim, depth, cells)
    }
}

fn to_cell(t: &Q, top: u64) -> u64 {
    if t <= &q_int(0) {
        return 0;
    }
    let v: u64 = t.to_integer().try_into().unwrap_or(u64::MAX);
    v.min(top)
}

/// Cells (indices scaled by `2^m`) needed to cover the closed interval
/// `[a, b]`: those meeting its interior, or for a point every cell
/// containing it.
fn cell_span(a: &Q, b: &Q, top: u64) -> (u64, u64) {
    if a == b {
        let c = to_cell(&a.floor(), top);
        let first = if a.is_integer() { c.saturating_sub(1) } else { c };
        let last = if a.is_integer() { to_cell(a, top) } else { c };
        return (first.min(last), last);
    }
    let first = to_cell(&a.floor(), top);
    let last = to_cell(&(b.ceil() - q_int(1)), top);
    (first, last.max(first))
}

pub fn pack(idx: &[u64], depth: u32) -> u64 {
    idx.iter().fold(0u64, |acc, &k| (acc << depth) | k)
}

pub fn unpack(mut packed: u64, dim: u32, depth: u32) -> Vec<u64> {
    let mask = if depth == 0 { 0 } else { (1u64 << depth) - 1 };
    let mut out = vec![0u64; dim as usize];
    for slot in out.iter_mut().rev() {
        *slot = packed & mask;
        packed = if depth == 0 { 0 } else { packed >> depth };
    }
    out
}
