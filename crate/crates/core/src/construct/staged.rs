//! Functions built from a sampled base by successive plateau stages, kept
//! in symbolic form so gaps far below the sampling grid stay exact.

use num_traits::{One, Zero};
use rayon::prelude::*;

use super::params::StageParams;
use crate::error::{Error, Result};
use crate::funclib::sampled::point_f64;
use crate::funclib::{Modulus, SampledFunction};
use crate::setlib::scale::{q_int, q_to_f64};
use crate::setlib::{DyadicCubeSet, Q};

/// Point values and certified range enclosures over boxes.
pub trait CertifiedFunction: Sync {
    fn dim(&self) -> u32;
    fn domain(&self) -> &DyadicCubeSet;
    fn eval_q(&self, x: &[Q]) -> Result<f64>;
    /// Enclosure of `f(X ∩ Ω)` for the closed box `X`; `None` when the
    /// intersection is empty.
    fn range_q(&self, lo: &[Q], hi: &[Q]) -> Option<(f64, f64)>;
}

impl CertifiedFunction for SampledFunction {
    fn dim(&self) -> u32 {
        SampledFunction::dim(self)
    }

    fn domain(&self) -> &DyadicCubeSet {
        SampledFunction::domain(self)
    }

    fn eval_q(&self, x: &[Q]) -> Result<f64> {
        self.evaluate(&point_f64(x))
    }

    /// Vertex extremes over the box rounded outward to the grid, which
    /// contains every value of the interpolant on the box.
    fn range_q(&self, lo: &[Q], hi: &[Q]) -> Option<(f64, f64)> {
        let scale = q_int(1i64 << self.depth());
        let cells = 1u64 << self.depth();
        let mut bounds = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(hi) {
            let a = (a * &scale).floor().to_integer();
            let b = (b * &scale).ceil().to_integer();
            let a: i64 = a.try_into().unwrap_or(i64::MIN).max(0);
            let b: i64 = b.try_into().unwrap_or(i64::MAX).min(cells as i64);
            if a > b {
                return None;
            }
            bounds.push((a as u64, b as u64));
        }
        let mut idx: Vec<u64> = bounds.iter().map(|b| b.0).collect();
        let mut best: Option<(f64, f64)> = None;
        loop {
            if let Some(v) = self.vertex_value(&idx) {
                best = Some(best.map_or((v, v), |(a, b)| (a.min(v), b.max(v))));
            }
            let mut axis = 0;
            while axis < idx.len() {
                idx[axis] += 1;
                if idx[axis] <= bounds[axis].1 {
                    break;
                }
                idx[axis] = bounds[axis].0;
                axis += 1;
            }
            if axis == idx.len() {
                return best;
            }
        }
    }
}

/// Position of a coordinate relative to the stage's cube intervals.
#[derive(Debug, Clone, PartialEq)]
enum AxisPos {
    /// Inside the interval of cube `j`.
    Inside(u64),
    /// In the outer margin next to cube `j` (weight 1 on `j`).
    Edge(u64),
    /// Between cubes `j` and `j+1`, with weight `w` on `j+1`.
    Gap(u64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub anchor: Vec<Q>,
    pub value: f64,
}

/// One plateau stage: cube grid, kept cubes with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLayer {
    pub params: StageParams,
    dim: u32,
    /// Dense over the `k^d` grid, row-major; `None` for dropped cubes.
    plateaus: Vec<Option<Plateau>>,
    /// Every kept cube lies inside a plateau of the previous layer, so the
    /// offsets vanish identically.
    pub passthrough: bool,
}

pub const MAX_STAGE_CUBES: u128 = 1 << 22;

impl StageLayer {
    pub fn new(params: StageParams, dim: u32, plateaus: Vec<Option<Plateau>>, passthrough: bool) -> Result<Self> {
        let total = (params.k as u128).pow(dim);
        if total != plateaus.len() as u128 {
            return Err(Error::InvalidParam(format!("expected {total} cube slots, got {}", plateaus.len())));
        }
        Ok(StageLayer { params, dim, plateaus, passthrough })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn k(&self) -> u64 {
        self.params.k
    }

    pub fn plateau(&self, idx: &[u64]) -> Option<&Plateau> {
        self.plateaus[self.pack(idx)].as_ref()
    }

    pub fn pack(&self, idx: &[u64]) -> usize {
        idx.iter().fold(0usize, |acc, &j| acc * self.k() as usize + j as usize)
    }

    pub fn unpack(&self, mut lin: usize) -> Vec<u64> {
        let k = self.k() as usize;
        let mut out = vec![0u64; self.dim as usize];
        for slot in out.iter_mut().rev() {
            *slot = (lin % k) as u64;
            lin /= k;
        }
        out
    }

    /// Kept cubes with their multi-indices, row-major.
    pub fn kept(&self) -> impl Iterator<Item = (Vec<u64>, &Plateau)> + '_ {
        self.plateaus
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (self.unpack(i), p)))
    }

    pub fn kept_count(&self) -> usize {
        self.plateaus.iter().filter(|p| p.is_some()).count()
    }

    /// Closed box of cube `idx`.
    pub fn cube_box(&self, idx: &[u64]) -> (Vec<Q>, Vec<Q>) {
        idx.iter().map(|&j| self.params.cube_interval(j)).unzip()
    }

    /// Closed box `γC` of cube `idx`.
    pub fn core_box(&self, idx: &[u64]) -> (Vec<Q>, Vec<Q>) {
        idx.iter().map(|&j| self.params.core_interval(j)).unzip()
    }

    fn axis_pos(&self, t: &Q) -> AxisPos {
        let k = self.k();
        let kq = q_int(k as i64);
        let j = (t * &kq).floor().to_integer();
        let j: i64 = j.try_into().unwrap_or(0);
        let j = j.clamp(0, k as i64 - 1) as u64;
        let (a, b) = self.params.cube_interval(j);
        let half_gap = self.params.eta() / q_int(2);
        if *t < a {
            if j == 0 {
                AxisPos::Edge(0)
            } else {
                let (_, prev_b) = self.params.cube_interval(j - 1);
                AxisPos::Gap(j - 1, q_to_f64(&((t - prev_b) / &half_gap)))
            }
        } else if *t > b {
            if j == k - 1 {
                AxisPos::Edge(j)
            } else {
                AxisPos::Gap(j, q_to_f64(&((t - b) / &half_gap)))
            }
        } else {
            AxisPos::Inside(j)
        }
    }

    /// Cubes with positive blend weight at `x`, with the weights.
    fn weights(&self, x: &[Q]) -> (bool, Vec<(Vec<u64>, f64)>) {
        let pos: Vec<AxisPos> = x.iter().map(|t| self.axis_pos(t)).collect();
        let inside = pos.iter().all(|p| matches!(p, AxisPos::Inside(_)));
        let mut out: Vec<(Vec<u64>, f64)> = vec![(Vec::new(), 1.0)];
        for p in &pos {
            let opts: Vec<(u64, f64)> = match *p {
                AxisPos::Inside(j) | AxisPos::Edge(j) => vec![(j, 1.0)],
                AxisPos::Gap(j, w) => vec![(j, 1.0 - w), (j + 1, w)],
            };
            out = out
                .into_iter()
                .flat_map(|(idx, w)| {
                    opts.iter().filter(|o| o.1 > 0.0).map(move |&(j, wj)| {
                        let mut i = idx.clone();
                        i.push(j);
                        (i, w * wj)
                    })
                })
                .collect();
        }
        (inside, out)
    }

    /// Per axis, the cube indices whose weight support meets `[lo, hi]`,
    /// and the single cube containing the whole range if there is one.
    fn support(&self, lo: &Q, hi: &Q) -> (Vec<u64>, Option<u64>) {
        let k = self.k();
        let kq = q_int(k as i64);
        let q = self.params.eta() / q_int(4);
        let first = (lo * &kq).floor().to_integer();
        let last = (hi * &kq).floor().to_integer();
        let first: i64 = first.try_into().unwrap_or(0);
        let last: i64 = last.try_into().unwrap_or(k as i64);
        let mut js = Vec::new();
        let mut inside = None;
        for j in (first - 1).max(0)..=(last + 1).min(k as i64 - 1) {
            let j = j as u64;
            let s_lo = if j == 0 { Q::zero() } else { q_int(j as i64) / &kq - &q };
            let s_hi = if j == k - 1 { Q::one() } else { q_int(j as i64 + 1) / &kq + &q };
            if *hi >= s_lo && *lo <= s_hi {
                js.push(j);
            }
            let (a, b) = self.params.cube_interval(j);
            if *lo >= a && *hi <= b {
                inside = Some(j);
            }
        }
        (js, inside)
    }

    fn project(&self, idx: &[u64], lo: &[Q], hi: &[Q]) -> (Vec<Q>, Vec<Q>) {
        let (clo, chi) = self.cube_box(idx);
        let clamp = |t: &Q, a: &Q, b: &Q| t.clone().max(a.clone()).min(b.clone());
        let plo = lo.iter().zip(clo.iter().zip(&chi)).map(|(t, (a, b))| clamp(t, a, b)).collect();
        let phi = hi.iter().zip(clo.iter().zip(&chi)).map(|(t, (a, b))| clamp(t, a, b)).collect();
        (plo, phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagedFunction {
    base: SampledFunction,
    layers: Vec<StageLayer>,
}

impl StagedFunction {
    pub fn new(base: SampledFunction) -> Result<Self> {
        let dom = base.domain();
        if dom.is_empty() {
            return Err(Error::Precondition("empty domain".into()));
        }
        // blends project onto cubes, which stays inside Ω only for boxes
        let all: Vec<u64> = dom.packed().to_vec();
        let (lo, hi) = dom.bounding_box(&all);
        let bbox = DyadicCubeSet::from_box(
            dom.dim(),
            dom.depth(),
            &point_f64(&lo),
            &point_f64(&hi),
        )?;
        if bbox.len() != dom.len() {
            return Err(Error::Precondition("the domain must be a single box of dyadic cubes".into()));
        }
        Ok(StagedFunction { base, layers: Vec::new() })
    }

    pub fn base(&self) -> &SampledFunction {
        &self.base
    }

    pub fn layers(&self) -> &[StageLayer] {
        &self.layers
    }

    pub fn stages(&self) -> usize {
        self.layers.len()
    }

    pub fn push(&mut self, layer: StageLayer) -> Result<()> {
        if layer.dim() != self.base.dim() {
            return Err(Error::InvalidParam("layer dimension differs from the base".into()));
        }
        self.layers.push(layer);
        Ok(())
    }

    /// The function after the first `m` stages.
    pub fn truncated(&self, m: usize) -> StagedFunction {
        StagedFunction { base: self.base.clone(), layers: self.layers[..m.min(self.layers.len())].to_vec() }
    }

    fn check_point(&self, x: &[Q]) -> Result<()> {
        if x.len() != self.base.dim() as usize || !self.base.domain().contains_point_q(x) {
            return Err(Error::OutsideDomain(point_f64(x)));
        }
        Ok(())
    }

    /// `g_m(x)` for `x ∈ Ω`.
    pub fn eval_at(&self, m: usize, x: &[Q]) -> Result<f64> {
        self.check_point(x)?;
        self.eval_inner(m, x)
    }

    fn eval_inner(&self, m: usize, x: &[Q]) -> Result<f64> {
        if m == 0 {
            return self.base.evaluate(&point_f64(x));
        }
        let layer = &self.layers[m - 1];
        let (inside, ws) = layer.weights(x);
        if inside {
            if let Some(p) = layer.plateau(&ws[0].0) {
                return Ok(p.value);
            }
        }
        let prev = self.eval_inner(m - 1, x)?;
        if layer.passthrough {
            return Ok(prev);
        }
        let mut acc = prev;
        for (idx, w) in &ws {
            if let Some(p) = layer.plateau(idx) {
                let (px, _) = layer.project(idx, x, x);
                acc += w * (p.value - self.eval_inner(m - 1, &px)?);
            }
        }
        Ok(acc)
    }

    /// Enclosure of `g_m(X ∩ Ω)`.
    pub fn range_at(&self, m: usize, lo: &[Q], hi: &[Q]) -> Option<(f64, f64)> {
        let dom_lo: Vec<Q>;
        let dom_hi: Vec<Q>;
        {
            let all: Vec<u64> = self.base.domain().packed().to_vec();
            let (a, b) = self.base.domain().bounding_box(&all);
            dom_lo = lo.iter().zip(&a).map(|(x, y)| x.clone().max(y.clone())).collect();
            dom_hi = hi.iter().zip(&b).map(|(x, y)| x.clone().min(y.clone())).collect();
        }
        if dom_lo.iter().zip(&dom_hi).any(|(a, b)| a > b) {
            return None;
        }
        self.range_inner(m, &dom_lo, &dom_hi)
    }

    fn range_inner(&self, m: usize, lo: &[Q], hi: &[Q]) -> Option<(f64, f64)> {
        if m == 0 {
            return self.base.range_q(lo, hi);
        }
        let layer = &self.layers[m - 1];
        let sup: Vec<(Vec<u64>, Option<u64>)> = lo.iter().zip(hi).map(|(a, b)| layer.support(a, b)).collect();
        if sup.iter().all(|s| s.1.is_some()) {
            let idx: Vec<u64> = sup.iter().map(|s| s.1.unwrap()).collect();
            return layer.plateau(&idx).map(|p| (p.value, p.value));
        }
        let prev = self.range_inner(m - 1, lo, hi)?;
        if layer.passthrough {
            return Some(prev);
        }
        let mut off: Option<(f64, f64)> = None;
        let mut widen = |a: f64, b: f64| {
            off = Some(off.map_or((a, b), |(x, y)| (x.min(a), y.max(b))));
        };
        let mut idx = vec![0usize; sup.len()];
        if sup.iter().any(|s| s.0.is_empty()) {
            return Some(prev);
        }
        loop {
            let cube: Vec<u64> = idx.iter().zip(&sup).map(|(&i, s)| s.0[i]).collect();
            match layer.plateau(&cube) {
                Some(p) => {
                    let (plo, phi) = layer.project(&cube, lo, hi);
                    if let Some((a, b)) = self.range_inner(m - 1, &plo, &phi) {
                        widen(p.value - b, p.value - a);
                    }
                }
                None => widen(0.0, 0.0),
            }
            let mut axis = 0;
            while axis < idx.len() {
                idx[axis] += 1;
                if idx[axis] < sup[axis].0.len() {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis == idx.len() {
                break;
            }
        }
        let (a, b) = off.unwrap_or((0.0, 0.0));
        Some((prev.0 + a, prev.1 + b))
    }

    /// Max certified spread over windows of two adjacent `2^{-j}` cells per
    /// axis; bounds `|g(x) - g(y)|` whenever `|x - y|_∞ <= 2^{-j}`.
    pub fn window_modulus(&self, m: usize, j: u32) -> f64 {
        let d = self.base.dim() as usize;
        let cells = 1u64 << j;
        let starts = cells.saturating_sub(1).max(1);
        let total = starts.pow(d as u32);
        let side = Q::new(1.into(), (num_bigint::BigInt::one()) << j as usize);
        (0..total)
            .into_par_iter()
            .map(|mut lin| {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for _ in 0..d {
                    let i = lin % starts;
                    lin /= starts;
                    let a = &side * q_int(i as i64);
                    let b = (&a + &side * q_int(2)).min(Q::one());
                    lo.push(a);
                    hi.push(b);
                }
                self.range_at(m, &lo, &hi).map_or(0.0, |(a, b)| b - a)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Sampled rendering of `g_m` at `depth` with the window modulus of the
    /// rendered grid.
    pub fn render(&self, m: usize, depth: u32) -> Result<SampledFunction> {
        let side = Q::new(1.into(), num_bigint::BigInt::one() << depth as usize);
        let domain = self.base.domain().clone();
        let dom = if domain.depth() > depth { domain.coarsen(depth)? } else { domain };
        let err = std::sync::Mutex::new(None);
        let f = SampledFunction::from_vertex_fn(dom, depth, Modulus::zero(), |idx| {
            let x: Vec<Q> = idx.iter().map(|&i| &side * q_int(i as i64)).collect();
            match self.eval_at(m, &x) {
                Ok(v) => v,
                Err(e) => {
                    *err.lock().unwrap() = Some(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        let f = f?;
        let modulus = grid_window_modulus(&f)?;
        Ok(f.with_modulus(modulus))
    }
}

impl CertifiedFunction for StagedFunction {
    fn dim(&self) -> u32 {
        self.base.dim()
    }

    fn domain(&self) -> &DyadicCubeSet {
        self.base.domain()
    }

    fn eval_q(&self, x: &[Q]) -> Result<f64> {
        self.eval_at(self.layers.len(), x)
    }

    fn range_q(&self, lo: &[Q], hi: &[Q]) -> Option<(f64, f64)> {
        self.range_at(self.layers.len(), lo, hi)
    }
}

/// Step modulus of a sampled function: at `t = 2^{-j}` (down to the grid
/// spacing) the largest vertex spread over windows of two adjacent
/// `2^{-j}` cells per axis.
pub fn grid_window_modulus(f: &SampledFunction) -> Result<Modulus> {
    let mut pairs = Vec::new();
    for j in 0..=f.depth() {
        let t = 2f64.powi(-(j as i32));
        let w = vertex_window_spread(f, j);
        pairs.push((t, w));
    }
    Modulus::table(pairs)
}

fn vertex_window_spread(f: &SampledFunction, j: u32) -> f64 {
    let d = f.dim() as usize;
    let cells = 1u64 << j;
    let starts = cells.saturating_sub(1).max(1);
    let step = 1u64 << (f.depth() - j);
    let total = starts.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut lin| {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for _ in 0..d {
                let i = lin % starts;
                lin /= starts;
                lo.push(q_int((i * step) as i64) / q_int(1i64 << f.depth()));
                hi.push(q_int(((i + 2).min(cells) * step) as i64) / q_int(1i64 << f.depth()));
            }
            f.range_q(&lo, &hi).map_or(0.0, |(a, b)| b - a)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funclib::generators::{make_test_function, TestFunction};
    use crate::setlib::scale::q_ratio;

    fn staircase() -> StagedFunction {
        let base = make_test_function(&TestFunction::Affine { c: 1.0 }, 1, 8).unwrap();
        let p = StageParams::new(1, 0.5, None, 2, 3).unwrap();
        let plateaus = vec![
            Some(Plateau { anchor: vec![q_ratio(1, 4)], value: 0.25 }),
            Some(Plateau { anchor: vec![q_ratio(3, 4)], value: 0.75 }),
        ];
        let mut g = StagedFunction::new(base).unwrap();
        g.push(StageLayer::new(p, 1, plateaus, false).unwrap()).unwrap();
        g
    }

    #[test]
    fn plateaus_and_blend() {
        let g = staircase();
        // cube 0 is [1/32, 15/32]
        assert_eq!(g.eval_q(&[q_ratio(1, 32)]).unwrap(), 0.25);
        assert_eq!(g.eval_q(&[q_ratio(15, 32)]).unwrap(), 0.25);
        assert_eq!(g.eval_q(&[q_ratio(17, 32)]).unwrap(), 0.75);
        // midpoint of the central gap: 1/2 + (1/2)(0.25 - 15/32) + (1/2)(0.75 - 17/32)
        assert!((g.eval_q(&[q_ratio(1, 2)]).unwrap() - 0.5).abs() < 1e-15);
        // outer margin keeps f + offset
        assert!((g.eval_q(&[Q::zero()]).unwrap() - (0.25 - 1.0 / 32.0)).abs() < 1e-15);
        assert_eq!(g.range_q(&[q_ratio(1, 16)], &[q_ratio(3, 8)]), Some((0.25, 0.25)));
        let (a, b) = g.range_q(&[q_ratio(7, 16)], &[q_ratio(9, 16)]).unwrap();
        assert!(a <= 0.25 && b >= 0.75);
        assert_eq!(g.range_q(&[Q::zero()], &[Q::one()]).map(|r| r.1 >= 0.75), Some(true));
    }

    #[test]
    fn range_encloses_values() {
        let g = staircase();
        let lo = q_ratio(13, 32);
        let hi = q_ratio(19, 32);
        let (a, b) = g.range_q(&[lo.clone()], &[hi.clone()]).unwrap();
        for i in 0..=600 {
            let x = &lo + (&hi - &lo) * q_ratio(i, 600);
            let v = g.eval_q(&[x]).unwrap();
            assert!(v >= a - 1e-15 && v <= b + 1e-15);
        }
    }

    #[test]
    fn window_modulus_bounds_pairs() {
        let g = staircase();
        let w = g.window_modulus(1, 4);
        for i in 0..256 {
            let x = q_ratio(i, 256);
            let y = q_ratio(i + 16, 256).min(Q::one());
            let d = (g.eval_q(&[x]).unwrap() - g.eval_q(&[y]).unwrap()).abs();
            assert!(d <= w + 1e-15);
        }
        let r = g.render(1, 8).unwrap();
        assert_eq!(r.evaluate(&[0.25]).unwrap(), 0.25);
        assert!(r.modulus().eval(1.0 / 16.0) >= 0.0);
    }

    #[test]
    fn box_domain_required() {
        let dom = DyadicCubeSet::new(2, 1, &[vec![0, 0], vec![0, 1], vec![1, 0]]).unwrap();
        let f = SampledFunction::from_vertex_fn(dom, 4, Modulus::zero(), |_| 0.0).unwrap();
        assert!(matches!(StagedFunction::new(f), Err(Error::Precondition(_))));
    }
}
