//! Splitting `Ω` into a part `A` with small lower box measure and a part
//! `B` whose image is small in Hausdorff measure, the greedy Vitali cover
//! behind the image bound, and the graph-in-cross-product check.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::exceptional::{random_in_box, uncovered_raster};
use crate::construct::{CertifiedFunction, TypicalBuild};
use crate::error::{Error, Result};
use crate::funclib::sampled::{grid_floor, point_f64};
use crate::gauges::{verify_schizm_relation, Gauge, ScaleFn, SchizmReport};
use crate::setlib::cover::neumaier_sum;
use crate::setlib::scale::q_from_f64;
use crate::setlib::{lower_box_dim, DyadicCubeSet, IntervalSet, Scale, SetRepr, Q};

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub a: DyadicCubeSet,
    pub b: DyadicCubeSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
    Outside,
}

impl Partition {
    pub fn depth(&self) -> u32 {
        self.a.depth()
    }

    /// Half-open cell lookup (the top face of `[0,1]^d` is closed), so every
    /// point of `Ω` lands on exactly one side.
    pub fn classify(&self, x: &[Q]) -> Side {
        let depth = self.depth();
        let top = (1u64 << depth) - 1;
        let zero = Q::from_integer(0.into());
        let one = Q::from_integer(1.into());
        if x.len() != self.a.dim() as usize || x.iter().any(|t| *t < zero || *t > one) {
            return Side::Outside;
        }
        let idx: Vec<u64> = x.iter().map(|t| grid_floor(t, depth).min(top)).collect();
        match (self.a.contains_index(&idx), self.b.contains_index(&idx)) {
            (true, false) => Side::A,
            (false, true) => Side::B,
            (false, false) => Side::Outside,
            (true, true) => unreachable!("A and B are disjoint by construction"),
        }
    }

    /// `A ∪ B = Ω` and `A ∩ B = ∅` at cube level.
    pub fn is_exact(&self, omega: &DyadicCubeSet) -> Result<bool> {
        let omega = omega.refine(self.depth())?;
        Ok(self.a.intersection(&self.b)?.is_empty() && self.a.union(&self.b)? == omega)
    }
}

/// `A` is the uncovered raster of the build (cells meeting no stage core),
/// `B` the rest of `Ω`.
pub fn split_partition(build: &TypicalBuild, depth: u32) -> Result<Partition> {
    let a = uncovered_raster(build, depth)?;
    let omega = build.base().domain().refine(a.depth())?;
    let b = omega.difference(&a)?;
    Ok(Partition { a, b })
}

/// Open max-norm ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    fn dist(&self, other: &Ball) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn intersects(&self, other: &Ball) -> bool {
        self.dist(other) < self.radius + other.radius
    }

    pub fn inside(&self, other: &Ball) -> bool {
        self.dist(other) + self.radius <= other.radius
    }

    pub fn scaled(&self, factor: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * factor }
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.radius).powi(self.center.len() as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitaliCover {
    pub kept: Vec<Ball>,
    pub expansions: Vec<Ball>,
    pub candidates: usize,
    pub discarded: usize,
    /// For every candidate, in input order, the kept ball (index into
    /// `kept`) of radius at least its own that it meets.
    pub witness: Vec<usize>,
    pub disjoint: bool,
    pub expansions_cover: bool,
}

/// Buckets of kept balls, one uniform grid per binary radius octave; balls
/// of octave `l` have radius in `[2^l, 2^{l+1})` and sit in cells of side
/// `2^{l+2}`, so a query ball no larger than them can only meet balls in
/// the 3^d neighbouring cells.
#[derive(Default)]
struct BallIndex {
    levels: HashMap<i32, HashMap<Vec<i64>, Vec<usize>>>,
}

impl BallIndex {
    fn level(r: f64) -> i32 {
        r.log2().floor() as i32
    }

    fn cell(c: &[f64], level: i32) -> Vec<i64> {
        let side = 2f64.powi(level + 2);
        c.iter().map(|t| (t / side).floor() as i64).collect()
    }

    fn insert(&mut self, ball: &Ball, id: usize) {
        let l = Self::level(ball.radius);
        self.levels.entry(l).or_default().entry(Self::cell(&ball.center, l)).or_default().push(id);
    }

    /// First (lowest id) stored ball meeting `q` among octaves `>= level(q)`.
    fn first_meeting(&self, q: &Ball, balls: &[Ball], skip: Option<usize>) -> Option<usize> {
        let lq = Self::level(q.radius);
        let d = q.center.len();
        let mut best: Option<usize> = None;
        for (&l, grid) in &self.levels {
            if l < lq {
                continue;
            }
            let base = Self::cell(&q.center, l);
            let mut off = vec![-1i64; d];
            loop {
                let key: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
                if let Some(ids) = grid.get(&key) {
                    for &id in ids {
                        if Some(id) != skip && balls[id].intersects(q) && best.map_or(true, |b| id < b) {
                            best = Some(id);
                        }
                    }
                }
                let mut axis = 0;
                while axis < d && off[axis] == 1 {
                    off[axis] = -1;
                    axis += 1;
                }
                if axis == d {
                    break;
                }
                off[axis] += 1;
            }
        }
        best
    }
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Greedy disjoint selection: radius descending, ties by lexicographic
/// centre; a ball is kept iff it misses every ball kept before it.
pub fn vitali_5r(candidates: &[Ball]) -> Result<VitaliCover> {
    let d = candidates.first().map_or(0, |b| b.center.len());
    for b in candidates {
        if !(b.radius > 0.0 && b.radius.is_finite()) || b.center.len() != d || b.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParam(format!("bad candidate ball {b:?}")));
        }
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        candidates[j]
            .radius
            .total_cmp(&candidates[i].radius)
            .then_with(|| lex(&candidates[i].center, &candidates[j].center))
    });
    let mut kept: Vec<Ball> = Vec::new();
    let mut index = BallIndex::default();
    let mut witness = vec![usize::MAX; candidates.len()];
    for &i in &order {
        let c = &candidates[i];
        match index.first_meeting(c, &kept, None) {
            Some(k) => witness[i] = k,
            None => {
                index.insert(c, kept.len());
                witness[i] = kept.len();
                kept.push(c.clone());
            }
        }
    }
    let disjoint = (0..kept.len()).all(|i| index.first_meeting(&kept[i], &kept, Some(i)).is_none());
    let expansions: Vec<Ball> = kept.iter().map(|b| b.scaled(5.0)).collect();
    let expansions_cover = candidates.iter().zip(&witness).all(|(c, &k)| {
        kept[k].radius >= c.radius && kept[k].intersects(c) && c.inside(&expansions[k])
    });
    Ok(VitaliCover {
        candidates: candidates.len(),
        discarded: candidates.len() - kept.len(),
        kept,
        expansions,
        witness,
        disjoint,
        expansions_cover,
    })
}

/// Dyadic radii scanned for candidate balls: `2^{-j}` for `j <= MAX_RADIUS_EXP`.
pub const MAX_RADIUS_EXP: i32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverBall {
    pub x: Vec<f64>,
    pub r: f64,
    /// Certified upper bound on `diam f(B(x, 5r))`.
    pub diam_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub xi_diam: f64,
    pub xi_phi: f64,
    pub r_pow: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCoverReport {
    pub gauge_xi: Gauge,
    pub gauge_phi: Gauge,
    pub delta: f64,
    pub norm: String,
    pub alpha_d: f64,
    pub dim: u32,
    pub balls: Vec<CoverBall>,
    pub sum: f64,
    pub bound: f64,
    /// `sum <= bound`.
    pub verdict: bool,
    pub chain_audit: Vec<ChainStep>,
    pub chain_ok: bool,
    pub candidates: usize,
    pub discarded: usize,
    pub disjoint: bool,
    pub expansions_cover: bool,
    /// `Σ λ(kept)` against `(1+2δ)^d`.
    pub volume_sum: f64,
    pub volume_bound: f64,
    /// Cell centres of `B` with no admissible radius.
    pub unadmissible: Vec<Vec<f64>>,
    pub schizm: SchizmReport,
}

impl ImageCoverReport {
    pub fn pass(&self) -> bool {
        self.verdict
            && self.chain_ok
            && self.disjoint
            && self.expansions_cover
            && self.volume_sum <= self.volume_bound
            && self.unadmissible.is_empty()
            && self.schizm.passed
    }

    /// Recomputes the sum and the bound from the stored balls.
    pub fn recheck(&self) -> Result<bool> {
        let terms: Vec<f64> =
            self.balls.iter().map(|b| self.gauge_xi.eval_or_zero(b.diam_upper)).collect::<Result<_>>()?;
        let sum = neumaier_sum(&terms);
        let bound = image_bound(self.delta, self.dim);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) || a == b;
        Ok(close(sum, self.sum) && close(bound, self.bound))
    }
}

/// `δ (1+2δ)^d / α_d` with `α_d = 2^d`, the max-norm unit ball volume.
pub fn image_bound(delta: f64, d: u32) -> f64 {
    delta * (1.0 + 2.0 * delta).powi(d as i32) / 2f64.powi(d as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageCover {
    pub report: ImageCoverReport,
    pub cover: VitaliCover,
    /// One-dimensional raster containing `f(B)`.
    pub image: DyadicCubeSet,
}

fn ball_box(x: &[f64], r: f64) -> Result<(Vec<Q>, Vec<Q>)> {
    let lo = x.iter().map(|t| q_from_f64(t - r)).collect::<Result<_>>()?;
    let hi = x.iter().map(|t| q_from_f64(t + r)).collect::<Result<_>>()?;
    Ok((lo, hi))
}

fn width(f: &dyn CertifiedFunction, x: &[f64], r: f64) -> Result<Option<(f64, f64)>> {
    let (lo, hi) = ball_box(x, r)?;
    Ok(f.range_q(&lo, &hi))
}

/// Largest dyadic `r` with `r < δ`, `φ(5r) < δ` and certified
/// `diam f(B(x,5r)) < φ(5r)`.
fn admissible_radius(f: &dyn CertifiedFunction, phi: &Gauge, delta: f64, x: &[f64], j0: i32) -> Result<Option<(f64, f64)>> {
    for j in j0..=MAX_RADIUS_EXP {
        let r = 2f64.powi(-j);
        let p = phi.eval(5.0 * r)?;
        if !(p < delta) {
            continue;
        }
        if let Some((a, b)) = width(f, x, 5.0 * r)? {
            if b - a < p {
                return Ok(Some((r, b - a)));
            }
        }
    }
    Ok(None)
}

/// Greedy image cover of `f(B)` at scale `δ`: one candidate per cube
/// centre of `b`, Vitali selection, and the sum `Σ ξ(diam f(B(x_i, 5r_i)))`
/// against `δ(1+2δ)^d / 2^d`. `image_depth` is the resolution of the
/// returned image raster.
pub fn image_cover_report(
    f: &dyn CertifiedFunction,
    b: &DyadicCubeSet,
    phi: &Gauge,
    xi: &Gauge,
    delta: f64,
    image_depth: u32,
) -> Result<ImageCover> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParam(format!("delta must lie in (0, 1], got {delta}")));
    }
    let d = f.dim();
    if b.dim() != d {
        return Err(Error::InvalidParam("B and f differ in dimension".into()));
    }
    // first radius with r < δ and 5r inside the gauge domain
    let mut j0 = 1;
    while !(2f64.powi(-j0) < delta && 5.0 * 2f64.powi(-j0) <= 1.0) {
        j0 += 1;
    }
    let scales: Vec<f64> = (j0..=MAX_RADIUS_EXP).map(|j| 2f64.powi(-j)).collect();
    let schizm = verify_schizm_relation(xi, phi, d, &scales)?;
    if !schizm.passed {
        return Err(Error::Precondition(format!(
            "ξ(φ(5r)) <= r^{} fails at r = {:?}",
            d + 1,
            schizm.first_violation
        )));
    }

    let centres: Vec<Vec<f64>> = b.packed().iter().map(|&c| b.cube_center(c)).collect();
    let radii: Vec<Option<(f64, f64)>> = centres
        .par_iter()
        .map(|x| admissible_radius(f, phi, delta, x, j0))
        .collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    let mut unadmissible = Vec::new();
    for (x, r) in centres.iter().zip(&radii) {
        match r {
            Some((r, _)) => candidates.push(Ball::new(x.clone(), *r)),
            None => unadmissible.push(x.clone()),
        }
    }
    let cover = vitali_5r(&candidates)?;

    let mut balls = Vec::with_capacity(cover.kept.len());
    let mut chain_audit = Vec::with_capacity(cover.kept.len());
    let mut image: Vec<(f64, f64)> = Vec::new();
    for k in &cover.kept {
        let (a, hi) = width(f, &k.center, 5.0 * k.radius)?
            .ok_or_else(|| Error::Consistency(format!("ball at {:?} misses Ω", k.center)))?;
        let diam = hi - a;
        let xi_diam = xi.eval_or_zero(diam)?;
        let xi_phi = xi.eval_or_zero(phi.eval(5.0 * k.radius)?)?;
        let r_pow = k.radius.powi(d as i32 + 1);
        chain_audit.push(ChainStep { xi_diam, xi_phi, r_pow, ok: xi_diam <= xi_phi && xi_phi <= r_pow * (1.0 + 1e-12) });
        balls.push(CoverBall { x: k.center.clone(), r: k.radius, diam_upper: diam });
        image.push((a, hi));
    }
    // cell ranges too: the balls only certify the image near the centres
    for &c in b.packed() {
        let (lo, hi) = b.cube_bounds(c);
        if let Some(r) = f.range_q(&lo, &hi) {
            image.push(r);
        }
    }
    if let Some(&(a, hi)) = image.iter().find(|(a, hi)| *a < 0.0 || *hi > 1.0) {
        return Err(Error::Precondition(format!("image range [{a}, {hi}] leaves [0, 1]")));
    }
    let image_set = IntervalSet::new(
        image
            .iter()
            .map(|&(a, hi)| Ok((q_from_f64(a)?, q_from_f64(hi)?)))
            .collect::<Result<_>>()?,
    )?;
    let image = DyadicCubeSet::from_intervals(&image_set, image_depth)?;

    let terms: Vec<f64> = chain_audit.iter().map(|c| c.xi_diam).collect();
    let sum = neumaier_sum(&terms);
    let bound = image_bound(delta, d);
    let volume_sum = neumaier_sum(&cover.kept.iter().map(Ball::volume).collect::<Vec<_>>());
    let report = ImageCoverReport {
        gauge_xi: xi.clone(),
        gauge_phi: phi.clone(),
        delta,
        norm: "max".into(),
        alpha_d: 2f64.powi(d as i32),
        dim: d,
        balls,
        sum,
        bound,
        verdict: sum <= bound,
        chain_ok: chain_audit.iter().all(|c| c.ok),
        chain_audit,
        candidates: cover.candidates,
        discarded: cover.discarded,
        disjoint: cover.disjoint,
        expansions_cover: cover.expansions_cover,
        volume_sum,
        volume_bound: (1.0 + 2.0 * delta).powi(d as i32),
        unadmissible,
        schizm,
    };
    Ok(ImageCover { report, cover, image })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphWitness {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCheck {
    pub samples: usize,
    pub in_a: usize,
    pub in_image: usize,
    pub violations: usize,
    pub witnesses: Vec<GraphWitness>,
    pub pass: bool,
}

pub const MAX_WITNESSES: usize = 10;

/// `x ∈ A` or `f(x) ∈ B_img` at uniformly random points of `Ω`.
pub fn graph_cross_check(
    f: &dyn CertifiedFunction,
    a: &DyadicCubeSet,
    b_img: &DyadicCubeSet,
    samples: usize,
    seed: u64,
) -> Result<GraphCheck> {
    if b_img.dim() != 1 || a.dim() != f.dim() {
        return Err(Error::InvalidParam("A must match f's dimension and B_img must be one-dimensional".into()));
    }
    let dom = f.domain();
    if dom.is_empty() {
        return Err(Error::InvalidParam("empty domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GraphCheck { samples, in_a: 0, in_image: 0, violations: 0, witnesses: Vec::new(), pass: true };
    for _ in 0..samples {
        let c = dom.packed()[rng.gen_range(0..dom.len())];
        let (lo, hi) = dom.cube_bounds(c);
        let x = random_in_box(&mut rng, &lo, &hi)?;
        if a.contains_point_q(&x) {
            out.in_a += 1;
            continue;
        }
        let v = f.eval_q(&x)?;
        if b_img.contains_point(&[v]) {
            out.in_image += 1;
        } else {
            out.violations += 1;
            if out.witnesses.len() < MAX_WITNESSES {
                out.witnesses.push(GraphWitness { x: point_f64(&x), value: v });
            }
        }
    }
    out.pass = out.violations == 0;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDims {
    pub a_lbdim_proxy: f64,
    pub image_lbdim_proxy: f64,
}

/// Finite-scale lower box dimension proxies of `A` and of the image raster.
pub fn partition_dims(a: &DyadicCubeSet, image: &DyadicCubeSet) -> Result<PartitionDims> {
    let dim_of = |s: &DyadicCubeSet| -> Result<f64> {
        let scales: Vec<Scale> = (1..=s.depth()).map(Scale::dyadic).collect();
        Ok(lower_box_dim(&SetRepr::Cubes(s.clone()), &scales)?.lbdim_proxy)
    };
    Ok(PartitionDims { a_lbdim_proxy: dim_of(a)?, image_lbdim_proxy: dim_of(image)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_example() {
        let c = vec![Ball::new(vec![0.1], 0.05), Ball::new(vec![0.12], 0.04), Ball::new(vec![0.3], 0.05)];
        let v = vitali_5r(&c).unwrap();
        assert_eq!(v.kept, vec![c[0].clone(), c[2].clone()]);
        assert_eq!(v.discarded, 1);
        assert_eq!(v.witness, vec![0, 0, 1]);
        assert!(v.disjoint && v.expansions_cover);
    }

    #[test]
    fn identical_balls() {
        let b = Ball::new(vec![0.5, 0.5], 0.1);
        let v = vitali_5r(&[b.clone(), b.clone()]).unwrap();
        assert_eq!(v.kept.len(), 1);
        let single = vitali_5r(&[b.clone()]).unwrap();
        assert_eq!(single.kept, vec![b]);
    }

    #[test]
    fn ties_by_centre() {
        let c = vec![Ball::new(vec![0.2], 0.1), Ball::new(vec![0.1], 0.1)];
        let v = vitali_5r(&c).unwrap();
        assert_eq!(v.kept, vec![c[1].clone()]);
    }

    #[test]
    fn touching_balls_are_disjoint() {
        let c = vec![Ball::new(vec![0.25], 0.25), Ball::new(vec![0.75], 0.25)];
        assert_eq!(vitali_5r(&c).unwrap().kept.len(), 2);
    }

    #[test]
    fn bound_formula() {
        assert!((image_bound(0.01, 1) - 0.0051).abs() < 1e-15);
    }
}
