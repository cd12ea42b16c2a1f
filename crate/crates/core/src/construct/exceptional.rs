//! The exceptional sets of a build: the slab unions `E`, the uncovered
//! set `F ⊆ E^{⋈d}`, their premeasures and the microscopic route.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::build::TypicalBuild;
use crate::error::{Error, Result};
use crate::funclib::sampled::point_f64;
use crate::gauges::GaugeKind;
use crate::setlib::cover::hausdorff_upper;
use crate::setlib::scale::{q_from_f64, q_int};
use crate::setlib::{
    lower_box_premeasure, micro_from_hzeta, microscopic_verify, DyadicCubeSet, IntervalSet, Scale, SetRepr, Q,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPremeasure {
    pub n: usize,
    /// `1/n`, the largest admissible scale and the target.
    pub eps: f64,
    pub intervals: usize,
    pub value: f64,
    pub argmin: Option<f64>,
    pub below: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    /// Random points of the raster `F` tested against the raster `E^{⋈d}`.
    pub raster_points: usize,
    pub raster_inside: usize,
    /// Random exact points of the uncovered set tested against `E^{⋈d}`.
    pub exact_points: usize,
    pub exact_inside: usize,
    pub witness: Option<Vec<f64>>,
}

impl Containment {
    pub fn pass(&self) -> bool {
        self.raster_inside == self.raster_points && self.exact_inside == self.exact_points && self.exact_points > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroRoute {
    pub boxes: usize,
    pub sum: f64,
    pub beta: f64,
    pub eps: f64,
    pub verify_pass: bool,
    /// Uncovered sample points with a coordinate inside the certificate.
    pub region_points: usize,
    pub region_inside: usize,
    /// `F ⊆ R` checked interval-wise (one-dimensional builds).
    pub region_exact: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalAnalysis {
    pub premeasures: Vec<TailPremeasure>,
    pub containment: Containment,
    pub micro: Option<MicroRoute>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalSet {
    /// `⋂_{n<=m<=N} E_{C_m}` for each `n`.
    pub tails: Vec<IntervalSet>,
    /// `⋃_n` of the tails.
    pub e_exact: IntervalSet,
    pub e_raster: DyadicCubeSet,
    /// Cells of `Ω` not inside any `γC`.
    pub f_raster: DyadicCubeSet,
    pub micro_cover: Option<crate::setlib::BoxCover>,
    pub analysis: ExceptionalAnalysis,
}

/// Dyadic ladder used for the tail premeasures besides the stage gaps.
pub const PREMEASURE_LADDER: u32 = 30;

pub fn exceptional_set(build: &TypicalBuild, depth: u32, samples: usize, seed: u64) -> Result<ExceptionalSet> {
    let built = build.built();
    if built == 0 {
        return Err(Error::Precondition("build has no stages".into()));
    }
    let slabs: Vec<IntervalSet> = build.stages.iter().map(|s| s.params.slabs()).collect();
    let tails: Vec<IntervalSet> = (0..built)
        .map(|i| slabs[i + 1..].iter().fold(slabs[i].clone(), |acc, s| acc.intersection(s)))
        .collect();
    let e_exact = tails.iter().fold(IntervalSet::empty(), |acc, t| acc.union(t));

    let mut scales: Vec<Scale> = (1..=PREMEASURE_LADDER).map(Scale::dyadic).collect();
    scales.extend(build.stages.iter().map(|s| Scale::dyadic(s.params.eta_exp)));
    scales.sort_by(|a, b| b.cmp(a));
    scales.dedup();
    let mut premeasures = Vec::with_capacity(built);
    for (i, t) in tails.iter().enumerate() {
        let n = i + 1;
        let eps = Q::new(1.into(), (n as i64).into());
        let rep = lower_box_premeasure(&SetRepr::Intervals(t.clone()), &build.zeta, Some(&eps), &scales)?;
        premeasures.push(TailPremeasure {
            n,
            eps: 1.0 / n as f64,
            intervals: t.len(),
            value: rep.value,
            argmin: rep.argmin,
            below: rep.value < 1.0 / n as f64,
        });
    }

    let dom = build.base().domain();
    let depth = depth.max(dom.depth());
    let e_raster = DyadicCubeSet::from_intervals(&e_exact, depth)?;
    let f_raster = uncovered_raster(build, depth)?;

    let all: Vec<u64> = dom.packed().to_vec();
    let (olo, ohi) = dom.bounding_box(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut containment = Containment {
        raster_points: 0,
        raster_inside: 0,
        exact_points: 0,
        exact_inside: 0,
        witness: None,
    };
    if !f_raster.is_empty() {
        for _ in 0..samples {
            let c = f_raster.packed()[rng.gen_range(0..f_raster.len())];
            let (lo, hi) = f_raster.cube_bounds(c);
            let x = random_in_box(&mut rng, &lo, &hi)?;
            containment.raster_points += 1;
            let xf = point_f64(&x);
            if xf.iter().any(|&t| e_raster.contains_point(&[t])) {
                containment.raster_inside += 1;
            } else if containment.witness.is_none() {
                containment.witness = Some(xf);
            }
        }
    }
    let slab_union = slabs.iter().fold(IntervalSet::empty(), |acc, s| acc.union(s));
    let uncovered = sample_uncovered(build, &slab_union, &olo, &ohi, samples, &mut rng)?;
    for x in &uncovered {
        containment.exact_points += 1;
        if x.iter().any(|t| e_exact.contains(t)) {
            containment.exact_inside += 1;
        } else if containment.witness.is_none() {
            containment.witness = Some(point_f64(x));
        }
    }

    let (micro, micro_cover) = if matches!(build.zeta.kind(), GaugeKind::InvLog) && !e_exact.is_empty() {
        let set = SetRepr::Intervals(e_exact.clone());
        let rec = hausdorff_upper(&set, &build.zeta, None)?;
        let beta = 1.0 / (2.0 * rec.sum);
        let m = micro_from_hzeta(&rec, beta)?;
        let verdict = microscopic_verify(&m.cover, m.eps, &set)?;
        let region = IntervalSet::new(
            m.cover.boxes().iter().map(|b| (b.lo[0].clone(), b.hi[0].clone())).collect(),
        )?;
        let region_inside = uncovered.iter().filter(|x| x.iter().any(|t| region.contains(t))).count();
        let region_exact = (dom.dim() == 1).then(|| {
            let f1 = slabs
                .iter()
                .fold(IntervalSet::unit(), |acc, s| acc.intersection(s))
                .intersection(&IntervalSet::new(vec![(olo[0].clone(), ohi[0].clone())]).expect("ordered"));
            f1.is_subset_of(&region)
        });
        (
            Some(MicroRoute {
                boxes: m.cover.len(),
                sum: m.sum,
                beta,
                eps: m.eps,
                verify_pass: verdict.pass,
                region_points: uncovered.len(),
                region_inside,
                region_exact,
            }),
            Some(m.cover),
        )
    } else {
        (None, None)
    };

    Ok(ExceptionalSet {
        tails,
        e_exact,
        e_raster,
        f_raster,
        micro_cover,
        analysis: ExceptionalAnalysis { premeasures, containment, micro },
    })
}

/// Cells of `Ω` at `depth` not contained in any `γC` of any stage.
pub fn uncovered_raster(build: &TypicalBuild, depth: u32) -> Result<DyadicCubeSet> {
    let dom = build.base().domain();
    let cells = dom.refine(depth.max(dom.depth()))?;
    let depth = cells.depth();
    let side = Q::new(1.into(), (num_bigint::BigInt::from(1u8)) << depth as usize);
    let n = 1u64 << depth;
    // inside[m][c]: the 1-D cell c lies in some core interval of stage m
    let inside: Vec<Vec<bool>> = build
        .stages
        .iter()
        .map(|s| {
            let p = &s.params;
            let kq = q_int(p.k as i64);
            (0..n)
                .map(|c| {
                    let a = &side * q_int(c as i64);
                    let b = &a + &side;
                    let j: i64 = (&a * &kq).floor().to_integer().try_into().unwrap_or(0);
                    let j = j.clamp(0, p.k as i64 - 1) as u64;
                    let (lo, hi) = p.core_interval(j);
                    a >= lo && b <= hi
                })
                .collect()
        })
        .collect();
    let kept: Vec<u64> = cells
        .packed()
        .iter()
        .copied()
        .filter(|&c| {
            let idx = cells.unpack(c);
            inside.iter().all(|row| idx.iter().any(|&i| !row[i as usize]))
        })
        .collect();
    DyadicCubeSet::from_packed(dom.dim(), depth, kept)
}

/// Exact point uniform in a closed box, with 53-bit dyadic fractions.
pub fn random_in_box(rng: &mut impl Rng, lo: &[Q], hi: &[Q]) -> Result<Vec<Q>> {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| Ok(a + (b - a) * q_from_f64(rng.gen::<f64>())?))
        .collect()
}

fn random_in_set(rng: &mut impl Rng, set: &IntervalSet) -> Result<Q> {
    let iv = &set.intervals()[rng.gen_range(0..set.len())];
    Ok(&iv.0 + (&iv.1 - &iv.0) * q_from_f64(rng.gen::<f64>())?)
}

/// `x` lies in no `γC` of any stage.
pub fn is_uncovered(build: &TypicalBuild, x: &[Q]) -> bool {
    build.stages.iter().all(|s| {
        let p = &s.params;
        let kq = q_int(p.k as i64);
        x.iter().any(|t| {
            let j: i64 = (t * &kq).floor().to_integer().try_into().unwrap_or(0);
            let (lo, hi) = p.core_interval(j.clamp(0, p.k as i64 - 1) as u64);
            *t < lo || *t > hi
        })
    })
}

/// Rejection sampler for exact points of the uncovered set: random points
/// of `Ω` with one or more coordinates moved into the stage slabs.
fn sample_uncovered(
    build: &TypicalBuild,
    slabs: &IntervalSet,
    olo: &[Q],
    ohi: &[Q],
    want: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<Q>>> {
    let d = olo.len();
    let per_axis: Vec<IntervalSet> = (0..d)
        .map(|i| slabs.intersection(&IntervalSet::new(vec![(olo[i].clone(), ohi[i].clone())]).expect("ordered")))
        .collect();
    let mut out = Vec::with_capacity(want);
    let mut attempts = 0usize;
    while out.len() < want && attempts < 100 * want.max(1) {
        attempts += 1;
        let mut x = random_in_box(rng, olo, ohi)?;
        let axis = rng.gen_range(0..d);
        for (i, set) in per_axis.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            if i == axis || rng.gen_bool(0.25) {
                x[i] = random_in_set(rng, set)?;
            }
        }
        if is_uncovered(build, &x) {
            out.push(x);
        }
    }
    Ok(out)
}
