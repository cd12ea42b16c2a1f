//! Certificates that a build lies in `F(C_n)` and that its scaled
//! oscillation is small at covered points.

use serde::{Deserialize, Serialize};

use super::build::TypicalBuild;
use crate::error::{Error, Result};
use crate::funclib::sampled::point_f64;
use crate::gauges::ScaleFn;
use crate::setlib::scale::{q_int, q_to_f64};
use crate::setlib::Q;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    pub n: usize,
    pub cubes: usize,
    pub tail: f64,
    /// `(1/n) φ(η/2)`.
    pub threshold: f64,
    /// Largest certified `diam g_n(C)`; zero on exact plateaus.
    pub stage_diam_max: f64,
    /// Largest enclosure of `diam g*(C)` computed directly.
    pub final_diam_max: f64,
    /// Per cube `threshold - (diam g_n(C) + 2 T_n)`, in cube order.
    pub margins: Vec<f64>,
    pub margin_min: f64,
    /// `(1/n) φ(η/4) - 2 T_n`.
    pub cert_margin: f64,
    pub pass: bool,
}

/// `diam g*(C) <= diam g_n(C) + 2 T_n < (1/n) φ(η_n/2)` for every cube.
pub fn certify_membership(build: &TypicalBuild, n: usize) -> Result<MembershipCertificate> {
    let rec = build.stage(n)?;
    let layer = build.layer(n)?;
    let tail = build.tail(n)?;
    let p = &rec.params;
    let nf = n as f64;
    let threshold = build.phi.eval(p.eta_f64() / 2.0)? / nf;
    let cert_margin = build.phi.eval(p.eta_f64() / 4.0)? / nf - 2.0 * tail;
    let last = build.function.stages();
    let mut margins = Vec::with_capacity(rec.cubes.len());
    let mut stage_diam_max = 0.0f64;
    let mut final_diam_max = 0.0f64;
    for idx in &rec.cubes {
        let (lo, hi) = layer.cube_box(idx);
        let (a, b) = build
            .function
            .range_at(n, &lo, &hi)
            .ok_or_else(|| Error::Consistency(format!("stage {n} cube {idx:?} misses Ω")))?;
        let diam = b - a;
        stage_diam_max = stage_diam_max.max(diam);
        if let Some((a, b)) = build.function.range_at(last, &lo, &hi) {
            final_diam_max = final_diam_max.max(b - a);
        }
        margins.push(threshold - (diam + 2.0 * tail));
    }
    let margin_min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = margin_min > 0.0 && cert_margin > 0.0;
    if !pass {
        return Err(Error::Consistency(format!(
            "stage {n}: membership margin {margin_min}, certification margin {cert_margin}"
        )));
    }
    Ok(MembershipCertificate {
        n,
        cubes: rec.cubes.len(),
        tail,
        threshold,
        stage_diam_max,
        final_diam_max,
        margins,
        margin_min,
        cert_margin,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LipCertificate {
    Covered {
        n: usize,
        cube: Vec<u64>,
        /// `η_n / 4`: the ball `B(x, r)` stays inside the cube.
        radius: f64,
        /// `2 T_n`, bounding `ω_{g*}(x, r)`.
        bound: f64,
        /// `(1/n) φ(r)`.
        threshold: f64,
        /// Enclosure width of `g*` on the ball, computed directly.
        direct_osc: f64,
    },
    NotCovered {
        n: usize,
        axis: usize,
        /// `x_axis` lies within `η/2` of `slab / k`.
        slab: u64,
    },
}

impl LipCertificate {
    pub fn is_covered(&self) -> bool {
        matches!(self, LipCertificate::Covered { .. })
    }
}

/// Certified bound on the oscillation of the final function at `x` and
/// scale `η_n/4` when `x ∈ γC` for a stage-`n` cube.
pub fn certify_lip_bound(build: &TypicalBuild, x: &[Q], n: usize) -> Result<LipCertificate> {
    let rec = build.stage(n)?;
    let layer = build.layer(n)?;
    let tail = build.tail(n)?;
    if x.len() != build.base().dim() as usize || !build.base().domain().contains_point_q(x) {
        return Err(Error::OutsideDomain(point_f64(x)));
    }
    let p = &rec.params;
    let kq = q_int(p.k as i64);
    let mut cube = Vec::with_capacity(x.len());
    for (axis, t) in x.iter().enumerate() {
        let j: i64 = (t * &kq).floor().to_integer().try_into().unwrap_or(0);
        let j = j.clamp(0, p.k as i64 - 1) as u64;
        let (a, b) = p.core_interval(j);
        if *t < a || *t > b {
            let slab: i64 = (t * &kq + Q::new(1.into(), 2.into())).floor().to_integer().try_into().unwrap_or(0);
            return Ok(LipCertificate::NotCovered { n, axis, slab: slab.clamp(0, p.k as i64) as u64 });
        }
        cube.push(j);
    }
    if layer.plateau(&cube).is_none() {
        return Err(Error::Consistency(format!("point in Ω inside dropped cube {cube:?}")));
    }
    let r = p.cert_radius();
    let radius = q_to_f64(&r);
    let threshold = build.phi.eval(radius)? / n as f64;
    let bound = 2.0 * tail;
    if !(bound < threshold) {
        return Err(Error::Consistency(format!("stage {n}: bound {bound} not below (1/n)φ(r) = {threshold}")));
    }
    let lo: Vec<Q> = x.iter().map(|t| t - &r).collect();
    let hi: Vec<Q> = x.iter().map(|t| t + &r).collect();
    let direct_osc = build
        .function
        .range_at(build.function.stages(), &lo, &hi)
        .map_or(0.0, |(a, b)| b - a);
    Ok(LipCertificate::Covered { n, cube, radius, bound, threshold, direct_osc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageProfile {
    pub x: Vec<f64>,
    pub covered: Vec<bool>,
    pub count: usize,
    /// Covered at `>= ceil(n/2)` of the `n` built stages; a finite-depth
    /// stand-in for "covered infinitely often", not the limit set itself.
    pub often_approx: bool,
}

pub fn coverage_profile(build: &TypicalBuild, x: &[Q]) -> Result<CoverageProfile> {
    let mut covered = Vec::with_capacity(build.built());
    for n in 1..=build.built() {
        covered.push(certify_lip_bound(build, x, n)?.is_covered());
    }
    let count = covered.iter().filter(|&&c| c).count();
    Ok(CoverageProfile {
        x: point_f64(x),
        often_approx: 2 * count >= build.built(),
        covered,
        count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipSample {
    pub n: usize,
    pub points: usize,
    pub covered: usize,
    /// Smallest `threshold - bound` over the points.
    pub margin_min: f64,
    pub bound: f64,
    pub threshold: f64,
    /// Largest directly computed enclosure width over the balls.
    pub direct_osc_max: f64,
    pub pass: bool,
}

/// `certify_lip_bound` at `points` exact random points of stage-`n` cores.
pub fn certify_lip_sample(build: &TypicalBuild, n: usize, points: usize, seed: u64) -> Result<LipSample> {
    use rand::{Rng, SeedableRng};
    let layer = build.layer(n)?;
    let kept: Vec<Vec<u64>> = layer.kept().map(|(idx, _)| idx).collect();
    if kept.is_empty() {
        return Err(Error::Consistency(format!("stage {n} keeps no cube")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut out = LipSample {
        n,
        points,
        covered: 0,
        margin_min: f64::INFINITY,
        bound: 0.0,
        threshold: 0.0,
        direct_osc_max: 0.0,
        pass: false,
    };
    let dom = build.base().domain();
    let mut drawn = 0;
    let mut attempts = 0usize;
    while drawn < points {
        attempts += 1;
        if attempts > 100 * points.max(1) {
            return Err(Error::Consistency(format!("stage {n}: cores barely meet Ω")));
        }
        let (lo, hi) = layer.core_box(&kept[rng.gen_range(0..kept.len())]);
        let x = super::exceptional::random_in_box(&mut rng, &lo, &hi)?;
        if !dom.contains_point_q(&x) {
            continue;
        }
        drawn += 1;
        if let LipCertificate::Covered { bound, threshold, direct_osc, .. } = certify_lip_bound(build, &x, n)? {
            out.covered += 1;
            out.margin_min = out.margin_min.min(threshold - bound);
            out.bound = bound;
            out.threshold = threshold;
            out.direct_osc_max = out.direct_osc_max.max(direct_osc);
        }
    }
    out.pass = out.covered == points && out.margin_min > 0.0;
    Ok(out)
}
