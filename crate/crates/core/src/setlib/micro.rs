//! Microscopic-set certificates: covers `B_1, B_2, ...` with
//! `λ(B_n) <= ε^n`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::cover::{BoxCover, CoverBox, CoverRecord, SetRepr};
use super::scale::{q_from_f64, q_ln, q_to_f64, Q};
use crate::error::{Error, Result};
use crate::gauges::GaugeKind;

#[derive(Debug, Clone, PartialEq)]
pub enum MicroOutcome {
    Certificate(BoxCover),
    Failure(MicroFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroFailure {
    /// Bounding box of the first component that found no budget.
    pub component_lo: Vec<f64>,
    pub component_hi: Vec<f64>,
    pub volume: f64,
    /// The index whose budget `ε^n` was too small, or `n_max + 1`.
    pub index: usize,
    pub reason: String,
}

fn check_eps(eps: f64) -> Result<Q> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParam(format!("ε must lie in (0, 1), got {eps}")));
    }
    q_from_f64(eps)
}

/// Greedy certificate: connected components by decreasing extent, each
/// taking the next index. A degenerate component (a point on the line) is
/// padded to a box of side `ε^n` centred on it.
pub fn microscopic_certificate(set: &SetRepr, eps: f64, n_max: usize) -> Result<MicroOutcome> {
    let eq = check_eps(eps)?;
    let comps = set.component_boxes();
    let mut boxes = Vec::with_capacity(comps.len());
    let mut budget = Q::one();
    for (i, comp) in comps.into_iter().enumerate() {
        let n = i + 1;
        budget *= &eq;
        let fail = |comp: &CoverBox, reason: String| {
            MicroOutcome::Failure(MicroFailure {
                component_lo: comp.lo.iter().map(q_to_f64).collect(),
                component_hi: comp.hi.iter().map(q_to_f64).collect(),
                volume: q_to_f64(&comp.volume()),
                index: n,
                reason,
            })
        };
        if n > n_max {
            return Ok(fail(&comp, format!("more than {n_max} components")));
        }
        let vol = comp.volume();
        let placed = if vol.is_zero() && comp.dim() == 1 {
            CoverBox::centered(&comp.lo, &budget)?
        } else {
            comp.clone()
        };
        if placed.volume() > budget {
            return Ok(fail(&comp, format!("volume exceeds ε^{n}")));
        }
        boxes.push(placed);
    }
    Ok(MicroOutcome::Certificate(BoxCover::new(set.dim() as usize, boxes)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroVerdict {
    pub pass: bool,
    /// First index `n` with `λ(B_n) > ε^n`.
    pub volume_violation: Option<usize>,
    /// A point of the set outside every box.
    pub uncovered: Option<Vec<f64>>,
    /// Multi-index of the cube holding the uncovered point, for cube sets.
    pub uncovered_cube: Option<Vec<u64>>,
}

pub fn microscopic_verify(cover: &BoxCover, eps: f64, set: &SetRepr) -> Result<MicroVerdict> {
    let eq = check_eps(eps)?;
    if cover.dim() != set.dim() as usize {
        return Err(Error::InvalidParam("cover dimension differs from the set".into()));
    }
    let mut budget = Q::one();
    let mut volume_violation = None;
    for (i, b) in cover.boxes().iter().enumerate() {
        budget *= &eq;
        if b.volume() > budget {
            volume_violation = Some(i + 1);
            break;
        }
    }
    let witness = cover.witness_uncovered(set);
    let uncovered_cube = match (&witness, set) {
        (Some(w), SetRepr::Cubes(c)) => {
            let side = (1u64 << c.depth()) as f64;
            c.indices().find(|idx| {
                idx.iter().zip(w).all(|(&k, x)| {
                    let t = q_to_f64(x) * side;
                    t >= k as f64 && t <= (k + 1) as f64
                })
            })
        }
        _ => None,
    };
    Ok(MicroVerdict {
        pass: volume_violation.is_none() && witness.is_none(),
        volume_violation,
        uncovered: witness.map(|w| w.iter().map(q_to_f64).collect()),
        uncovered_cube,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCheck {
    pub n: usize,
    pub diam: f64,
    pub zeta: f64,
    /// `1 / (β n)`.
    pub zeta_bound: f64,
    pub ln_diam: f64,
    /// `-β n`.
    pub ln_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HzetaMicro {
    /// Boxes in decreasing diameter order.
    pub cover: BoxCover,
    pub beta: f64,
    /// `e^{-β}`.
    pub eps: f64,
    pub sum: f64,
    pub checks: Vec<IndexCheck>,
}

/// Turns a cover with small `Σ ζ(diam)` under `ζ = 1/|ln r|` into a
/// microscopic certificate for `ε = e^{-β}`.
pub fn micro_from_hzeta(record: &CoverRecord, beta: f64) -> Result<HzetaMicro> {
    if !matches!(record.gauge.kind(), GaugeKind::InvLog) {
        return Err(Error::InvalidParam(format!("expected the inv_log gauge, got {}", record.gauge)));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParam(format!("β must be positive, got {beta}")));
    }
    let mut boxes = record.cover.boxes().to_vec();
    boxes.sort_by(|a, b| b.diam().cmp(&a.diam()));
    let sorted = BoxCover::new(record.cover.dim(), boxes)?;
    let sum = CoverRecord::recompute_sum(&sorted, &record.gauge)?;
    if sum >= 1.0 / beta {
        return Err(Error::Precondition(format!("Σ ζ(diam) = {sum} is not below 1/β = {}", 1.0 / beta)));
    }
    let mut checks = Vec::with_capacity(sorted.len());
    for (i, b) in sorted.boxes().iter().enumerate() {
        let n = i + 1;
        let dq = b.diam();
        let diam = q_to_f64(&dq);
        let zeta = record.gauge.eval_or_zero(diam)?;
        let zeta_bound = 1.0 / (beta * n as f64);
        let ln_diam = if dq.is_zero() { f64::NEG_INFINITY } else { q_ln(&dq) };
        let ln_bound = -beta * n as f64;
        if zeta >= zeta_bound {
            return Err(Error::Precondition(format!("index {n}: ζ(r_n) = {zeta} is not below 1/(βn) = {zeta_bound}")));
        }
        if ln_diam >= ln_bound {
            return Err(Error::Precondition(format!("index {n}: diameter {diam} is not below e^(-βn)")));
        }
        checks.push(IndexCheck { n, diam, zeta, zeta_bound, ln_diam, ln_bound });
    }
    Ok(HzetaMicro { cover: sorted, beta, eps: (-beta).exp(), sum, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauges::Gauge;
    use crate::setlib::cover::hausdorff_upper;
    use crate::setlib::cubes::DyadicCubeSet;
    use crate::setlib::intervals::IntervalSet;
    use crate::setlib::scale::{q_int, q_ratio};

    #[test]
    fn three_points() {
        let set = SetRepr::Intervals(IntervalSet::points(&[q_ratio(1, 5), q_ratio(1, 2), q_ratio(4, 5)]));
        let MicroOutcome::Certificate(c) = microscopic_certificate(&set, 0.1, 10).unwrap() else { panic!() };
        assert_eq!(c.len(), 3);
        for (i, b) in c.boxes().iter().enumerate() {
            assert!((q_to_f64(&b.diam()) - 0.1f64.powi(i as i32 + 1)).abs() < 1e-15);
        }
        assert!(microscopic_verify(&c, 0.1, &set).unwrap().pass);
    }

    #[test]
    fn slab_single_box() {
        let idx: Vec<Vec<u64>> = (0..64).map(|j| vec![0, j]).collect();
        let set = SetRepr::Cubes(DyadicCubeSet::new(2, 6, &idx).unwrap());
        let MicroOutcome::Certificate(c) = microscopic_certificate(&set, 0.1, 5).unwrap() else { panic!() };
        assert_eq!(c.len(), 1);
        assert_eq!(c.boxes()[0].volume(), q_ratio(1, 64));
    }

    #[test]
    fn verify_failures() {
        let set = SetRepr::Intervals(IntervalSet::points(&[q_ratio(1, 4), q_ratio(3, 4)]));
        let eps: f64 = 0.1;
        let b1 = CoverBox::centered(&[q_ratio(1, 4)], &q_ratio(1, 20)).unwrap();
        let big = q_from_f64(eps.powf(1.5)).unwrap();
        let b2 = CoverBox::centered(&[q_ratio(3, 4)], &big).unwrap();
        let v = microscopic_verify(&BoxCover::new(1, vec![b1.clone(), b2]).unwrap(), eps, &set).unwrap();
        assert_eq!(v.volume_violation, Some(2));
        let v = microscopic_verify(&BoxCover::new(1, vec![b1]).unwrap(), eps, &set).unwrap();
        assert!(!v.pass);
        assert_eq!(v.uncovered, Some(vec![0.75]));
        let cubes = SetRepr::Cubes(DyadicCubeSet::new(1, 2, &[vec![0], vec![3]]).unwrap());
        let b = CoverBox::new(vec![q_int(0)], vec![q_ratio(1, 4)]).unwrap();
        let v = microscopic_verify(&BoxCover::new(1, vec![b]).unwrap(), 0.5, &cubes).unwrap();
        assert_eq!(v.uncovered_cube, Some(vec![3]));
    }

    #[test]
    fn hzeta_examples() {
        let g = Gauge::inv_log();
        let boxes: Vec<CoverBox> = (1..=10)
            .map(|n| CoverBox::new(vec![q_int(0)], vec![q_from_f64((-10.0 * n as f64).exp()).unwrap()]).unwrap())
            .collect();
        let cover = BoxCover::new(1, boxes).unwrap();
        let set = SetRepr::Intervals(IntervalSet::points(&[q_int(0)]));
        let rec = hausdorff_upper(&set, &g, Some(cover)).unwrap();
        assert!((rec.sum - 0.292_896_825_396_825_4).abs() < 1e-9);
        assert!(matches!(micro_from_hzeta(&rec, 9.0), Err(Error::Precondition(_))));
        let m = micro_from_hzeta(&rec, 3.0).unwrap();
        assert!(microscopic_verify(&m.cover, m.eps, &set).unwrap().pass);

        let single = BoxCover::new(1, vec![CoverBox::new(vec![q_int(0)], vec![q_from_f64((-100f64).exp()).unwrap()]).unwrap()]).unwrap();
        let rec = hausdorff_upper(&set, &g, Some(single)).unwrap();
        assert!(micro_from_hzeta(&rec, 50.0).is_ok());

        let halves = SetRepr::Intervals(IntervalSet::unit());
        let two = BoxCover::new(
            1,
            vec![
                CoverBox::new(vec![q_int(0)], vec![q_ratio(1, 2)]).unwrap(),
                CoverBox::new(vec![q_ratio(1, 2)], vec![q_int(1)]).unwrap(),
            ],
        )
        .unwrap();
        let rec = hausdorff_upper(&halves, &g, Some(two)).unwrap();
        assert_eq!(rec.sum, 2.0);
        assert!(matches!(micro_from_hzeta(&rec, 2.0), Err(Error::Precondition(_))));
    }
}
