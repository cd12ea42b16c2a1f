//! Explicit finite covers by axis-aligned boxes.

use serde::{Deserialize, Serialize};

use super::cubes::DyadicCubeSet;
use super::intervals::IntervalSet;
use super::scale::{q_fmt, q_int, q_ratio, q_to_f64, Q};
use crate::error::{Error, Result};
use crate::gauges::Gauge;

/// A closed axis-aligned box with exact corners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverBox {
    pub lo: Vec<Q>,
    pub hi: Vec<Q>,
}

impl CoverBox {
    pub fn new(lo: Vec<Q>, hi: Vec<Q>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParam("box corners must have equal positive length".into()));
        }
        let (min, max) = (q_int(-1), q_int(2));
        for (a, b) in lo.iter().zip(&hi) {
            if a > b {
                return Err(Error::InvalidParam(format!("box side with lo {} > hi {}", q_fmt(a), q_fmt(b))));
            }
            if a < &min || b > &max {
                return Err(Error::InvalidParam("box leaves [-1, 2]^d".into()));
            }
        }
        Ok(CoverBox { lo, hi })
    }

    /// Box `[c - s/2, c + s/2]^d` around a point.
    pub fn centered(center: &[Q], side: &Q) -> Result<Self> {
        let half = side * q_ratio(1, 2);
        Self::new(
            center.iter().map(|c| c - &half).collect(),
            center.iter().map(|c| c + &half).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Max-norm diameter: the longest side.
    pub fn diam(&self) -> Q {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .max()
            .unwrap_or_else(|| q_int(0))
    }

    pub fn volume(&self) -> Q {
        self.lo.iter().zip(&self.hi).fold(q_int(1), |acc, (a, b)| acc * (b - a))
    }

    pub fn contains_box(&self, lo: &[Q], hi: &[Q]) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= lo[i] && hi[i] <= self.hi[i])
    }

    pub fn contains_point(&self, x: &[Q]) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= x[i] && x[i] <= self.hi[i])
    }

    fn meets_box(&self, lo: &[Q], hi: &[Q]) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= hi[i] && lo[i] <= self.hi[i])
    }
}

/// An ordered list of boxes; position `i` carries index `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxCover {
    dim: usize,
    boxes: Vec<CoverBox>,
}

impl BoxCover {
    pub fn new(dim: usize, boxes: Vec<CoverBox>) -> Result<Self> {
        if let Some(b) = boxes.iter().find(|b| b.dim() != dim) {
            return Err(Error::InvalidParam(format!("box of dimension {} in a {dim}-dimensional cover", b.dim())));
        }
        Ok(BoxCover { dim, boxes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[CoverBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn max_diam(&self) -> Q {
        self.boxes.iter().map(|b| b.diam()).max().unwrap_or_else(|| q_int(0))
    }

    /// First point of the closed box `[lo, hi]` not covered, if any. Exact:
    /// the box is cut along every cover boundary and each resulting cell is
    /// tested at its centre.
    pub fn uncovered_in(&self, lo: &[Q], hi: &[Q]) -> Option<Vec<Q>> {
        let relevant: Vec<&CoverBox> = self.boxes.iter().filter(|b| b.meets_box(lo, hi)).collect();
        if relevant.iter().any(|b| b.contains_box(lo, hi)) {
            return None;
        }
        let d = lo.len();
        let mut cuts: Vec<Vec<Q>> = Vec::with_capacity(d);
        for i in 0..d {
            let mut c = vec![lo[i].clone(), hi[i].clone()];
            for b in &relevant {
                for v in [&b.lo[i], &b.hi[i]] {
                    if v > &lo[i] && v < &hi[i] {
                        c.push(v.clone());
                    }
                }
            }
            c.sort();
            c.dedup();
            cuts.push(c);
        }
        // Sample points: every cut value and every cell midpoint per axis.
        let samples: Vec<Vec<Q>> = cuts
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.extend(c.windows(2).map(|w| (&w[0] + &w[1]) * q_ratio(1, 2)));
                s.sort();
                s
            })
            .collect();
        let mut pos = vec![0usize; d];
        loop {
            let p: Vec<Q> = (0..d).map(|i| samples[i][pos[i]].clone()).collect();
            if !relevant.iter().any(|b| b.contains_point(&p)) {
                return Some(p);
            }
            let mut axis = 0;
            while axis < d {
                pos[axis] += 1;
                if pos[axis] < samples[axis].len() {
                    break;
                }
                pos[axis] = 0;
                axis += 1;
            }
            if axis == d {
                return None;
            }
        }
    }

    /// Whether the cover contains every cube of `set`; otherwise a witness.
    pub fn witness_uncovered(&self, set: &SetRepr) -> Option<Vec<Q>> {
        match set {
            SetRepr::Intervals(iv) => iv
                .intervals()
                .iter()
                .find_map(|(a, b)| self.uncovered_in(&[a.clone()], &[b.clone()])),
            SetRepr::Cubes(c) => c.packed().iter().find_map(|&p| {
                let (lo, hi) = c.cube_bounds(p);
                self.uncovered_in(&lo, &hi)
            }),
        }
    }
}

/// The two concrete set forms: exact intervals on the line or dyadic cubes.
#[derive(Debug, Clone, PartialEq)]
pub enum SetRepr {
    Intervals(IntervalSet),
    Cubes(DyadicCubeSet),
}

impl SetRepr {
    pub fn dim(&self) -> u32 {
        match self {
            SetRepr::Intervals(_) => 1,
            SetRepr::Cubes(c) => c.dim(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SetRepr::Intervals(iv) => iv.is_empty(),
            SetRepr::Cubes(c) => c.is_empty(),
        }
    }

    /// Interval form when one-dimensional.
    pub fn as_intervals(&self) -> Option<IntervalSet> {
        match self {
            SetRepr::Intervals(iv) => Some(iv.clone()),
            SetRepr::Cubes(c) if c.dim() == 1 => c.to_intervals().ok(),
            SetRepr::Cubes(_) => None,
        }
    }

    /// One box per interval, or one box per cube.
    pub fn natural_cover(&self) -> BoxCover {
        match self {
            SetRepr::Intervals(iv) => BoxCover {
                dim: 1,
                boxes: iv
                    .intervals()
                    .iter()
                    .map(|(a, b)| CoverBox { lo: vec![a.clone()], hi: vec![b.clone()] })
                    .collect(),
            },
            SetRepr::Cubes(c) => BoxCover {
                dim: c.dim() as usize,
                boxes: c
                    .packed()
                    .iter()
                    .map(|&p| {
                        let (lo, hi) = c.cube_bounds(p);
                        CoverBox { lo, hi }
                    })
                    .collect(),
            },
        }
    }

    /// Bounding boxes of connected components, largest extent first.
    pub fn component_boxes(&self) -> Vec<CoverBox> {
        let mut out: Vec<CoverBox> = match self {
            SetRepr::Intervals(iv) => iv
                .intervals()
                .iter()
                .map(|(a, b)| CoverBox { lo: vec![a.clone()], hi: vec![b.clone()] })
                .collect(),
            SetRepr::Cubes(c) => c
                .components()
                .iter()
                .map(|g| {
                    let (lo, hi) = c.bounding_box(g);
                    CoverBox { lo, hi }
                })
                .collect(),
        };
        out.sort_by(|a, b| b.diam().cmp(&a.diam()).then_with(|| b.volume().cmp(&a.volume())).then_with(|| a.lo.cmp(&b.lo)));
        out
    }
}

impl From<IntervalSet> for SetRepr {
    fn from(v: IntervalSet) -> Self {
        SetRepr::Intervals(v)
    }
}

impl From<DyadicCubeSet> for SetRepr {
    fn from(v: DyadicCubeSet) -> Self {
        SetRepr::Cubes(v)
    }
}

/// A cover together with its gauge sum `Σ g(diam B_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverRecord {
    pub cover: BoxCover,
    pub gauge: Gauge,
    pub sum: f64,
    /// Largest diameter in the cover.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSummary {
    pub gauge: Gauge,
    pub boxes: usize,
    pub sum: f64,
    pub delta: f64,
    pub norm: String,
    /// Only an upper bound for the Hausdorff premeasure at scale `delta`.
    pub bound: String,
}

impl CoverRecord {
    pub fn recompute_sum(cover: &BoxCover, gauge: &Gauge) -> Result<f64> {
        let mut terms = Vec::with_capacity(cover.len());
        for b in cover.boxes() {
            terms.push(gauge.eval_or_zero(q_to_f64(&b.diam()))?);
        }
        Ok(neumaier_sum(&terms))
    }

    pub fn summary(&self) -> CoverSummary {
        CoverSummary {
            gauge: self.gauge.clone(),
            boxes: self.cover.len(),
            sum: self.sum,
            delta: self.delta,
            norm: "max".into(),
            bound: "upper".into(),
        }
    }
}

/// Compensated summation.
pub fn neumaier_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `Σ g(diam B)` over a verified cover of `set`; `None` uses the natural
/// cover (the intervals, or the cubes at the set's depth).
pub fn hausdorff_upper(set: &SetRepr, g: &Gauge, cover: Option<BoxCover>) -> Result<CoverRecord> {
    let cover = match cover {
        Some(c) => {
            if c.dim() != set.dim() as usize {
                return Err(Error::InvalidParam("cover dimension differs from the set".into()));
            }
            if let Some(w) = c.witness_uncovered(set) {
                return Err(Error::NotCovered(w.iter().map(q_to_f64).collect()));
            }
            c
        }
        None => set.natural_cover(),
    };
    let sum = CoverRecord::recompute_sum(&cover, g)?;
    let delta = q_to_f64(&cover.max_diam());
    Ok(CoverRecord { cover, gauge: g.clone(), sum, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_natural_cover_sums_to_one() {
        let g = Gauge::power(2f64.ln() / 3f64.ln()).unwrap();
        for k in 1..=12 {
            let rec = hausdorff_upper(&SetRepr::Intervals(IntervalSet::cantor(k)), &g, None).unwrap();
            assert!((rec.sum - 1.0).abs() <= 1e-12, "k={k} sum={}", rec.sum);
        }
    }

    #[test]
    fn unit_interval_square_gauge() {
        let g = Gauge::power(2.0).unwrap();
        for k in 1..=10 {
            let full = DyadicCubeSet::full(1, k).unwrap();
            let rec = hausdorff_upper(&SetRepr::Cubes(full), &g, None).unwrap();
            assert!((rec.sum - 2f64.powi(-(k as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn coverage_witness() {
        let set = SetRepr::Cubes(DyadicCubeSet::new(2, 1, &[vec![0, 0], vec![1, 1]]).unwrap());
        let half = q_ratio(1, 2);
        let b1 = CoverBox::new(vec![q_int(0), q_int(0)], vec![half.clone(), half.clone()]).unwrap();
        let b2 = CoverBox::new(vec![half.clone(), half.clone()], vec![q_int(1), q_ratio(3, 4)]).unwrap();
        let cover = BoxCover::new(2, vec![b1.clone(), b2]).unwrap();
        let w = cover.witness_uncovered(&set).unwrap();
        assert!(w[1] > q_ratio(3, 4));
        let b3 = CoverBox::new(vec![half.clone(), q_ratio(3, 4)], vec![q_int(1), q_int(1)]).unwrap();
        let mut boxes = cover.boxes().to_vec();
        boxes.push(b3);
        assert!(BoxCover::new(2, boxes).unwrap().witness_uncovered(&set).is_none());
        let g = Gauge::power(1.0).unwrap();
        assert!(matches!(
            hausdorff_upper(&set, &g, Some(BoxCover::new(2, vec![b1]).unwrap())),
            Err(Error::NotCovered(_))
        ));
    }
}
