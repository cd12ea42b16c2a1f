//! Box counting, lower box premeasures and lower box dimension.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cover::SetRepr;
use super::cubes::DyadicCubeSet;
use super::intervals::IntervalSet;
use super::scale::{q_dyadic, q_to_f64, Scale, Q};
use crate::error::{Error, Result};
use crate::gauges::ScaleFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Minimal cover size, exact.
    Exact,
    /// Cells of the δ-grid meeting the set.
    GridProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxCount {
    pub count: u64,
    pub mode: CountMode,
}

/// Deepest supported scale exponent: `δ >= 2^{-MAX_SCALE_EXP}`.
pub const MAX_SCALE_EXP: u32 = 62;

fn check_scale(delta: &Scale) -> Result<()> {
    if delta.value() < &q_dyadic(MAX_SCALE_EXP) {
        return Err(Error::InvalidParam(format!("scale {delta} below 2^-{MAX_SCALE_EXP}")));
    }
    Ok(())
}

/// `N_δ(E)`. Exact in dimension one; a grid-cell count otherwise.
pub fn n_delta(set: &SetRepr, delta: &Scale) -> Result<BoxCount> {
    check_scale(delta)?;
    if let Some(iv) = set.as_intervals() {
        return Ok(BoxCount { count: iv.n_delta(delta), mode: CountMode::Exact });
    }
    match set {
        SetRepr::Cubes(c) => Ok(BoxCount { count: grid_count(c, delta)?, mode: CountMode::GridProxy }),
        SetRepr::Intervals(_) => unreachable!("interval sets are one-dimensional"),
    }
}

/// Number of open δ-cells `Π (c_i δ, (c_i+1) δ)` meeting some cube.
fn grid_count(set: &DyadicCubeSet, delta: &Scale) -> Result<u64> {
    if set.is_empty() {
        return Ok(0);
    }
    let dq = delta.value();
    // Dyadic δ at or above the cube side: coarsening is exact.
    if dq.numer() == &BigInt::from(1) {
        let den = dq.denom();
        let j = den.trailing_zeros().unwrap_or(0) as u32;
        if den == &(BigInt::from(1) << j as usize) {
            if j <= set.depth() {
                return Ok(set.coarsen(j)?.len() as u64);
            }
        }
    }
    let h = q_dyadic(set.depth());
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(set.dim() as usize);
    for idx in set.indices() {
        ranges.clear();
        for &k in &idx {
            let lo = Q::from_integer(BigInt::from(k)) * &h;
            let hi = &lo + &h;
            let first = (&lo / dq).floor().to_integer().to_u64().unwrap_or(0);
            let last = ((&hi / dq).ceil().to_integer().to_u64().unwrap_or(0)).saturating_sub(1).max(first);
            ranges.push((first, last));
        }
        let count: u128 = ranges.iter().map(|(a, b)| (b - a + 1) as u128).product();
        if seen.len() as u128 + count > super::cubes::MAX_CELLS as u128 {
            return Err(Error::InvalidParam(format!("grid count at scale {delta} exceeds cell limit")));
        }
        let mut cur: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        loop {
            seen.insert(cur.clone());
            let mut axis = 0;
            while axis < cur.len() {
                cur[axis] += 1;
                if cur[axis] <= ranges[axis].1 {
                    break;
                }
                cur[axis] = ranges[axis].0;
                axis += 1;
            }
            if axis == cur.len() {
                break;
            }
        }
    }
    Ok(seen.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleValue {
    pub scale: String,
    pub delta: f64,
    pub count: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremeasureReport {
    pub gauge: String,
    /// `None` means no cap: all scanned scales.
    pub eps: Option<f64>,
    pub mode: CountMode,
    pub per_scale: Vec<ScaleValue>,
    /// Minimum of `N_δ ζ(δ)` over the scanned scales `δ <= ε`.
    pub value: f64,
    pub argmin: Option<f64>,
    pub empty: bool,
    /// Always `upper`: the true infimum may be smaller at unscanned scales.
    pub bound: String,
}

/// `min_{δ <= ε} N_δ(E) ζ(δ)` over the scanned scales.
pub fn lower_box_premeasure(
    set: &SetRepr,
    zeta: &dyn ScaleFn,
    eps: Option<&Q>,
    scales: &[Scale],
) -> Result<PremeasureReport> {
    let chosen: Vec<&Scale> = scales.iter().filter(|s| eps.map_or(true, |e| s.value() <= e)).collect();
    let counts: Vec<Result<BoxCount>> = chosen.par_iter().map(|s| n_delta(set, s)).collect();
    let mut per_scale = Vec::with_capacity(chosen.len());
    let mut mode = if set.dim() == 1 { CountMode::Exact } else { CountMode::GridProxy };
    for (s, c) in chosen.iter().zip(counts) {
        let c = c?;
        mode = c.mode;
        let value = if c.count == 0 { 0.0 } else { c.count as f64 * zeta.eval(s.as_f64())? };
        per_scale.push(ScaleValue { scale: s.to_string(), delta: s.as_f64(), count: c.count, value });
    }
    let best = per_scale
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(b.delta.total_cmp(&a.delta)));
    Ok(PremeasureReport {
        gauge: zeta.label(),
        eps: eps.map(q_to_f64),
        mode,
        value: best.map_or(f64::INFINITY, |b| b.value),
        argmin: best.map(|b| b.delta),
        per_scale,
        empty: set.is_empty(),
        bound: "upper".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimScale {
    pub scale: String,
    pub delta: f64,
    pub count: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub mode: CountMode,
    pub per_scale: Vec<DimScale>,
    /// Minimum of `ln N / |ln r|` over the deepest half of the scales.
    pub lbdim_proxy: f64,
    /// Least-squares slope of `ln N` against `|ln r|`.
    pub slope: f64,
    pub empty: bool,
}

pub const MIN_DIM_SCALES: usize = 6;

pub fn lower_box_dim(set: &SetRepr, scales: &[Scale]) -> Result<DimensionReport> {
    let mut scales: Vec<Scale> = scales.to_vec();
    scales.sort_by(|a, b| b.cmp(a));
    scales.dedup();
    if scales.len() < MIN_DIM_SCALES {
        return Err(Error::InvalidParam(format!(
            "need at least {MIN_DIM_SCALES} scales, got {}",
            scales.len()
        )));
    }
    if scales.iter().any(|s| s.as_f64() >= 1.0) {
        return Err(Error::InvalidParam("dimension scales must lie below 1".into()));
    }
    let mode = if set.dim() == 1 { CountMode::Exact } else { CountMode::GridProxy };
    if set.is_empty() {
        return Ok(DimensionReport { mode, per_scale: Vec::new(), lbdim_proxy: 0.0, slope: 0.0, empty: true });
    }
    let counts: Vec<Result<BoxCount>> = scales.par_iter().map(|s| n_delta(set, s)).collect();
    let mut per_scale = Vec::with_capacity(scales.len());
    for (s, c) in scales.iter().zip(counts) {
        let c = c?;
        let lr = -ln_scale(s);
        per_scale.push(DimScale {
            scale: s.to_string(),
            delta: s.as_f64(),
            count: c.count,
            ratio: (c.count as f64).ln() / lr,
        });
    }
    let tail = &per_scale[per_scale.len() / 2..];
    let lbdim_proxy = tail.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let xs: Vec<f64> = scales.iter().map(|s| -ln_scale(s)).collect();
    let ys: Vec<f64> = per_scale.iter().map(|p| (p.count as f64).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    Ok(DimensionReport { mode, per_scale, lbdim_proxy, slope, empty: false })
}

/// `ln δ` computed from the exact rational, safe for tiny scales.
pub fn ln_scale(s: &Scale) -> f64 {
    super::scale::q_ln(s.value())
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductScale {
    pub member: usize,
    pub r: f64,
    pub s: f64,
    pub count: u64,
    /// `N_r(E_n) ⌈1/r⌉^m ψ(s)`, a bound for `N_s(E_n × [0,1]^m) ψ(s)`.
    pub left: f64,
    /// `N_r(E_n) ζ(r)`.
    pub right: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub codim: u32,
    pub per_scale: Vec<ProductScale>,
    /// Per member: minimum over scales of each side.
    pub left_premeasure: Vec<f64>,
    pub right_premeasure: Vec<f64>,
    pub left_sup: f64,
    pub right_sup: f64,
    pub holds: bool,
}

/// Finite-scale comparison of the box premeasure of `E_n × [0,1]^m` under
/// `ψ` with that of `E_n` under the induced pseudogauge. At each scale the
/// check is `left <= right (1 + r)^m`.
pub fn product_lemma_check(
    chain: &[IntervalSet],
    psi: &crate::gauges::Gauge,
    m: u32,
    scales: &[Scale],
) -> Result<ProductReport> {
    for w in chain.windows(2) {
        if !w[0].is_subset_of(&w[1]) {
            return Err(Error::Precondition("chain is not increasing".into()));
        }
    }
    let zeta = crate::gauges::Pseudogauge::new(psi.clone(), m);
    let stretch = ((m + 1) as f64).sqrt();
    let mut per_scale = Vec::new();
    let mut left_pm = Vec::new();
    let mut right_pm = Vec::new();
    for (i, e) in chain.iter().enumerate() {
        let mut lmin = f64::INFINITY;
        let mut rmin = f64::INFINITY;
        for sc in scales {
            let r = sc.as_f64();
            let s = r * stretch;
            let count = e.n_delta(sc);
            let cells = (sc.value().recip()).ceil().to_integer().to_f64().unwrap_or(f64::INFINITY);
            let left = if count == 0 { 0.0 } else { count as f64 * cells.powi(m as i32) * psi.eval(s)? };
            let right = if count == 0 { 0.0 } else { count as f64 * zeta.eval(r)? };
            let holds = left <= right * (1.0 + r).powi(m as i32) * (1.0 + 1e-12);
            lmin = lmin.min(left);
            rmin = rmin.min(right);
            per_scale.push(ProductScale { member: i, r, s, count, left, right, holds });
        }
        left_pm.push(lmin);
        right_pm.push(rmin);
    }
    let sup = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
    Ok(ProductReport {
        codim: m,
        holds: per_scale.iter().all(|p| p.holds),
        left_sup: sup(&left_pm),
        right_sup: sup(&right_pm),
        per_scale,
        left_premeasure: left_pm,
        right_premeasure: right_pm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauges::Gauge;
    use crate::setlib::scale::{q_int, q_ratio, ScaleGrid};

    fn grid(s: &str) -> Vec<Scale> {
        s.parse::<ScaleGrid>().unwrap().scales()
    }

    #[test]
    fn premeasure_examples() {
        let point = SetRepr::Intervals(IntervalSet::points(&[q_int(0)]));
        let g = Gauge::power(1.0).unwrap();
        let r = lower_box_premeasure(&point, &g, None, &grid("dyadic:1..10")).unwrap();
        assert_eq!(r.value, 2f64.powi(-10));
        let unit = SetRepr::Cubes(DyadicCubeSet::full(1, 10).unwrap());
        let r = lower_box_premeasure(&unit, &g, None, &grid("dyadic:1..10")).unwrap();
        assert_eq!(r.value, 1.0);
        let s = 2f64.ln() / 3f64.ln();
        let cantor = SetRepr::Intervals(IntervalSet::cantor(8));
        let r = lower_box_premeasure(&cantor, &Gauge::power(s).unwrap(), None, &grid("triadic:1..8")).unwrap();
        for p in &r.per_scale {
            assert!((p.value - 1.0).abs() < 1e-12);
        }
        let capped = lower_box_premeasure(&unit, &g, Some(&q_ratio(1, 8)), &grid("dyadic:1..10")).unwrap();
        assert_eq!(capped.per_scale.len(), 8);
    }

    #[test]
    fn dimension_examples() {
        let cantor = SetRepr::Intervals(IntervalSet::cantor(12));
        let r = lower_box_dim(&cantor, &grid("triadic:1..12")).unwrap();
        assert!((r.lbdim_proxy - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        let square = SetRepr::Cubes(DyadicCubeSet::full(2, 8).unwrap());
        let r = lower_box_dim(&square, &grid("dyadic:1..8")).unwrap();
        assert_eq!(r.mode, CountMode::GridProxy);
        assert!((r.lbdim_proxy - 2.0).abs() < 1e-12);
        let empty = SetRepr::Intervals(IntervalSet::empty());
        assert!(lower_box_dim(&empty, &grid("dyadic:1..8")).unwrap().empty);
        assert!(lower_box_dim(&cantor, &grid("triadic:1..3")).is_err());
    }

    #[test]
    fn grid_count_non_dyadic() {
        let square = SetRepr::Cubes(DyadicCubeSet::full(2, 4).unwrap());
        let c = n_delta(&square, &Scale::new(q_ratio(1, 3)).unwrap()).unwrap();
        assert_eq!(c.count, 9);
        let c = n_delta(&square, &Scale::dyadic(6)).unwrap();
        assert_eq!(c.count, 1 << 12);
    }

    #[test]
    fn product_lemma_examples() {
        let unit = IntervalSet::unit();
        let rep = product_lemma_check(&[unit.clone(), unit], &Gauge::power(2.0).unwrap(), 1, &grid("dyadic:1..10")).unwrap();
        assert!(rep.holds);
        assert!((rep.right_premeasure[0] - 2.0).abs() < 1e-9);
        let pt = IntervalSet::points(&[q_int(0)]);
        let rep = product_lemma_check(&[pt.clone(), pt.clone()], &Gauge::power(1.0).unwrap(), 1, &grid("dyadic:1..10")).unwrap();
        for p in &rep.per_scale {
            assert!(p.left <= p.right * (1.0 + p.r) * (1.0 + 1e-12));
        }
        // {0} × [0,1] is a unit segment: ζ(r) = √2 r / r, and ⌈1/r⌉ r √2 → √2
        for p in &rep.per_scale {
            assert!((p.right - 2f64.sqrt()).abs() < 1e-12);
            assert!((p.left - (1.0 / p.r).ceil() * p.r * 2f64.sqrt()).abs() < 1e-12);
        }
        let rep = product_lemma_check(&[pt.clone()], &Gauge::power(1.0).unwrap(), 0, &grid("dyadic:1..10")).unwrap();
        assert!(rep.per_scale.iter().all(|p| p.left == p.right));
        assert!(product_lemma_check(&[IntervalSet::unit(), pt], &Gauge::power(1.0).unwrap(), 1, &grid("dyadic:1..8")).is_err());
    }
}
