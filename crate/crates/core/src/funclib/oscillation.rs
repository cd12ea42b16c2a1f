//! Oscillation `ω_f(x, r) = diam f(B(x, r))` over max-norm balls and the
//! windowed lip / Lip proxies built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampled::SampledFunction;
use crate::error::{Error, Result};
use crate::gauges::ScaleFn;
use crate::setlib::DyadicCubeSet;

/// Balls must hold at least this many grid spacings in radius.
pub const RESOLUTION_CELLS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscBounds {
    /// Spread of the vertex values inside the ball.
    pub lower: f64,
    /// `lower + 2 ω̄(h)`.
    pub upper: f64,
    /// The ball left `[0,1]^d` and was clipped.
    pub clipped: bool,
}

pub fn oscillation(f: &SampledFunction, x: &[f64], r: f64) -> Result<OscBounds> {
    let h = f.spacing();
    let guard = RESOLUTION_CELLS * h;
    if !(r >= guard) {
        return Err(Error::Resolution { r, guard });
    }
    if x.len() != f.dim() as usize {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let cells = 1u64 << f.depth();
    let scale = cells as f64;
    let mut clipped = false;
    let mut ranges = Vec::with_capacity(x.len());
    for &c in x {
        let (a, b) = (c - r, c + r);
        if a < 0.0 || b > 1.0 {
            clipped = true;
        }
        let first = (a.max(0.0) * scale).ceil() as u64;
        let last = ((b.min(1.0) * scale).floor() as u64).min(cells);
        if first > last {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        ranges.push((first, last));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        if let Some(v) = f.vertex_value(&idx) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
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
    if lo > hi {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let lower = hi - lo;
    Ok(OscBounds { lower, upper: lower + 2.0 * f.modulus().eval(h), clipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OscMode {
    /// Windowed minimum of the upper ratios, standing in for the liminf.
    #[serde(rename = "lip")]
    Lower,
    /// Windowed maximum of the lower ratios, standing in for the limsup.
    #[serde(rename = "Lip")]
    Upper,
}

impl std::str::FromStr for OscMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lip" => Ok(OscMode::Lower),
            "Lip" => Ok(OscMode::Upper),
            _ => Err(Error::Parse(format!("mode must be `lip` or `Lip`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscScale {
    pub scale: f64,
    pub osc_lower: f64,
    pub osc_upper: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationRecord {
    pub center: Vec<f64>,
    pub gauge: String,
    pub mode: OscMode,
    pub per_scale: Vec<OscScale>,
    pub summary: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub clipped: bool,
    pub norm: String,
}

pub const MIN_WINDOW: usize = 6;

/// Dyadic radii `2^{-lo} .. 2^{-hi}`.
pub fn dyadic_window(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|j| 2f64.powi(-(j as i32))).collect()
}

pub fn scaled_osc_estimate(
    f: &SampledFunction,
    x: &[f64],
    phi: &dyn ScaleFn,
    window: &[f64],
    mode: OscMode,
) -> Result<OscillationRecord> {
    if window.len() < MIN_WINDOW {
        return Err(Error::InvalidParam(format!("window needs at least {MIN_WINDOW} radii, got {}", window.len())));
    }
    let mut per_scale = Vec::with_capacity(window.len());
    let mut clipped = false;
    for &r in window {
        let o = oscillation(f, x, r)?;
        clipped |= o.clipped;
        let p = phi.eval(r)?;
        per_scale.push(OscScale {
            scale: r,
            osc_lower: o.lower,
            osc_upper: o.upper,
            ratio_lower: o.lower / p,
            ratio_upper: o.upper / p,
        });
    }
    let min_ratio = per_scale.iter().map(|s| s.ratio_upper).fold(f64::INFINITY, f64::min);
    let max_ratio = per_scale.iter().map(|s| s.ratio_lower).fold(f64::NEG_INFINITY, f64::max);
    Ok(OscillationRecord {
        center: x.to_vec(),
        gauge: phi.label(),
        mode,
        summary: match mode {
            OscMode::Lower => min_ratio,
            OscMode::Upper => max_ratio,
        },
        min_ratio,
        max_ratio,
        per_scale,
        clipped,
        norm: "max".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipPoint {
    pub x: Vec<f64>,
    pub proxy: f64,
    /// Whether the proxy exceeds the threshold.
    pub above: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipField {
    pub threshold: f64,
    pub sample_depth: u32,
    pub points: Vec<LipPoint>,
    /// Sample cells whose proxy exceeds the threshold.
    pub above: DyadicCubeSet,
}

impl LipField {
    pub fn fraction_above(&self) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            self.points.iter().filter(|p| p.above).count() as f64 / self.points.len() as f64
        }
    }
}

/// lip proxy at the centre of every domain cell of depth `sample_depth`.
pub fn lip_field(
    f: &SampledFunction,
    phi: &dyn ScaleFn,
    threshold: f64,
    sample_depth: u32,
    window: &[f64],
) -> Result<LipField> {
    if sample_depth + 2 > f.depth() {
        return Err(Error::InvalidParam(format!(
            "sample depth {sample_depth} must sit at least two levels above grid depth {}",
            f.depth()
        )));
    }
    let cells = if f.domain().depth() <= sample_depth {
        f.domain().refine(sample_depth)?
    } else {
        f.domain().coarsen(sample_depth)?
    };
    let results: Vec<Result<(u64, LipPoint)>> = cells
        .packed()
        .par_iter()
        .map(|&c| {
            let x = cells.cube_center(c);
            let rec = scaled_osc_estimate(f, &x, phi, window, OscMode::Lower)?;
            Ok((c, LipPoint { above: rec.summary > threshold, proxy: rec.summary, x }))
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut above = Vec::new();
    for r in results {
        let (c, p) = r?;
        if p.above {
            above.push(c);
        }
        points.push(p);
    }
    Ok(LipField {
        threshold,
        sample_depth,
        points,
        above: DyadicCubeSet::from_packed(f.dim(), sample_depth, above)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funclib::generators::{make_test_function, TestFunction};
    use crate::gauges::Gauge;

    #[test]
    fn affine_oscillation() {
        let f = make_test_function(&TestFunction::Affine { c: 2.0 }, 1, 12).unwrap();
        let o = oscillation(&f, &[0.5], 0.125).unwrap();
        assert!((o.lower - 0.5).abs() < 1e-15);
        assert!((o.upper - o.lower - 2.0 * 2.0 * f.spacing()).abs() < 1e-15);
        assert!(matches!(oscillation(&f, &[0.5], f.spacing()), Err(Error::Resolution { .. })));
        assert!(oscillation(&f, &[0.01], 0.1).unwrap().clipped);
    }

    #[test]
    fn constant_is_flat() {
        let f = make_test_function(&TestFunction::Constant { c: 3.0 }, 1, 10).unwrap();
        assert_eq!(f.evaluate(&[0.3]).unwrap(), 3.0);
        let o = oscillation(&f, &[0.3], 0.1).unwrap();
        assert_eq!((o.lower, o.upper), (0.0, 0.0));
        let phi = Gauge::power(1.0).unwrap();
        let field = lip_field(&f, &phi, 0.1, 4, &dyadic_window(3, 8)).unwrap();
        assert!(field.points.iter().all(|p| !p.above));
    }

    #[test]
    fn affine_ratios() {
        let phi = Gauge::power(1.0).unwrap();
        for c in [-2.0, 0.5, 1.0] {
            let f = make_test_function(&TestFunction::Affine { c }, 1, 14).unwrap();
            let w = dyadic_window(4, 10);
            let tol = 2.0 * f.modulus().eval(f.spacing()) / phi.eval(w[w.len() - 1]).unwrap();
            for mode in [OscMode::Lower, OscMode::Upper] {
                let rec = scaled_osc_estimate(&f, &[0.5], &phi, &w, mode).unwrap();
                assert!((rec.summary - 2.0 * f64::abs(c)).abs() <= tol + 1e-12, "c={c} {mode:?} {}", rec.summary);
            }
        }
        let f = make_test_function(&TestFunction::Affine { c: 1.0 }, 1, 10).unwrap();
        let field = lip_field(&f, &phi, 0.1, 4, &dyadic_window(3, 8)).unwrap();
        assert!(field.points.iter().all(|p| p.above));
        assert_eq!(field.above.len(), 16);
    }
}
