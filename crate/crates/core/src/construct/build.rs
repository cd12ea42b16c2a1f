//! Single stages and the iterated, slack-capped build.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{choose_delta, choose_eta, grid_count, StageParams};
use super::staged::{Plateau, StageLayer, StagedFunction, MAX_STAGE_CUBES};
use crate::error::{Error, Result};
use crate::funclib::sampled::point_f64;
use crate::funclib::SampledFunction;
use crate::gauges::{Gauge, ScaleFn};
use crate::setlib::scale::{q_from_f64, q_int};
use crate::setlib::Q;

/// How later stages pick their grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GridPolicy {
    /// `k_n = 2 k_{n-1}` with a common `η`: every new cube sits inside an
    /// earlier plateau.
    #[default]
    Refine,
    /// Fresh `δ`, `k`, `η` per stage from the current function's modulus.
    Independent,
}

impl std::str::FromStr for GridPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "refine" => Ok(GridPolicy::Refine),
            "independent" => Ok(GridPolicy::Independent),
            _ => Err(Error::Parse(format!("grid policy must be `refine` or `independent`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    #[serde(flatten)]
    pub params: StageParams,
    /// Kept cube multi-indices (`βK ∩ Ω ≠ ∅`), row-major.
    pub cubes: Vec<Vec<u64>>,
    pub anchors: Vec<Vec<f64>>,
    pub plateau_values: Vec<f64>,
    pub dropped: usize,
    /// Certified bound on `‖H‖_∞`.
    pub offset_max: f64,
    pub passthrough: bool,
    /// `(1/n) φ(η/2) - max_C diam g_n(C)`.
    pub slack_min: f64,
    /// `(1/n) φ(η/4)`, the margin at the certification radius.
    pub cert_slack: f64,
}

/// Stage cube must hold this many grid cells per axis.
pub const MIN_CUBE_CELLS: i64 = 4;

/// Plateau stage on top of `g`. Offsets are certified to stay within `ε`.
pub fn build_stage(g: &StagedFunction, p: &StageParams, phi: &Gauge) -> Result<(StageLayer, StageRecord)> {
    let base = g.base();
    let d = base.dim();
    let total = (p.k as u128).pow(d);
    if total > MAX_STAGE_CUBES {
        return Err(Error::Precondition(format!("{total} stage cubes exceed the limit {MAX_STAGE_CUBES}")));
    }
    let grid = q_int(1i64 << base.depth());
    if p.cube_side() * &grid < q_int(MIN_CUBE_CELLS) {
        return Err(Error::Precondition(format!(
            "depth {} insufficient: stage {} cubes of side {:.3e} hold fewer than {MIN_CUBE_CELLS} cells",
            base.depth(),
            p.n,
            crate::setlib::scale::q_to_f64(&p.cube_side())
        )));
    }
    let all: Vec<u64> = base.domain().packed().to_vec();
    let (olo, ohi) = base.domain().bounding_box(&all);
    let m = g.stages();
    let template = StageLayer::new(p.clone(), d, vec![None; total as usize], false)?;
    let slots: Vec<Result<Option<(Plateau, f64)>>> = (0..total as usize)
        .into_par_iter()
        .map(|lin| {
            let idx = template.unpack(lin);
            let (clo, chi) = template.cube_box(&idx);
            let lo: Vec<Q> = clo.iter().zip(&olo).map(|(a, b)| a.clone().max(b.clone())).collect();
            let hi: Vec<Q> = chi.iter().zip(&ohi).map(|(a, b)| a.clone().min(b.clone())).collect();
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return Ok(None);
            }
            let anchor = anchor_vertex(&lo, &hi, &grid).ok_or_else(|| {
                Error::Precondition(format!("stage {} cube {idx:?} meets Ω without a grid vertex", p.n))
            })?;
            let value = g.eval_at(m, &anchor)?;
            let (a, b) = g
                .range_at(m, &lo, &hi)
                .ok_or_else(|| Error::Consistency(format!("empty range on cube {idx:?}")))?;
            let offset = (value - a).abs().max((b - value).abs());
            Ok(Some((Plateau { anchor, value }, offset)))
        })
        .collect();
    let mut plateaus = Vec::with_capacity(slots.len());
    let mut offset_max = 0.0f64;
    let mut cubes = Vec::new();
    let mut anchors = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for (lin, s) in slots.into_iter().enumerate() {
        match s? {
            Some((pl, off)) => {
                offset_max = offset_max.max(off);
                cubes.push(template.unpack(lin));
                anchors.push(point_f64(&pl.anchor));
                values.push(pl.value);
                plateaus.push(Some(pl));
            }
            None => {
                dropped += 1;
                plateaus.push(None);
            }
        }
    }
    if offset_max > p.eps {
        return Err(Error::Consistency(format!(
            "stage {}: certified offset {offset_max} exceeds ε = {}",
            p.n, p.eps
        )));
    }
    let passthrough = offset_max == 0.0;
    let layer = StageLayer::new(p.clone(), d, plateaus, passthrough)?;
    let mut staged = g.clone();
    staged.push(layer.clone())?;
    let mut max_diam = 0.0f64;
    for idx in &cubes {
        let (clo, chi) = layer.cube_box(idx);
        if let Some((a, b)) = staged.range_at(m + 1, &clo, &chi) {
            max_diam = max_diam.max(b - a);
        }
    }
    let n = p.n as f64;
    let slack_min = phi.eval(p.eta_f64() / 2.0)? / n - max_diam;
    let cert_slack = phi.eval(p.eta_f64() / 4.0)? / n;
    if !(slack_min > 0.0 && cert_slack > 0.0) {
        return Err(Error::Consistency(format!("stage {}: slack {slack_min} is not positive", p.n)));
    }
    let rec = StageRecord {
        params: p.clone(),
        cubes,
        anchors,
        plateau_values: values,
        dropped,
        offset_max,
        passthrough,
        slack_min,
        cert_slack,
    };
    Ok((layer, rec))
}

/// Grid vertex nearest the centre of `[lo, hi]` if inside, otherwise the
/// least grid vertex of the box.
fn anchor_vertex(lo: &[Q], hi: &[Q], grid: &Q) -> Option<Vec<Q>> {
    let two = q_int(2);
    let centre: Vec<Q> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (((a + b) / &two * grid) + Q::new(1.into(), 2.into())).floor() / grid)
        .collect();
    if centre.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| c >= a && c <= b) {
        return Some(centre);
    }
    let least: Vec<Q> = lo.iter().map(|a| (a * grid).ceil() / grid).collect();
    least.iter().zip(hi).all(|(c, b)| c <= b).then_some(least)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub policy: GridPolicy,
    /// Deepest dyadic `δ = 2^{-j}` scanned for later stages in the
    /// independent policy.
    pub delta_floor: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { policy: GridPolicy::Refine, delta_floor: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalBuild {
    pub function: StagedFunction,
    pub stages: Vec<StageRecord>,
    pub phi: Gauge,
    pub zeta: Gauge,
    pub eps0: f64,
    pub n_max: usize,
    pub policy: GridPolicy,
    /// Budgets `ε_n` of the built stages.
    pub epsilons: Vec<f64>,
    /// `T_n = Σ_{m>n} ε_m`.
    pub tails: Vec<f64>,
    /// Why the build stopped before `n_max`, if it did.
    pub exhausted: Option<String>,
    /// `max |g* - f0|` over the base vertices.
    pub vertex_deviation: f64,
}

impl TypicalBuild {
    pub fn base(&self) -> &SampledFunction {
        self.function.base()
    }

    pub fn built(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, n: usize) -> Result<&StageRecord> {
        if n == 0 || n > self.stages.len() {
            return Err(Error::InvalidParam(format!("stage {n} not built (have {})", self.stages.len())));
        }
        Ok(&self.stages[n - 1])
    }

    pub fn layer(&self, n: usize) -> Result<&StageLayer> {
        self.stage(n)?;
        Ok(&self.function.layers()[n - 1])
    }

    pub fn tail(&self, n: usize) -> Result<f64> {
        self.stage(n)?;
        Ok(self.tails[n - 1])
    }

    pub fn budget_sum(&self) -> f64 {
        self.epsilons.iter().sum()
    }
}

/// `T_n = Σ_{m>n} ε_m` for each built stage.
pub fn tails_of(eps: &[f64]) -> Vec<f64> {
    (0..eps.len()).map(|i| eps[i + 1..].iter().fold(0.0, |a, e| a + e)).collect()
}

/// `ε_n = min(ε0 2^{-n}, min_{m<n} s_m 2^{-(n-m)} / 4)` with `s_m` the
/// certification slack of stage `m`; keeps `2 T_m < s_m / 2`.
pub fn next_budget(eps0: f64, n: usize, cert_slacks: &[f64]) -> f64 {
    let mut e = eps0 * 2f64.powi(-(n as i32));
    for (i, s) in cert_slacks.iter().enumerate() {
        let m = i + 1;
        e = e.min(s * 2f64.powi(-((n - m) as i32)) / 4.0);
    }
    e
}

pub fn iterate_typical(
    f0: &SampledFunction,
    n_max: usize,
    phi: &Gauge,
    zeta: &Gauge,
    eps0: f64,
    opts: &BuildOptions,
) -> Result<TypicalBuild> {
    if n_max == 0 {
        return Err(Error::InvalidParam("n_max must be at least 1".into()));
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::InvalidParam(format!("ε0 must be positive, got {eps0}")));
    }
    let mut g = StagedFunction::new(f0.clone())?;
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut epsilons = Vec::new();
    let mut exhausted = None;
    let mut refine_grid: Option<(u64, u32)> = None;
    for n in 1..=n_max {
        let slacks: Vec<f64> = stages.iter().map(|s| s.cert_slack).collect();
        let eps = next_budget(eps0, n, &slacks);
        let params = match (opts.policy, n, refine_grid) {
            (GridPolicy::Refine, 1, _) | (GridPolicy::Independent, 1, _) => {
                let delta = choose_delta(&|t| f0.modulus().eval(t), eps)?;
                let k = grid_count(1, delta)?;
                let plan: Vec<(usize, u64)> = match opts.policy {
                    GridPolicy::Refine => (1..=n_max)
                        .map(|m| {
                            let km = k.checked_mul(1u64.checked_shl(m as u32 - 1).unwrap_or(0)).unwrap_or(0);
                            if km == 0 || km >= 1 << 40 {
                                return Err(Error::Precondition(format!("stage {m} grid k = {k}·2^{} is too large", m - 1)));
                            }
                            Ok((m, km))
                        })
                        .collect::<Result<_>>()?,
                    GridPolicy::Independent => vec![(1, k)],
                };
                let j = choose_eta(zeta, &plan)?;
                refine_grid = Some((k, j));
                StageParams::new(1, eps, Some(delta), k, j)?
            }
            (GridPolicy::Refine, _, Some((k1, j))) => StageParams::new(n, eps, None, k1 << (n - 1), j)?,
            (GridPolicy::Independent, _, _) => match independent_params(&g, n, eps, zeta, opts) {
                Ok(p) => p,
                Err(Error::Precondition(msg)) => {
                    exhausted = Some(format!("stage {n}: {msg}"));
                    break;
                }
                Err(e) => return Err(e),
            },
            (GridPolicy::Refine, _, None) => unreachable!("stage 1 sets the grid"),
        };
        let (layer, rec) = match build_stage(&g, &params, phi) {
            Ok(x) => x,
            Err(Error::Precondition(msg)) if opts.policy == GridPolicy::Independent && n > 1 => {
                exhausted = Some(format!("stage {n}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        g.push(layer)?;
        stages.push(rec);
        epsilons.push(eps);
    }
    let tails = tails_of(&epsilons);
    for (rec, t) in stages.iter().zip(&tails) {
        if !(2.0 * t < rec.cert_slack) {
            return Err(Error::Consistency(format!(
                "stage {}: 2 T_n = {} not below the slack {}",
                rec.params.n,
                2.0 * t,
                rec.cert_slack
            )));
        }
    }
    let vertex_deviation = vertex_deviation(&g)?;
    let total: f64 = epsilons.iter().sum();
    if vertex_deviation > total * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!("‖g* - f0‖ = {vertex_deviation} exceeds Σ ε = {total}")));
    }
    Ok(TypicalBuild {
        function: g,
        stages,
        phi: phi.clone(),
        zeta: zeta.clone(),
        eps0,
        n_max,
        policy: opts.policy,
        epsilons,
        tails,
        exhausted,
        vertex_deviation,
    })
}

fn independent_params(
    g: &StagedFunction,
    n: usize,
    eps: f64,
    zeta: &Gauge,
    opts: &BuildOptions,
) -> Result<StageParams> {
    let m = g.stages();
    let d = g.base().dim();
    let floor = opts.delta_floor.min(g.base().depth()).min(22 / d.max(1));
    let mut chosen = None;
    for j in 1..=floor {
        if g.window_modulus(m, j) < eps {
            chosen = Some(j);
            break;
        }
    }
    let j = chosen.ok_or_else(|| Error::Precondition(format!("no δ ≥ 2^-{floor} with window modulus below ε = {eps}")))?;
    let delta = 2f64.powi(-(j as i32));
    let k = grid_count(n, delta)?;
    let eta = choose_eta(zeta, &[(n, k)])?;
    StageParams::new(n, eps, Some(delta), k, eta)
}

fn vertex_deviation(g: &StagedFunction) -> Result<f64> {
    let base = g.base();
    let m = g.stages();
    let side = q_int(1i64 << base.depth());
    let verts: Vec<(u64, f64)> = base.domain_values().collect();
    let devs: Vec<Result<f64>> = verts
        .par_iter()
        .map(|&(lin, v)| {
            let x: Vec<Q> = base.unpack_vertex(lin).iter().map(|&i| q_int(i as i64) / &side).collect();
            Ok((g.eval_at(m, &x)? - v).abs())
        })
        .collect();
    devs.into_iter().try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// Reassembles the layer of a stored stage record.
pub fn layer_from_record(rec: &StageRecord, dim: u32) -> Result<StageLayer> {
    let total = (rec.params.k as u128).pow(dim);
    if total > MAX_STAGE_CUBES {
        return Err(Error::Parse(format!("stage {} has too many cubes", rec.params.n)));
    }
    if rec.cubes.len() != rec.anchors.len() || rec.cubes.len() != rec.plateau_values.len() {
        return Err(Error::Parse(format!("stage {}: cube, anchor and value lists differ in length", rec.params.n)));
    }
    let template = StageLayer::new(rec.params.clone(), dim, vec![None; total as usize], false)?;
    let mut plateaus = vec![None; total as usize];
    for ((idx, a), v) in rec.cubes.iter().zip(&rec.anchors).zip(&rec.plateau_values) {
        if idx.len() != dim as usize || idx.iter().any(|&j| j >= rec.params.k) {
            return Err(Error::Parse(format!("stage {}: bad cube index {idx:?}", rec.params.n)));
        }
        let anchor = a.iter().map(|&t| q_from_f64(t)).collect::<Result<Vec<Q>>>()?;
        plateaus[template.pack(idx)] = Some(Plateau { anchor, value: *v });
    }
    StageLayer::new(rec.params.clone(), dim, plateaus, rec.passthrough)
}

/// Recomputes every plateau value from its anchor and compares exactly.
pub fn verify_plateaus(g: &StagedFunction) -> Result<()> {
    for (m, layer) in g.layers().iter().enumerate() {
        for (idx, p) in layer.kept() {
            let v = g.eval_at(m, &p.anchor)?;
            if v != p.value {
                return Err(Error::Consistency(format!(
                    "stage {} cube {idx:?}: stored value {} differs from g({:?}) = {v}",
                    m + 1,
                    p.value,
                    point_f64(&p.anchor)
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funclib::generators::{make_test_function, TestFunction};
    use crate::setlib::scale::q_ratio;

    #[test]
    fn affine_staircase() {
        let f = make_test_function(&TestFunction::Affine { c: 1.0 }, 1, 8).unwrap();
        let g = StagedFunction::new(f).unwrap();
        let p = StageParams::new(1, 0.5, None, 2, 3).unwrap();
        let phi = Gauge::power(1.0).unwrap();
        let (layer, rec) = build_stage(&g, &p, &phi).unwrap();
        // cube 0 = [1/32, 15/32]: centre 1/4 is a grid vertex
        assert_eq!(rec.anchors, vec![vec![0.25], vec![0.75]]);
        assert_eq!(rec.plateau_values, vec![0.25, 0.75]);
        assert!((rec.offset_max - 7.0 / 32.0).abs() < 1e-15);
        assert!(!layer.passthrough);
        assert!((rec.slack_min - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(rec.cert_slack, 1.0 / 32.0);
    }

    #[test]
    fn constant_passthrough() {
        let f = make_test_function(&TestFunction::Constant { c: 3.0 }, 1, 10).unwrap();
        let phi = Gauge::power(1.0).unwrap();
        let b = iterate_typical(&f, 3, &phi, &phi, 0.1, &BuildOptions::default()).unwrap();
        assert_eq!(b.built(), 3);
        assert!(b.stages.iter().all(|s| s.passthrough && s.offset_max == 0.0));
        assert_eq!(b.vertex_deviation, 0.0);
        assert_eq!(b.function.eval_at(3, &[q_ratio(1, 3)]).unwrap(), 3.0);
    }

    #[test]
    fn budget_schedule() {
        let e = next_budget(0.1, 3, &[0.4, 0.01]);
        assert_eq!(e, (0.1f64 / 8.0).min(0.4 / 16.0).min(0.01 / 8.0));
        assert_eq!(tails_of(&[0.5, 0.25, 0.125]), vec![0.375, 0.125, 0.0]);
    }
}
