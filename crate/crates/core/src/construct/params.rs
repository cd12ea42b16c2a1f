//! Stage parameters `(k, η, β, γ)` and their selection.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funclib::SampledFunction;
use crate::gauges::ScaleFn;
use crate::setlib::scale::{q_dyadic, q_fmt, q_int, q_to_f64};
use crate::setlib::{IntervalSet, Q};

/// Deepest gap exponent tried: `η >= 2^-MAX_ETA_EXP`.
pub const MAX_ETA_EXP: u32 = 1000;
/// `δ` is scanned over `2^{-j/8}`, `j <= 8 * DELTA_SCAN_OCTAVES`.
pub const DELTA_SCAN_OCTAVES: u32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsFile", try_from = "ParamsFile")]
pub struct StageParams {
    pub n: usize,
    pub eps: f64,
    /// Continuity radius used to pick `k`; absent when the grid is inherited.
    pub delta: Option<f64>,
    pub k: u64,
    /// `η = 2^{-eta_exp}`.
    pub eta_exp: u32,
    eta: Q,
    beta: Q,
    gamma: Q,
}

impl StageParams {
    pub fn new(n: usize, eps: f64, delta: Option<f64>, k: u64, eta_exp: u32) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParam("stage index and k must be positive".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParam(format!("ε must be positive, got {eps}")));
        }
        let eta = q_dyadic(eta_exp);
        let kq = q_int(k as i64);
        let two = q_int(2);
        let beta = Q::one() - &eta * &kq / &two;
        let gamma = (&two - &two * &kq * &eta) / (&two - &kq * &eta);
        let p = StageParams { n, eps, delta, k, eta_exp, eta, beta, gamma };
        p.check()?;
        Ok(p)
    }

    pub fn eta(&self) -> &Q {
        &self.eta
    }
    pub fn beta(&self) -> &Q {
        &self.beta
    }
    pub fn gamma(&self) -> &Q {
        &self.gamma
    }
    pub fn eta_f64(&self) -> f64 {
        q_to_f64(&self.eta)
    }

    /// Side `β/k` of every stage cube.
    pub fn cube_side(&self) -> Q {
        &self.beta / q_int(self.k as i64)
    }

    /// `(1-γ) ℓ(C)`, equal to `η/2`.
    pub fn gap_radius(&self) -> Q {
        (Q::one() - &self.gamma) * self.cube_side()
    }

    /// Distance from `γC` to the boundary of `C`: `η/4`.
    pub fn cert_radius(&self) -> Q {
        &self.eta / q_int(4)
    }

    /// `[j/k + η/4, (j+1)/k - η/4]`.
    pub fn cube_interval(&self, j: u64) -> (Q, Q) {
        let kq = q_int(self.k as i64);
        let q = &self.eta / q_int(4);
        (q_int(j as i64) / &kq + &q, q_int(j as i64 + 1) / &kq - &q)
    }

    /// `[j/k + η/2, (j+1)/k - η/2]`.
    pub fn core_interval(&self, j: u64) -> (Q, Q) {
        let kq = q_int(self.k as i64);
        let h = &self.eta / q_int(2);
        (q_int(j as i64) / &kq + &h, q_int(j as i64 + 1) / &kq - &h)
    }

    /// The `k+1` slabs `|t - m/k| <= η/2` inside `[0,1]`.
    pub fn slabs(&self) -> IntervalSet {
        let kq = q_int(self.k as i64);
        let h = &self.eta / q_int(2);
        let raw = (0..=self.k)
            .map(|m| {
                let c = q_int(m as i64) / &kq;
                let lo = (&c - &h).max(Q::zero());
                let hi = (&c + &h).min(Q::one());
                (lo, hi)
            })
            .collect();
        IntervalSet::new(raw).expect("slab endpoints are ordered")
    }

    /// Exact algebraic checks plus `η < 1/k`, `k > n`.
    pub fn check(&self) -> Result<()> {
        let kq = q_int(self.k as i64);
        if self.k as usize <= self.n {
            return Err(Error::Consistency(format!("k = {} must exceed n = {}", self.k, self.n)));
        }
        if &self.eta * &kq >= Q::one() {
            return Err(Error::Consistency(format!("η = 2^-{} is not below 1/k = 1/{}", self.eta_exp, self.k)));
        }
        if &self.gamma * &self.beta != Q::one() - &kq * &self.eta {
            return Err(Error::Consistency("γβ differs from 1 - kη".into()));
        }
        if self.gap_radius() != &self.eta / q_int(2) {
            return Err(Error::Consistency("(1-γ)β/k differs from η/2".into()));
        }
        if !self.beta.is_positive() || !self.gamma.is_positive() || self.gamma >= Q::one() {
            return Err(Error::Consistency("β, γ outside (0, 1)".into()));
        }
        Ok(())
    }

    /// Relative errors of the two identities evaluated in `f64`. `1 - γ`
    /// is carried as `kη / (2 - kη)`; forming it from `γ` would lose
    /// `log10(1/(kη))` digits.
    pub fn float_identity_errors(&self) -> (f64, f64) {
        let (k, eta) = (self.k as f64, self.eta_f64());
        let beta = 1.0 - eta * k / 2.0;
        let co_gamma = k * eta / (2.0 - k * eta);
        let gamma = 1.0 - co_gamma;
        let a = 1.0 - k * eta;
        let e1 = ((gamma * beta) - a).abs() / a.abs();
        let e2 = (co_gamma * (beta / k) - eta / 2.0).abs() / (eta / 2.0);
        (e1, e2)
    }

    /// `ζ(η) (k+1) < 1/n`.
    pub fn eta_condition(&self, zeta: &dyn ScaleFn) -> Result<bool> {
        eta_ok(zeta, self.eta_exp, &[(self.n, self.k)])
    }
}

fn eta_ok(zeta: &dyn ScaleFn, j: u32, stages: &[(usize, u64)]) -> Result<bool> {
    let eta = 2f64.powi(-(j as i32));
    let z = zeta.eval(eta)?;
    Ok(stages.iter().all(|&(n, k)| z * (k as f64 + 1.0) * (n as f64) < 1.0))
}

/// Largest `2^{-j}` below `1/k` for every listed stage with
/// `ζ(2^{-j}) (k+1) < 1/n` for each `(n, k)`.
pub fn choose_eta(zeta: &dyn ScaleFn, stages: &[(usize, u64)]) -> Result<u32> {
    let kmax = stages.iter().map(|s| s.1).max().unwrap_or(1);
    let mut j = 0u32;
    while BigInt::one() << j as usize <= BigInt::from(kmax) {
        j += 1;
    }
    let mut deepest = None;
    while j <= MAX_ETA_EXP {
        match eta_ok(zeta, j, stages) {
            Ok(true) => return Ok(j),
            Ok(false) => deepest = Some((j, zeta.eval(2f64.powi(-(j as i32)))?)),
            Err(Error::Domain { .. }) => {}
            Err(e) => return Err(e),
        }
        j += 1;
    }
    let need = stages
        .iter()
        .map(|&(n, k)| format!("1/({n}*{})", k + 1))
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::NoAdmissibleEta(match deepest {
        Some((j, z)) => format!("ζ(2^-{j}) = {z} still not below {need}"),
        None => format!("ζ undefined on the scanned scales (need {need})"),
    }))
}

/// Largest `2^{-j/8}` with `ω̄(δ) < ε`.
pub fn choose_delta(omega: &dyn Fn(f64) -> f64, eps: f64) -> Result<f64> {
    for j in 0..=8 * DELTA_SCAN_OCTAVES {
        let d = 2f64.powf(-(j as f64) / 8.0);
        if omega(d) < eps {
            return Ok(d);
        }
    }
    Err(Error::Precondition(format!(
        "no radius down to 2^-{DELTA_SCAN_OCTAVES} has modulus below ε = {eps}"
    )))
}

/// Smallest integer `k > n` with `1/k < δ`.
pub fn grid_count(n: usize, delta: f64) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParam(format!("δ must be positive, got {delta}")));
    }
    let k = ((1.0 / delta).floor() as u64 + 1).max(n as u64 + 1);
    // guard against rounding in 1/δ
    let k = if (k as f64) * delta <= 1.0 { k + 1 } else { k };
    Ok(k)
}

/// Parameters for stage `n` of a function with the declared modulus.
pub fn choose_stage_params(f: &SampledFunction, n: usize, eps: f64, zeta: &dyn ScaleFn) -> Result<StageParams> {
    choose_with_modulus(&|t| f.modulus().eval(t), n, eps, zeta, &[])
}

/// As [`choose_stage_params`], with `η` also admissible for the later
/// stages `(n', k')` listed in `lookahead`.
pub fn choose_with_modulus(
    omega: &dyn Fn(f64) -> f64,
    n: usize,
    eps: f64,
    zeta: &dyn ScaleFn,
    lookahead: &[(usize, u64)],
) -> Result<StageParams> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParam(format!("ε must be positive, got {eps}")));
    }
    let delta = choose_delta(omega, eps)?;
    let k = grid_count(n, delta)?;
    let mut stages = vec![(n, k)];
    stages.extend_from_slice(lookahead);
    let j = choose_eta(zeta, &stages)?;
    StageParams::new(n, eps, Some(delta), k, j)
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    n: usize,
    epsilon: f64,
    delta: Option<f64>,
    k: u64,
    eta_exp: u32,
    eta: f64,
    beta: f64,
    gamma: f64,
    beta_exact: String,
    gamma_exact: String,
}

impl From<StageParams> for ParamsFile {
    fn from(p: StageParams) -> Self {
        ParamsFile {
            n: p.n,
            epsilon: p.eps,
            delta: p.delta,
            k: p.k,
            eta_exp: p.eta_exp,
            eta: p.eta_f64(),
            beta: q_to_f64(&p.beta),
            gamma: q_to_f64(&p.gamma),
            beta_exact: q_fmt(&p.beta),
            gamma_exact: q_fmt(&p.gamma),
        }
    }
}

impl TryFrom<ParamsFile> for StageParams {
    type Error = Error;
    fn try_from(f: ParamsFile) -> Result<Self> {
        let p = StageParams::new(f.n, f.epsilon, f.delta, f.k, f.eta_exp)?;
        if q_fmt(&p.beta) != f.beta_exact || q_fmt(&p.gamma) != f.gamma_exact {
            return Err(Error::Parse(format!("stage {}: β, γ disagree with k and η", f.n)));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauges::Gauge;
    use crate::setlib::scale::q_ratio;

    #[test]
    fn power_example() {
        // n = 1, k = 2, ζ = r: ζ(η) < 1/3 already holds at η = 1/4
        let z = Gauge::power(1.0).unwrap();
        assert_eq!(choose_eta(&z, &[(1, 2)]).unwrap(), 2);
        // threshold 1/6 (n(k+1) = 6) first holds at η = 1/8
        assert_eq!(choose_eta(&z, &[(1, 5)]).unwrap(), 3);
        let p = StageParams::new(1, 0.1, None, 2, 3).unwrap();
        assert_eq!(p.beta(), &q_ratio(7, 8));
        assert_eq!(p.gamma(), &q_ratio(6, 7));
        assert_eq!(p.gamma() * p.beta(), q_ratio(3, 4));
        assert_eq!(p.cube_interval(0), (q_ratio(1, 32), q_ratio(15, 32)));
        assert_eq!(p.core_interval(1), (q_ratio(9, 16), q_ratio(15, 16)));
        assert_eq!(p.slabs().len(), 3);
    }

    #[test]
    fn inv_log_example() {
        let z = Gauge::inv_log();
        let omega = |t: f64| t;
        let p = choose_with_modulus(&omega, 2, 0.4, &z, &[]).unwrap();
        assert_eq!(p.k, 3);
        assert!((p.delta.unwrap() - 2f64.powf(-11.0 / 8.0)).abs() < 1e-15);
        // 1/ln(2^12) = 0.1202 < 1/8, while 1/ln(2^11) = 0.1312
        assert_eq!(p.eta_exp, 12);
        assert!(p.eta_condition(&z).unwrap());
        let (e1, e2) = p.float_identity_errors();
        assert!(e1 < 1e-12 && e2 < 1e-12);
    }

    #[test]
    fn plateau_gauge_fails() {
        let z = Gauge::table(vec![(1e-300, 0.5), (1.0, 0.5)]).unwrap();
        match choose_eta(&z, &[(1, 2)]) {
            Err(Error::NoAdmissibleEta(msg)) => assert!(msg.contains("0.5"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serde_roundtrip() {
        let p = StageParams::new(3, 0.01, Some(0.2), 9, 40).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<StageParams>(&s).unwrap(), p);
    }
}
