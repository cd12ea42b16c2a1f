//! Evaluable gauges and pseudogauges.
//!
//! A gauge is a non-decreasing right-continuous scale function with
//! `g(0) = 0` and `g(r) > 0` for `r > 0`; a pseudogauge only needs to be
//! positive and right-continuous. Both are evaluated on `(0, r_max]`.
//!
//! Every gauge has a one-line textual form `kind(param=value,...)`, e.g.
//! `power(s=1)`, `power(s=2,c=0.2)`, `exp_sqrt_log(d=2)`, `inv_log`,
//! `super_power`, `table(points=0.001:0.1;0.01:0.5)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Anything that can be evaluated as a positive scale function.
pub trait ScaleFn: Send + Sync {
    fn eval(&self, r: f64) -> Result<f64>;
    fn ln_eval(&self, r: f64) -> Result<f64>;
    /// Largest admissible scale.
    fn max_scale(&self) -> f64;
    fn label(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeKind {
    /// `(c r)^s`
    Power { s: f64, c: f64 },
    /// `e^{-sqrt|ln r|} r^{d-1}`
    ExpSqrtLog { d: u32 },
    /// `1/|ln r|` for `r <= 1/e`, `1` otherwise.
    InvLog,
    /// `r^{1/r}`
    SuperPower,
    /// Right-continuous step interpolation of `(r, value)` pairs, sorted by `r`.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    kind: GaugeKind,
    r_max: f64,
    monotone: bool,
}

const MONOTONE_SCAN_DEPTH: i32 = 60;

impl Gauge {
    pub fn new(kind: GaugeKind) -> Result<Self> {
        Self::with_max_scale(kind, 1.0)
    }

    pub fn with_max_scale(kind: GaugeKind, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParam(format!("r_max must be positive, got {r_max}")));
        }
        match &kind {
            GaugeKind::Power { s, c } => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidParam(format!("power gauge needs s > 0, got {s}")));
                }
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParam(format!("power gauge needs c > 0, got {c}")));
                }
            }
            GaugeKind::ExpSqrtLog { d } => {
                if *d < 1 {
                    return Err(Error::InvalidParam("exp_sqrt_log needs d >= 1".into()));
                }
            }
            GaugeKind::Table(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidParam("table gauge needs at least one point".into()));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidParam("table scales must be strictly increasing".into()));
                    }
                }
                if points.iter().any(|&(r, v)| !(r > 0.0 && v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParam("table entries must be positive".into()));
                }
            }
            GaugeKind::InvLog | GaugeKind::SuperPower => {}
        }
        let mut g = Gauge { kind, r_max, monotone: false };
        g.monotone = g.scan_monotone();
        Ok(g)
    }

    pub fn power(s: f64) -> Result<Self> {
        Self::new(GaugeKind::Power { s, c: 1.0 })
    }

    pub fn scaled_power(s: f64, c: f64) -> Result<Self> {
        Self::new(GaugeKind::Power { s, c })
    }

    pub fn exp_sqrt_log(d: u32) -> Result<Self> {
        Self::new(GaugeKind::ExpSqrtLog { d })
    }

    pub fn inv_log() -> Self {
        Self::new(GaugeKind::InvLog).expect("inv_log has no parameters")
    }

    pub fn super_power() -> Self {
        Self::new(GaugeKind::SuperPower).expect("super_power has no parameters")
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let r_max = points.last().map(|p| p.0).unwrap_or(1.0).max(1.0);
        Self::with_max_scale(GaugeKind::Table(points), r_max)
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    /// Set only after a scale-grid scan confirmed `g(r_i) <= g(r_{i+1})`.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Whether `g(2r) <= C g(r)` holds for some constant `C` near zero.
    pub fn is_doubling(&self) -> bool {
        matches!(
            self.kind,
            GaugeKind::Power { .. } | GaugeKind::ExpSqrtLog { .. } | GaugeKind::InvLog
        )
    }

    /// Gauge axiom `g(0) = 0`, otherwise [`ScaleFn::eval`].
    pub fn eval_or_zero(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            Ok(0.0)
        } else {
            self.eval(r)
        }
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if !(r > 0.0) || r > self.r_max || !r.is_finite() {
            return Err(Error::Domain { r, r_max: self.r_max });
        }
        if let GaugeKind::Table(points) = &self.kind {
            if r < points[0].0 {
                return Err(Error::Domain { r, r_max: self.r_max });
            }
        }
        Ok(())
    }

    fn scan_monotone(&self) -> bool {
        let mut scales: Vec<f64> = (0..=MONOTONE_SCAN_DEPTH)
            .rev()
            .map(|j| self.r_max * 2f64.powi(-j))
            .collect();
        if let GaugeKind::Table(points) = &self.kind {
            scales.extend(points.iter().map(|p| p.0));
            scales.sort_by(f64::total_cmp);
        }
        let mut prev = f64::NEG_INFINITY;
        for r in scales {
            let Ok(v) = self.ln_eval(r) else { continue };
            if v < prev {
                return false;
            }
            prev = v;
        }
        true
    }
}

impl ScaleFn for Gauge {
    fn eval(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match &self.kind {
            GaugeKind::Power { s, c } => (c * r).powf(*s),
            GaugeKind::ExpSqrtLog { d } => (-r.ln().abs().sqrt()).exp() * r.powi(*d as i32 - 1),
            GaugeKind::InvLog => {
                if r <= (-1f64).exp() {
                    1.0 / r.ln().abs()
                } else {
                    1.0
                }
            }
            GaugeKind::SuperPower => r.powf(1.0 / r),
            GaugeKind::Table(points) => table_lookup(points, r),
        })
    }

    fn ln_eval(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(match &self.kind {
            GaugeKind::Power { s, c } => s * (c * r).ln(),
            GaugeKind::ExpSqrtLog { d } => -r.ln().abs().sqrt() + (*d as f64 - 1.0) * r.ln(),
            GaugeKind::InvLog => {
                if r <= (-1f64).exp() {
                    -r.ln().abs().ln()
                } else {
                    0.0
                }
            }
            GaugeKind::SuperPower => r.ln() / r,
            GaugeKind::Table(points) => table_lookup(points, r).ln(),
        })
    }

    fn max_scale(&self) -> f64 {
        self.r_max
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

fn table_lookup(points: &[(f64, f64)], r: f64) -> f64 {
    // value of the largest tabulated scale <= r
    let idx = points.partition_point(|p| p.0 <= r);
    points[idx.saturating_sub(1)].1
}

/// `ζ(r) = ψ(r √(m+1)) / r^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudogauge {
    base: Gauge,
    codim: u32,
}

impl Pseudogauge {
    pub fn new(base: Gauge, codim: u32) -> Self {
        Pseudogauge { base, codim }
    }

    pub fn base(&self) -> &Gauge {
        &self.base
    }

    pub fn codim(&self) -> u32 {
        self.codim
    }

    fn stretch(&self) -> f64 {
        ((self.codim + 1) as f64).sqrt()
    }
}

impl ScaleFn for Pseudogauge {
    fn eval(&self, r: f64) -> Result<f64> {
        if self.codim == 0 {
            return self.base.eval(r);
        }
        if !(r > 0.0) || r > self.max_scale() {
            return Err(Error::Domain { r, r_max: self.max_scale() });
        }
        Ok(self.base.eval(r * self.stretch())? / r.powi(self.codim as i32))
    }

    fn ln_eval(&self, r: f64) -> Result<f64> {
        if self.codim == 0 {
            return self.base.ln_eval(r);
        }
        if !(r > 0.0) || r > self.max_scale() {
            return Err(Error::Domain { r, r_max: self.max_scale() });
        }
        Ok(self.base.ln_eval(r * self.stretch())? - self.codim as f64 * r.ln())
    }

    fn max_scale(&self) -> f64 {
        self.base.max_scale() / self.stretch()
    }

    fn label(&self) -> String {
        format!("pseudo({},m={})", self.base, self.codim)
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GaugeKind::Power { s, c } if *c == 1.0 => write!(f, "power(s={s})"),
            GaugeKind::Power { s, c } => write!(f, "power(s={s},c={c})"),
            GaugeKind::ExpSqrtLog { d } => write!(f, "exp_sqrt_log(d={d})"),
            GaugeKind::InvLog => write!(f, "inv_log"),
            GaugeKind::SuperPower => write!(f, "super_power"),
            GaugeKind::Table(points) => {
                write!(f, "table(points=")?;
                for (i, (r, v)) in points.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{r:e}:{v:e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn parse_params(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Parse(format!("parameter `{key}` is not a number: `{v}`")))
}

impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('(') {
            Some(i) => {
                let body = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("missing `)` in `{s}`")))?;
                (&s[..i], body)
            }
            None => (s, ""),
        };
        let params = parse_params(body)?;
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        for (k, _) in &params {
            let allowed: &[&str] = match name {
                "power" => &["s", "c"],
                "exp_sqrt_log" => &["d"],
                "table" => &["points"],
                _ => &[],
            };
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!("unknown parameter `{k}` for gauge `{name}`")));
            }
        }
        match name {
            "power" => {
                let s = parse_num("s", get("s").ok_or_else(|| Error::Parse("power needs s".into()))?)?;
                let c = get("c").map(|v| parse_num("c", v)).transpose()?.unwrap_or(1.0);
                Gauge::new(GaugeKind::Power { s, c })
            }
            "exp_sqrt_log" => {
                let d = get("d").ok_or_else(|| Error::Parse("exp_sqrt_log needs d".into()))?;
                let d: u32 = d
                    .parse()
                    .map_err(|_| Error::Parse(format!("d must be a positive integer, got `{d}`")))?;
                Gauge::exp_sqrt_log(d)
            }
            "inv_log" => Ok(Gauge::inv_log()),
            "super_power" => Ok(Gauge::super_power()),
            "table" => {
                let raw = get("points").ok_or_else(|| Error::Parse("table needs points".into()))?;
                let points = raw
                    .split(';')
                    .map(|pair| {
                        let (r, v) = pair
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("bad table entry `{pair}`")))?;
                        Ok((parse_num("r", r)?, parse_num("value", v)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Gauge::table(points)
            }
            other => Err(Error::Parse(format!("unknown gauge preset `{other}`"))),
        }
    }
}

impl Serialize for Gauge {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Gauge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The preset names accepted by [`make_preset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Power,
    ExpSqrtLog,
    InvLog,
    SuperPower,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Preset::Power),
            "exp_sqrt_log" => Ok(Preset::ExpSqrtLog),
            "inv_log" => Ok(Preset::InvLog),
            "super_power" => Ok(Preset::SuperPower),
            other => Err(Error::Parse(format!("unknown gauge preset `{other}`"))),
        }
    }
}

/// Builds one of the preset gauges. `param` is `s` for `power` and `d` for
/// `exp_sqrt_log`; it is ignored for the parameterless presets.
pub fn make_preset(preset: Preset, param: Option<f64>) -> Result<Gauge> {
    match preset {
        Preset::Power => Gauge::power(param.ok_or_else(|| Error::InvalidParam("power needs s".into()))?),
        Preset::ExpSqrtLog => {
            let d = param.ok_or_else(|| Error::InvalidParam("exp_sqrt_log needs d".into()))?;
            if d < 1.0 || d.fract() != 0.0 {
                return Err(Error::InvalidParam(format!("exp_sqrt_log needs integer d >= 1, got {d}")));
            }
            Gauge::exp_sqrt_log(d as u32)
        }
        Preset::InvLog => Ok(Gauge::inv_log()),
        Preset::SuperPower => Ok(Gauge::super_power()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailVerdict {
    BoundedTail,
    DivergingTail,
    VanishingTail,
}

/// Finite-scale comparison `ψ(r_i)/φ(r_i)`; the verdict is a proxy for the
/// limsup as `r → 0`, never a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingReport {
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `tail_running_max[i]` is the max of the ratios at scales `<= r_{t+i}`
    /// where `t` is the first tail index.
    pub tail_running_max: Vec<f64>,
    pub verdict: TailVerdict,
    pub note: String,
}

pub fn compare_gauges(phi: &dyn ScaleFn, psi: &dyn ScaleFn, scales: &[f64]) -> Result<OrderingReport> {
    if scales.len() < 8 {
        return Err(Error::Precondition(format!("need at least 8 scales, got {}", scales.len())));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("scales must be strictly decreasing".into()));
    }
    let span = (scales[0] / scales[scales.len() - 1]).log10();
    if span < 6.0 {
        return Err(Error::Precondition(format!("scales span {span:.2} orders of magnitude, need 6")));
    }
    let ratios = scales
        .iter()
        .map(|&r| Ok((psi.ln_eval(r)? - phi.ln_eval(r)?).exp()))
        .collect::<Result<Vec<f64>>>()?;

    let tail = &ratios[ratios.len() / 2..];
    let mut tail_running_max = vec![0.0; tail.len()];
    let mut running = f64::NEG_INFINITY;
    for i in (0..tail.len()).rev() {
        running = running.max(tail[i]);
        tail_running_max[i] = running;
    }
    let slack = 1e-12;
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack));
    let non_decreasing = tail.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack));
    let change = tail[tail.len() - 1] / tail[0];
    let verdict = if non_increasing && change <= 0.5 {
        TailVerdict::VanishingTail
    } else if non_decreasing && change >= 2.0 {
        TailVerdict::DivergingTail
    } else {
        TailVerdict::BoundedTail
    };
    Ok(OrderingReport {
        scales: scales.to_vec(),
        ratios,
        tail_running_max,
        verdict,
        note: "finite-scale proxy over the scanned scales; not a proof of the limsup".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchizmCheck {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchizmReport {
    pub passed: bool,
    pub first_violation: Option<f64>,
    pub checks: Vec<SchizmCheck>,
}

/// Checks `ξ(φ(5r)) <= r^{d+1}` (relative slack 1e-12 for rounding) on every scale.
pub fn verify_schizm_relation(xi: &Gauge, phi: &Gauge, d: u32, scales: &[f64]) -> Result<SchizmReport> {
    let mut checks = Vec::with_capacity(scales.len());
    let mut first_violation = None;
    for &r in scales {
        let inner = phi.eval(5.0 * r)?;
        let lhs = xi.eval_or_zero(inner)?;
        let rhs = r.powi(d as i32 + 1);
        if lhs > rhs * (1.0 + 1e-12) && first_violation.is_none() {
            first_violation = Some(r);
        }
        checks.push(SchizmCheck { r, lhs, rhs });
    }
    Ok(SchizmReport { passed: first_violation.is_none(), first_violation, checks })
}

/// Largest scanned `r*` such that `g(r) < r^s` for every scanned `r <= r*`
/// (compared in log space). `None` if the smallest scale already fails.
pub fn dominated_below(g: &dyn ScaleFn, s: f64, scales: &[f64]) -> Result<Option<f64>> {
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = None;
    for r in sorted {
        if g.ln_eval(r)? < s * r.ln() {
            best = Some(r);
        } else {
            break;
        }
    }
    Ok(best)
}

/// `2^{-lo}, ..., 2^{-hi}`.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|j| 2f64.powi(-j)).collect()
}
