use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use liplab::construct::{
    certify_lip_sample, certify_membership, exceptional_set, iterate_typical, load_build, save_build, write_atomic,
    BuildOptions, ExceptionalAnalysis, ExceptionalSet, LipSample, TypicalBuild,
};
use liplab::funclib::oscillation::dyadic_window;
use liplab::funclib::sampled::num17;
use liplab::funclib::{lip_field, make_test_function, scaled_osc_estimate, OscMode, SampledFunction, TestFunction};
use liplab::partition::{
    graph_cross_check, image_cover_report, partition_dims, split_partition, GraphCheck, ImageCoverReport,
    PartitionDims,
};
use liplab::setlib::io::{parse_set, write_cover, write_set};
use liplab::setlib::counting::{DimensionReport, PremeasureReport};
use liplab::setlib::{
    lower_box_dim, lower_box_premeasure, microscopic_certificate, microscopic_verify, DyadicCubeSet, IntervalSet,
    MicroOutcome, MicroVerdict, SetRepr,
};
use liplab::Gauge;

use crate::config::*;

/// Named pass/fail lines of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), pass }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Printed on stdout when no output file was requested.
    pub stdout: Option<String>,
}

impl Outcome {
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    match &cfg.task {
        Task::Analyze(a) => analyze(a, cfg.seed),
        Task::Construct(c) => construct(c, cfg.seed),
        Task::Dims(d) => dims(d),
        Task::Partition(p) => partition(p, cfg.seed),
        Task::Micro(m) => micro(m),
        Task::Report(r) => report(r, cfg.seed),
        Task::GenSet(g) => gen_set(g),
        Task::GenFn(g) => gen_fn(g),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, text: String) -> anyhow::Result<Option<String>> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir)?;
            }
            write_atomic(p, &text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn read_set(path: &Path) -> anyhow::Result<SetRepr> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_set(&text)?)
}

// ---------------------------------------------------------------- analyze

#[derive(Serialize)]
struct OscRow<'a> {
    depth: u32,
    point: usize,
    x: &'a str,
    scale: String,
    osc_lower: String,
    osc_upper: String,
    ratio_lower: String,
    ratio_upper: String,
}

#[derive(Serialize)]
struct ProxyRow<'a> {
    point: usize,
    x: &'a str,
    depth: u32,
    mode: OscMode,
    proxy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub input: String,
    pub gauge: Gauge,
    pub mode: OscMode,
    pub depths: Vec<u32>,
    pub windows: Vec<Window>,
    pub points: usize,
    /// Share of points whose proxies never decrease along the depths.
    pub nondecreasing_fraction: Option<f64>,
    pub lip_field_depth: u32,
    pub lip_field_fraction_above: f64,
}

fn load_function(input: &str, dim: u32, depth: u32) -> anyhow::Result<SampledFunction> {
    let path = Path::new(input);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {input}"))?;
        return Ok(SampledFunction::from_text(&text)?);
    }
    let tf: TestFunction = input
        .parse()
        .with_context(|| format!("`{input}` is neither a file nor a generator"))?;
    Ok(make_test_function(&tf, dim, depth)?)
}

fn analyze(a: &AnalyzeArgs, seed: u64) -> anyhow::Result<Outcome> {
    let mut depths = a.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let top = depths.last().copied().unwrap_or(a.depth);
    let base = load_function(&a.input, a.dim, top)?;
    if depths.is_empty() {
        depths.push(base.depth());
    }
    if let Some(&d) = depths.iter().find(|&&d| d > base.depth()) {
        bail!("depth {d} exceeds the input depth {}", base.depth());
    }
    let window = a.window.unwrap_or(Window { lo: 2, hi: u32::MAX });

    let dom = base.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..a.points)
        .map(|_| {
            let c = dom.packed()[rng.gen_range(0..dom.len())];
            let side = dom.side();
            dom.unpack(c).iter().map(|&k| (k as f64 + rng.gen::<f64>()) * side).collect()
        })
        .collect();
    let labels: Vec<String> = points
        .iter()
        .map(|x| x.iter().map(|v| num17(*v)).collect::<Vec<_>>().join(" "))
        .collect();

    fs::create_dir_all(&a.out)?;
    let mut osc = csv::Writer::from_writer(Vec::new());
    let mut prox = csv::Writer::from_writer(Vec::new());
    let mut windows = Vec::new();
    let mut proxies: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
    let mut deepest = None;
    for &d in &depths {
        let f = base.coarsen(d)?;
        let w = Window { lo: window.lo, hi: window.hi.min(d.saturating_sub(2)) };
        if w.hi < w.lo + 5 {
            bail!("window {w} at depth {d} has fewer than 6 scales");
        }
        let radii = dyadic_window(w.lo, w.hi);
        windows.push(w);
        let recs = points
            .par_iter()
            .map(|x| scaled_osc_estimate(&f, x, &a.gauge, &radii, a.mode))
            .collect::<liplab::Result<Vec<_>>>()?;
        for (i, rec) in recs.iter().enumerate() {
            for s in &rec.per_scale {
                osc.serialize(OscRow {
                    depth: d,
                    point: i,
                    x: &labels[i],
                    scale: num17(s.scale),
                    osc_lower: num17(s.osc_lower),
                    osc_upper: num17(s.osc_upper),
                    ratio_lower: num17(s.ratio_lower),
                    ratio_upper: num17(s.ratio_upper),
                })?;
            }
            prox.serialize(ProxyRow { point: i, x: &labels[i], depth: d, mode: a.mode, proxy: num17(rec.summary) })?;
            proxies[i].push(rec.summary);
        }
        deepest = Some((f, radii));
    }
    let (f, radii) = deepest.expect("at least one depth");
    let sample_depth = a.sample_depth.unwrap_or_else(|| f.depth().saturating_sub(2).min(8));
    let field = lip_field(&f, &a.gauge, a.threshold, sample_depth, &radii)?;

    let nondecreasing_fraction = (depths.len() > 1).then(|| {
        let ok = proxies.iter().filter(|p| p.windows(2).all(|w| w[0] <= w[1])).count();
        ok as f64 / points.len() as f64
    });
    let summary = AnalyzeSummary {
        input: a.input.clone(),
        gauge: a.gauge.clone(),
        mode: a.mode,
        depths: depths.clone(),
        windows,
        points: points.len(),
        nondecreasing_fraction,
        lip_field_depth: sample_depth,
        lip_field_fraction_above: field.fraction_above(),
    };
    write_atomic(&a.out.join("oscillation.csv"), &String::from_utf8(osc.into_inner()?)?)?;
    write_atomic(&a.out.join("proxies.csv"), &String::from_utf8(prox.into_inner()?)?)?;
    let field_json = serde_json::json!({
        "threshold": field.threshold,
        "sample_depth": field.sample_depth,
        "fraction_above": field.fraction_above(),
        "points": field.points,
    });
    write_atomic(&a.out.join("lip_field.json"), &json(&field_json))?;
    write_atomic(&a.out.join("lip_above.set"), &write_set(&SetRepr::Cubes(field.above.clone())))?;
    write_atomic(&a.out.join("analyze.json"), &json(&summary))?;
    Ok(Outcome { checks: Vec::new(), stdout: Some(json(&summary)) })
}

// ------------------------------------------------------------ certificates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMembership {
    pub n: usize,
    pub pass: bool,
    pub cubes: usize,
    pub threshold: Option<f64>,
    pub tail: Option<f64>,
    pub margin_min: Option<f64>,
    pub cert_margin: Option<f64>,
    pub final_diam_max: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub n_max: usize,
    pub built: usize,
    pub exhausted: Option<String>,
    pub phi: Gauge,
    pub zeta: Gauge,
    pub epsilons: Vec<f64>,
    pub vertex_deviation: f64,
    pub budget_sum: f64,
    pub membership: Vec<StageMembership>,
    pub lip: Vec<LipSample>,
    pub exceptional: ExceptionalAnalysis,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn certificates(
    build: &TypicalBuild,
    ex: &ExceptionalSet,
    lip_points: usize,
    seed: u64,
) -> anyhow::Result<Certificates> {
    let mut checks = vec![Check::new("all requested stages built", build.exhausted.is_none())];
    checks.push(Check::new(
        "vertex deviation within the budget sum",
        build.vertex_deviation <= build.budget_sum() * (1.0 + 1e-12),
    ));
    let mut membership = Vec::new();
    let mut lip = Vec::new();
    for n in 1..=build.built() {
        let m = match certify_membership(build, n) {
            Ok(c) => StageMembership {
                n,
                pass: c.pass,
                cubes: c.cubes,
                threshold: Some(c.threshold),
                tail: Some(c.tail),
                margin_min: Some(c.margin_min),
                cert_margin: Some(c.cert_margin),
                final_diam_max: Some(c.final_diam_max),
                error: None,
            },
            Err(e) => StageMembership {
                n,
                pass: false,
                cubes: build.stage(n)?.cubes.len(),
                threshold: None,
                tail: None,
                margin_min: None,
                cert_margin: None,
                final_diam_max: None,
                error: Some(e.to_string()),
            },
        };
        checks.push(Check::new(format!("membership stage {n}"), m.pass));
        membership.push(m);
        match certify_lip_sample(build, n, lip_points, seed) {
            Ok(s) => {
                checks.push(Check::new(format!("oscillation bound stage {n}"), s.pass));
                lip.push(s);
            }
            Err(e) => checks.push(Check::new(format!("oscillation bound stage {n}: {e}"), false)),
        }
    }
    let an = &ex.analysis;
    for p in &an.premeasures {
        checks.push(Check::new(format!("tail premeasure below 1/{}", p.n), p.below));
    }
    checks.push(Check::new("uncovered set inside the cross power of E", an.containment.pass()));
    if let Some(m) = &an.micro {
        checks.push(Check::new("microscopic certificate of E verifies", m.verify_pass));
        checks.push(Check::new(
            "uncovered set inside the cross power of the certificate",
            m.region_inside == m.region_points && m.region_exact != Some(false),
        ));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Certificates {
        n_max: build.n_max,
        built: build.built(),
        exhausted: build.exhausted.clone(),
        phi: build.phi.clone(),
        zeta: build.zeta.clone(),
        epsilons: build.epsilons.clone(),
        vertex_deviation: build.vertex_deviation,
        budget_sum: build.budget_sum(),
        membership,
        lip,
        exceptional: an.clone(),
        checks,
        pass,
    })
}

fn construct(c: &ConstructArgs, seed: u64) -> anyhow::Result<Outcome> {
    let f0 = make_test_function(&c.base, c.dim, c.depth)?;
    let opts = BuildOptions { policy: c.policy, ..BuildOptions::default() };
    let build = iterate_typical(&f0, c.nmax, &c.phi, &c.zeta, c.eps0, &opts)?;
    if build.built() == 0 {
        bail!("no stage could be built: {}", build.exhausted.as_deref().unwrap_or("unknown reason"));
    }
    let ex = exceptional_set(&build, c.raster_depth, c.samples, seed)?;
    save_build(&build, &c.out, c.render_depth.unwrap_or(c.depth), Some(&ex))?;
    let cert = certificates(&build, &ex, c.lip_points, seed)?;
    write_atomic(&c.out.join("certificates.json"), &json(&cert))?;
    Ok(Outcome { checks: cert.checks, stdout: None })
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub build: String,
    pub seed: u64,
    pub samples: usize,
    pub lip_points: usize,
    pub raster_depth: u32,
    pub certificates: Certificates,
    pub artifacts: Vec<Check>,
    pub pass: bool,
}

fn report(r: &ReportArgs, seed: u64) -> anyhow::Result<Outcome> {
    let (build, meta) = load_build(&r.build)?;
    let ex = exceptional_set(&build, r.raster_depth, r.samples, seed)?;
    let certificates = certificates(&build, &ex, r.lip_points, seed)?;

    let mut artifacts = Vec::new();
    let rendered = build.function.render(build.built(), meta.render_depth)?;
    let stored = SampledFunction::from_text(&fs::read_to_string(r.build.join("final.fn"))?)?;
    artifacts.push(Check::new("final.fn reproduces the staged function", rendered == stored));
    for (name, raster) in [("E.set", &ex.e_raster), ("F.set", &ex.f_raster)] {
        let path = r.build.join(name);
        if path.exists() {
            if let SetRepr::Cubes(s) = read_set(&path)? {
                if s.depth() == raster.depth() {
                    artifacts.push(Check::new(format!("{name} reproduces"), &s == raster));
                }
            }
        }
    }
    let mut checks = certificates.checks.clone();
    checks.extend(artifacts.iter().cloned());
    let rep = Report {
        build: r.build.display().to_string(),
        seed,
        samples: r.samples,
        lip_points: r.lip_points,
        raster_depth: r.raster_depth,
        pass: checks.iter().all(|c| c.pass),
        certificates,
        artifacts,
    };
    let text = json(&rep);
    if let Some(out) = &r.out {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut side = out.clone().into_os_string();
        side.push(".meta.json");
        emit(Some(out), text)?;
        write_atomic(Path::new(&side), &json(&serde_json::json!({ "written_unix": stamp })))?;
        return Ok(Outcome { checks, stdout: None });
    }
    Ok(Outcome { checks, stdout: Some(text) })
}

// --------------------------------------------------------------- partition

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRun {
    pub report: ImageCoverReport,
    pub recheck: bool,
    pub graph: GraphCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRun {
    pub depth: u32,
    pub a_cells: usize,
    pub b_cells: usize,
    pub exact: bool,
    pub runs: Vec<DeltaRun>,
    /// Sums never increase as `δ` decreases.
    pub antitone: bool,
    pub dims: Option<PartitionDims>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn partition_run(build: &TypicalBuild, p: &PartitionArgs, seed: u64) -> anyhow::Result<PartitionRun> {
    let part = split_partition(build, p.depth)?;
    let exact = part.is_exact(build.base().domain())?;
    let mut ladder = p.delta_ladder.clone();
    ladder.sort_by(|a, b| b.total_cmp(a));
    let mut runs = Vec::new();
    let mut checks = vec![Check::new("A and B partition Ω", exact)];
    let mut last_image = None;
    for &delta in &ladder {
        let ic = image_cover_report(&build.function, &part.b, &p.phi, &p.xi, delta, p.image_depth)?;
        let graph = graph_cross_check(&build.function, &part.a, &ic.image, p.samples, seed)?;
        let recheck = ic.report.recheck()?;
        checks.push(Check::new(format!("image cover sum within bound at δ={delta}"), ic.report.pass() && recheck));
        checks.push(Check::new(format!("graph inside A⋈B_img at δ={delta}"), graph.pass));
        runs.push(DeltaRun { report: ic.report, recheck, graph });
        last_image = Some(ic.image);
    }
    let antitone = runs.windows(2).all(|w| w[1].report.sum <= w[0].report.sum);
    checks.push(Check::new("image cover sums antitone in δ", antitone));
    let dims = match (&last_image, build.base().dim()) {
        (Some(img), 1) => Some(partition_dims(&part.a, img)?),
        _ => None,
    };
    Ok(PartitionRun {
        depth: part.depth(),
        a_cells: part.a.len(),
        b_cells: part.b.len(),
        exact,
        runs,
        antitone,
        dims,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn partition(p: &PartitionArgs, seed: u64) -> anyhow::Result<Outcome> {
    let (build, _) = load_build(&p.build)?;
    let run = partition_run(&build, p, seed)?;
    let stdout = emit(p.out.as_deref(), json(&run))?;
    Ok(Outcome { checks: run.checks, stdout })
}

// ------------------------------------------------------------ sets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsOutput {
    pub input: String,
    pub scales: String,
    pub lbdim_proxy: f64,
    pub dimension: DimensionReport,
    pub premeasure: Option<PremeasureReport>,
}

fn dims(d: &DimsArgs) -> anyhow::Result<Outcome> {
    let set = read_set(&d.input)?;
    let scales = d.scales.scales();
    let dimension = lower_box_dim(&set, &scales)?;
    let premeasure = d.zeta.as_ref().map(|z| lower_box_premeasure(&set, z, None, &scales)).transpose()?;
    let out = DimsOutput {
        input: d.input.display().to_string(),
        scales: d.scales.to_string(),
        lbdim_proxy: dimension.lbdim_proxy,
        dimension,
        premeasure,
    };
    let stdout = emit(d.out.as_deref(), json(&out))?;
    Ok(Outcome { checks: Vec::new(), stdout })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum MicroOutput {
    Certificate { eps: f64, boxes: usize, verdict: MicroVerdict },
    Failure(liplab::setlib::micro::MicroFailure),
}

fn micro(m: &MicroArgs) -> anyhow::Result<Outcome> {
    let set = read_set(&m.input)?;
    let (out, pass) = match microscopic_certificate(&set, m.eps, m.nmax)? {
        MicroOutcome::Certificate(cover) => {
            let verdict = microscopic_verify(&cover, m.eps, &set)?;
            if let Some(path) = &m.out {
                write_atomic(path, &write_cover(&cover))?;
            }
            let pass = verdict.pass;
            (MicroOutput::Certificate { eps: m.eps, boxes: cover.len(), verdict }, pass)
        }
        MicroOutcome::Failure(f) => (MicroOutput::Failure(f), false),
    };
    Ok(Outcome { checks: vec![Check::new("microscopic certificate", pass)], stdout: Some(json(&out)) })
}

fn gen_set(g: &GenSetArgs) -> anyhow::Result<Outcome> {
    let set = match g.kind {
        SetKind::Cantor => SetRepr::Intervals(IntervalSet::cantor(g.depth)),
        SetKind::Full => SetRepr::Cubes(DyadicCubeSet::full(g.dim, g.depth)?),
    };
    write_atomic(&g.out, &write_set(&set))?;
    Ok(Outcome::default())
}

fn gen_fn(g: &GenFnArgs) -> anyhow::Result<Outcome> {
    let f = make_test_function(&g.generator, g.dim, g.depth)?;
    write_atomic(&g.out, &f.to_text())?;
    Ok(Outcome::default())
}
