//! Command line surface and its JSON file form.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use liplab::construct::GridPolicy;
use liplab::funclib::{OscMode, TestFunction};
use liplab::setlib::ScaleGrid;
use liplab::Gauge;

#[derive(Parser, Debug)]
#[command(name = "liplab", version, about = "Scaled oscillation, box counting and plateau constructions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the resolved run configuration here before running.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    #[command(flatten)]
    Task(Task),
    /// Run a configuration saved with --save-config.
    Run { config: PathBuf },
}

/// One run: the task and the seed. Paths are absolute after `resolve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Task,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> anyhow::Result<(RunConfig, Option<PathBuf>)> {
        let cfg = match cli.command {
            Command::Task(task) => RunConfig { seed: cli.seed, task },
            Command::Run { config } => RunConfig::load(&config)?,
        };
        Ok((cfg.resolve()?, cli.save_config))
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Makes every path absolute and checks the numeric knobs.
    pub fn resolve(mut self) -> anyhow::Result<RunConfig> {
        let abs = |p: &mut PathBuf| -> anyhow::Result<()> {
            *p = std::path::absolute(&*p).with_context(|| format!("resolving {}", p.display()))?;
            Ok(())
        };
        match &mut self.task {
            Task::Analyze(a) => {
                abs(&mut a.out)?;
                if a.points == 0 {
                    bail!("--points must be positive");
                }
                if let Some(w) = a.window {
                    if w.hi < w.lo + 5 {
                        bail!("--window needs at least 6 scales, got {w}");
                    }
                }
            }
            Task::Construct(c) => {
                abs(&mut c.out)?;
                if c.nmax == 0 || c.nmax > 12 {
                    bail!("--nmax must lie in 1..=12");
                }
                if !(c.eps0 > 0.0 && c.eps0.is_finite()) {
                    bail!("--eps0 must be positive");
                }
                if c.dim == 0 || c.dim > 3 {
                    bail!("--dim must lie in 1..=3");
                }
            }
            Task::Dims(d) => {
                abs(&mut d.input)?;
                if let Some(o) = &mut d.out {
                    abs(o)?;
                }
            }
            Task::Partition(p) => {
                abs(&mut p.build)?;
                if let Some(o) = &mut p.out {
                    abs(o)?;
                }
                if p.delta_ladder.is_empty() || p.delta_ladder.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
                    bail!("--delta-ladder values must lie in (0, 1]");
                }
            }
            Task::Micro(m) => {
                abs(&mut m.input)?;
                if let Some(o) = &mut m.out {
                    abs(o)?;
                }
                if !(m.eps > 0.0 && m.eps < 1.0) {
                    bail!("--eps must lie in (0, 1)");
                }
            }
            Task::Report(r) => {
                abs(&mut r.build)?;
                if let Some(o) = &mut r.out {
                    abs(o)?;
                }
            }
            Task::GenSet(g) => abs(&mut g.out)?,
            Task::GenFn(g) => abs(&mut g.out)?,
        }
        Ok(self)
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Task {
    /// Per-point scaled oscillation of a sampled function.
    Analyze(AnalyzeArgs),
    /// Iterated plateau construction with certificates.
    Construct(ConstructArgs),
    /// Lower box dimension report of a set file.
    Dims(DimsArgs),
    /// Split a build into A and B, cover f(B) and check the graph.
    Partition(PartitionArgs),
    /// Microscopic certificate for a set file.
    Micro(MicroArgs),
    /// Every certificate of a build directory in one JSON document.
    Report(ReportArgs),
    /// Write a sample set file.
    GenSet(GenSetArgs),
    /// Write a sampled test function.
    GenFn(GenFnArgs),
}

/// Dyadic radius window `lo..hi`, meaning `2^{-lo} .. 2^{-hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Window {
    pub lo: u32,
    pub hi: u32,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got `{s}`"))?;
        let lo = a.trim().parse().map_err(|_| format!("bad window start `{a}`"))?;
        let hi = b.trim().parse().map_err(|_| format!("bad window end `{b}`"))?;
        if lo > hi {
            return Err(format!("empty window `{s}`"));
        }
        Ok(Window { lo, hi })
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Window {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    /// A `.fn` file, or a generator such as `weierstrass(a=0.5,b=3)`.
    pub input: String,
    #[arg(long, default_value = "power(s=1)")]
    pub gauge: Gauge,
    /// `lip` (windowed lower) or `Lip` (windowed upper).
    #[arg(long, default_value = "Lip")]
    pub mode: OscMode,
    /// Radius window; its end is capped at `depth - 2` for each depth.
    #[arg(long)]
    pub window: Option<Window>,
    /// Sampling depths to compare; defaults to the input's own depth.
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<u32>,
    /// Depth used when the input is a generator and no --depths is given.
    #[arg(long, default_value_t = 14)]
    pub depth: u32,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// Threshold of the lip field.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long)]
    pub sample_depth: Option<u32>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructArgs {
    #[arg(long, default_value = "constant(c=0.5)")]
    pub base: TestFunction,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    /// Vertex depth of the base sampling.
    #[arg(long, default_value_t = 14)]
    pub depth: u32,
    #[arg(long, default_value_t = 3)]
    pub nmax: usize,
    #[arg(long, default_value = "power(s=1)")]
    pub phi: Gauge,
    #[arg(long, default_value = "power(s=1)")]
    pub zeta: Gauge,
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    #[arg(long, default_value = "refine")]
    pub policy: GridPolicy,
    /// Depth of the E and F rasters.
    #[arg(long, default_value_t = 12)]
    pub raster_depth: u32,
    /// Depth of `final.fn`; defaults to the base depth.
    #[arg(long)]
    pub render_depth: Option<u32>,
    /// Random points for the containment checks.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Covered points per stage for the oscillation certificate.
    #[arg(long, default_value_t = 1_000)]
    pub lip_points: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "dyadic:1..12")]
    pub scales: ScaleGrid,
    /// Also report the lower box premeasure under this pseudogauge.
    #[arg(long)]
    pub zeta: Option<Gauge>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArgs {
    pub build: PathBuf,
    #[arg(long, default_value = "power(s=1)")]
    pub xi: Gauge,
    #[arg(long, default_value = "power(s=2,c=0.2)")]
    pub phi: Gauge,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub delta_ladder: Vec<f64>,
    /// Depth of the A/B split.
    #[arg(long, default_value_t = 12)]
    pub depth: u32,
    #[arg(long, default_value_t = 16)]
    pub image_depth: u32,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 20)]
    pub nmax: usize,
    /// Cover file for a successful certificate.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportArgs {
    pub build: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000)]
    pub lip_points: usize,
    #[arg(long, default_value_t = 12)]
    pub raster_depth: u32,
    /// Output file; a `.meta.json` sidecar records when it was written.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    /// Middle-thirds Cantor intervals.
    Cantor,
    /// The whole cube at the given depth.
    Full,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSetArgs {
    #[arg(value_enum)]
    pub kind: SetKind,
    #[arg(long, default_value_t = 12)]
    pub depth: u32,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenFnArgs {
    pub generator: TestFunction,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    #[arg(long, default_value_t = 14)]
    pub depth: u32,
    #[arg(long, short)]
    pub out: PathBuf,
}
