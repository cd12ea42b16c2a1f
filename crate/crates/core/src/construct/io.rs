//! Build directories: `base.fn`, `final.fn`, `stages.json`, `build.json`,
//! `E.set`, `F.set`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::build::{layer_from_record, tails_of, verify_plateaus, GridPolicy, StageRecord, TypicalBuild};
use super::exceptional::ExceptionalSet;
use super::staged::StagedFunction;
use crate::error::{Error, Result};
use crate::funclib::SampledFunction;
use crate::gauges::Gauge;
use crate::setlib::io::write_set;
use crate::setlib::SetRepr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub n_max: usize,
    pub eps0: f64,
    pub phi: Gauge,
    pub zeta: Gauge,
    pub policy: GridPolicy,
    pub epsilons: Vec<f64>,
    pub tails: Vec<f64>,
    pub exhausted: Option<String>,
    pub vertex_deviation: f64,
    pub render_depth: u32,
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Io(format!("bad path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_build(build: &TypicalBuild, dir: &Path, render_depth: u32, ex: Option<&ExceptionalSet>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("base.fn"), &build.base().to_text())?;
    let rendered = build.function.render(build.built(), render_depth)?;
    write_atomic(&dir.join("final.fn"), &rendered.to_text())?;
    write_atomic(&dir.join("stages.json"), &serde_json::to_string_pretty(&build.stages)?)?;
    let meta = BuildMeta {
        n_max: build.n_max,
        eps0: build.eps0,
        phi: build.phi.clone(),
        zeta: build.zeta.clone(),
        policy: build.policy,
        epsilons: build.epsilons.clone(),
        tails: build.tails.clone(),
        exhausted: build.exhausted.clone(),
        vertex_deviation: build.vertex_deviation,
        render_depth,
    };
    write_atomic(&dir.join("build.json"), &serde_json::to_string_pretty(&meta)?)?;
    if let Some(ex) = ex {
        write_atomic(&dir.join("E.set"), &write_set(&SetRepr::Cubes(ex.e_raster.clone())))?;
        write_atomic(&dir.join("F.set"), &write_set(&SetRepr::Cubes(ex.f_raster.clone())))?;
    }
    Ok(())
}

fn read(dir: &Path, name: &str) -> Result<String> {
    fs::read_to_string(dir.join(name)).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
}

/// Rebuilds the symbolic function from `base.fn` and `stages.json`, and
/// checks every stored plateau value against its anchor.
pub fn load_build(dir: &Path) -> Result<(TypicalBuild, BuildMeta)> {
    let base = SampledFunction::from_text(&read(dir, "base.fn")?)?;
    let stages: Vec<StageRecord> = serde_json::from_str(&read(dir, "stages.json")?)?;
    let meta: BuildMeta = serde_json::from_str(&read(dir, "build.json")?)?;
    if meta.epsilons.len() != stages.len() {
        return Err(Error::Parse("budget list and stage list differ in length".into()));
    }
    if tails_of(&meta.epsilons) != meta.tails {
        return Err(Error::Parse("stored tails disagree with the budgets".into()));
    }
    let mut function = StagedFunction::new(base)?;
    for rec in &stages {
        function.push(layer_from_record(rec, function.base().dim())?)?;
    }
    verify_plateaus(&function)?;
    let build = TypicalBuild {
        function,
        stages,
        phi: meta.phi.clone(),
        zeta: meta.zeta.clone(),
        eps0: meta.eps0,
        n_max: meta.n_max,
        policy: meta.policy,
        epsilons: meta.epsilons.clone(),
        tails: meta.tails.clone(),
        exhausted: meta.exhausted.clone(),
        vertex_deviation: meta.vertex_deviation,
    };
    Ok((build, meta))
}
