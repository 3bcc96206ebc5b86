//! Staged pipeline. Each stage reads the committed output directories of
//! earlier stages and writes its own directory atomically.

mod data;
mod learn;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ModelMode, PipelineConfig};
use crate::error::{PipelineError, Result};
use crate::io;

pub use data::export_psd_csv;
pub use learn::{load_classifier, split_patients, Ensemble, LoadedClassifier, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Clean,
    Sweep,
    Cwt,
    Render,
    Train,
    Tune,
    Eval,
    Occlude,
    All,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Synth,
        Stage::Clean,
        Stage::Sweep,
        Stage::Cwt,
        Stage::Render,
        Stage::Train,
        Stage::Tune,
        Stage::Eval,
        Stage::Occlude,
        Stage::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Clean => "clean",
            Stage::Sweep => "sweep",
            Stage::Cwt => "cwt",
            Stage::Render => "render",
            Stage::Train => "train",
            Stage::Tune => "tune",
            Stage::Eval => "eval",
            Stage::Occlude => "occlude",
            Stage::All => "all",
        }
    }

    /// The stages `all` expands to for this configuration.
    pub fn expand(self, cfg: &PipelineConfig) -> Vec<Stage> {
        if self != Stage::All {
            return vec![self];
        }
        let mut v = Vec::new();
        if cfg.input_dir.is_none() {
            v.push(Stage::Synth);
        }
        v.extend([Stage::Clean, Stage::Sweep, Stage::Cwt, Stage::Render]);
        v.push(match cfg.model.mode {
            ModelMode::Train => Stage::Train,
            ModelMode::Tune => Stage::Tune,
        });
        v.extend([Stage::Eval, Stage::Occlude]);
        v
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

pub const STAMP: &str = "stage.json";

/// Provenance written into every stage directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStamp {
    pub stage: Stage,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub hash: String,
}

impl Ctx<'_> {
    pub fn out(&self) -> &Path {
        &self.cfg.out_dir
    }

    /// Committed directory of `stage`, or `MissingUpstreamArtifact`.
    pub fn upstream(&self, stage: Stage) -> Result<PathBuf> {
        let dir = self.out().join(stage.as_str());
        if !dir.join(STAMP).is_file() {
            return Err(PipelineError::MissingUpstreamArtifact(dir));
        }
        Ok(dir)
    }

    /// The directory holding series CSVs and the manifest.
    pub fn input(&self) -> Result<PathBuf> {
        match &self.cfg.input_dir {
            Some(d) => Ok(d.clone()),
            None => self.upstream(Stage::Synth),
        }
    }

    /// Directory of the stage that produced the classifiers.
    pub fn model_dir(&self) -> Result<PathBuf> {
        self.upstream(match self.cfg.model.mode {
            ModelMode::Train => Stage::Train,
            ModelMode::Tune => Stage::Tune,
        })
    }
}

/// A stage's output, built in a temporary sibling directory and renamed
/// into place on commit.
pub(crate) struct StageDir {
    stage: Stage,
    tmp: PathBuf,
    fin: PathBuf,
}

impl StageDir {
    pub fn begin(ctx: &Ctx, stage: Stage) -> Result<Self> {
        let fin = ctx.out().join(stage.as_str());
        let tmp = ctx.out().join(format!(".{}.partial", stage.as_str()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| PipelineError::io(&tmp, e))?;
        }
        io::create_dir(&tmp)?;
        Ok(Self { stage, tmp, fin })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.tmp.join(rel)
    }

    pub fn commit(self, ctx: &Ctx) -> Result<PathBuf> {
        let mut files = Vec::new();
        list_files(&self.tmp, &self.tmp, &mut files)?;
        files.sort();
        let stamp = StageStamp {
            stage: self.stage,
            config_hash: ctx.hash.clone(),
            seed: ctx.cfg.seed,
            files,
        };
        io::write_json(&self.tmp.join(STAMP), &stamp)?;
        io::write_json(&self.tmp.join("config.resolved.json"), ctx.cfg)?;
        if self.fin.exists() {
            fs::remove_dir_all(&self.fin).map_err(|e| PipelineError::io(&self.fin, e))?;
        }
        fs::rename(&self.tmp, &self.fin).map_err(|e| PipelineError::io(&self.fin, e))?;
        Ok(self.fin.clone())
    }
}

impl Drop for StageDir {
    fn drop(&mut self) {
        // an uncommitted stage leaves nothing behind
        if self.tmp.exists() {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let entry = entry.map_err(|e| PipelineError::io(dir, e))?;
        let p = entry.path();
        if p.is_dir() {
            list_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Validates the configuration, then runs `stage` (or every stage of `all`
/// in order). Returns the committed stage directories.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ctx = Ctx { cfg, hash: cfg.hash() };
    let stages = stage.expand(cfg);
    io::create_dir(ctx.out())?;
    io::write_json(&ctx.out().join("config.resolved.json"), cfg)?;
    let mut done = Vec::new();
    for st in stages {
        log::info!("stage {st}");
        let dir = match st {
            Stage::Synth => data::synth(&ctx)?,
            Stage::Clean => data::clean(&ctx)?,
            Stage::Sweep => data::sweep(&ctx)?,
            Stage::Cwt => data::cwt(&ctx)?,
            Stage::Render => data::render(&ctx)?,
            Stage::Train => learn::train(&ctx)?,
            Stage::Tune => learn::tune(&ctx)?,
            Stage::Eval => learn::eval(&ctx)?,
            Stage::Occlude => learn::occlude(&ctx)?,
            Stage::All => unreachable!(),
        };
        done.push(dir);
    }
    Ok(done)
}
