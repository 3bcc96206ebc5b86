//! Pipeline configuration: one JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weanscope_core::cwt::{CwtConfig, MotherWavelet};
use weanscope_core::eval::TieBreak;
use weanscope_core::hpo::{BoConfig, SpaceKind};
use weanscope_core::nn::TrainConfig;
use weanscope_core::occlusion::OcclusionOptions;
use weanscope_core::resample::SweepConfig;
use weanscope_core::series::CleaningParams;
use weanscope_core::synth::CohortSpec;

use crate::error::{PipelineError, Result};

/// `"auto"` or an explicit mother wavelet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WaveletChoice {
    Named(String),
    Fixed(MotherWavelet),
}

impl Default for WaveletChoice {
    fn default() -> Self {
        WaveletChoice::Named("auto".into())
    }
}

impl WaveletChoice {
    pub fn candidates(&self) -> Result<Vec<MotherWavelet>> {
        match self {
            WaveletChoice::Named(n) if n == "auto" => {
                Ok(vec![MotherWavelet::default_morse(), MotherWavelet::default_morlet()])
            }
            WaveletChoice::Named(n) if n == "morse" => Ok(vec![MotherWavelet::default_morse()]),
            WaveletChoice::Named(n) if n == "morlet" => Ok(vec![MotherWavelet::default_morlet()]),
            WaveletChoice::Named(n) => Err(PipelineError::ConfigInvalid(format!("unknown wavelet {n:?}"))),
            WaveletChoice::Fixed(w) => {
                w.validate().map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
                Ok(vec![*w])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CwtStageConfig {
    pub wavelet: WaveletChoice,
    #[serde(flatten)]
    pub transform: CwtConfig,
    /// PSD maps are averaged down to at most this many time bins before saving.
    pub max_time_bins: usize,
    /// Side of the maps the wavelet-selection cross-correlations run on.
    pub selection_size: usize,
}

impl Default for CwtStageConfig {
    fn default() -> Self {
        Self {
            wavelet: WaveletChoice::default(),
            transform: CwtConfig::default(),
            max_time_bins: 256,
            selection_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageConfig {
    pub size: usize,
    pub log_compress: bool,
    pub write_png: bool,
    pub write_pgm: bool,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            size: 224,
            log_compress: true,
            write_png: true,
            write_pgm: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    #[default]
    Train,
    Tune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub mode: ModelMode,
    /// Adds a ReLU after each convolution of the fixed architecture.
    pub conv_relu: bool,
    pub train: TrainConfig,
    /// Number of repeated train/evaluate runs, each with its own split and seed.
    pub runs: usize,
    pub train_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mode: ModelMode::Train,
            conv_relu: false,
            train: TrainConfig::default(),
            runs: 1,
            train_fraction: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpoConfig {
    pub budget: usize,
    pub space: SpaceKind,
    #[serde(flatten)]
    pub bo: BoConfig,
    /// Epoch cap for each inner training run.
    pub max_epochs: usize,
}

impl Default for HpoConfig {
    fn default() -> Self {
        Self {
            budget: 10,
            space: SpaceKind::ScratchCnn,
            bo: BoConfig::default(),
            max_epochs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub enabled: bool,
    /// Conv filters per block and dense units of each single-channel head.
    pub head_filters: Vec<usize>,
    pub head_units: usize,
    pub tie: TieBreak,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            head_filters: vec![32, 32],
            head_units: 128,
            tie: TieBreak::Failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcclusionConfig {
    #[serde(flatten)]
    pub options: OcclusionOptions,
    /// Cap on the number of patients mapped; `None` maps every evaluated patient.
    pub max_patients: Option<usize>,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            options: OcclusionOptions::default(),
            max_patients: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Directory of series CSVs plus `manifest.json`; when absent the
    /// synthetic cohort under `<out>/synth` is used.
    pub input_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub synth: CohortSpec,
    pub cleaning: CleaningParams,
    pub sweep: SweepConfig,
    pub cwt: CwtStageConfig,
    pub image: ImageConfig,
    pub model: ModelConfig,
    pub hpo: HpoConfig,
    pub ensemble: EnsembleConfig,
    pub occlusion: OcclusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            synth: CohortSpec::default(),
            cleaning: CleaningParams::default(),
            sweep: SweepConfig::default(),
            cwt: CwtStageConfig::default(),
            image: ImageConfig::default(),
            model: ModelConfig::default(),
            hpo: HpoConfig::default(),
            ensemble: EnsembleConfig::default(),
            occlusion: OcclusionConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::ConfigInvalid(msg.into())
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks numeric bounds and that the input directory exists.
    pub fn validate(&self) -> Result<()> {
        if let Some(dir) = &self.input_dir {
            if !dir.is_dir() {
                return Err(invalid(format!("input directory {} does not exist", dir.display())));
            }
            if !dir.join(crate::io::series::MANIFEST).is_file() {
                return Err(invalid(format!("input directory {} has no manifest.json", dir.display())));
            }
        }
        let mut synth = self.synth.clone();
        synth.seed = self.seed;
        synth.validate().map_err(|e| invalid(e.to_string()))?;
        let c = &self.cleaning;
        if !(c.k_sigma > 0.0) || c.neighbor_window == 0 || !(c.max_gap_s > 0.0) {
            return Err(invalid("cleaning parameters must be positive"));
        }
        weanscope_core::resample::frequency_grid(self.sweep.f_lo, self.sweep.f_hi, self.sweep.f_step)
            .map_err(|e| invalid(e.to_string()))?;
        if self.sweep.methods.is_empty() {
            return Err(invalid("sweep needs at least one method"));
        }
        self.cwt.wavelet.candidates()?;
        if self.cwt.transform.voices_per_octave == 0 || !(self.cwt.transform.min_cycles > 0.0) {
            return Err(invalid("cwt voices and cycles must be positive"));
        }
        if self.cwt.max_time_bins < 2 || self.cwt.selection_size < 2 {
            return Err(invalid("cwt map sizes must be at least 2"));
        }
        if self.image.size < 12 {
            return Err(invalid("image size must be at least 12"));
        }
        self.model.train.validate().map_err(|e| invalid(e.to_string()))?;
        if self.model.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if !(self.model.train_fraction > 0.0 && self.model.train_fraction < 1.0) {
            return Err(invalid("train_fraction must lie in (0, 1)"));
        }
        if self.model.mode == ModelMode::Tune && (self.hpo.budget == 0 || self.hpo.max_epochs == 0) {
            return Err(invalid("hpo budget and epochs must be positive"));
        }
        if self.model.mode == ModelMode::Tune {
            match (self.hpo.space, self.ensemble.enabled) {
                (SpaceKind::ChannelHead, false) => return Err(invalid("channel_head search needs ensemble.enabled")),
                (SpaceKind::ScratchCnn, true) => {
                    return Err(invalid("scratch_cnn search tunes a single model; disable the ensemble"))
                }
                _ => {}
            }
        }
        if self.ensemble.enabled && (self.ensemble.head_units == 0 || self.ensemble.head_filters.is_empty()) {
            return Err(invalid("ensemble heads need filters and units"));
        }
        let o = &self.occlusion.options;
        if o.window == 0 || o.stride == 0 || o.window > self.image.size {
            return Err(invalid(format!(
                "occlusion window {} / stride {} invalid for image size {}",
                o.window, o.stride, self.image.size
            )));
        }
        if o.target_class > 1 {
            return Err(invalid("occlusion target class must be 0 or 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with paths removed, first 16 hex digits.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("input_dir");
            obj.remove("out_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn input_dir(&self) -> PathBuf {
        self.input_dir.clone().unwrap_or_else(|| self.out_dir.join("synth"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), c);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn wavelet_forms() {
        let c = PipelineConfig::from_json(r#"{"cwt": {"wavelet": {"kind": "morlet", "center": 5.0}}}"#).unwrap();
        assert_eq!(c.cwt.wavelet.candidates().unwrap(), [MotherWavelet::Morlet { center: 5.0 }]);
        let c = PipelineConfig::from_json(r#"{"cwt": {"wavelet": "haar"}}"#).unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn hash_ignores_paths() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn missing_input_is_invalid() {
        let c = PipelineConfig {
            input_dir: Some("/definitely/not/here".into()),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn unknown_fields_rejected_cleanly() {
        assert!(PipelineConfig::from_json("[1, 2]").is_err());
        assert!(PipelineConfig::from_json(r#"{"seed": -1}"#).is_err());
    }
}
