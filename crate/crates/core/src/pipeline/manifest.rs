use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compress::{Profile, QatConfig};
use crate::tracer::PathTraceConfig;
use crate::train::{InitMode, TrainConfig};
use crate::views::ViewSelectionConfig;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSource {
    pub path: PathBuf,
    /// Defaults to `<path>.meta`.
    #[serde(default)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundTruth {
    /// Deterministic emission-absorption ray march.
    RayMarch,
    /// Monte Carlo volumetric path tracing.
    PathTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderStage {
    pub ground_truth: GroundTruth,
    /// Ray-march step as a fraction of the smallest voxel spacing.
    pub step_scale: f64,
    /// Every `test_every`-th camera is held out for testing.
    pub test_every: usize,
    pub path_trace: PathTraceConfig,
}

impl Default for RenderStage {
    fn default() -> Self {
        Self { ground_truth: GroundTruth::RayMarch, step_scale: 0.5, test_every: 8, path_trace: PathTraceConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressStage {
    pub profiles: Vec<Profile>,
    /// Fine-tuning and HR codebook size, shared by both profiles.
    pub qat: QatConfig,
}

impl Default for CompressStage {
    fn default() -> Self {
        Self { profiles: vec![Profile::Hq, Profile::Hr], qat: QatConfig::default() }
    }
}

/// Everything a run depends on. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub volume: VolumeSource,
    pub preset: PathBuf,
    pub output: PathBuf,
    /// Copied into every stage's seed; stage tables cannot override it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub views: ViewSelectionConfig,
    #[serde(default)]
    pub render: RenderStage,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub compress: CompressStage,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut m: RunManifest = toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut m.volume.path);
        if let Some(meta) = &mut m.volume.meta {
            resolve(meta);
        }
        resolve(&mut m.preset);
        resolve(&mut m.output);
        m.set_seed(m.seed);
        Ok(m)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.views.seed = seed;
        self.render.path_trace.seed = seed;
        self.train.seed = seed;
        self.compress.qat.seed = seed;
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn meta_path(&self) -> PathBuf {
        self.volume.meta.clone().unwrap_or_else(|| crate::volume::sidecar_path(&self.volume.path))
    }

    /// Input files exist and every stage configuration is usable.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (what, p) in [("volume", &self.volume.path), ("volume metadata", &self.meta_path()), ("preset", &self.preset)] {
            if !p.is_file() {
                return Err(PipelineError::Validation(format!("{what} file {} does not exist", p.display())));
            }
        }
        let invalid = |e: crate::Error| PipelineError::Validation(e.to_string());
        self.render.path_trace.validate().map_err(invalid)?;
        self.train.validate().map_err(invalid)?;
        if !(self.render.step_scale > 0.0) {
            return Err(PipelineError::Validation("render.step_scale must be positive".into()));
        }
        if self.render.test_every < 2 {
            return Err(PipelineError::Validation("render.test_every must be at least 2".into()));
        }
        if self.views.width == 0 || self.views.height == 0 || self.views.n_phase1 + self.views.n_phase2 < 3 {
            return Err(PipelineError::Validation("views need a nonzero resolution and at least three cameras".into()));
        }
        if self.compress.profiles.is_empty() {
            return Err(PipelineError::Validation("compress.profiles is empty".into()));
        }
        if self.compress.profiles.contains(&Profile::Hr) && !(1..=crate::compress::MAX_CODEBOOK).contains(&self.compress.qat.codebook_size) {
            return Err(PipelineError::Validation(format!(
                "compress.qat.codebook_size must lie in 1..={}",
                crate::compress::MAX_CODEBOOK
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "preset = \"p.toml\"\noutput = \"run\"\nseed = 9\n[volume]\npath = \"v.raw\"\n";

    #[test]
    fn relative_paths_resolve_against_the_manifest() {
        let m = RunManifest::from_toml_str(MINIMAL, Path::new("/data/cfg")).unwrap();
        assert_eq!(m.volume.path, Path::new("/data/cfg/v.raw"));
        assert_eq!(m.meta_path(), Path::new("/data/cfg/v.raw.meta"));
        assert_eq!(m.output, Path::new("/data/cfg/run"));
    }

    #[test]
    fn global_seed_reaches_every_stage() {
        let text = format!("{MINIMAL}[train]\nseed = 4\n");
        let m = RunManifest::from_toml_str(&text, Path::new("")).unwrap();
        assert_eq!([m.views.seed, m.render.path_trace.seed, m.train.seed, m.compress.qat.seed], [9; 4]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[render]\nspp = 4\n");
        assert!(matches!(RunManifest::from_toml_str(&text, Path::new("")), Err(PipelineError::Validation(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let m = RunManifest::from_toml_str(MINIMAL, Path::new("/x")).unwrap();
        let back = RunManifest::from_toml_str(&m.to_toml_string(), Path::new("/elsewhere")).unwrap();
        assert_eq!(m, back);
    }
}
