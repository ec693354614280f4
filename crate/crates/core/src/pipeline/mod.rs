//! Stage wiring driven by one TOML run manifest.
//!
//! Every stage reads its inputs from and writes its outputs to the manifest's
//! output directory, so any stage can be re-run on its own. Each artifact is
//! logged with its SHA-256.

mod manifest;
mod stages;

pub use manifest::{CompressStage, GroundTruth, RenderStage, RunManifest, VolumeSource};
pub use stages::{
    decompress, run_all, run_compress, run_evaluate, run_render, run_select_views, run_train, write_phantom, Artifact,
    ArtifactSummary, EncodedContainer, Layout, RunSummary, Split, StageReport,
};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    SelectViews,
    Render,
    Train,
    Compress,
    Decompress,
    Evaluate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::SelectViews => "select-views",
            Stage::Render => "render",
            Stage::Train => "train",
            Stage::Compress => "compress",
            Stage::Decompress => "decompress",
            Stage::Evaluate => "evaluate",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// The manifest or a referenced input is unusable; nothing ran.
    #[error("invalid manifest: {0}")]
    Validation(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> StageContext<T> for crate::error::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}
