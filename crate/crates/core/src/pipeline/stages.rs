use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{load_cameras, save_cameras, Camera};
use crate::compress::{compute_sensitivity, decode, encode, quantization_aware_finetune, Profile};
use crate::error::{Error, IoContext, Result};
use crate::image::{FloatImageMeta, RgbaImage};
use crate::metrics::{evaluate, mean_report, MetricReport};
use crate::splat::{load_scene, rasterize, save_scene, RenderOptions, SplatScene};
use crate::tracer::{emission_absorption_render, path_trace, EnvironmentMap};
use crate::train::{checkpoint_paths, initialize, save_checkpoint, train, write_history_csv, TrainHooks, TrainView};
use crate::views::select_views;
use crate::volume::{phantom, ElementType, Lighting, OccupancyGrid, Preset, VolumeGrid};

use super::manifest::{GroundTruth, RunManifest};
use super::{PipelineError, Stage, StageContext};

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }
    pub fn cameras(&self) -> PathBuf {
        self.root.join("cameras.json")
    }
    pub fn coverage(&self) -> PathBuf {
        self.root.join("coverage.json")
    }
    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }
    pub fn image(&self, i: usize) -> PathBuf {
        self.images().join(format!("view_{i:03}.rgba"))
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn scene(&self) -> PathBuf {
        self.root.join("scene.gspl")
    }
    pub fn history(&self) -> PathBuf {
        self.root.join("history.csv")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn container(&self, p: Profile) -> PathBuf {
        self.root.join(format!("scene_{}.cgsv", profile_name(p)))
    }
    pub fn compress_report(&self) -> PathBuf {
        self.root.join("compress.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }
    pub fn summary_table(&self) -> PathBuf {
        self.root.join("summary.md")
    }
}

fn profile_name(p: Profile) -> &'static str {
    match p {
        Profile::Hq => "hq",
        Profile::Hr => "hr",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Indices `k-1, 2k-1, ...` go to the test set, so `n` views hold out `n / k`.
    pub fn every(n: usize, k: usize) -> Self {
        let (test, train) = (0..n).partition(|i| i % k == k - 1);
        Self { train, test }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub stage: Stage,
    pub artifacts: Vec<Artifact>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").at(path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path).at(path)?)?)
}

/// Hashes the files and logs one line each.
fn report(stage: Stage, paths: &[PathBuf]) -> Result<StageReport> {
    let mut artifacts = Vec::new();
    for p in paths {
        let sha256 = sha256_hex(&std::fs::read(p).at(p)?);
        info!("{stage}: {} sha256 {sha256}", p.display());
        artifacts.push(Artifact { path: p.clone(), sha256 });
    }
    Ok(StageReport { stage, artifacts })
}

fn require(path: &Path, produced_by: Stage) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Validation(format!("{} does not exist; run {produced_by} first", path.display())))
    }
}

fn load_inputs(m: &RunManifest, stage: Stage) -> Result<(VolumeGrid, Preset), PipelineError> {
    m.validate()?;
    let v = VolumeGrid::load_with_sidecar(&m.volume.path, m.volume.meta.as_deref()).stage(stage)?;
    let preset = Preset::load(&m.preset).stage(stage)?;
    Ok((v, preset))
}

fn create_dir(dir: &Path, stage: Stage) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).at(dir).stage(stage)
}

pub fn run_select_views(m: &RunManifest) -> Result<StageReport, PipelineError> {
    let stage = Stage::SelectViews;
    let (v, preset) = load_inputs(m, stage)?;
    let layout = Layout::new(&m.output);
    create_dir(&layout.root, stage)?;
    let sel = select_views(&v, &preset, &m.views).stage(stage)?;
    info!("{stage}: {} cameras, {} occupied voxels", sel.cameras.len(), sel.report.occupied_voxels);
    save_cameras(&layout.cameras(), &sel.cameras).stage(stage)?;
    write_json(&layout.coverage(), &sel.report).stage(stage)?;
    report(stage, &[layout.cameras(), layout.coverage()]).stage(stage)
}

pub fn run_render(m: &RunManifest) -> Result<StageReport, PipelineError> {
    let stage = Stage::Render;
    let (v, preset) = load_inputs(m, stage)?;
    let layout = Layout::new(&m.output);
    require(&layout.cameras(), Stage::SelectViews)?;
    let cameras = load_cameras(&layout.cameras()).stage(stage)?;
    create_dir(&layout.images(), stage)?;
    let cfg = &m.render;
    let exposure = cfg.path_trace.exposure.unwrap_or(preset.exposure);
    let occ = OccupancyGrid::build(&v, &preset, m.views.block_size);
    let env = match &preset.lighting {
        Lighting::EnvironmentMap { path, intensity } if cfg.ground_truth == GroundTruth::PathTrace => {
            Some(EnvironmentMap::load(path, *intensity).stage(stage)?)
        }
        _ => None,
    };
    let mut paths = Vec::new();
    for (i, cam) in cameras.iter().enumerate() {
        let img = match cfg.ground_truth {
            GroundTruth::RayMarch => emission_absorption_render(&v, &preset, cam, cfg.step_scale),
            GroundTruth::PathTrace => path_trace(&v, &preset, &occ, env.as_ref(), cam, &cfg.path_trace),
        }
        .stage(stage)?;
        let p = layout.image(i);
        img.save_float(&p, &FloatImageMeta::display(exposure)).stage(stage)?;
        paths.push(p);
    }
    let split = Split::every(cameras.len(), cfg.test_every);
    info!("{stage}: {} train, {} test images", split.train.len(), split.test.len());
    write_json(&layout.split(), &split).stage(stage)?;
    paths.push(layout.split());
    report(stage, &paths).stage(stage)
}

fn load_views(layout: &Layout, indices: &[usize], cameras: &[Camera]) -> Result<Vec<TrainView>> {
    indices
        .iter()
        .map(|&i| {
            let camera = cameras.get(i).ok_or_else(|| Error::Format(format!("split names camera {i}")))?.clone();
            let (image, _) = RgbaImage::load_float(&layout.image(i))?;
            Ok(TrainView { camera, image })
        })
        .collect()
}

/// Train and test views named by the split file.
fn load_split_views(layout: &Layout, stage: Stage) -> Result<(Vec<TrainView>, Vec<TrainView>), PipelineError> {
    require(&layout.cameras(), Stage::SelectViews)?;
    require(&layout.split(), Stage::Render)?;
    let cameras = load_cameras(&layout.cameras()).stage(stage)?;
    let split: Split = read_json(&layout.split()).stage(stage)?;
    let train = load_views(layout, &split.train, &cameras).stage(stage)?;
    let test = load_views(layout, &split.test, &cameras).stage(stage)?;
    Ok((train, test))
}

pub fn run_train(m: &RunManifest) -> Result<StageReport, PipelineError> {
    let stage = Stage::Train;
    let (v, preset) = load_inputs(m, stage)?;
    let layout = Layout::new(&m.output);
    let (train_views, test_views) = load_split_views(&layout, stage)?;
    let init = initialize(&m.init, &v, &preset, m.seed).stage(stage)?;
    info!("{stage}: {} initial gaussians, {} iterations", init.len(), m.train.iterations);
    let hooks = TrainHooks { checkpoint_dir: Some(layout.checkpoints()) };
    let result = train(&train_views, &test_views, init, &m.train, &hooks).stage(stage)?;
    save_scene(&layout.scene(), &result.scene).stage(stage)?;
    write_history_csv(&layout.history(), &result.history).stage(stage)?;
    save_checkpoint(&layout.checkpoints(), "final", &result.scene, &result.optimizer, m.train.iterations).stage(stage)?;
    let (ckpt_scene, ckpt_state) = checkpoint_paths(&layout.checkpoints(), "final");
    report(stage, &[layout.scene(), layout.history(), ckpt_scene, ckpt_state]).stage(stage)
}

/// Encoder-side record of one container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedContainer {
    pub profile: Profile,
    pub path: PathBuf,
    pub bytes: u64,
    pub gaussians: usize,
    pub codebook_size: Option<usize>,
    pub qat_iterations: usize,
}

fn scene_options(scene: &SplatScene) -> RenderOptions {
    RenderOptions::new(scene.mip.is_some())
}

pub fn run_compress(m: &RunManifest) -> Result<StageReport, PipelineError> {
    let stage = Stage::Compress;
    m.validate()?;
    let layout = Layout::new(&m.output);
    require(&layout.scene(), Stage::Train)?;
    let (train_views, _) = load_split_views(&layout, stage)?;
    let scene = load_scene(&layout.scene()).stage(stage)?;
    let opts = scene_options(&scene);
    let qat = &m.compress.qat;
    let table = compute_sensitivity(&scene, &train_views, &qat.loss, &opts).stage(stage)?;
    let mut records = Vec::new();
    let mut paths = Vec::new();
    for &profile in &m.compress.profiles {
        let tuned = quantization_aware_finetune(&scene, profile, &train_views, &table, &opts, qat).stage(stage)?;
        let bytes = encode(&tuned, profile, &table, qat.codebook_size, m.seed).stage(stage)?;
        let path = layout.container(profile);
        std::fs::write(&path, &bytes).at(&path).stage(stage)?;
        info!("{stage}: {} {} bytes", profile_name(profile), bytes.len());
        records.push(EncodedContainer {
            profile,
            path: path.file_name().map(PathBuf::from).unwrap_or_default(),
            bytes: bytes.len() as u64,
            gaussians: tuned.len(),
            codebook_size: (profile == Profile::Hr).then_some(qat.codebook_size),
            qat_iterations: qat.iterations,
        });
        paths.push(path);
    }
    write_json(&layout.compress_report(), &records).stage(stage)?;
    paths.push(layout.compress_report());
    report(stage, &paths).stage(stage)
}

/// Mean metrics and size of one scene representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSummary {
    /// `raw`, `hq` or `hr`.
    pub name: String,
    pub bytes: u64,
    /// Raw scene size over this artifact's size.
    pub ratio: f64,
    pub mean: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gaussians: usize,
    pub test_views: usize,
    pub artifacts: Vec<ArtifactSummary>,
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.2}"))
}

impl RunSummary {
    pub fn table(&self) -> String {
        let mut s = String::from("| scene | bytes | ratio | PSNR masked (dB) | PSNR alpha (dB) | SSIM |\n|---|---:|---:|---:|---:|---:|\n");
        for a in &self.artifacts {
            s.push_str(&format!(
                "| {} | {} | {:.1} | {} | {:.2} | {} |\n",
                a.name,
                a.bytes,
                a.ratio,
                fmt_db(a.mean.psnr_masked),
                a.mean.psnr_alpha,
                a.mean.ssim.map_or("-".into(), |x| format!("{x:.4}"))
            ));
        }
        s
    }
}

pub fn run_evaluate(m: &RunManifest) -> Result<StageReport, PipelineError> {
    let stage = Stage::Evaluate;
    m.validate()?;
    let layout = Layout::new(&m.output);
    require(&layout.scene(), Stage::Train)?;
    let (_, test_views) = load_split_views(&layout, stage)?;
    let split: Split = read_json(&layout.split()).stage(stage)?;
    let raw = load_scene(&layout.scene()).stage(stage)?;
    let size = |p: &Path| std::fs::metadata(p).at(p).map(|md| md.len());
    let raw_bytes = size(&layout.scene()).stage(stage)?;
    let mut scenes = vec![("raw".to_string(), raw_bytes, raw.clone())];
    for &profile in &m.compress.profiles {
        let p = layout.container(profile);
        require(&p, Stage::Compress)?;
        let bytes = std::fs::read(&p).at(&p).stage(stage)?;
        scenes.push((profile_name(profile).to_string(), bytes.len() as u64, decode(&bytes).stage(stage)?));
    }
    let mut csv = String::from("scene,view,psnr_masked,psnr_alpha,ssim,mask_pixels\n");
    let mut artifacts = Vec::new();
    for (name, bytes, scene) in &scenes {
        let opts = scene_options(scene);
        let mut reports = Vec::new();
        for (view, &index) in test_views.iter().zip(&split.test) {
            let r = evaluate(&rasterize(scene, &view.camera, &opts), &view.image).stage(stage)?;
            csv.push_str(&format!(
                "{name},{index},{},{:.6},{},{}\n",
                r.psnr_masked.map_or(String::new(), |x| format!("{x:.6}")),
                r.psnr_alpha,
                r.ssim.map_or(String::new(), |x| format!("{x:.6}")),
                r.mask_pixel_count
            ));
            reports.push(r);
        }
        let mean = mean_report(&reports);
        info!("{stage}: {name} {bytes} bytes, psnr {} dB", fmt_db(mean.psnr_masked));
        artifacts.push(ArtifactSummary { name: name.clone(), bytes: *bytes, ratio: raw_bytes as f64 / *bytes as f64, mean });
    }
    let summary = RunSummary { gaussians: raw.len(), test_views: test_views.len(), artifacts };
    std::fs::write(layout.metrics(), csv).at(layout.metrics()).stage(stage)?;
    write_json(&layout.summary(), &summary).stage(stage)?;
    std::fs::write(layout.summary_table(), summary.table()).at(layout.summary_table()).stage(stage)?;
    report(stage, &[layout.metrics(), layout.summary(), layout.summary_table()]).stage(stage)
}

/// Every stage in order.
pub fn run_all(m: &RunManifest) -> Result<Vec<StageReport>, PipelineError> {
    Ok(vec![run_select_views(m)?, run_render(m)?, run_train(m)?, run_compress(m)?, run_evaluate(m)?])
}

/// Container to uncompressed scene file.
pub fn decompress(input: &Path, output: &Path) -> Result<StageReport, PipelineError> {
    let stage = Stage::Decompress;
    if !input.is_file() {
        return Err(PipelineError::Validation(format!("container {} does not exist", input.display())));
    }
    let bytes = std::fs::read(input).at(input).stage(stage)?;
    let scene = decode(&bytes).stage(stage)?;
    save_scene(output, &scene).stage(stage)?;
    report(stage, &[output.to_path_buf()]).stage(stage)
}

/// Writes a built-in phantom as `<dir>/<name>.raw` (+ `.meta`) and `<dir>/<name>.toml`.
pub fn write_phantom(name: &str, size: usize, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let (v, preset) = match name {
        "sphere" => phantom::sphere(size),
        "hollow-shell" => phantom::hollow_shell(size),
        "nested-spheres" => phantom::nested_spheres(size),
        _ => return Err(Error::InvalidArgument(format!("unknown phantom {name:?}"))),
    };
    std::fs::create_dir_all(dir).at(dir)?;
    let (raw, toml) = (dir.join(format!("{name}.raw")), dir.join(format!("{name}.toml")));
    v.save(&raw, ElementType::F32)?;
    std::fs::write(&toml, preset.to_toml_string()).at(&toml)?;
    Ok((raw, toml))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_eighth_view_is_held_out() {
        let s = Split::every(99, 8);
        assert_eq!((s.train.len(), s.test.len()), (87, 12));
        assert_eq!(s.test[..3], [7, 15, 23]);
    }
}
