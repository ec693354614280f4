//! Reference vectors for independent container decoders.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, IoContext, Result};
use crate::math::{vec3, Aabb};
use crate::splat::{rasterize, sh::coeff_count, Gaussian3D, MipSmoothing, RenderOptions, SplatScene, MIP_SMOOTHING_STRENGTH};

use super::codec::{encode, Profile};
use super::sensitivity::SensitivityTable;

pub const VECTOR_RESOLUTION: usize = 64;
const CODEBOOK_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub name: String,
    pub profile: Profile,
    pub sh_degree: usize,
    pub count: usize,
    pub mip: bool,
    pub camera: Camera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorManifest {
    pub vectors: Vec<VectorEntry>,
}

struct Case {
    name: &'static str,
    profile: Profile,
    sh_degree: usize,
    count: usize,
    mip: bool,
    codebook_size: usize,
    seed: u64,
}

const CASES: [Case; 7] = [
    Case { name: "hq_deg3_mip", profile: Profile::Hq, sh_degree: 3, count: 300, mip: true, codebook_size: 0, seed: 1 },
    Case { name: "hq_deg0", profile: Profile::Hq, sh_degree: 0, count: 200, mip: false, codebook_size: 0, seed: 2 },
    Case { name: "hq_single", profile: Profile::Hq, sh_degree: 2, count: 1, mip: false, codebook_size: 0, seed: 3 },
    Case { name: "hr_deg3_mip", profile: Profile::Hr, sh_degree: 3, count: 400, mip: true, codebook_size: 64, seed: 4 },
    Case { name: "hr_deg1_u16", profile: Profile::Hr, sh_degree: 1, count: 700, mip: false, codebook_size: 300, seed: 5 },
    Case { name: "hq_empty", profile: Profile::Hq, sh_degree: 3, count: 0, mip: false, codebook_size: 0, seed: 6 },
    Case { name: "hr_empty", profile: Profile::Hr, sh_degree: 3, count: 0, mip: true, codebook_size: 64, seed: 7 },
];

fn random_scene(case: &Case) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let k = coeff_count(case.sh_degree);
    let gaussians: Vec<Gaussian3D> = (0..case.count)
        .map(|_| {
            let position = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let rgb = [0; 3].map(|_| rng.gen_range(0.1..0.9));
            let mut g = Gaussian3D::isotropic(position, 0.05, rng.gen_range(0.1..0.95), rgb);
            let q: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
            g.rotation = q;
            g.log_scale = [0; 3].map(|_| rng.gen_range(-3.5..-1.5));
            for c in g.sh.iter_mut().take(k).skip(1) {
                *c = [0; 3].map(|_| 0.15 * rng.sample::<f64, _>(StandardNormal));
            }
            g
        })
        .collect();
    let mut scene = SplatScene::new(gaussians, case.sh_degree, Aabb::new([-1.0; 3], [1.0; 3]));
    if case.count == 1 {
        // a flat box on every axis
        scene.bbox = scene.position_bounds();
    }
    if case.mip {
        scene.mip = Some(MipSmoothing { nu: Vec::new(), strength: MIP_SMOOTHING_STRENGTH, applied: true });
    }
    scene
}

fn camera() -> Camera {
    Camera::looking_at(vec3([0.6, -3.2, 0.9]), vec3([0.0; 3]), 50f64.to_radians(), VECTOR_RESOLUTION, VECTOR_RESOLUTION)
        .expect("fixed camera is valid")
}

/// Little-endian f64 records of `11 + 3K` values per Gaussian.
pub fn params_bytes(scene: &SplatScene) -> Vec<u8> {
    let width = 11 + 3 * coeff_count(scene.sh_degree);
    scene.gaussians.iter().flat_map(|g| g.to_params()[..width].to_vec()).flat_map(f64::to_le_bytes).collect()
}

pub fn render_bytes(scene: &SplatScene, camera: &Camera) -> Vec<u8> {
    let img = rasterize(scene, camera, &RenderOptions::new(scene.mip.is_some()));
    img.pixels().iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Format("f64 stream length is not a multiple of 8".into()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Encoded containers of the built-in cases, in manifest order.
pub fn conformance_containers() -> Result<Vec<(VectorEntry, Vec<u8>)>> {
    CASES
        .iter()
        .map(|case| {
            let scene = random_scene(case);
            let table = SensitivityTable::uniform(scene.len());
            let bytes = encode(&scene, case.profile, &table, case.codebook_size, CODEBOOK_SEED)?;
            let entry = VectorEntry {
                name: case.name.to_string(),
                profile: case.profile,
                sh_degree: case.sh_degree,
                count: case.count,
                mip: case.mip,
                camera: camera(),
            };
            Ok((entry, bytes))
        })
        .collect()
}

/// Writes `<name>.cgsv`, `<name>.params`, `<name>.rgba` and `manifest.json` into `dir`.
pub fn write_conformance_vectors(dir: &Path) -> Result<VectorManifest> {
    std::fs::create_dir_all(dir).at(dir)?;
    let mut vectors = Vec::new();
    for (entry, bytes) in conformance_containers()? {
        let scene = super::decode(&bytes)?;
        let write = |ext: &str, data: &[u8]| {
            let p = dir.join(format!("{}.{ext}", entry.name));
            std::fs::write(&p, data).at(&p)
        };
        write("cgsv", &bytes)?;
        write("params", &params_bytes(&scene))?;
        write("rgba", &render_bytes(&scene, &entry.camera))?;
        vectors.push(entry);
    }
    let manifest = VectorManifest { vectors };
    let p = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&p, json + "\n").at(&p)?;
    Ok(manifest)
}
