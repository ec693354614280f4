//! Uncompressed scene file.
//!
//! Little-endian. Header: magic `GSPL`, u32 version, u32 count, u32 SH degree,
//! u32 flags (bit 0: 3D smoothing folded in), f32 smoothing strength, 6 × f32
//! bbox (min xyz, max xyz). Then `count` records of f32: position (3), rotation
//! w x y z (4), log-scale (3), opacity logit (1), SH coefficients
//! ((degree+1)² rgb triples, coefficient-major).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::math::Aabb;

use super::gaussian::{Gaussian3D, MipSmoothing, SplatScene};
use super::sh;

const MAGIC: &[u8; 4] = b"GSPL";
const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 4 + 4 * 4 + 4 + 24;

pub fn record_floats(sh_degree: usize) -> usize {
    11 + 3 * sh::coeff_count(sh_degree)
}

pub fn scene_to_bytes(scene: &SplatScene) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + scene.len() * 4 * record_floats(scene.sh_degree));
    out.extend_from_slice(MAGIC);
    let applied = scene.mip.as_ref().is_some_and(|m| m.applied);
    let strength = scene.mip.as_ref().map_or(0.0, |m| m.strength);
    for v in [VERSION, scene.len() as u32, scene.sh_degree as u32, applied as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(strength as f32).to_le_bytes());
    for v in scene.bbox.min.iter().chain(&scene.bbox.max) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let k = sh::coeff_count(scene.sh_degree);
    for g in &scene.gaussians {
        let p = g.to_params();
        for v in &p[..11 + 3 * k] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn scene_from_bytes(bytes: &[u8]) -> Result<SplatScene> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a scene file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Unsupported(format!("scene file version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let degree = read_u32(&mut r)? as usize;
    if degree > sh::MAX_SH_DEGREE {
        return Err(Error::Format(format!("SH degree {degree}")));
    }
    let flags = read_u32(&mut r)?;
    let strength = read_f32(&mut r)? as f64;
    let mut b = [0.0; 6];
    for v in b.iter_mut() {
        *v = read_f32(&mut r)? as f64;
    }
    let n = record_floats(degree);
    if r.len() != count * n * 4 {
        return Err(Error::Format(format!("expected {} record bytes, found {}", count * n * 4, r.len())));
    }
    let mut gaussians = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = [0.0; super::gaussian::PARAM_COUNT];
        for v in p.iter_mut().take(n) {
            *v = read_f32(&mut r)? as f64;
        }
        gaussians.push(Gaussian3D::from_params(&p));
    }
    let mut scene = SplatScene::new(gaussians, degree, Aabb::new([b[0], b[1], b[2]], [b[3], b[4], b[5]]));
    if flags & 1 != 0 {
        scene.mip = Some(MipSmoothing { nu: Vec::new(), strength, applied: true });
    }
    Ok(scene)
}

pub fn save_scene(path: &Path, scene: &SplatScene) -> Result<()> {
    let mut f = std::fs::File::create(path).at(path)?;
    f.write_all(&scene_to_bytes(scene)).at(path)
}

pub fn load_scene(path: &Path) -> Result<SplatScene> {
    let bytes = std::fs::read(path).at(path)?;
    scene_from_bytes(&bytes)
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Format("truncated scene file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut &[u8]) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let mut g = Gaussian3D::isotropic([0.1, -0.2, 0.3], 0.05, 0.7, [0.2, 0.5, 0.9]);
        g.sh[3] = [0.1, 0.2, 0.3];
        g.sh[9] = [0.4, 0.5, 0.6];
        let scene = SplatScene::new(vec![g; 3], 1, Aabb::new([-1.0; 3], [1.0; 3]));
        let bytes = scene_to_bytes(&scene);
        assert_eq!(bytes.len(), HEADER_BYTES + 3 * 4 * record_floats(1));
        let back = scene_from_bytes(&bytes).unwrap();
        assert_eq!(back.len(), 3);
        let (a, b) = (scene.gaussians[0].to_params(), back.gaussians[0].to_params());
        for i in 0..11 + 12 {
            assert!((a[i] - b[i]).abs() <= 1e-7 * a[i].abs().max(1.0));
        }
        // coefficients above the stored degree are dropped
        assert_eq!(back.gaussians[0].sh[9], [0.0; 3]);
        assert_eq!(scene_to_bytes(&back), bytes);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let scene = SplatScene::new(vec![Gaussian3D::isotropic([0.0; 3], 0.1, 0.5, [0.5; 3])], 0, Aabb::new([-1.0; 3], [1.0; 3]));
        let bytes = scene_to_bytes(&scene);
        assert!(scene_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(scene_from_bytes(&bad).is_err());
    }
}
