//! Checkpoints: the scene file plus a binary optimizer sidecar.
//!
//! Sidecar layout (little-endian): magic `GSTS`, u64 iteration, u64 Adam step,
//! u64 Gaussian count, then first and second moments as f64 in the flat
//! parameter layout.

use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};
use crate::splat::{load_scene, save_scene, SplatScene, PARAM_COUNT};

use super::adam::Adam;

pub fn checkpoint_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.gspl")), dir.join(format!("{name}.state")))
}

pub fn save_checkpoint(dir: &Path, name: &str, scene: &SplatScene, adam: &Adam, iteration: usize) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let (scene_path, state_path) = checkpoint_paths(dir, name);
    save_scene(&scene_path, scene)?;
    let mut out = Vec::with_capacity(28 + adam.m.len() * PARAM_COUNT * 16);
    out.extend_from_slice(b"GSTS");
    for v in [iteration as u64, adam.step, adam.m.len() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for moments in [&adam.m, &adam.v] {
        for row in moments.iter() {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    std::fs::write(&state_path, out).at(&state_path)
}

pub fn load_checkpoint(dir: &Path, name: &str) -> Result<(SplatScene, Adam, usize)> {
    let (scene_path, state_path) = checkpoint_paths(dir, name);
    let scene = load_scene(&scene_path)?;
    let bytes = std::fs::read(&state_path).at(&state_path)?;
    let bad = || Error::Format(format!("malformed training state {}", state_path.display()));
    if bytes.len() < 28 || &bytes[..4] != b"GSTS" {
        return Err(bad());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes"));
    let (iteration, step, n) = (word(0) as usize, word(1), word(2) as usize);
    if n != scene.len() || bytes.len() != 28 + n * PARAM_COUNT * 16 {
        return Err(bad());
    }
    let mut vals = bytes[28..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut adam = Adam::new(n);
    adam.step = step;
    for moments in [&mut adam.m, &mut adam.v] {
        for row in moments.iter_mut() {
            for v in row.iter_mut() {
                *v = vals.next().ok_or_else(bad)?;
            }
        }
    }
    Ok((scene, adam, iteration))
}
