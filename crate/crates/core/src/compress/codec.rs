use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Aabb;
use crate::splat::{sh::coeff_count, Gaussian3D, MipSmoothing, SplatScene, PARAM_COUNT};

use super::container::{read_container, write_container, Chunk, Header, ProfileId, FLAG_MIP};
use super::morton::{morton_order, normalize};
use super::quant::{round_f16, AffineRange};
use super::sensitivity::SensitivityTable;
use super::vq::{vq_fit, Codebook};

// 4096 suits millions of Gaussians; desk-scale scenes hold ~1e4, where 256 keeps HR under 1/25.
pub const DEFAULT_CODEBOOK_SIZE: usize = 256;

const POSITIONS: [u8; 4] = *b"POSN";
const RANGES: [u8; 4] = *b"QRNG";
const ATTRIBUTES: [u8; 4] = *b"ATTR";
const OPACITY: [u8; 4] = *b"OPAC";
const SH_BOOK: [u8; 4] = *b"SHCB";
const SH_INDEX: [u8; 4] = *b"SHIX";
const COV_BOOK: [u8; 4] = *b"CVCB";
const COV_INDEX: [u8; 4] = *b"CVIX";

/// Parameter slots of the covariance group: rotation (w x y z) then log-scale.
const COV: std::ops::Range<usize> = 3..10;
const OPACITY_SLOT: usize = 10;
const SH_START: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// fp16 positions, every other parameter 8-bit.
    Hq,
    /// fp16 positions, codebooks for SH and covariance, 8-bit opacity.
    Hr,
}

impl Profile {
    fn id(self) -> ProfileId {
        match self {
            Profile::Hq => ProfileId::Hq,
            Profile::Hr => ProfileId::Hr,
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hq" => Ok(Profile::Hq),
            "hr" => Ok(Profile::Hr),
            _ => Err(Error::InvalidArgument(format!("unknown profile {s:?} (expected hq or hr)"))),
        }
    }
}

/// Sign convention that makes a quaternion and its negation encode alike.
fn canonical(mut p: [f64; PARAM_COUNT]) -> [f64; PARAM_COUNT] {
    if p[3] < 0.0 {
        for v in &mut p[3..7] {
            *v = -*v;
        }
    }
    p
}

fn sh_len(degree: usize) -> usize {
    3 * coeff_count(degree)
}

/// u16 words as a low-byte plane followed by a high-byte plane.
fn byte_planes(words: &[u16]) -> Vec<u8> {
    words.iter().map(|w| *w as u8).chain(words.iter().map(|w| (*w >> 8) as u8)).collect()
}

fn from_byte_planes(bytes: &[u8]) -> Vec<u16> {
    let n = bytes.len() / 2;
    (0..n).map(|i| bytes[i] as u16 | (bytes[n + i] as u16) << 8).collect()
}

fn encode_positions(gs: &[Gaussian3D], bbox: &Aabb) -> Vec<u8> {
    let mut words = Vec::with_capacity(3 * gs.len());
    for a in 0..3 {
        let mut prev = 0u16;
        for g in gs {
            let bits = f16::from_f64(normalize(&g.position, bbox)[a]).to_bits();
            words.push(bits.wrapping_sub(prev));
            prev = bits;
        }
    }
    byte_planes(&words)
}

fn decode_positions(data: &[u8], n: usize, bbox: &Aabb) -> Result<Vec<[f64; 3]>> {
    if data.len() != 6 * n {
        return Err(Error::CorruptContainer("position stream has the wrong length".into()));
    }
    let words = from_byte_planes(data);
    let mut out = vec![[0.0; 3]; n];
    for a in 0..3 {
        let mut prev = 0u16;
        for (i, p) in out.iter_mut().enumerate() {
            prev = prev.wrapping_add(words[a * n + i]);
            let u = f16::from_bits(prev).to_f64();
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::CorruptContainer("normalized position outside [0,1]".into()));
            }
            p[a] = (bbox.min[a] + u * (bbox.max[a] - bbox.min[a])).clamp(bbox.min[a], bbox.max[a]);
        }
    }
    Ok(out)
}

fn encode_ranges(ranges: &[AffineRange]) -> Vec<u8> {
    ranges.iter().flat_map(|r| r.min.to_le_bytes().into_iter().chain(r.max.to_le_bytes())).collect()
}

fn decode_ranges(data: &[u8], channels: usize) -> Result<Vec<AffineRange>> {
    if data.len() != 8 * channels {
        return Err(Error::CorruptContainer("quantization ranges have the wrong length".into()));
    }
    let ranges: Vec<AffineRange> = data
        .chunks_exact(8)
        .map(|c| AffineRange { min: f32::from_le_bytes(c[..4].try_into().expect("4")), max: f32::from_le_bytes(c[4..].try_into().expect("4")) })
        .collect();
    if ranges.iter().any(|r| !r.min.is_finite() || !r.max.is_finite() || r.max < r.min) {
        return Err(Error::CorruptContainer("invalid quantization range".into()));
    }
    Ok(ranges)
}

/// Quantize the columns `cols` of every record channel-major.
fn quantize_columns(params: &[[f64; PARAM_COUNT]], cols: &[usize]) -> (Vec<AffineRange>, Vec<u8>) {
    let mut ranges = Vec::with_capacity(cols.len());
    let mut bytes = Vec::with_capacity(cols.len() * params.len());
    for &c in cols {
        let r = AffineRange::fit(params.iter().map(|p| p[c]));
        bytes.extend(params.iter().map(|p| r.quantize(p[c])));
        ranges.push(r);
    }
    (ranges, bytes)
}

/// Round to fp16, merge duplicates and order entries by first use.
fn canonical_codebook(book: &Codebook, assign: &[u32]) -> (Vec<u16>, Vec<u32>) {
    let dim = book.dim;
    let rounded: Vec<Vec<u16>> = (0..book.len()).map(|i| book.entry(i).iter().map(|v| f16::from_f64(*v).to_bits()).collect()).collect();
    let mut ids: std::collections::HashMap<&[u16], u32> = std::collections::HashMap::new();
    let mut entries: Vec<u16> = Vec::new();
    let mut out = Vec::with_capacity(assign.len());
    for &a in assign {
        let key = rounded[a as usize].as_slice();
        let next = ids.len() as u32;
        let id = *ids.entry(key).or_insert_with(|| {
            entries.extend_from_slice(key);
            next
        });
        out.push(id);
    }
    debug_assert_eq!(entries.len() % dim, 0);
    (entries, out)
}

/// Codebook stored dimension-major (all first components, then all second, ...).
fn encode_codebook(entries: &[u16], dim: usize) -> Vec<u8> {
    let k = entries.len() / dim;
    let planar: Vec<u16> = (0..dim).flat_map(|d| (0..k).map(move |e| entries[e * dim + d])).collect();
    byte_planes(&planar)
}

/// Empty exactly when the scene is.
fn decode_codebook(data: &[u8], dim: usize, n: usize) -> Result<Vec<f64>> {
    if data.is_empty() != (n == 0) || data.len() % (2 * dim) != 0 {
        return Err(Error::CorruptContainer("codebook has the wrong length".into()));
    }
    let planar = from_byte_planes(data);
    let k = planar.len() / dim;
    if k > super::vq::MAX_CODEBOOK {
        return Err(Error::CorruptContainer(format!("codebook with {k} entries")));
    }
    let mut out = vec![0.0; k * dim];
    for d in 0..dim {
        for e in 0..k {
            let v = f16::from_bits(planar[d * k + e]).to_f64();
            if !v.is_finite() {
                return Err(Error::CorruptContainer("non-finite codebook entry".into()));
            }
            out[e * dim + d] = v;
        }
    }
    Ok(out)
}

fn encode_indices(idx: &[u32], book_len: usize) -> Vec<u8> {
    if book_len <= 256 {
        idx.iter().map(|&i| i as u8).collect()
    } else {
        byte_planes(&idx.iter().map(|&i| i as u16).collect::<Vec<_>>())
    }
}

fn decode_indices(data: &[u8], n: usize, book_len: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = if book_len <= 256 {
        if data.len() != n {
            return Err(Error::CorruptContainer("index stream has the wrong length".into()));
        }
        data.iter().map(|&i| i as usize).collect()
    } else {
        if data.len() != 2 * n {
            return Err(Error::CorruptContainer("index stream has the wrong length".into()));
        }
        from_byte_planes(data).into_iter().map(|i| i as usize).collect()
    };
    if idx.iter().any(|&i| i >= book_len) {
        return Err(Error::CorruptContainer("codebook index out of range".into()));
    }
    Ok(idx)
}

/// Scene ordered along the Morton curve, with the box used for normalization.
fn prepare(scene: &SplatScene) -> Result<(Vec<Gaussian3D>, Vec<usize>, Aabb)> {
    if scene.gaussians.iter().any(|g| !g.is_finite()) {
        return Err(Error::DegenerateScene("scene has non-finite parameters".into()));
    }
    if scene.mip.as_ref().is_some_and(|m| !m.applied) {
        return Err(Error::InvalidArgument("fold the 3D smoothing filter into the scene before compressing".into()));
    }
    let bounds = scene.position_bounds();
    let bbox = match (scene.bbox.is_empty(), bounds.is_empty()) {
        (true, true) => Aabb::new([0.0; 3], [0.0; 3]),
        (true, false) => bounds,
        _ => scene.bbox.union(&bounds),
    };
    // order by the stored fp16 coordinates so that decoding and re-encoding keeps the order
    let stored: Vec<[f64; 3]> = scene.gaussians.iter().map(|g| normalize(&g.position, &bbox).map(round_f16)).collect();
    let order = morton_order(&stored, &Aabb::new([0.0; 3], [1.0; 3]));
    Ok((order.iter().map(|&i| scene.gaussians[i]).collect(), order, bbox))
}

/// Compress a scene. `codebook_size` only matters for HR and is capped at the Gaussian count.
pub fn encode(scene: &SplatScene, profile: Profile, sensitivity: &SensitivityTable, codebook_size: usize, seed: u64) -> Result<Vec<u8>> {
    if sensitivity.sh.len() != scene.len() || sensitivity.covariance.len() != scene.len() {
        return Err(Error::DimensionMismatch("sensitivity table does not match the scene".into()));
    }
    let (gs, order, bbox) = prepare(scene)?;
    let n = gs.len();
    let deg = scene.sh_degree;
    let shn = sh_len(deg);
    let params: Vec<[f64; PARAM_COUNT]> = gs.iter().map(|g| canonical(g.to_params())).collect();
    let mip = scene.mip.as_ref();
    let header = Header {
        profile: profile.id(),
        sh_degree: deg as u8,
        count: n as u32,
        flags: if mip.is_some() { FLAG_MIP } else { 0 },
        smoothing_strength: mip.map_or(0.0, |m| m.strength as f32),
        bbox,
    };
    let mut chunks = vec![Chunk { id: POSITIONS, data: encode_positions(&gs, &bbox) }];
    match profile {
        Profile::Hq => {
            let cols: Vec<usize> = (3..SH_START + shn).collect();
            let (ranges, bytes) = quantize_columns(&params, &cols);
            chunks.push(Chunk { id: RANGES, data: encode_ranges(&ranges) });
            chunks.push(Chunk { id: ATTRIBUTES, data: bytes });
        }
        Profile::Hr => {
            if codebook_size == 0 {
                return Err(Error::InvalidArgument("codebook size must be positive".into()));
            }
            let k = codebook_size.min(n);
            let sens = sensitivity.permuted(&order);
            let (ranges, bytes) = quantize_columns(&params, &[OPACITY_SLOT]);
            chunks.push(Chunk { id: RANGES, data: encode_ranges(&ranges) });
            chunks.push(Chunk { id: OPACITY, data: bytes });
            let groups = [(SH_BOOK, SH_INDEX, SH_START..SH_START + shn, &sens.sh, seed), (COV_BOOK, COV_INDEX, COV, &sens.covariance, seed.wrapping_add(1))];
            for (book_id, index_id, range, weights, seed) in groups {
                let dim = range.len();
                if n == 0 {
                    chunks.push(Chunk { id: book_id, data: Vec::new() });
                    chunks.push(Chunk { id: index_id, data: Vec::new() });
                    continue;
                }
                let data: Vec<f64> = params.iter().flat_map(|p| p[range.clone()].to_vec()).collect();
                let (book, assign) = vq_fit(&data, dim, weights, k, seed)?;
                let (entries, idx) = canonical_codebook(&book, &assign);
                let len = entries.len() / dim;
                chunks.push(Chunk { id: book_id, data: encode_codebook(&entries, dim) });
                chunks.push(Chunk { id: index_id, data: encode_indices(&idx, len) });
            }
        }
    }
    Ok(write_container(&header, &chunks))
}

fn expect_chunks(chunks: &[Chunk], ids: &[[u8; 4]]) -> Result<()> {
    let got: Vec<[u8; 4]> = chunks.iter().map(|c| c.id).collect();
    if got != ids {
        let show = |v: &[[u8; 4]]| v.iter().map(|i| String::from_utf8_lossy(i).into_owned()).collect::<Vec<_>>().join(",");
        return Err(Error::CorruptContainer(format!("chunks [{}], expected [{}]", show(&got), show(ids))));
    }
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<SplatScene> {
    let (h, chunks) = read_container(bytes)?;
    let n = h.count as usize;
    let deg = h.sh_degree as usize;
    if deg > crate::splat::sh::MAX_SH_DEGREE {
        return Err(Error::CorruptContainer(format!("SH degree {deg}")));
    }
    if h.bbox.min.iter().chain(&h.bbox.max).any(|v| !v.is_finite()) || (0..3).any(|a| h.bbox.max[a] < h.bbox.min[a]) {
        return Err(Error::CorruptContainer("invalid bounding box".into()));
    }
    if h.flags & !FLAG_MIP != 0 || !h.smoothing_strength.is_finite() {
        return Err(Error::CorruptContainer("unknown header flags".into()));
    }
    let shn = sh_len(deg);
    match h.profile {
        ProfileId::Hq => expect_chunks(&chunks, &[POSITIONS, RANGES, ATTRIBUTES])?,
        ProfileId::Hr => expect_chunks(&chunks, &[POSITIONS, RANGES, OPACITY, SH_BOOK, SH_INDEX, COV_BOOK, COV_INDEX])?,
    }
    let positions = decode_positions(&chunks[0].data, n, &h.bbox)?;
    let mut params = vec![[0.0; PARAM_COUNT]; n];
    match h.profile {
        ProfileId::Hq => {
            let cols: Vec<usize> = (3..SH_START + shn).collect();
            let ranges = decode_ranges(&chunks[1].data, cols.len())?;
            let attr = &chunks[2].data;
            if attr.len() != cols.len() * n {
                return Err(Error::CorruptContainer("attribute stream has the wrong length".into()));
            }
            for (c, (&col, r)) in cols.iter().zip(&ranges).enumerate() {
                for (i, p) in params.iter_mut().enumerate() {
                    p[col] = r.dequantize(attr[c * n + i]);
                }
            }
        }
        ProfileId::Hr => {
            let ranges = decode_ranges(&chunks[1].data, 1)?;
            if chunks[2].data.len() != n {
                return Err(Error::CorruptContainer("opacity stream has the wrong length".into()));
            }
            for (p, &q) in params.iter_mut().zip(&chunks[2].data) {
                p[OPACITY_SLOT] = ranges[0].dequantize(q);
            }
            for (b, range) in [(3, SH_START..SH_START + shn), (5, COV)] {
                let dim = range.len();
                let book = decode_codebook(&chunks[b].data, dim, n)?;
                let idx = decode_indices(&chunks[b + 1].data, n, book.len() / dim)?;
                for (p, &i) in params.iter_mut().zip(&idx) {
                    p[range.clone()].copy_from_slice(&book[i * dim..(i + 1) * dim]);
                }
            }
        }
    }
    let gaussians = params
        .iter()
        .zip(&positions)
        .map(|(p, pos)| {
            let mut g = Gaussian3D::from_params(p);
            g.position = *pos;
            g
        })
        .collect();
    let mut scene = SplatScene::new(gaussians, deg, h.bbox);
    if h.flags & FLAG_MIP != 0 {
        scene.mip = Some(MipSmoothing { nu: Vec::new(), strength: h.smoothing_strength as f64, applied: true });
    }
    Ok(scene)
}
