use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::math::Aabb;

pub const MAGIC: &[u8; 4] = b"CGSV";
pub const VERSION: u16 = 1;
/// Fixed part of the header, before the chunk table.
pub const FIXED_HEADER_BYTES: usize = 72;
pub const CHUNK_ENTRY_BYTES: usize = 20;
pub const MAX_CHUNKS: usize = 64;
/// Bound on a single inflated chunk (1 GiB).
pub const MAX_CHUNK_BYTES: usize = 1 << 30;

pub const FLAG_MIP: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileId {
    Hq = 0,
    Hr = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub profile: ProfileId,
    pub sh_degree: u8,
    pub count: u32,
    pub flags: u32,
    pub smoothing_strength: f32,
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: [u8; 4],
    /// Inflated payload.
    pub data: Vec<u8>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptContainer(msg.into())
}

pub fn deflate(data: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

/// Inflate a raw DEFLATE stream that must expand to exactly `raw_len` bytes
/// and consume all of `comp`.
pub fn inflate(comp: &[u8], raw_len: usize) -> Result<Vec<u8>> {
    let mut dec = DeflateDecoder::new(comp);
    let mut out = Vec::with_capacity(raw_len);
    (&mut dec).take(raw_len as u64 + 1).read_to_end(&mut out).map_err(|e| corrupt(format!("bad DEFLATE stream: {e}")))?;
    if out.len() != raw_len {
        return Err(corrupt(format!("chunk inflates to {} bytes, table says {raw_len}", out.len())));
    }
    if dec.total_in() != comp.len() as u64 {
        return Err(corrupt("trailing bytes after DEFLATE stream"));
    }
    Ok(out)
}

pub fn write_container(h: &Header, chunks: &[Chunk]) -> Vec<u8> {
    assert!(chunks.len() <= MAX_CHUNKS, "too many chunks");
    let compressed: Vec<Vec<u8>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| deflate(&c.data)).collect()
    };
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(h.profile as u8);
    out.push(h.sh_degree);
    out.extend_from_slice(&h.count.to_le_bytes());
    out.extend_from_slice(&h.flags.to_le_bytes());
    out.extend_from_slice(&h.smoothing_strength.to_le_bytes());
    for v in h.bbox.min.iter().chain(&h.bbox.max) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(chunks.len() as u32).to_le_bytes());
    debug_assert_eq!(out.len(), FIXED_HEADER_BYTES);
    let mut offset = FIXED_HEADER_BYTES + CHUNK_ENTRY_BYTES * chunks.len() + 4;
    for (c, z) in chunks.iter().zip(&compressed) {
        out.extend_from_slice(&c.id);
        out.extend_from_slice(&(c.data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(z.len() as u32).to_le_bytes());
        out.extend_from_slice(&(offset as u32).to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(z).to_le_bytes());
        offset += z.len();
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    for z in compressed {
        out.extend_from_slice(&z);
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

pub fn read_container(bytes: &[u8]) -> Result<(Header, Vec<Chunk>)> {
    if bytes.len() < FIXED_HEADER_BYTES + 4 {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let n_chunks = u32_at(bytes, 68) as usize;
    if n_chunks > MAX_CHUNKS {
        return Err(corrupt(format!("{n_chunks} chunks")));
    }
    let table_end = FIXED_HEADER_BYTES + CHUNK_ENTRY_BYTES * n_chunks;
    if bytes.len() < table_end + 4 {
        return Err(corrupt("truncated chunk table"));
    }
    if crc32fast::hash(&bytes[..table_end]) != u32_at(bytes, table_end) {
        return Err(corrupt("header checksum mismatch"));
    }
    let profile = match bytes[6] {
        0 => ProfileId::Hq,
        1 => ProfileId::Hr,
        p => return Err(corrupt(format!("unknown profile {p}"))),
    };
    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let bbox = Aabb::new(std::array::from_fn(|a| f64_at(20 + 8 * a)), std::array::from_fn(|a| f64_at(44 + 8 * a)));
    let header = Header {
        profile,
        sh_degree: bytes[7],
        count: u32_at(bytes, 8),
        flags: u32_at(bytes, 12),
        smoothing_strength: f32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")),
        bbox,
    };
    let mut chunks = Vec::with_capacity(n_chunks);
    let mut expected_offset = table_end + 4;
    for c in 0..n_chunks {
        let e = FIXED_HEADER_BYTES + CHUNK_ENTRY_BYTES * c;
        let id: [u8; 4] = bytes[e..e + 4].try_into().expect("4 bytes");
        let raw_len = u32_at(bytes, e + 4) as usize;
        let comp_len = u32_at(bytes, e + 8) as usize;
        let offset = u32_at(bytes, e + 12) as usize;
        let crc = u32_at(bytes, e + 16);
        if offset != expected_offset {
            return Err(corrupt(format!("chunk {c} starts at {offset}, expected {expected_offset}")));
        }
        if raw_len > MAX_CHUNK_BYTES {
            return Err(corrupt(format!("chunk {c} claims {raw_len} bytes")));
        }
        let end = offset.checked_add(comp_len).filter(|&end| end <= bytes.len()).ok_or_else(|| corrupt(format!("chunk {c} is truncated")))?;
        let comp = &bytes[offset..end];
        if crc32fast::hash(comp) != crc {
            return Err(corrupt(format!("chunk {c} checksum mismatch")));
        }
        chunks.push(Chunk { id, data: inflate(comp, raw_len)? });
        expected_offset = end;
    }
    if expected_offset != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - expected_offset)));
    }
    Ok((header, chunks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> (Header, Vec<Chunk>) {
        let h = Header {
            profile: ProfileId::Hr,
            sh_degree: 2,
            count: 3,
            flags: FLAG_MIP,
            smoothing_strength: 0.2,
            bbox: Aabb::new([-1.0, -2.0, -3.0], [1.0, 2.0, 3.5]),
        };
        let chunks = vec![Chunk { id: *b"AAAA", data: (0..200u8).collect() }, Chunk { id: *b"BBBB", data: vec![] }];
        (h, chunks)
    }

    #[test]
    fn round_trip() {
        let (h, c) = sample();
        let bytes = write_container(&h, &c);
        assert_eq!(read_container(&bytes).unwrap(), (h, c));
    }

    #[test]
    fn rejects_trailing_and_truncated() {
        let (h, c) = sample();
        let mut bytes = write_container(&h, &c);
        bytes.push(0);
        assert!(matches!(read_container(&bytes), Err(Error::CorruptContainer(_))));
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(read_container(&bytes), Err(Error::CorruptContainer(_))));
    }

    proptest! {
        #[test]
        fn deflate_is_lossless(data in proptest::collection::vec(any::<u8>(), 0..4000)) {
            prop_assert_eq!(inflate(&deflate(&data), data.len()).unwrap(), data);
        }
    }
}
