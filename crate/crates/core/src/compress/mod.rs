//! HQ and HR compressed scene containers.
//!
//! Gaussians are stored in Morton order of their box-normalized fp16
//! positions. HQ quantizes every other parameter to 8 bits per channel; HR
//! replaces SH coefficients and covariance (rotation + log-scale) by indices
//! into sensitivity-weighted k-means codebooks. Every stream is DEFLATE-coded
//! and CRC-checked; the byte layout is documented in `docs/format.md`.

mod codec;
mod conformance;
mod container;
mod morton;
mod qat;
mod quant;
mod sensitivity;
mod vq;

pub use codec::{decode, encode, Profile, DEFAULT_CODEBOOK_SIZE};
pub use conformance::{
    conformance_containers, params_bytes, read_f64s, render_bytes, write_conformance_vectors, VectorEntry, VectorManifest,
    VECTOR_RESOLUTION,
};
pub use container::{deflate, inflate, read_container, write_container, Chunk, Header, ProfileId, FLAG_MIP, MAGIC, VERSION};
pub use morton::{morton_code, morton_order, normalize, MORTON_BITS};
pub use qat::{quantization_aware_finetune, QatConfig};
pub use quant::{fake_quantize, round_f16, AffineRange};
pub use sensitivity::{compute_sensitivity, SensitivityTable};
pub use vq::{quantization_error, vq_fit, Codebook, MAX_CODEBOOK};
