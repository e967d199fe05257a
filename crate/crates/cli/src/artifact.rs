//! Binary model artifact.
//!
//! Byte layout (all integers little-endian):
//!
//! | offset        | size | content                                   |
//! |---------------|------|-------------------------------------------|
//! | 0             | 8    | magic `TABPAT\x00\x01`                    |
//! | 8             | 4    | format version (`u32`)                    |
//! | 12            | 8    | payload length `L` (`u64`)                |
//! | 20            | L    | payload                                   |
//! | 20 + L        | 32   | SHA-256 of bytes `0 .. 20 + L`            |
//!
//! The payload is a `u32` header length `H`, `H` bytes of JSON
//! ([`ArtifactHeader`]), then every parameter as an `f64`, layer by layer,
//! weights before biases, in tensor storage order.
//!
//! The version is checked before the checksum so that a file written by a
//! newer release is reported as such rather than as corruption.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabpat::nn::{ConvNet, LayerSpec};
use tabpat::metalearn::MfMetaModel;
use tabpat::CanonSpec;
use thiserror::Error;

use crate::error::{CliError, CliResult};

pub const MAGIC: [u8; 8] = *b"TABPAT\x00\x01";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX: usize = 8 + 4 + 8;
const DIGEST: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("not a model artifact (bad magic bytes)")]
    BadMagic,
    #[error("format version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("checksum mismatch")]
    Checksum,
    #[error("malformed payload: {0}")]
    Malformed(String),
}

/// Where the parameters came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub corpus_seed: u64,
    pub train_seed: u64,
    pub epochs: usize,
    pub datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub canon: CanonSpec,
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub l1_lambda: f64,
    pub param_count: usize,
    pub fingerprint: Fingerprint,
}

pub fn encode(net: &ConvNet, canon: &CanonSpec, fingerprint: Fingerprint) -> Vec<u8> {
    let header = ArtifactHeader {
        canon: *canon,
        input_shape: net.input_shape(),
        layers: net.layers().to_vec(),
        l1_lambda: net.l1_lambda,
        param_count: net.param_count(),
        fingerprint,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut payload = Vec::with_capacity(4 + json.len() + 8 * header.param_count);
    payload.extend_from_slice(&(json.len() as u32).to_le_bytes());
    payload.extend_from_slice(&json);
    for p in net.params().iter().flatten() {
        for v in p.weight.data.iter().chain(&p.bias.data) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(PREFIX + payload.len() + DIGEST);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode(bytes: &[u8]) -> Result<(ConvNet, ArtifactHeader), ArtifactError> {
    let truncated = |expected: usize| ArtifactError::Truncated { expected: expected as u64, found: bytes.len() as u64 };
    if bytes.len() < MAGIC.len() {
        return Err(truncated(PREFIX));
    }
    if bytes[..8] != MAGIC {
        return Err(ArtifactError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(truncated(PREFIX));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ArtifactError::Version { found: version, supported: FORMAT_VERSION });
    }
    if bytes.len() < PREFIX {
        return Err(truncated(PREFIX));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let total = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(PREFIX + DIGEST))
        .ok_or(ArtifactError::Malformed(format!("payload length {len} overflows")))?;
    if bytes.len() < total {
        return Err(truncated(total));
    }
    if bytes.len() > total {
        return Err(ArtifactError::Malformed(format!("{} trailing bytes", bytes.len() - total)));
    }
    let body = &bytes[..total - DIGEST];
    if Sha256::digest(body).as_slice() != &bytes[total - DIGEST..] {
        return Err(ArtifactError::Checksum);
    }

    let payload = &body[PREFIX..];
    let malformed = |m: String| ArtifactError::Malformed(m);
    if payload.len() < 4 {
        return Err(malformed("payload shorter than its header length".into()));
    }
    let hlen = u32::from_le_bytes(payload[..4].try_into().expect("4 bytes")) as usize;
    let json = payload.get(4..4 + hlen).ok_or_else(|| malformed("header overruns payload".into()))?;
    let header: ArtifactHeader = serde_json::from_slice(json).map_err(|e| malformed(format!("header: {e}")))?;
    let params = &payload[4 + hlen..];
    if params.len() != 8 * header.param_count {
        return Err(malformed(format!("{} parameter bytes for {} parameters", params.len(), header.param_count)));
    }

    let mut net = ConvNet::new(header.input_shape, header.layers.clone(), header.l1_lambda, 0)
        .map_err(|e| malformed(format!("architecture: {e}")))?;
    if net.param_count() != header.param_count {
        return Err(malformed(format!("architecture has {} parameters, header says {}", net.param_count(), header.param_count)));
    }
    let mut values = params.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for p in net.params_mut().iter_mut().flatten() {
        for v in p.weight.data.iter_mut().chain(p.bias.data.iter_mut()) {
            *v = values.next().expect("length checked");
        }
    }
    Ok((net, header))
}

pub fn save_model(net: &ConvNet, canon: &CanonSpec, fingerprint: Fingerprint, path: &Path) -> CliResult<()> {
    fs::write(path, encode(net, canon, fingerprint)).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> CliResult<(ConvNet, ArtifactHeader)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|source| CliError::Artifact { path: path.to_path_buf(), source })
}

pub const MF_FORMAT: &str = "tabpat-mf";

/// The meta-feature tree is small; it is stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfArtifact {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub model: MfMetaModel,
}

pub fn save_mf_model(model: &MfMetaModel, seed: u64, path: &Path) -> CliResult<()> {
    let a = MfArtifact { format: MF_FORMAT.into(), version: FORMAT_VERSION, seed, model: model.clone() };
    let text = serde_json::to_string_pretty(&a).expect("model serialises");
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_mf_model(path: &Path) -> CliResult<MfMetaModel> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let err = |source| CliError::Artifact { path: path.to_path_buf(), source };
    let a: MfArtifact = serde_json::from_slice(&bytes).map_err(|e| err(ArtifactError::Malformed(e.to_string())))?;
    if a.format != MF_FORMAT {
        return Err(err(ArtifactError::BadMagic));
    }
    if a.version != FORMAT_VERSION {
        return Err(err(ArtifactError::Version { found: a.version, supported: FORMAT_VERSION }));
    }
    Ok(a.model)
}
