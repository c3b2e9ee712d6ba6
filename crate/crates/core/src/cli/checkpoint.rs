//! Checkpoint and sample file formats.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! bytes 0..8     magic "ASECKPT\0"
//! bytes 8..16    u64 manifest length M
//! bytes 16..16+M UTF-8 JSON manifest
//! rest           payload: f32 values of every tensor in manifest order
//! ```
//!
//! Tensor offsets and lengths in the manifest are byte counts relative to
//! the start of the payload.
//!
//! Sample files hold one ASCII header line `<n> <dim> <config digest>\n`
//! followed by `n·dim` little-endian f32 values in row-major order.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseScheduleSpec;
use crate::error::{Error, Result};
use crate::net::{NetworkConfig, ParamSet, ScoreNetwork, Tensor};
use crate::schedule::ExitSchedule;

pub const MAGIC: &[u8; 8] = b"ASECKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub network: NetworkConfig,
    pub noise: NoiseScheduleSpec,
    pub config_digest: String,
    /// Schedule the weights were fine-tuned under, if any.
    #[serde(default)]
    pub schedule: Option<ExitSchedule>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub network: ScoreNetwork,
}

fn format<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Serializes `net` (values rounded to f32).
pub fn encode_checkpoint(
    net: &ScoreNetwork,
    noise: NoiseScheduleSpec,
    config_digest: &str,
    schedule: Option<ExitSchedule>,
) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut offset = 0u64;
    for t in net.params().tensors() {
        let length = 4 * t.data.len() as u64;
        tensors.push(TensorEntry { name: t.name.clone(), shape: t.shape.clone(), dtype: "f32".into(), offset, length });
        offset += length;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        network: net.config().clone(),
        noise,
        config_digest: config_digest.to_string(),
        schedule,
        tensors,
    };
    let text = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(16 + text.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(&text);
    for t in net.params().tensors() {
        for v in &t.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return format("not a checkpoint (bad magic)");
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let Some(text) = bytes.get(16..16usize.saturating_add(m)) else {
        return format("truncated manifest");
    };
    let manifest: Manifest = serde_json::from_slice(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return format(format!("unsupported format version {}", manifest.format_version));
    }
    manifest.network.validate()?;
    let payload = &bytes[16 + m..];
    let mut expected = 0u64;
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        if e.dtype != "f32" {
            return format(format!("tensor `{}` has dtype {}", e.name, e.dtype));
        }
        let count: usize = e.shape.iter().product();
        if e.offset != expected || e.length != 4 * count as u64 {
            return format(format!("tensor `{}` is not contiguous with its predecessor", e.name));
        }
        expected += e.length;
        let Some(raw) = payload.get(e.offset as usize..(e.offset + e.length) as usize) else {
            return format(format!("payload too short for tensor `{}`", e.name));
        };
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        tensors.push(Tensor { name: e.name.clone(), shape: e.shape.clone(), data });
    }
    if payload.len() as u64 != expected {
        return format(format!("payload holds {} bytes, manifest describes {expected}", payload.len()));
    }
    let network = ScoreNetwork::from_params(manifest.network.clone(), ParamSet::new(tensors))
        .map_err(|e| Error::Format(format!("tensors do not match the network config: {e}")))?;
    Ok(Checkpoint { manifest, network })
}

pub fn save_checkpoint(
    path: &Path,
    net: &ScoreNetwork,
    noise: NoiseScheduleSpec,
    config_digest: &str,
    schedule: Option<ExitSchedule>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode_checkpoint(net, noise, config_digest, schedule)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}

pub fn encode_samples(x: &Array2<f64>, config_digest: &str) -> Vec<u8> {
    let (n, d) = x.dim();
    let mut out = format!("{n} {d} {config_digest}\n").into_bytes();
    for v in x.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Parses a sample file into the matrix and the recorded digest.
pub fn decode_samples(bytes: &[u8]) -> Result<(Array2<f64>, String)> {
    let Some(nl) = bytes.iter().position(|&b| b == b'\n') else {
        return format("sample file has no header line");
    };
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("sample header is not UTF-8".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (n, d) = match parts.as_slice() {
        [n, d, ..] => (n.parse::<usize>(), d.parse::<usize>()),
        _ => return format("sample header must be `<n> <dim> [digest]`"),
    };
    let (Ok(n), Ok(d)) = (n, d) else {
        return format("sample header holds non-integer sizes");
    };
    let digest = parts.get(2).map(|s| s.to_string()).unwrap_or_default();
    let body = &bytes[nl + 1..];
    if body.len() != 4 * n * d {
        return format(format!("sample body holds {} bytes, header says {}", body.len(), 4 * n * d));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    let x = Array2::from_shape_vec((n, d), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok((x, digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Architecture;

    #[test]
    fn checkpoint_round_trip_is_byte_exact() {
        for arch in [Architecture::Stack { blocks: 2 }, Architecture::USkip { encoder: 1, decoder: 1 }] {
            let net = ScoreNetwork::new(NetworkConfig::new(arch, 8, 2), 3).unwrap();
            let a = encode_checkpoint(&net, NoiseScheduleSpec::default(), "d", None).unwrap();
            let ck = decode_checkpoint(&a).unwrap();
            let b = encode_checkpoint(&ck.network, ck.manifest.noise, "d", None).unwrap();
            assert_eq!(a, b);
            let c = decode_checkpoint(&b).unwrap();
            assert_eq!(c.network.params(), ck.network.params());
        }
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let net = ScoreNetwork::new(NetworkConfig::new(Architecture::Stack { blocks: 1 }, 4, 1), 0).unwrap();
        let a = encode_checkpoint(&net, NoiseScheduleSpec::default(), "d", None).unwrap();
        assert!(decode_checkpoint(&a[..a.len() - 1]).is_err());
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut long = a;
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let x = Array2::from_shape_fn((3, 2), |(i, j)| i as f64 - 0.5 * j as f64);
        let bytes = encode_samples(&x, "abc");
        assert!(bytes.starts_with(b"3 2 abc\n"));
        let (y, d) = decode_samples(&bytes).unwrap();
        assert_eq!((y, d.as_str()), (x, "abc"));
        assert!(decode_samples(b"3 2\n\x00").is_err());
    }
}
