//! Checkpoint serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "DESKGONN"
//! version u32      currently 1
//! config  u32 length + that many bytes of JSON (NetworkConfig)
//! steps   u64      optimizer step count
//! count   u32      number of tensors
//! tensor  u32 name length + name bytes + u32 element count + f32 data
//! ```
//!
//! Tensors are stored in their canonical (sorted-name) order. Loading
//! verifies the tensor set against the embedded config, so a checkpoint
//! whose shapes disagree with its own config is rejected as corrupt.

use std::collections::BTreeMap;
use std::path::Path;

use super::model::parameter_specs;
use super::{NetworkConfig, NetworkParameters, NnetError};

const MAGIC: &[u8; 8] = b"DESKGONN";
pub const FORMAT_VERSION: u32 = 1;

/// Writes `params` to `path` (via a temp file + rename, so a crash never
/// leaves a half-written checkpoint under the final name).
pub fn save_checkpoint(params: &NetworkParameters, path: &Path) -> Result<(), NnetError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(&params.config).expect("config serializes");
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&params.step_count.to_le_bytes());
    buf.extend_from_slice(&(params.tensors.len() as u32).to_le_bytes());
    for (name, data) in &params.tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(data.len() as u32).to_le_bytes());
        for &x in data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParameters, NnetError> {
    let buf = std::fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    let magic = r.bytes(8)?;
    if magic != MAGIC {
        return Err(NnetError::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnetError::VersionMismatch(version));
    }
    let config_len = r.u32()? as usize;
    let config_bytes = r.bytes(config_len)?;
    let config: NetworkConfig = serde_json::from_slice(config_bytes)
        .map_err(|e| NnetError::CorruptCheckpoint(format!("config: {e}")))?;
    config
        .validate()
        .map_err(NnetError::CorruptCheckpoint)?;
    let step_count = r.u64()?;
    let count = r.u32()? as usize;
    let mut tensors: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.bytes(name_len)?)
            .map_err(|_| NnetError::CorruptCheckpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let elems = r.u32()? as usize;
        let mut data = Vec::with_capacity(elems);
        for _ in 0..elems {
            let b = r.bytes(4)?;
            data.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        }
        if tensors.insert(name.clone(), data).is_some() {
            return Err(NnetError::CorruptCheckpoint(format!(
                "duplicate tensor {name}"
            )));
        }
    }
    if r.pos != buf.len() {
        return Err(NnetError::CorruptCheckpoint("trailing bytes".into()));
    }
    // The tensor set must be exactly what the embedded config calls for.
    let specs = parameter_specs(&config);
    if specs.len() != tensors.len() {
        return Err(NnetError::CorruptCheckpoint(format!(
            "expected {} tensors, found {}",
            specs.len(),
            tensors.len()
        )));
    }
    for (name, len, _) in &specs {
        match tensors.get(name) {
            Some(data) if data.len() == *len => {}
            Some(data) => {
                return Err(NnetError::CorruptCheckpoint(format!(
                    "tensor {name}: expected {len} elements, found {}",
                    data.len()
                )))
            }
            None => {
                return Err(NnetError::CorruptCheckpoint(format!(
                    "missing tensor {name}"
                )))
            }
        }
    }
    Ok(NetworkParameters {
        config,
        step_count,
        tensors,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], NnetError> {
        if self.pos + n > self.buf.len() {
            return Err(NnetError::CorruptCheckpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnetError> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, NnetError> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_params() -> NetworkParameters {
        let mut p = NetworkParameters::init(NetworkConfig::cnn(1, 4, 5), 7);
        p.step_count = 123_456_789_012;
        p
    }

    #[test]
    fn round_trip_is_bitwise_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let params = sample_params();
        save_checkpoint(&params, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config, params.config);
        assert_eq!(loaded.step_count, params.step_count);
        assert_eq!(loaded.tensors.len(), params.tensors.len());
        for (name, data) in &params.tensors {
            let got = &loaded.tensors[name];
            assert_eq!(data.len(), got.len());
            for (a, b) in data.iter().zip(got) {
                assert_eq!(a.to_bits(), b.to_bits(), "{name}");
            }
        }
    }

    #[test]
    fn every_truncation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_params(), &path).unwrap();
        let full = std::fs::read(&path).unwrap();
        // Check a spread of cut points including one byte short.
        for cut in [0, 4, 8, 11, 20, full.len() / 2, full.len() - 1] {
            std::fs::write(&path, &full[..cut]).unwrap();
            match load_checkpoint(&path) {
                Err(NnetError::CorruptCheckpoint(_)) => {}
                other => panic!("cut at {cut}: expected corruption, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_version_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_params(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 9; // bump the version field
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(NnetError::VersionMismatch(9)) => {}
            other => panic!("expected VersionMismatch(9), got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_params(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NnetError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn tensors_from_a_different_config_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        // Save with one config, then splice in another config's JSON so the
        // tensor set no longer matches.
        let params = sample_params();
        save_checkpoint(&params, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let old_json = serde_json::to_vec(&params.config).unwrap();
        let new_json = serde_json::to_vec(&NetworkConfig::cnn(2, 4, 5)).unwrap();
        let mut spliced = Vec::new();
        spliced.extend_from_slice(&bytes[..12]);
        spliced.extend_from_slice(&(new_json.len() as u32).to_le_bytes());
        spliced.extend_from_slice(&new_json);
        spliced.extend_from_slice(&bytes[16 + old_json.len()..]);
        std::fs::write(&path, &spliced).unwrap();
        match load_checkpoint(&path) {
            Err(NnetError::CorruptCheckpoint(msg)) => {
                assert!(msg.contains("tensors"), "unexpected message: {msg}")
            }
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(&dir.path().join("absent.ckpt")),
            Err(NnetError::Io(_))
        ));
    }
}
