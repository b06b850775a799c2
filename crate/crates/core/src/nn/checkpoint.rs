//! Versioned binary checkpoint container: a JSON metadata header followed by
//! named f32 parameter blocks. All integers little-endian.
//!
//! Layout:
//! ```text
//! magic "VQTK" | u32 version | u64 meta_len | meta JSON
//! u32 n_blocks | blocks...
//! block: u32 name_len | name | u8 dtype(0=f32) | u8 rank | u64 dims[rank]
//!        | u64 elem_count | f32 data[elem_count]
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VQTK";
const VERSION: u32 = 1;

/// Header carried by every checkpoint: the quantizer geometry plus the seed
/// the run was trained under. Module-specific settings go in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Which network this checkpoint holds: "vq", "audio", or "ar".
    pub kind: String,
    /// Codebook size K.
    pub codebook_size: usize,
    /// Code dimension d.
    pub latent_dim: usize,
    /// Spatial down-sampling ratio n.
    pub downsample: usize,
    /// Commitment weight beta.
    pub commitment_beta: f64,
    /// Master seed of the producing run.
    pub seed: u64,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

pub type ParamBlock = (String, Vec<f32>, Vec<usize>);

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    meta: &CheckpointMeta,
    blocks: &[(String, Vec<f32>, Vec<usize>)],
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let meta_json = serde_json::to_vec(meta)?;
    out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, data, shape) in blocks {
        let elem: usize = shape.iter().product();
        if elem != data.len() {
            return Err(Error::data(format!(
                "block {name}: shape {:?} does not match {} values",
                shape,
                data.len()
            )));
        }
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(0u8); // dtype f32
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointMeta, Vec<ParamBlock>)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open checkpoint {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    if cur.take(4)? != MAGIC.as_slice() {
        return Err(Error::data(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::data(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let meta_len = cur.u64()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(cur.take(meta_len)?)?;
    let n_blocks = cur.u32()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let name_len = cur.u32()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::data("checkpoint block name is not utf-8"))?;
        let dtype = cur.u8()?;
        if dtype != 0 {
            return Err(Error::data(format!("block {name}: unsupported dtype {dtype}")));
        }
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u64()? as usize);
        }
        let elem = cur.u64()? as usize;
        if elem != shape.iter().product::<usize>() {
            return Err(Error::data(format!("block {name}: inconsistent element count")));
        }
        let raw = cur.take(elem * 4)?;
        let mut data = Vec::with_capacity(elem);
        for chunk in raw.chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("block {name}: non-finite values")));
        }
        blocks.push((name, data, shape));
    }
    Ok((meta, blocks))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::data("truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            kind: "vq".into(),
            codebook_size: 64,
            latent_dim: 32,
            downsample: 4,
            commitment_beta: 0.25,
            seed: 42,
            extra: BTreeMap::from([("note".to_string(), "t".to_string())]),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let blocks = vec![
            ("enc.w".to_string(), vec![1.0f32, -2.0, 3.5, 0.0, 1.0, 2.0], vec![2, 3]),
            ("cb".to_string(), vec![0.5f32; 8], vec![4, 2]),
        ];
        save_checkpoint(&path, &meta(), &blocks).unwrap();
        let (m, b) = load_checkpoint(&path).unwrap();
        assert_eq!(m, meta());
        assert_eq!(b, blocks);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let blocks = vec![("w".to_string(), vec![f32::NAN], vec![1])];
        save_checkpoint(&path, &meta(), &blocks).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
