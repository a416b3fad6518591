//! Binary checkpoint format.
//!
//! ```text
//! b"PTS-CKPT" | version u32 | echo_len u32 | echo (UTF-8 JSON)
//! | n_tensors u32 | { name_len u32 | name | rows u32 | cols u32 | f32 data }*
//! | sha256 of everything above (32 bytes)
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::params::ParamStore;
use crate::error::{PtsError, Result};

pub const MAGIC: &[u8; 8] = b"PTS-CKPT";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(store: &ParamStore<f32>, echo: &str) -> Vec<u8> {
    let mut buf = Vec::with_capacity(store.count() * 4 + 1024);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(echo.len() as u32).to_le_bytes());
    buf.extend_from_slice(echo.as_bytes());
    buf.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, name, value) in store.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(value.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(value.ncols() as u32).to_le_bytes());
        for x in value.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| PtsError::CorruptCheckpoint("unexpected end of file".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| PtsError::CorruptCheckpoint("invalid UTF-8".into()))
    }
}

/// Parses checkpoint bytes into the config echo and the tensors.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(String, ParamStore<f32>)> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PtsError::CorruptCheckpoint("missing header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(PtsError::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(PtsError::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, at: 12 };
    let echo_len = r.u32()? as usize;
    let echo = r.string(echo_len)?;
    let n = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..n {
        let name_len = r.u32()? as usize;
        let name = r.string(name_len)?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| PtsError::CorruptCheckpoint(format!("tensor `{name}` too large")))?;
        let data = r.take(len)?;
        let values: Vec<f32> = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if store.lookup(&name).is_some() {
            return Err(PtsError::CorruptCheckpoint(format!("duplicate tensor `{name}`")));
        }
        store.insert(name, Array2::from_shape_vec((rows, cols), values).unwrap());
    }
    if r.at != body.len() {
        return Err(PtsError::CorruptCheckpoint("trailing bytes".into()));
    }
    Ok((echo, store))
}

pub fn save_checkpoint(store: &ParamStore<f32>, echo: &str, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(store, echo))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(String, ParamStore<f32>)> {
    if !path.exists() {
        return Err(PtsError::MissingFile(path.to_owned()));
    }
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::params::{Init, ParamBuilder, ParamSink};

    fn store() -> ParamStore<f32> {
        let mut b = ParamBuilder::<f32>::new(11);
        b.add("a.weight".into(), 3, 5, Init::Uniform(2.0));
        b.add("a.bias".into(), 1, 5, Init::Uniform(0.1));
        b.add("empty".into(), 0, 4, Init::Zeros);
        b.finish()
    }

    #[test]
    fn round_trip_is_exact() {
        let s = store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&s, "{\"x\":1}", &path).unwrap();
        let (echo, back) = load_checkpoint(&path).unwrap();
        assert_eq!(echo, "{\"x\":1}");
        assert_eq!(back.len(), s.len());
        for ((_, n1, v1), (_, n2, v2)) in s.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(v1.dim(), v2.dim());
            let bits1: Vec<u32> = v1.iter().map(|x| x.to_bits()).collect();
            let bits2: Vec<u32> = v2.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits1, bits2);
        }
    }

    #[test]
    fn saves_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1"), dir.path().join("2"));
        save_checkpoint(&store(), "e", &p1).unwrap();
        save_checkpoint(&store(), "e", &p2).unwrap();
        let (b1, b2) = (std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
        assert_eq!(Sha256::digest(&b1), Sha256::digest(&b2));
    }

    #[test]
    fn truncation_and_tampering_are_detected() {
        let bytes = encode_checkpoint(&store(), "e");
        for cut in [0, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            let err = decode_checkpoint(&bytes[..cut]).unwrap_err();
            assert!(err.to_string().contains("corrupt checkpoint"), "{err}");
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(decode_checkpoint(&flipped).unwrap_err().to_string().contains("corrupt checkpoint"));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = encode_checkpoint(&store(), "e");
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(PtsError::CheckpointVersion { found: 7, expected: 1 })
        ));
    }
}
