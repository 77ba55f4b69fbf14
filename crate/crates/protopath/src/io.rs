//! Lossless binary containers for float data, atomic file writes, and hashing.
//!
//! Two little-endian formats:
//! * `PPAF` — an ordered list of unnamed f32 arrays (activation records,
//!   profiles, prototype pixel data).
//! * `PPWT` — named, shaped f32 arrays (model parameters).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const PPAF_MAGIC: &[u8; 4] = b"PPAF";
const PPWT_MAGIC: &[u8; 4] = b"PPWT";
const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(buf: &mut Vec<u8>, data: &[f32]) {
    buf.reserve(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Input("truncated float-array file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.take(n * 4)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Serializes a list of f32 arrays.
pub fn encode_arrays(arrays: &[Vec<f32>]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PPAF_MAGIC);
    put_u32(&mut buf, VERSION);
    put_u32(&mut buf, arrays.len() as u32);
    for a in arrays {
        put_u32(&mut buf, a.len() as u32);
        put_f32s(&mut buf, a);
    }
    buf
}

pub fn decode_arrays(bytes: &[u8]) -> Result<Vec<Vec<f32>>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != PPAF_MAGIC {
        return Err(Error::Input("not a PPAF float-array file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Input(format!("unsupported PPAF version {version}")));
    }
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.u32()? as usize;
        out.push(r.f32s(len)?);
    }
    Ok(out)
}

pub fn write_arrays(path: &Path, arrays: &[Vec<f32>]) -> Result<()> {
    atomic_write(path, &encode_arrays(arrays))
}

pub fn read_arrays(path: &Path) -> Result<Vec<Vec<f32>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_arrays(&bytes)
}

/// One named, shaped parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode_named(arrays: &[NamedArray]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PPWT_MAGIC);
    put_u32(&mut buf, VERSION);
    put_u32(&mut buf, arrays.len() as u32);
    for a in arrays {
        put_u32(&mut buf, a.name.len() as u32);
        buf.extend_from_slice(a.name.as_bytes());
        put_u32(&mut buf, a.shape.len() as u32);
        for &d in &a.shape {
            put_u32(&mut buf, d as u32);
        }
        put_f32s(&mut buf, &a.data);
    }
    buf
}

pub fn decode_named(bytes: &[u8]) -> Result<Vec<NamedArray>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != PPWT_MAGIC {
        return Err(Error::Input("not a PPWT weight file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Input(format!("unsupported PPWT version {version}")));
    }
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Input("non-utf8 parameter name".into()))?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        out.push(NamedArray {
            name,
            shape,
            data: r.f32s(numel)?,
        });
    }
    Ok(out)
}

pub fn write_named(path: &Path, arrays: &[NamedArray]) -> Result<()> {
    atomic_write(path, &encode_named(arrays))
}

pub fn read_named(path: &Path) -> Result<Vec<NamedArray>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_named(&bytes)
}

/// Write-temp-then-rename so partially written files are never observed.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    Ok(s)
}

/// Content hash of an f32 slice, used as a cache key component.
pub fn hash_f32s(data: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    sha256_hex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrays_round_trip() {
        let arrays = vec![vec![1.0f32, -2.5, 3.25], vec![], vec![f32::MIN_POSITIVE]];
        let decoded = decode_arrays(&encode_arrays(&arrays)).unwrap();
        assert_eq!(arrays, decoded);
    }

    #[test]
    fn named_round_trip() {
        let arrays = vec![NamedArray {
            name: "conv1.weight".into(),
            shape: vec![2, 3],
            data: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        }];
        let decoded = decode_named(&encode_named(&arrays)).unwrap();
        assert_eq!(arrays, decoded);
    }

    #[test]
    fn truncated_file_rejected() {
        let mut bytes = encode_arrays(&[vec![1.0, 2.0, 3.0]]);
        bytes.truncate(bytes.len() - 2);
        assert!(decode_arrays(&bytes).is_err());
    }
}
