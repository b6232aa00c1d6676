//! Shared framing for binary artifacts: 4-byte magic, `u32` LE version,
//! `u64` LE metadata length, UTF-8 JSON metadata, then a raw payload.

use crate::error::{Error, Result};

pub(crate) const HEADER_FIXED: usize = 4 + 4 + 8;

pub(crate) fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], version: u32, meta: &str) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
}

/// Validates the framing and returns the metadata text and the payload.
pub(crate) fn read_header<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<(&'a str, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes, no magic", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if &found != magic {
        return Err(Error::BadMagic {
            expected: *magic,
            found,
        });
    }
    if bytes.len() < HEADER_FIXED {
        return Err(Error::Truncated("header cut short".into()));
    }
    let found_version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found_version != version {
        return Err(Error::UnsupportedVersion {
            found: found_version,
            supported: version,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let rest = &bytes[HEADER_FIXED..];
    if (rest.len() as u64) < len {
        return Err(Error::Truncated(format!(
            "metadata needs {len} bytes, {} remain",
            rest.len()
        )));
    }
    let (meta, payload) = rest.split_at(len as usize);
    let meta = std::str::from_utf8(meta).map_err(|e| Error::Metadata(e.to_string()))?;
    Ok((meta, payload))
}

/// Sequential little-endian reader over a payload.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{what} needs {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn u16s(&mut self, n: usize, what: &str) -> Result<Vec<u16>> {
        Ok(self
            .take(n * 2, what)?
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Metadata(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub(crate) fn put_u16s(out: &mut Vec<u8>, data: &[u16]) {
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}
