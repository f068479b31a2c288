//! Container shared by every binary file: one line of compact JSON, a
//! `\n`, then a little-endian `f32`/`i32` payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fields every header starts with.
#[derive(Debug, Deserialize)]
struct Tag {
    format: String,
    version: u32,
}

pub fn write_file<H: Serialize>(path: &Path, header: &H, payload: &[u8]) -> Result<()> {
    let mut bytes = serde_json::to_vec(header).map_err(|e| Error::format(path, e.to_string()))?;
    debug_assert!(!bytes.contains(&b'\n'));
    bytes.push(b'\n');
    bytes.extend_from_slice(payload);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a container and checks its `format` tag and `version`.
pub fn read_file<H: DeserializeOwned>(path: &Path, format: &str, version: u32) -> Result<(H, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let head = &bytes[..nl];
    let tag: Tag = serde_json::from_slice(head).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if tag.format != format {
        return Err(Error::format(
            path,
            format!("expected a {format:?} file, found {:?}", tag.format),
        ));
    }
    if tag.version != version {
        return Err(Error::format(
            path,
            format!("unsupported {format} version {} (expected {version})", tag.version),
        ));
    }
    let header = serde_json::from_slice(head).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    Ok((header, bytes[nl + 1..].to_vec()))
}

#[derive(Debug, Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn f32(&mut self, x: f64) {
        self.buf.extend_from_slice(&(x as f32).to_le_bytes());
    }

    pub fn f32s<'a>(&mut self, xs: impl IntoIterator<Item = &'a f64>) {
        for &x in xs {
            self.f32(x);
        }
    }

    pub fn i32(&mut self, x: i32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct PayloadReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.path,
                format!("payload truncated while reading {what} at byte {}", self.pos),
            )),
        }
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    pub fn i32(&mut self, what: &str) -> Result<i32> {
        let c = self.take(4, what)?;
        Ok(i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("{} trailing payload bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct H {
        format: String,
        version: u32,
        note: String,
    }

    #[test]
    fn roundtrip_and_tag_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let h = H {
            format: "demo".into(),
            version: 1,
            note: "line\nbreak".into(),
        };
        let mut w = PayloadWriter::default();
        w.f32s(&[1.5, -2.25]);
        w.i32(-7);
        write_file(&path, &h, &w.into_bytes()).unwrap();

        let (back, payload): (H, _) = read_file(&path, "demo", 1).unwrap();
        assert_eq!(back, h);
        let mut r = PayloadReader::new(&path, &payload);
        assert_eq!(r.f32s(2, "xs").unwrap(), vec![1.5, -2.25]);
        assert_eq!(r.i32("n").unwrap(), -7);
        r.finish().unwrap();

        assert!(matches!(read_file::<H>(&path, "other", 1), Err(Error::Format { .. })));
        assert!(matches!(read_file::<H>(&path, "demo", 2), Err(Error::Format { .. })));
        assert!(matches!(
            read_file::<H>(&dir.path().join("missing"), "demo", 1),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let p = Path::new("t");
        let mut r = PayloadReader::new(p, &[0, 0, 0]);
        assert!(r.f32s(1, "x").is_err());
    }
}
