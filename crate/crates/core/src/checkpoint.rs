//! Little-endian binary helpers and JSON sidecars shared by the model
//! checkpoint formats.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn magic(&mut self, magic: &[u8; 4]) {
        self.buf.extend_from_slice(magic);
        self.buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }

    pub fn tensor(&mut self, m: &Matrix) {
        for &v in m.as_slice() {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader {
    bytes: Vec<u8>,
    pos: usize,
}

impl Reader {
    pub fn open(path: &Path, magic: &[u8; 4]) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Self { bytes, pos: 0 };
        if r.take(4)? != magic {
            return Err(Error::format(
                None,
                format!(
                    "{} is not a {} checkpoint",
                    path.display(),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(None, format!("unsupported checkpoint version {version}")));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(None, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub fn tensor(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let raw = self.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(None, "trailing bytes in checkpoint"));
        }
        Ok(())
    }
}

/// JSON metadata written next to a binary checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<C> {
    pub format: String,
    pub fingerprint: String,
    pub seed: u64,
    pub config: C,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    checkpoint.with_file_name(name)
}

pub(crate) fn write_sidecar<C: Serialize>(checkpoint: &Path, sidecar: &Sidecar<C>) -> Result<()> {
    let path = sidecar_path(checkpoint);
    let text = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_sidecar<C: DeserializeOwned>(checkpoint: &Path) -> Result<Sidecar<C>> {
    let path = sidecar_path(checkpoint);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
