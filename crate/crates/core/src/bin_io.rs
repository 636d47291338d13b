//! Offset-tracking binary reader shared by the checkpoint formats, so parse
//! errors can name the exact byte where a file went bad.

use std::io::Read;
use std::path::PathBuf;

use byteorder::{LittleEndian, ReadBytesExt};

use crate::error::{Error, Result};

pub(crate) struct BinReader<R: Read> {
    inner: R,
    path: PathBuf,
    offset: u64,
}

impl<R: Read> BinReader<R> {
    pub fn new(inner: R, path: impl Into<PathBuf>) -> Self {
        BinReader {
            inner,
            path: path.into(),
            offset: 0,
        }
    }


    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn io(&self, what: &str, e: std::io::Error) -> Error {
        Error::Parse {
            path: self.path.clone(),
            offset: self.offset,
            reason: format!("reading {what}: {e}"),
        }
    }

    pub fn magic(&mut self, expected: &[u8; 4], label: &str) -> Result<()> {
        let mut buf = [0u8; 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.io("magic bytes", e))?;
        if &buf != expected {
            return Err(self.error(format!(
                "bad magic {buf:02x?}, expected {label} ({expected:02x?})"
            )));
        }
        self.offset += 4;
        Ok(())
    }



    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let v = self
            .inner
            .read_u32::<LittleEndian>()
            .map_err(|e| self.io(what, e))?;
        self.offset += 4;
        Ok(v)
    }


    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let v = self
            .inner
            .read_f64::<LittleEndian>()
            .map_err(|e| self.io(what, e))?;
        self.offset += 8;
        Ok(v)
    }

    pub fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.io(what, e))?;
        self.offset += n as u64;
        Ok(buf)
    }

    /// Assert that the stream is fully consumed.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.error("trailing bytes after the last record")),
            Err(e) => Err(self.io("end-of-file probe", e)),
        }
    }
}
