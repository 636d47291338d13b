//! IDX image/label files (the MNIST container format), big-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::codec::Image;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<R> {
    inner: R,
    offset: u64,
    path: std::path::PathBuf,
}

impl<R: Read> Cursor<R> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn read_u32(&mut self) -> Result<u32> {
        let v = self
            .inner
            .read_u32::<BigEndian>()
            .map_err(|e| self.err(format!("truncated u32: {e}")))?;
        self.offset += 4;
        Ok(v)
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|e| self.err(format!("truncated payload: {e}")))?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.err("trailing bytes after declared payload")),
            Err(e) => Err(self.err(format!("read failed: {e}"))),
        }
    }
}

/// Load an IDX image file (magic 0x00000803) as [0,1]-scaled images.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    let path = path.as_ref();
    let mut cur = Cursor {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
        path: path.to_path_buf(),
    };
    let magic = cur.read_u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            reason: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = cur.read_u32()? as usize;
    let rows = cur.read_u32()? as usize;
    let cols = cur.read_u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(cur.err(format!("degenerate image dims {rows}x{cols}")));
    }
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for _ in 0..count {
        cur.read_exact(&mut buf)?;
        let pixels = buf.iter().map(|&b| b as f64 / 255.0).collect();
        images.push(Image::new(rows, cols, pixels)?);
    }
    cur.expect_eof()?;
    Ok(images)
}

/// Load an IDX label file (magic 0x00000801).
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let mut cur = Cursor {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
        path: path.to_path_buf(),
    };
    let magic = cur.read_u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            reason: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = cur.read_u32()? as usize;
    let mut labels = vec![0u8; count];
    cur.read_exact(&mut labels)?;
    cur.expect_eof()?;
    Ok(labels)
}

/// Load a paired image/label IDX dataset.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Vec<(Image, u8)>> {
    let images = load_idx_images(&images_path)?;
    let labels = load_idx_labels(&labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::Parse {
            path: labels_path.as_ref().to_path_buf(),
            offset: 4,
            reason: format!(
                "label count {} does not match image count {}",
                labels.len(),
                images.len()
            ),
        });
    }
    Ok(images.into_iter().zip(labels).collect())
}

/// Write images to an IDX file; intensities are rounded back to u8.
pub fn save_idx_images(path: impl AsRef<Path>, images: &[Image]) -> Result<()> {
    let path = path.as_ref();
    if let Some((first, rest)) = images.split_first() {
        for img in rest {
            if img.height() != first.height() || img.width() != first.width() {
                return Err(Error::Dimension {
                    context: "save_idx_images",
                    expected: format!("{}x{}", first.height(), first.width()),
                    actual: format!("{}x{}", img.height(), img.width()),
                });
            }
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(IMAGES_MAGIC)?;
    w.write_u32::<BigEndian>(images.len() as u32)?;
    let (rows, cols) = images
        .first()
        .map(|i| (i.height(), i.width()))
        .unwrap_or((0, 0));
    w.write_u32::<BigEndian>(rows as u32)?;
    w.write_u32::<BigEndian>(cols as u32)?;
    for img in images {
        for &p in img.pixels() {
            w.write_all(&[(p * 255.0).round() as u8])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write labels to an IDX file.
pub fn save_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(LABELS_MAGIC)?;
    w.write_u32::<BigEndian>(labels.len() as u32)?;
    w.write_all(labels)?;
    w.flush()?;
    Ok(())
}
