//! IDX container format used by the MNIST distribution.
//!
//! Images: big-endian `u32` magic 2051, count, rows, cols, then
//! `count * rows * cols` pixel bytes. Labels: magic 2049, count, then `count`
//! bytes. Files ending in `.gz` are gunzipped on read and gzipped on write.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// A stack of equally sized 8-bit grayscale images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, image after image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn new(count: usize, rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != count * rows * cols {
            return Err(Error::DimensionMismatch {
                what: "image pixel buffer",
                expected: count * rows * cols,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            count,
            rows,
            cols,
            pixels,
        })
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGES_MAGIC, self.count as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = header_words::<4>(bytes, "image")?;
        if header[0] != IMAGES_MAGIC {
            return Err(Error::format(format!(
                "image file magic is {} (0x{:08x}), expected {IMAGES_MAGIC}",
                header[0], header[0]
            )));
        }
        let [_, count, rows, cols] = header.map(|v| v as usize);
        let expected = count
            .checked_mul(rows)
            .and_then(|v| v.checked_mul(cols))
            .ok_or_else(|| Error::format(format!("image header {count}x{rows}x{cols} overflows")))?;
        let payload = &bytes[16..];
        check_payload("image", expected, payload.len())?;
        Ok(Self {
            count,
            rows,
            cols,
            pixels: payload.to_vec(),
        })
    }
}

pub fn labels_to_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Parses a label file; every label must be a digit 0-9.
pub fn labels_from_bytes(bytes: &[u8]) -> Result<Vec<u8>> {
    let header = header_words::<2>(bytes, "label")?;
    if header[0] != LABELS_MAGIC {
        return Err(Error::format(format!(
            "label file magic is {} (0x{:08x}), expected {LABELS_MAGIC}",
            header[0], header[0]
        )));
    }
    let payload = &bytes[8..];
    check_payload("label", header[1] as usize, payload.len())?;
    if let Some((i, &bad)) = payload.iter().enumerate().find(|(_, &b)| b > 9) {
        return Err(Error::format(format!("label {i} is {bad}, expected a digit 0-9")));
    }
    Ok(payload.to_vec())
}

fn header_words<const N: usize>(bytes: &[u8], kind: &str) -> Result<[u32; N]> {
    if bytes.len() < 4 * N {
        return Err(Error::format(format!(
            "{kind} file truncated: header needs {} bytes, got {}",
            4 * N,
            bytes.len()
        )));
    }
    Ok(std::array::from_fn(|i| {
        u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4-byte slice"))
    }))
}

fn check_payload(kind: &str, expected: usize, actual: usize) -> Result<()> {
    match actual.cmp(&expected) {
        std::cmp::Ordering::Less => Err(Error::format(format!(
            "{kind} payload truncated: expected {expected} bytes, got {actual}"
        ))),
        std::cmp::Ordering::Greater => Err(Error::format(format!(
            "{kind} payload has trailing data: expected {expected} bytes, got {actual}"
        ))),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let mut reader: Box<dyn Read> = if is_gzip(path) {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let result = if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(bytes).and_then(|_| enc.finish()?.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(bytes).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    IdxImages::from_bytes(&read_all(path)?)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    labels_from_bytes(&read_all(path)?).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

pub fn write_idx_images(images: &IdxImages, path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), &images.to_bytes())
}

pub fn write_idx_labels(labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), &labels_to_bytes(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_image_file() -> Vec<u8> {
        let mut bytes = Vec::new();
        for v in [2051u32, 1, 2, 2] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        bytes.extend_from_slice(&[0, 255, 17, 34]);
        bytes
    }

    #[test]
    fn parses_hand_built_image() {
        let img = IdxImages::from_bytes(&tiny_image_file()).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (1, 2, 2));
        assert_eq!(img.image(0), &[0, 255, 17, 34]);
        assert_eq!(img.to_bytes(), tiny_image_file());
    }

    #[test]
    fn image_reader_rejects_label_magic() {
        let mut bytes = tiny_image_file();
        bytes[3] = 0x01;
        let err = IdxImages::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("2049"), "{err}");
    }

    #[test]
    fn truncation_names_byte_counts() {
        let bytes = tiny_image_file();
        let err = IdxImages::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 4") && msg.contains("got 3"), "{msg}");
        assert!(IdxImages::from_bytes(&bytes[..10]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(IdxImages::from_bytes(&long).is_err());
    }

    #[test]
    fn labels_parse_and_validate() {
        let bytes = labels_to_bytes(&[7, 0, 9]);
        assert_eq!(labels_from_bytes(&bytes).unwrap(), vec![7, 0, 9]);
        let bad = labels_to_bytes(&[7, 11, 9]);
        assert!(matches!(labels_from_bytes(&bad), Err(Error::Format(_))));
        assert!(labels_from_bytes(&bytes[..9]).is_err());
        assert!(labels_from_bytes(&tiny_image_file()).is_err());
    }

    #[test]
    fn gzip_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let images = IdxImages::from_bytes(&tiny_image_file()).unwrap();
        let plain = dir.path().join("img-idx3-ubyte");
        let gz = dir.path().join("img-idx3-ubyte.gz");
        write_idx_images(&images, &plain).unwrap();
        write_idx_images(&images, &gz).unwrap();
        assert_eq!(std::fs::read(&plain).unwrap(), tiny_image_file());
        assert_ne!(std::fs::read(&gz).unwrap(), tiny_image_file());
        assert_eq!(read_idx_images(&gz).unwrap(), images);
        assert_eq!(read_idx_images(&plain).unwrap(), images);

        let labels = dir.path().join("lbl.gz");
        write_idx_labels(&[1, 2, 3], &labels).unwrap();
        assert_eq!(read_idx_labels(&labels).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_idx_labels("/definitely/not/here").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here"));
    }
}
