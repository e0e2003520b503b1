//! IDX files as distributed for MNIST and Fashion-MNIST: a big-endian
//! magic, big-endian `u32` dimension sizes, then unsigned bytes.

use std::fs;
use std::io::{self, ErrorKind};
use std::path::Path;

use super::Dataset;
use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> io::Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> io::Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(io::Error::new(
                ErrorKind::UnexpectedEof,
                format!("needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

fn check_magic(found: u32, expected: u32, what: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!(
            "{what} file has magic {found:#010x}, expected {expected:#010x}"
        )));
    }
    Ok(())
}

/// Decoded image file: `count` row-major `rows x cols` byte images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn images_from(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let eof = |e| Error::io(path, e);
    let mut r = Reader { bytes, pos: 0 };
    check_magic(r.u32().map_err(eof)?, IMAGES_MAGIC, "images")?;
    let count = r.u32().map_err(eof)? as usize;
    let rows = r.u32().map_err(eof)? as usize;
    let cols = r.u32().map_err(eof)? as usize;
    let pixels = r.take(count * rows * cols).map_err(eof)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

fn labels_from(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let eof = |e| Error::io(path, e);
    let mut r = Reader { bytes, pos: 0 };
    check_magic(r.u32().map_err(eof)?, LABELS_MAGIC, "labels")?;
    let count = r.u32().map_err(eof)? as usize;
    Ok(r.take(count).map_err(eof)?.to_vec())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    images_from(bytes, Path::new("<bytes>"))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    labels_from(bytes, Path::new("<bytes>"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an image/label IDX pair. Pixels are scaled by `1/255`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = images_from(&read(images_path)?, images_path)?;
    let labels = labels_from(&read(labels_path)?, labels_path)?;
    if labels.len() != images.count {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let inputs = images.pixels.into_iter().map(|p| p as f64 / 255.0).collect();
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(
        name,
        inputs,
        labels,
        images.rows * images.cols,
        num_classes,
        Some((images.rows, images.cols)),
    )
}

/// Writes a dataset as an IDX pair, quantizing inputs to `round(255 x)`.
pub fn write_idx(dataset: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = dataset.image_shape().unwrap_or((1, dataset.input_dim()));
    if dataset.num_classes() > 256 {
        return Err(Error::config("IDX labels are single bytes; more than 256 classes"));
    }
    let n = dataset.len() as u32;

    let mut images = Vec::with_capacity(16 + dataset.inputs().len());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    images.extend(
        dataset
            .inputs()
            .iter()
            .map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8),
    );

    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend(dataset.labels().iter().map(|&y| y as u8));

    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    #[test]
    fn parses_labels() {
        let mut bytes = header(LABELS_MAGIC, &[3]);
        bytes.extend_from_slice(&[7, 0, 2]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 0, 2]);
    }

    #[test]
    fn wrong_label_magic_names_expected() {
        let bytes = header(IMAGES_MAGIC, &[0, 1, 1]);
        let err = parse_idx_labels(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Format(_)));
        assert!(msg.contains("0x00000801"), "{msg}");
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let mut bytes = header(IMAGES_MAGIC, &[2, 2, 2]);
        bytes.extend_from_slice(&[1, 2, 3]);
        match parse_idx_images(&bytes).unwrap_err() {
            Error::Io { source, .. } => assert_eq!(source.kind(), ErrorKind::UnexpectedEof),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_idx_labels(&[0, 0]).is_err());
    }
}
