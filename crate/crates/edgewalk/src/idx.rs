//! IDX image/label files (big-endian headers), optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use edgewalk_core::models::{Dataset, ModelError};
use flate2::read::GzDecoder;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file ends before its declared contents")]
    TruncatedFile,
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error(transparent)]
    Dataset(#[from] ModelError),
}

/// Raw images: `count` rows of `rows·cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    let word = bytes.get(at..at + 4).ok_or(IdxError::TruncatedFile)?;
    Ok(u32::from_be_bytes(word.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found == expected {
        Ok(())
    } else {
        Err(IdxError::BadMagic { expected, found })
    }
}

/// Parses an image file, keeping at most `limit` images.
pub fn parse_images(bytes: &[u8], limit: Option<usize>) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let declared = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let payload = &bytes[16..];
    let size = rows * cols;
    if payload.len() < declared * size {
        return Err(IdxError::TruncatedFile);
    }
    let count = limit.map_or(declared, |l| l.min(declared));
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload[..count * size].to_vec(),
    })
}

/// Parses a label file, keeping at most `limit` labels.
pub fn parse_labels(bytes: &[u8], limit: Option<usize>) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABELS_MAGIC)?;
    let declared = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < declared {
        return Err(IdxError::TruncatedFile);
    }
    let count = limit.map_or(declared, |l| l.min(declared));
    Ok(payload[..count].to_vec())
}

/// Whole file, gunzipped when it starts with the gzip signature.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Builds a dataset with pixels scaled by `1/255`.
pub fn dataset_from_bytes(
    images: &[u8],
    labels: &[u8],
    limit: Option<usize>,
) -> Result<Dataset, IdxError> {
    let imgs = parse_images(images, None)?;
    let labs = parse_labels(labels, None)?;
    if imgs.count != labs.len() {
        return Err(IdxError::CountMismatch {
            images: imgs.count,
            labels: labs.len(),
        });
    }
    let count = limit.map_or(imgs.count, |l| l.min(imgs.count));
    let size = imgs.rows * imgs.cols;
    let images = imgs
        .pixels
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| px.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    let labels = labs[..count].iter().map(|&l| usize::from(l)).collect();
    Ok(Dataset::new(images, labels)?)
}

pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset, IdxError> {
    dataset_from_bytes(
        &read_maybe_gz(images_path)?,
        &read_maybe_gz(labels_path)?,
        limit,
    )
}

/// Serializes images and labels as IDX byte streams.
pub fn encode_idx(images: &IdxImages, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.pixels.len());
    for word in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    img.extend_from_slice(&images.pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let images = IdxImages {
            count: 3,
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 51, 102, 1, 2, 3, 4, 9, 9, 9, 9],
        };
        encode_idx(&images, &[7, 1, 3])
    }

    #[test]
    fn scales_pixels() {
        let (img, lab) = fixture();
        let d = dataset_from_bytes(&img, &lab, None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), Some(4));
        assert_eq!(d.images()[0], vec![0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.labels(), &[7, 1, 3]);
    }

    #[test]
    fn limit_truncates() {
        let (img, lab) = fixture();
        assert_eq!(dataset_from_bytes(&img, &lab, Some(2)).unwrap().len(), 2);
        assert!(dataset_from_bytes(&img, &lab, Some(0)).unwrap().is_empty());
        assert_eq!(dataset_from_bytes(&img, &lab, Some(10)).unwrap().len(), 3);
    }

    #[test]
    fn wrong_magic() {
        let (img, lab) = fixture();
        assert!(matches!(
            dataset_from_bytes(&img, &img, None),
            Err(IdxError::BadMagic {
                expected: LABELS_MAGIC,
                found: IMAGES_MAGIC
            })
        ));
        assert!(matches!(
            dataset_from_bytes(&lab, &lab, None),
            Err(IdxError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated() {
        let (img, lab) = fixture();
        assert!(matches!(
            dataset_from_bytes(&img[..img.len() - 1], &lab, None),
            Err(IdxError::TruncatedFile)
        ));
        assert!(matches!(
            dataset_from_bytes(&img, &lab[..9], None),
            Err(IdxError::TruncatedFile)
        ));
        assert!(matches!(
            parse_labels(&lab[..3], None),
            Err(IdxError::TruncatedFile)
        ));
    }

    #[test]
    fn count_mismatch() {
        let (img, _) = fixture();
        let (_, lab) = encode_idx(
            &IdxImages {
                count: 0,
                rows: 0,
                cols: 0,
                pixels: vec![],
            },
            &[1, 2],
        );
        assert!(matches!(
            dataset_from_bytes(&img, &lab, None),
            Err(IdxError::CountMismatch {
                images: 3,
                labels: 2
            })
        ));
    }
}
