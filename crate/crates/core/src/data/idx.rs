//! IDX files (the MNIST distribution format): a big-endian `u32` magic number,
//! one big-endian `u32` per dimension, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{ExposeError, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, source: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| ExposeError::Parse {
            location: source.to_string(),
            message: format!("file ends inside the header (offset {at})"),
        })
}

fn check_magic(bytes: &[u8], expected: u32, source: &str) -> Result<()> {
    let found = be_u32(bytes, 0, source)?;
    if found != expected {
        return Err(ExposeError::IdxMagic {
            path: source.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], offset: usize, len: usize, source: &str) -> Result<&'a [u8]> {
    let body = &bytes[offset..];
    if body.len() != len {
        return Err(ExposeError::Parse {
            location: source.to_string(),
            message: format!("header promises {len} data bytes, file carries {}", body.len()),
        });
    }
    Ok(body)
}

/// Images as rows of pixel intensities in `[0, 1]` (`byte / 255`).
/// Returns `(rows, pixels_per_image, values)`.
pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<(usize, usize, Vec<f64>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, source)?;
    let n = be_u32(bytes, 4, source)? as usize;
    let h = be_u32(bytes, 8, source)? as usize;
    let w = be_u32(bytes, 12, source)? as usize;
    let pixels = h * w;
    let body = payload(bytes, 16, n * pixels, source)?;
    Ok((n, pixels, body.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_idx_labels(bytes: &[u8], source: &str) -> Result<Vec<i64>> {
    check_magic(bytes, IDX_LABELS_MAGIC, source)?;
    let n = be_u32(bytes, 4, source)? as usize;
    let body = payload(bytes, 8, n, source)?;
    Ok(body.iter().map(|&b| i64::from(b)).collect())
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let ibytes = fs::read(ip).map_err(|e| ExposeError::io(ip, e))?;
    let lbytes = fs::read(lp).map_err(|e| ExposeError::io(lp, e))?;
    let isrc = ip.display().to_string();
    let (n, d, values) = parse_idx_images(&ibytes, &isrc)?;
    let labels = parse_idx_labels(&lbytes, &lp.display().to_string())?;
    if labels.len() != n {
        return Err(ExposeError::LabelCountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    Dataset::new(
        values,
        d,
        Some(labels),
        isrc.clone(),
        format!("idx:{isrc}; pixels scaled to [0,1] as byte/255"),
    )
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_by_two_images() {
        let bytes = fixtures::images(&[&[0, 255, 51, 102], &[255, 255, 0, 0]], 2, 2);
        let (n, d, values) = parse_idx_images(&bytes, "mem").unwrap();
        assert_eq!((n, d), (2, 4));
        assert_eq!(values, vec![0.0, 1.0, 0.2, 0.4, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_magic_and_short_payload() {
        let labels = fixtures::labels(&[1, 2]);
        assert!(matches!(
            parse_idx_images(&labels, "mem"),
            Err(ExposeError::IdxMagic { expected: IDX_IMAGES_MAGIC, found: IDX_LABELS_MAGIC, .. })
        ));
        let mut images = fixtures::images(&[&[1, 2, 3, 4]], 2, 2);
        images.pop();
        assert!(parse_idx_images(&images, "mem").is_err());
        assert!(parse_idx_labels(&[0, 0, 8], "mem").is_err());
    }

    #[test]
    fn load_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        fs::write(&ip, fixtures::images(&[&[0, 0, 0, 0], &[255, 0, 0, 0]], 2, 2)).unwrap();
        fs::write(&lp, fixtures::labels(&[7, 1, 3])).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(matches!(err, ExposeError::LabelCountMismatch { images: 2, labels: 3 }));
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'));

        fs::write(&lp, fixtures::labels(&[7, 1])).unwrap();
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.labels().unwrap(), &[7, 1]);
        assert_eq!(ds.row(1), &[1.0, 0.0, 0.0, 0.0]);
    }
}
