//! IDX container parsing and MNIST preprocessing.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pixel count of a flattened 28x28 image.
pub const IMAGE_LEN: usize = 784;
pub const NUM_CLASSES: usize = 10;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdxError {
    #[error("input shorter than the 4-byte magic ({0} bytes)")]
    MissingHeader(usize),
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("unsupported dtype code 0x{0:02x}")]
    UnsupportedDtype(u8),
    #[error("header truncated: rank {rank} needs {needed} bytes, got {actual}")]
    TruncatedHeader {
        rank: usize,
        needed: usize,
        actual: usize,
    },
    #[error("payload truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("dimension product overflows")]
    DimOverflow,
    #[error("expected rank {expected}, got {actual}")]
    RankMismatch { expected: usize, actual: usize },
    #[error("expected dims {expected:?}, got {actual:?}")]
    DimMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdxDtype {
    U8,
    I8,
    I16,
    I32,
    F32,
    F64,
}

impl IdxDtype {
    pub fn from_code(code: u8) -> Result<Self, IdxError> {
        Ok(match code {
            0x08 => IdxDtype::U8,
            0x09 => IdxDtype::I8,
            0x0B => IdxDtype::I16,
            0x0C => IdxDtype::I32,
            0x0D => IdxDtype::F32,
            0x0E => IdxDtype::F64,
            other => return Err(IdxError::UnsupportedDtype(other)),
        })
    }

    pub fn code(self) -> u8 {
        match self {
            IdxDtype::U8 => 0x08,
            IdxDtype::I8 => 0x09,
            IdxDtype::I16 => 0x0B,
            IdxDtype::I32 => 0x0C,
            IdxDtype::F32 => 0x0D,
            IdxDtype::F64 => 0x0E,
        }
    }

    pub fn size(self) -> usize {
        match self {
            IdxDtype::U8 | IdxDtype::I8 => 1,
            IdxDtype::I16 => 2,
            IdxDtype::I32 | IdxDtype::F32 => 4,
            IdxDtype::F64 => 8,
        }
    }
}

/// Decoded IDX tensor. The payload is kept as raw big-endian bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dtype: IdxDtype,
    pub dims: Vec<usize>,
    payload: Vec<u8>,
}

impl IdxTensor {
    pub fn element_count(&self) -> usize {
        element_count(&self.dims).unwrap_or(0)
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Payload as `u8`, only for `U8` tensors.
    pub fn as_u8(&self) -> Option<&[u8]> {
        (self.dtype == IdxDtype::U8).then_some(self.payload.as_slice())
    }

    /// Payload widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        let size = self.dtype.size();
        self.payload
            .chunks_exact(size)
            .map(|b| match self.dtype {
                IdxDtype::U8 => b[0] as f64,
                IdxDtype::I8 => b[0] as i8 as f64,
                IdxDtype::I16 => i16::from_be_bytes([b[0], b[1]]) as f64,
                IdxDtype::I32 => i32::from_be_bytes([b[0], b[1], b[2], b[3]]) as f64,
                IdxDtype::F32 => f32::from_be_bytes([b[0], b[1], b[2], b[3]]) as f64,
                IdxDtype::F64 => f64::from_be_bytes(b.try_into().unwrap()),
            })
            .collect()
    }

    pub fn magic(&self) -> u32 {
        ((self.dtype.code() as u32) << 8) | self.dims.len() as u32
    }

    /// Serializes back to the IDX byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.payload.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_u8(dims: Vec<usize>, payload: Vec<u8>) -> Result<Self, IdxError> {
        let expected = element_count(&dims).ok_or(IdxError::DimOverflow)?;
        if payload.len() != expected {
            return Err(IdxError::Truncated {
                expected,
                actual: payload.len(),
            });
        }
        Ok(IdxTensor {
            dtype: IdxDtype::U8,
            dims,
            payload,
        })
    }
}

// A rank-0 header carries no payload.
fn element_count(dims: &[usize]) -> Option<usize> {
    if dims.is_empty() {
        return Some(0);
    }
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// Decodes an IDX byte stream: two zero bytes, a dtype byte, a rank byte,
/// `rank` big-endian `u32` dims, then a row-major payload.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::MissingHeader(bytes.len()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(IdxError::BadMagic(magic));
    }
    let dtype = IdxDtype::from_code(bytes[2])?;
    let rank = bytes[3] as usize;
    let header_len = 4 + 4 * rank;
    if bytes.len() < header_len {
        return Err(IdxError::TruncatedHeader {
            rank,
            needed: header_len,
            actual: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header_len]
        .chunks_exact(4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    let count = element_count(&dims).ok_or(IdxError::DimOverflow)?;
    let expected = count
        .checked_mul(dtype.size())
        .ok_or(IdxError::DimOverflow)?;
    let payload = &bytes[header_len..];
    if payload.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(IdxError::TrailingBytes(payload.len() - expected));
    }
    Ok(IdxTensor {
        dtype,
        dims,
        payload: payload.to_vec(),
    })
}

/// Reads an IDX file, transparently inflating gzip input.
pub fn read_idx_file(path: &Path) -> crate::Result<IdxTensor> {
    let raw = std::fs::read(path)?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        out
    } else {
        raw
    };
    Ok(parse_idx(&bytes)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stem(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Pixel normalization of [`preprocess`].
pub const PIXEL_MAP: &str = "p/127.5 - 1";

/// How raw pixels become model inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelMap {
    /// `p/127.5 - 1` for every pixel.
    Affine,
    /// The affine map, then per image: subtract the mean and divide by the
    /// largest magnitude, so every image spans `[-1, 1]` around zero.
    #[default]
    Centered,
}

impl PixelMap {
    pub fn description(self) -> &'static str {
        match self {
            PixelMap::Affine => PIXEL_MAP,
            PixelMap::Centered => "v = p/127.5 - 1; v -= mean(v); v /= max|v|",
        }
    }

    pub fn apply(self, data: &mut Dataset) {
        if self == PixelMap::Centered {
            for mut row in data.images.axis_iter_mut(ndarray::Axis(0)) {
                let mean = row.sum() / row.len() as f64;
                row -= mean;
                let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak > 1e-12 {
                    row /= peak;
                } else {
                    row.fill(0.0);
                }
            }
        }
    }
}

impl std::fmt::Display for PixelMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PixelMap::Affine => "affine",
            PixelMap::Centered => "centered",
        })
    }
}

impl std::str::FromStr for PixelMap {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "affine" => Ok(PixelMap::Affine),
            "centered" => Ok(PixelMap::Centered),
            other => Err(crate::Error::param(
                "pixel_map",
                format!("unknown `{other}`"),
            )),
        }
    }
}

/// Flattened images in `[-1, 1]` with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` examples (or all, if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

/// `p -> p / 127.5 - 1`, mapping `[0, 255]` onto `[-1, 1]`.
pub fn scale_pixel(p: u8) -> f64 {
    p as f64 / 127.5 - 1.0
}

/// Flattens a `(n, 28, 28)` u8 image tensor and pairs it with rank-1 labels.
pub fn preprocess(images: &IdxTensor, labels: &IdxTensor, split: Split) -> crate::Result<Dataset> {
    if images.dims.len() != 3 {
        return Err(IdxError::RankMismatch {
            expected: 3,
            actual: images.dims.len(),
        }
        .into());
    }
    if images.dims[1] * images.dims[2] != IMAGE_LEN {
        return Err(IdxError::DimMismatch {
            expected: vec![images.dims[0], 28, 28],
            actual: images.dims.clone(),
        }
        .into());
    }
    if labels.dims.len() != 1 {
        return Err(IdxError::RankMismatch {
            expected: 1,
            actual: labels.dims.len(),
        }
        .into());
    }
    let pixels = images
        .as_u8()
        .ok_or_else(|| crate::Error::Dataset("images must be unsigned bytes".into()))?;
    let label_bytes = labels
        .as_u8()
        .ok_or_else(|| crate::Error::Dataset("labels must be unsigned bytes".into()))?;
    let n = images.dims[0];
    if label_bytes.len() != n {
        return Err(crate::Error::Dataset(format!(
            "{n} images but {} labels",
            label_bytes.len()
        )));
    }
    if let Some(bad) = label_bytes.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(crate::Error::Dataset(format!("label {bad} out of range")));
    }
    let data: Vec<f64> = pixels.iter().map(|&p| scale_pixel(p)).collect();
    let images = Array2::from_shape_vec((n, IMAGE_LEN), data)
        .map_err(|e| crate::Error::Dataset(e.to_string()))?;
    Ok(Dataset {
        images,
        labels: label_bytes.to_vec(),
        split,
    })
}

fn locate(dir: &Path, name: &str) -> crate::Result<PathBuf> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(crate::Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} not found (plain or .gz)", plain.display()),
    )))
}

/// Loads one MNIST split from the standard file names in `dir` with the
/// affine pixel map.
pub fn load_mnist(dir: &Path, split: Split) -> crate::Result<Dataset> {
    load_mnist_with(dir, split, PixelMap::Affine)
}

pub fn load_mnist_with(dir: &Path, split: Split, map: PixelMap) -> crate::Result<Dataset> {
    let images = read_idx_file(&locate(
        dir,
        &format!("{}-images-idx3-ubyte", split.stem()),
    )?)?;
    let labels = read_idx_file(&locate(
        dir,
        &format!("{}-labels-idx1-ubyte", split.stem()),
    )?)?;
    let mut data = preprocess(&images, &labels, split)?;
    map.apply(&mut data);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_file(n: u32, fill: u8) -> Vec<u8> {
        let mut b = vec![0, 0, 0x08, 3];
        for d in [n, 28, 28] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend(std::iter::repeat_n(fill, (n * 784) as usize));
        b
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, 0x08, 1];
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn empty_rank_zero_tensor() {
        let t = parse_idx(&[0, 0, 0x08, 0]).unwrap();
        assert!(t.dims.is_empty());
        assert_eq!(t.element_count(), 0);
    }

    #[test]
    fn zero_sized_dimension() {
        let t = parse_idx(&[0, 0, 0x08, 1, 0, 0, 0, 0]).unwrap();
        assert_eq!(t.dims, vec![0]);
        assert!(t.payload().is_empty());
    }

    #[test]
    fn distinct_errors() {
        assert_eq!(parse_idx(&[0, 0]), Err(IdxError::MissingHeader(2)));
        assert!(matches!(
            parse_idx(&[1, 0, 8, 1]),
            Err(IdxError::BadMagic(_))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 0x42, 1]),
            Err(IdxError::UnsupportedDtype(0x42))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 8, 2, 0, 0, 0, 1]),
            Err(IdxError::TruncatedHeader { .. })
        ));
        let mut f = label_file(&[1, 2, 3]);
        f.pop();
        assert!(matches!(parse_idx(&f), Err(IdxError::Truncated { .. })));
        let mut f = label_file(&[1, 2, 3]);
        f.push(9);
        assert_eq!(parse_idx(&f), Err(IdxError::TrailingBytes(1)));
    }

    #[test]
    fn wider_dtypes_decode_big_endian() {
        let mut b = vec![0, 0, 0x0B, 1, 0, 0, 0, 2];
        b.extend_from_slice(&(-2i16).to_be_bytes());
        b.extend_from_slice(&300i16.to_be_bytes());
        let t = parse_idx(&b).unwrap();
        assert_eq!(t.to_f64(), vec![-2.0, 300.0]);
        assert_eq!(t.to_bytes(), b);
    }

    #[test]
    fn preprocess_maps_endpoints() {
        let images = parse_idx(&image_file(2, 0)).unwrap();
        let labels = parse_idx(&label_file(&[3, 7])).unwrap();
        let ds = preprocess(&images, &labels, Split::Test).unwrap();
        assert_eq!(ds.images.shape(), &[2, 784]);
        assert!(ds.images.iter().all(|&v| v == -1.0));
        assert_eq!(scale_pixel(255), 1.0);
        assert_eq!(scale_pixel(0), -1.0);
    }

    #[test]
    fn centered_map_spans_unit_range() {
        let mut ds = Dataset {
            images: Array2::from_shape_fn((2, 784), |(i, j)| {
                scale_pixel(((i * 31 + j * 7) % 256) as u8)
            }),
            labels: vec![0, 1],
            split: Split::Test,
        };
        PixelMap::Centered.apply(&mut ds);
        for row in ds.images.rows() {
            assert!(row.sum().abs() < 1e-9);
            assert!((row.iter().fold(0.0f64, |m, v| m.max(v.abs())) - 1.0).abs() < 1e-15);
        }
        let mut flat = ds.head(1);
        flat.images.fill(0.3);
        PixelMap::Centered.apply(&mut flat);
        assert!(flat.images.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_rejects_wrong_rank_and_counts() {
        let labels = parse_idx(&label_file(&[3])).unwrap();
        assert!(preprocess(&labels, &labels, Split::Test).is_err());
        let images = parse_idx(&image_file(2, 5)).unwrap();
        assert!(preprocess(&images, &labels, Split::Test).is_err());
        let bad_labels = parse_idx(&label_file(&[3, 12])).unwrap();
        assert!(preprocess(&images, &bad_labels, Split::Test).is_err());
    }

    #[test]
    fn gzip_files_are_inflated() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.gz");
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&label_file(&[4, 5, 6])).unwrap();
        std::fs::write(&path, enc.finish().unwrap()).unwrap();
        let t = read_idx_file(&path).unwrap();
        assert_eq!(t.payload(), &[4, 5, 6]);
    }

    proptest! {
        #[test]
        fn parse_is_deterministic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(parse_idx(&bytes), parse_idx(&bytes));
        }

        #[test]
        fn well_formed_round_trip(dims in proptest::collection::vec(0usize..5, 1..4), seed in any::<u8>()) {
            let count: usize = dims.iter().product();
            let payload: Vec<u8> = (0..count).map(|i| (i as u8).wrapping_add(seed)).collect();
            let t = IdxTensor::from_u8(dims, payload).unwrap();
            prop_assert_eq!(parse_idx(&t.to_bytes()).unwrap(), t);
        }
    }
}
