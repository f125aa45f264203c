//! Versioned little-endian binary files for models and preprocessed datasets,
//! plus a JSON sidecar for model metadata.
//!
//! Model layout: `b"QSMCMLP1"`, version `u32`, activation `u32`, matrix count
//! `u32`, then per matrix rows `u64`, cols `u64` and row-major `f64` values.
//! Dataset layout: `b"QSMCDAT1"`, version `u32`, split `u32`, rows `u64`,
//! cols `u64`, row-major `f64` pixels, then one `u8` label per row.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PixelMap, Split};
use crate::dnn::{Activation, MlpModel, TrainConfig};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"QSMCMLP1";
pub const DATASET_MAGIC: &[u8; 8] = b"QSMCDAT1";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::Format("bad magic".into()));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows =
            usize::try_from(self.u64()?).map_err(|_| Error::Format("row count overflow".into()))?;
        let cols = usize::try_from(self.u64()?)
            .map_err(|_| Error::Format("column count overflow".into()))?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        let raw = self.take(len)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Format(e.to_string()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &Array2<f64>) {
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn activation_code(a: Activation) -> u32 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    }
}

pub fn model_to_bytes(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * (model.w1().len() + model.w2().len()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&activation_code(model.activation()).to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    put_matrix(&mut out, model.w1());
    put_matrix(&mut out, model.w2());
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<MlpModel> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(MODEL_MAGIC)?;
    let activation = match r.u32()? {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        c => return Err(Error::Format(format!("unknown activation code {c}"))),
    };
    let count = r.u32()?;
    if count != 2 {
        return Err(Error::Format(format!("expected 2 matrices, found {count}")));
    }
    let w1 = r.matrix()?;
    let w2 = r.matrix()?;
    r.finish()?;
    MlpModel::new(w1, w2, activation).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    model_from_bytes(&fs::read(path)?)
}

/// JSON sidecar stored next to a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format_version: u32,
    pub dims: [usize; 3],
    pub activation: Activation,
    pub rms: [f64; 2],
    pub pixel_map: PixelMap,
    pub pixel_map_formula: String,
    pub train_config: Option<TrainConfig>,
    pub test_accuracy: Option<f64>,
}

impl ModelMetadata {
    pub fn for_model(model: &MlpModel, pixel_map: PixelMap) -> Self {
        ModelMetadata {
            format_version: FORMAT_VERSION,
            dims: [model.inputs(), model.hidden(), model.outputs()],
            activation: model.activation(),
            rms: model.rms(),
            pixel_map,
            pixel_map_formula: pixel_map.description().to_string(),
            train_config: None,
            test_accuracy: None,
        }
    }
}

/// `model.bin` -> `model.json`.
pub fn sidecar_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("json")
}

pub fn save_metadata(path: &Path, meta: &ModelMetadata) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn load_metadata(path: &Path) -> Result<ModelMetadata> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn dataset_to_bytes(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + data.images.len() * 8 + data.labels.len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let split: u32 = match data.split {
        Split::Train => 0,
        Split::Test => 1,
    };
    out.extend_from_slice(&split.to_le_bytes());
    put_matrix(&mut out, &data.images);
    out.extend_from_slice(&data.labels);
    out
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(DATASET_MAGIC)?;
    let split = match r.u32()? {
        0 => Split::Train,
        1 => Split::Test,
        c => return Err(Error::Format(format!("unknown split code {c}"))),
    };
    let images = r.matrix()?;
    let labels = r.take(images.nrows())?.to_vec();
    r.finish()?;
    Ok(Dataset {
        images,
        labels,
        split,
    })
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, dataset_to_bytes(data))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_bytes(&fs::read(path)?)
}
