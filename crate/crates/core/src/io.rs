//! Portable on-disk arrays: a `<name>.json` header next to a `<name>.bin`
//! little-endian payload.
//!
//! `complex64` payloads are interleaved `(re, im)` float32 pairs; `float64`
//! payloads are plain doubles. Arrays are always row-major.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::array::C64;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex64,
    Float64,
}

impl Dtype {
    pub fn size(self) -> usize {
        8
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "complex64" => Some(Dtype::Complex64),
            "float64" => Some(Dtype::Float64),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::Complex64 => "complex64",
            Dtype::Float64 => "float64",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    shape: Vec<usize>,
    dtype: String,
    order: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Complex64(ArrayD<Complex32>),
    Float64(ArrayD<f64>),
}

impl ArrayData {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::Complex64(_) => Dtype::Complex64,
            ArrayData::Float64(_) => Dtype::Float64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            ArrayData::Complex64(a) => a.shape(),
            ArrayData::Float64(a) => a.shape(),
        }
    }

    /// Complex view in double precision; real arrays get a zero imaginary part.
    pub fn to_complex(&self) -> ArrayD<C64> {
        match self {
            ArrayData::Complex64(a) => a.mapv(|z| C64::new(z.re as f64, z.im as f64)),
            ArrayData::Float64(a) => a.mapv(|v| C64::new(v, 0.0)),
        }
    }

    pub fn to_real(&self) -> Result<ArrayD<f64>> {
        match self {
            ArrayData::Float64(a) => Ok(a.clone()),
            ArrayData::Complex64(_) => Err(Error::arg("expected a float64 array, found complex64")),
        }
    }

    pub fn from_complex(a: &ArrayD<C64>) -> Self {
        ArrayData::Complex64(a.mapv(|z| Complex32::new(z.re as f32, z.im as f32)))
    }
}

/// `x0`, `x0.json` and `x0.bin` all name the same array pair.
pub fn file_pair(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let path = path.as_ref();
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut bin = stem.into_os_string();
    bin.push(".bin");
    (json.into(), bin.into())
}

pub fn save_array(path: impl AsRef<Path>, array: &ArrayData) -> Result<()> {
    let (json_path, bin_path) = file_pair(path);
    let header = Header {
        shape: array.shape().to_vec(),
        dtype: array.dtype().name().to_string(),
        order: "row-major".to_string(),
    };
    let mut payload = Vec::with_capacity(array.shape().iter().product::<usize>() * 8);
    match array {
        ArrayData::Complex64(a) => {
            for z in a.as_standard_layout().iter() {
                payload.extend_from_slice(&z.re.to_le_bytes());
                payload.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        ArrayData::Float64(a) => {
            for v in a.as_standard_layout().iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&json_path, serde_json::to_vec_pretty(&header)?)?;
    fs::write(&bin_path, payload)?;
    Ok(())
}

pub fn load_array(path: impl AsRef<Path>) -> Result<ArrayData> {
    let (json_path, bin_path) = file_pair(path);
    let fail = |reason: String| Error::Format { path: json_path.clone(), reason };
    let header: Header = serde_json::from_slice(&fs::read(&json_path)?)?;
    let dtype = Dtype::parse(&header.dtype).ok_or_else(|| fail(format!("unknown dtype {:?}", header.dtype)))?;
    if header.order != "row-major" {
        return Err(fail(format!("unsupported order {:?}", header.order)));
    }
    let count: usize = header.shape.iter().product();
    let payload = fs::read(&bin_path)?;
    let expected = count * dtype.size();
    if payload.len() < expected {
        return Err(fail(format!("truncated payload: expected {expected} bytes, found {}", payload.len())));
    }
    if payload.len() > expected {
        return Err(fail(format!(
            "header/payload length mismatch: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let shape = IxDyn(&header.shape);
    let word = |i: usize| -> [u8; 4] { payload[i..i + 4].try_into().unwrap() };
    let data = match dtype {
        Dtype::Complex64 => {
            let v: Vec<Complex32> = (0..count)
                .map(|k| Complex32::new(f32::from_le_bytes(word(8 * k)), f32::from_le_bytes(word(8 * k + 4))))
                .collect();
            ArrayData::Complex64(ArrayD::from_shape_vec(shape, v).map_err(|e| fail(e.to_string()))?)
        }
        Dtype::Float64 => {
            let v: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ArrayData::Float64(ArrayD::from_shape_vec(shape, v).map_err(|e| fail(e.to_string()))?)
        }
    };
    Ok(data)
}

pub fn save_complex<D: ndarray::Dimension>(path: impl AsRef<Path>, a: &ndarray::Array<C64, D>) -> Result<()> {
    save_array(path, &ArrayData::from_complex(&a.clone().into_dyn()))
}

pub fn save_real<D: ndarray::Dimension>(path: impl AsRef<Path>, a: &ndarray::Array<f64, D>) -> Result<()> {
    save_array(path, &ArrayData::Float64(a.clone().into_dyn()))
}

pub fn load_complex(path: impl AsRef<Path>) -> Result<ArrayD<C64>> {
    Ok(load_array(path)?.to_complex())
}

pub fn load_real(path: impl AsRef<Path>) -> Result<ArrayD<f64>> {
    load_array(path)?.to_real()
}
