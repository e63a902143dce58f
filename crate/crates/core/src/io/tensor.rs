use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::radar::{RadarTensorRaed, RaeTensor, N_ELEVATION};
use crate::voxel::LabelCube;

use super::{read_file, read_text, write_file, FormatError, Result};

const ROW_MAJOR: &str = "row-major";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
    I32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 | Dtype::I32 => 4,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "u8" => Ok(Dtype::U8),
            "i32" => Ok(Dtype::I32),
            other => Err(FormatError::UnknownDtype(other.to_string())),
        }
    }
}

/// JSON sidecar describing a raw tensor payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub order: String,
    #[serde(default)]
    pub axes: Vec<String>,
    /// Number of elevation bins behind a RAED elevation-index channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_bins: Option<usize>,
}

impl TensorMeta {
    pub fn new(shape: &[usize], dtype: Dtype, axes: &[&str]) -> Self {
        Self {
            shape: shape.to_vec(),
            dtype,
            order: ROW_MAJOR.to_string(),
            axes: axes.iter().map(|s| s.to_string()).collect(),
            elevation_bins: None,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::U8(_) => Dtype::U8,
            TensorData::I32(_) => Dtype::I32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Little-endian payload bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::U8(v) => v.clone(),
            TensorData::I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub meta: TensorMeta,
    pub data: TensorData,
}

impl Tensor {
    fn expect_axes(self, what: &str, rank: usize, dtype: Dtype) -> Result<Self> {
        if self.meta.shape.len() != rank || self.meta.dtype != dtype {
            return Err(FormatError::Dimension(format!(
                "{what} needs a rank-{rank} {dtype:?} tensor, got shape {:?} {:?}",
                self.meta.shape, self.meta.dtype
            )));
        }
        Ok(self)
    }
}

/// `cube.u8` → `cube.u8.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Validates a sidecar document against a payload.
pub fn decode_tensor(sidecar_json: &str, payload: &[u8]) -> Result<Tensor> {
    let raw: serde_json::Value =
        serde_json::from_str(sidecar_json).map_err(|e| FormatError::Document(e.to_string()))?;
    for key in ["shape", "dtype", "order"] {
        if raw.get(key).is_none() {
            return Err(FormatError::MissingKey(key.to_string()));
        }
    }
    if let Some(s) = raw.get("dtype").and_then(|d| d.as_str()) {
        Dtype::parse(s)?;
    }
    let meta: TensorMeta =
        serde_json::from_value(raw).map_err(|e| FormatError::Document(e.to_string()))?;
    if meta.order != ROW_MAJOR {
        return Err(FormatError::Unsupported(format!("element order {:?}", meta.order)));
    }
    if !meta.axes.is_empty() && meta.axes.len() != meta.shape.len() {
        return Err(FormatError::Document(format!(
            "{} axis names for a rank-{} tensor",
            meta.axes.len(),
            meta.shape.len()
        )));
    }
    let n = meta
        .shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .and_then(|n| n.checked_mul(meta.dtype.size()))
        .ok_or_else(|| FormatError::Integrity(format!("shape {:?} overflows", meta.shape)))?;
    if payload.len() != n {
        return Err(FormatError::Integrity(format!(
            "shape {:?} of {:?} needs {n} bytes, payload has {}",
            meta.shape,
            meta.dtype,
            payload.len()
        )));
    }
    let data = match meta.dtype {
        Dtype::U8 => TensorData::U8(payload.to_vec()),
        Dtype::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        Dtype::I32 => TensorData::I32(
            payload
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
    };
    Ok(Tensor { meta, data })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let sidecar = read_text(&sidecar_path(path))?;
    decode_tensor(&sidecar, &read_file(path)?)
}

/// Writes the payload and its sidecar.
pub fn write_tensor(path: impl AsRef<Path>, meta: &TensorMeta, data: &TensorData) -> Result<()> {
    let path = path.as_ref();
    if meta.dtype != data.dtype() || meta.len() != data.len() {
        return Err(FormatError::Integrity(format!(
            "sidecar says {:?} {:?}, data is {:?} x {}",
            meta.shape,
            meta.dtype,
            data.dtype(),
            data.len()
        )));
    }
    let json = serde_json::to_string_pretty(meta).map_err(|e| FormatError::Document(e.to_string()))?;
    write_file(path, &data.to_bytes())?;
    write_file(&sidecar_path(path), json.as_bytes())
}

pub fn write_label_cube(path: impl AsRef<Path>, cube: &LabelCube) -> Result<()> {
    let meta = TensorMeta::new(&cube.dims(), Dtype::U8, &["range", "azimuth", "elevation"]);
    write_tensor(path, &meta, &TensorData::U8(cube.codes().to_vec()))
}

pub fn read_label_cube(path: impl AsRef<Path>) -> Result<LabelCube> {
    let t = read_tensor(path)?.expect_axes("label cube", 3, Dtype::U8)?;
    let dims = [t.meta.shape[0], t.meta.shape[1], t.meta.shape[2]];
    let TensorData::U8(codes) = t.data else {
        unreachable!("dtype checked")
    };
    if let Some(&bad) = codes.iter().find(|&&c| c > 4) {
        return Err(FormatError::LabelRange(bad));
    }
    LabelCube::from_codes(dims, codes).map_err(FormatError::Integrity)
}

/// Writes the mean-power cube; the per-cell Doppler counts are not stored.
pub fn write_rae(path: impl AsRef<Path>, rae: &RaeTensor) -> Result<()> {
    let meta = TensorMeta::new(&rae.dims, Dtype::F32, &["range", "azimuth", "elevation"]);
    write_tensor(path, &meta, &TensorData::F32(rae.data.clone()))
}

/// Reads a mean-power cube. Counts come back as zero.
pub fn read_rae(path: impl AsRef<Path>) -> Result<RaeTensor> {
    let t = read_tensor(path)?.expect_axes("RAE cube", 3, Dtype::F32)?;
    let dims = [t.meta.shape[0], t.meta.shape[1], t.meta.shape[2]];
    let TensorData::F32(data) = t.data else {
        unreachable!("dtype checked")
    };
    let counts = vec![0; data.len()];
    Ok(RaeTensor { dims, data, counts })
}

/// Power (f32) and one-based elevation index (i32) channels, both
/// `[doppler][azimuth][range]`.
pub fn write_raed(power_path: impl AsRef<Path>, elevation_path: impl AsRef<Path>, t: &RadarTensorRaed) -> Result<()> {
    let axes = ["doppler", "azimuth", "range"];
    write_tensor(
        power_path,
        &TensorMeta::new(&t.dims(), Dtype::F32, &axes),
        &TensorData::F32(t.power().to_vec()),
    )?;
    let mut meta = TensorMeta::new(&t.dims(), Dtype::I32, &axes);
    meta.elevation_bins = Some(t.n_elevation());
    write_tensor(elevation_path, &meta, &TensorData::I32(t.elevation().to_vec()))
}

pub fn read_raed(power_path: impl AsRef<Path>, elevation_path: impl AsRef<Path>) -> Result<RadarTensorRaed> {
    let p = read_tensor(power_path)?.expect_axes("RAED power", 3, Dtype::F32)?;
    let e = read_tensor(elevation_path)?.expect_axes("RAED elevation", 3, Dtype::I32)?;
    if p.meta.shape != e.meta.shape {
        return Err(FormatError::Dimension(format!(
            "power shape {:?} vs elevation shape {:?}",
            p.meta.shape, e.meta.shape
        )));
    }
    let dims = [p.meta.shape[0], p.meta.shape[1], p.meta.shape[2]];
    let n_elevation = e.meta.elevation_bins.unwrap_or(N_ELEVATION);
    let (TensorData::F32(power), TensorData::I32(elev)) = (p.data, e.data) else {
        unreachable!("dtype checked")
    };
    RadarTensorRaed::new(dims, n_elevation, power, elev).map_err(|e| FormatError::Integrity(e.to_string()))
}
