//! File formats.
//!
//! | artifact            | format                                                   |
//! |---------------------|----------------------------------------------------------|
//! | point cloud         | `PCB1` binary, f32 xyz + optional u8 label               |
//! | detections          | text, `class score cx cy cz dx dy dz heading` per line   |
//! | tensors / cubes     | raw little-endian payload + `<file>.json` sidecar        |
//! | calibration         | TOML: intrinsics, lidar→camera, lidar→radar              |
//! | semantic mask       | binary PGM (`P5`, maxval 255) + `id target` mapping text |
//! | ground mask         | `GMK1` binary, one byte per point                        |
//! | frame bundle        | TOML listing the files of one frame                      |
//!
//! All multi-byte values are little-endian. Readers are reentrant;
//! concurrent writes to one path are the caller's problem.

mod bundle;
mod calib;
mod detections;
mod mask;
mod pcb;
mod tensor;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use bundle::{FrameBundle, LoadedFrame, DATA_ROOT_ENV};
pub use calib::{
    format_calibration, parse_calibration, read_calibration, write_calibration, Calibration, CALIB_TOL,
};
pub use detections::{format_detections, parse_detections, read_detections, write_detections};
pub use mask::{
    decode_pgm, encode_pgm, parse_mapping, read_semantic_mask, write_mapping, write_semantic_mask,
};
pub use pcb::{
    decode_ground_mask, decode_point_cloud, encode_ground_mask, encode_point_cloud,
    read_ground_mask, read_point_cloud, write_ground_mask, write_point_cloud, PointCloud,
};
pub use tensor::{
    decode_tensor, read_label_cube, read_raed, read_rae, read_tensor, sidecar_path,
    write_label_cube, write_raed, write_rae, write_tensor, Dtype, Tensor, TensorData, TensorMeta,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("label code {0} outside 0..=4")]
    LabelRange(u8),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unknown element type {0:?} (expected f32, u8 or i32)")]
    UnknownDtype(String),
    #[error("invalid calibration: {0}")]
    Calibration(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid mapping: {0}")]
    Mapping(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}
