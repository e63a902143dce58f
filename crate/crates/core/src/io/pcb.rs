use std::path::Path;

use crate::geometry::Point3;
use crate::labels::ClassLabel;

use super::{read_file, write_file, FormatError, Result};

const PCB_MAGIC: &[u8; 4] = b"PCB1";
const PCB_HEADER: usize = 9;
const FLAG_LABELS: u8 = 1;

const GMK_MAGIC: &[u8; 4] = b"GMK1";

/// Contents of a `PCB1` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub labels: Option<Vec<ClassLabel>>,
}

fn check_magic(bytes: &[u8], magic: &[u8; 4]) -> Result<()> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated(format!("{} bytes, no magic", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    Ok(())
}

/// `PCB1` | u32 count | u8 flags | count × (3 × f32 [, u8 label]).
///
/// Coordinates are stored as f32; values not representable in f32 are
/// rounded.
pub fn encode_point_cloud(points: &[Point3], labels: Option<&[ClassLabel]>) -> Vec<u8> {
    if let Some(l) = labels {
        assert_eq!(l.len(), points.len(), "points/labels length mismatch");
    }
    let record = if labels.is_some() { 13 } else { 12 };
    let mut out = Vec::with_capacity(PCB_HEADER + record * points.len());
    out.extend_from_slice(PCB_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    out.push(if labels.is_some() { FLAG_LABELS } else { 0 });
    for (i, p) in points.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(l) = labels {
            out.push(l[i].code());
        }
    }
    out
}

pub fn decode_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    check_magic(bytes, PCB_MAGIC)?;
    if bytes.len() < PCB_HEADER {
        return Err(FormatError::Truncated(format!("{}-byte header", bytes.len())));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let flags = bytes[8];
    if flags & !FLAG_LABELS != 0 {
        return Err(FormatError::Integrity(format!("unknown flag bits {flags:#04x}")));
    }
    let has_labels = flags & FLAG_LABELS != 0;
    let record = if has_labels { 13 } else { 12 };
    let expected = PCB_HEADER + record * count;
    if bytes.len() < expected {
        return Err(FormatError::Truncated(format!(
            "{count} points need {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(FormatError::Integrity(format!(
            "{} trailing bytes after {count} points",
            bytes.len() - expected
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut labels = has_labels.then(|| Vec::with_capacity(count));
    for rec in bytes[PCB_HEADER..].chunks_exact(record) {
        let f = |k: usize| f64::from(f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().expect("4 bytes")));
        points.push(Point3::new(f(0), f(1), f(2)));
        if let Some(labels) = labels.as_mut() {
            labels.push(ClassLabel::from_code(rec[12]).ok_or(FormatError::LabelRange(rec[12]))?);
        }
    }
    Ok(PointCloud { points, labels })
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    decode_point_cloud(&read_file(path.as_ref())?)
}

pub fn write_point_cloud(path: impl AsRef<Path>, points: &[Point3], labels: Option<&[ClassLabel]>) -> Result<()> {
    write_file(path.as_ref(), &encode_point_cloud(points, labels))
}

/// `GMK1` | u32 count | count bytes of 0 / 1.
pub fn encode_ground_mask(mask: &[bool]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + mask.len());
    out.extend_from_slice(GMK_MAGIC);
    out.extend_from_slice(&(mask.len() as u32).to_le_bytes());
    out.extend(mask.iter().map(|&g| g as u8));
    out
}

pub fn decode_ground_mask(bytes: &[u8]) -> Result<Vec<bool>> {
    check_magic(bytes, GMK_MAGIC)?;
    if bytes.len() < 8 {
        return Err(FormatError::Truncated("ground mask header".into()));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(FormatError::Integrity(format!(
            "ground mask declares {count} entries, payload has {}",
            body.len()
        )));
    }
    body.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(FormatError::Integrity(format!("ground flag byte {other}"))),
        })
        .collect()
}

pub fn read_ground_mask(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    decode_ground_mask(&read_file(path.as_ref())?)
}

pub fn write_ground_mask(path: impl AsRef<Path>, mask: &[bool]) -> Result<()> {
    write_file(path.as_ref(), &encode_ground_mask(mask))
}
