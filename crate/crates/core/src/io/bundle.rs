use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::labelling::FrameInputs;
use crate::radar::RadarTensorRaed;

use super::{
    read_calibration, read_detections, read_ground_mask, read_point_cloud, read_raed,
    read_semantic_mask, read_text, write_file, Calibration, FormatError, Result,
};

/// When set, relative bundle paths resolve against this directory instead
/// of the bundle's own directory.
pub const DATA_ROOT_ENV: &str = "RADLABEL_DATA_ROOT";

/// The files making up one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameBundle {
    pub frame_id: String,
    pub points: PathBuf,
    pub detections: PathBuf,
    pub calibration: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_mapping: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raed_power: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raed_elevation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_mask: Option<PathBuf>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything a bundle points at, parsed and validated.
#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub frame_id: String,
    pub inputs: FrameInputs,
    pub calibration: Calibration,
    pub raed: Option<RadarTensorRaed>,
}

impl FrameBundle {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut b: FrameBundle = toml::from_str(text).map_err(|e| FormatError::Document(e.to_string()))?;
        if b.mask.is_some() != b.mask_mapping.is_some() {
            return Err(FormatError::MissingKey(
                if b.mask.is_some() { "mask_mapping" } else { "mask" }.to_string(),
            ));
        }
        if b.raed_power.is_some() != b.raed_elevation.is_some() {
            return Err(FormatError::MissingKey(
                if b.raed_power.is_some() { "raed_elevation" } else { "raed_power" }.to_string(),
            ));
        }
        b.base_dir = base_dir.into();
        Ok(b)
    }

    /// Reads a bundle file. Relative paths resolve against the data root
    /// (see [`DATA_ROOT_ENV`]) or else the bundle's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        Self::parse(&read_text(path)?, base)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| FormatError::Document(e.to_string()))?;
        write_file(path.as_ref(), text.as_bytes())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads and cross-checks every referenced file.
    pub fn load(&self) -> Result<LoadedFrame> {
        let cloud = read_point_cloud(self.resolve(&self.points))?;
        let detections = read_detections(self.resolve(&self.detections))?;
        let calibration = read_calibration(self.resolve(&self.calibration))?;
        let camera = match (&self.mask, &self.mask_mapping) {
            (Some(m), Some(map)) => {
                let cam = calibration.camera;
                let mask = read_semantic_mask(self.resolve(m), self.resolve(map), Some((cam.width, cam.height)))?;
                Some((cam, mask))
            }
            _ => None,
        };
        let external_ground = match &self.ground_mask {
            Some(p) => {
                let g = read_ground_mask(self.resolve(p))?;
                if g.len() != cloud.points.len() {
                    return Err(FormatError::Dimension(format!(
                        "ground mask has {} entries for {} points",
                        g.len(),
                        cloud.points.len()
                    )));
                }
                Some(g)
            }
            None => None,
        };
        let raed = match (&self.raed_power, &self.raed_elevation) {
            (Some(p), Some(e)) => Some(read_raed(self.resolve(p), self.resolve(e))?),
            _ => None,
        };
        Ok(LoadedFrame {
            frame_id: self.frame_id.clone(),
            inputs: FrameInputs {
                points: cloud.points,
                detections,
                camera,
                external_ground,
            },
            calibration,
            raed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_resolve() {
        let b = FrameBundle::parse(
            "frame_id = \"f1\"\npoints = \"p.pcb\"\ndetections = \"/abs/d.txt\"\ncalibration = \"c.toml\"\n",
            "/data",
        )
        .unwrap();
        assert_eq!(b.resolve(&b.points), PathBuf::from("/data/p.pcb"));
        assert_eq!(b.resolve(&b.detections), PathBuf::from("/abs/d.txt"));
        assert!(b.mask.is_none());
    }

    #[test]
    fn paired_keys_required() {
        let base = "frame_id = \"f\"\npoints = \"p\"\ndetections = \"d\"\ncalibration = \"c\"\n";
        let e = FrameBundle::parse(&format!("{base}mask = \"m.pgm\"\n"), "").unwrap_err();
        assert!(matches!(e, FormatError::MissingKey(ref k) if k == "mask_mapping"));
        let e = FrameBundle::parse(&format!("{base}raed_elevation = \"e\"\n"), "").unwrap_err();
        assert!(matches!(e, FormatError::MissingKey(ref k) if k == "raed_power"));
        assert!(FrameBundle::parse("frame_id = \"f\"\n", "").is_err());
        assert!(FrameBundle::parse(&format!("{base}bogus = 1\n"), "").is_err());
    }
}
