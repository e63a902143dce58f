use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, RigidTransform};
use crate::labelling::CameraModel;

use super::{read_text, write_file, FormatError, Result};

/// Orthonormality tolerance for stored rotations.
pub const CALIB_TOL: f64 = 1e-6;

/// Camera intrinsics and the two extrinsics of a sensor rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub camera: CameraModel,
    pub lidar_to_radar: RigidTransform,
}

#[derive(Serialize, Deserialize)]
struct CalibDoc {
    image_width: Option<u32>,
    image_height: Option<u32>,
    /// Row-major 3x3.
    intrinsics: Option<Vec<f64>>,
    /// Row-major 4x4.
    lidar_to_camera: Option<Vec<f64>>,
    lidar_to_radar: Option<Vec<f64>>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| FormatError::MissingKey(key.to_string()))
}

fn transform_from(key: &str, m: &[f64]) -> Result<RigidTransform> {
    if m.len() != 16 {
        return Err(FormatError::Calibration(format!("{key} needs 16 values, got {}", m.len())));
    }
    if m[12..] != [0.0, 0.0, 0.0, 1.0] {
        return Err(FormatError::Calibration(format!("{key} bottom row must be 0 0 0 1")));
    }
    let r = [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]];
    let t = Point3::new(m[3], m[7], m[11]);
    RigidTransform::with_tolerance(r, t, CALIB_TOL)
        .map_err(|e| FormatError::Calibration(format!("{key}: {e}")))
}

fn flatten(t: &RigidTransform) -> Vec<f64> {
    t.to_matrix4().iter().flatten().copied().collect()
}

pub fn parse_calibration(text: &str) -> Result<Calibration> {
    let doc: CalibDoc = toml::from_str(text).map_err(|e| FormatError::Document(e.to_string()))?;
    let width = required(doc.image_width, "image_width")?;
    let height = required(doc.image_height, "image_height")?;
    let k = required(doc.intrinsics, "intrinsics")?;
    let l2c = required(doc.lidar_to_camera, "lidar_to_camera")?;
    let l2r = required(doc.lidar_to_radar, "lidar_to_radar")?;
    if k.len() != 9 {
        return Err(FormatError::Calibration(format!("intrinsics needs 9 values, got {}", k.len())));
    }
    if k[1] != 0.0 || k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0 {
        return Err(FormatError::Calibration(
            "intrinsics must be [fx 0 cx; 0 fy cy; 0 0 1] (zero skew)".into(),
        ));
    }
    let camera = CameraModel::new([k[0], k[4], k[2], k[5]], width, height, transform_from("lidar_to_camera", &l2c)?)
        .map_err(|e| FormatError::Calibration(e.to_string()))?;
    Ok(Calibration {
        camera,
        lidar_to_radar: transform_from("lidar_to_radar", &l2r)?,
    })
}

pub fn format_calibration(c: &Calibration) -> String {
    let doc = CalibDoc {
        image_width: Some(c.camera.width),
        image_height: Some(c.camera.height),
        intrinsics: Some(c.camera.intrinsics().iter().flatten().copied().collect()),
        lidar_to_camera: Some(flatten(&c.camera.lidar_to_camera)),
        lidar_to_radar: Some(flatten(&c.lidar_to_radar)),
    };
    toml::to_string(&doc).expect("calibration serializes")
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<Calibration> {
    parse_calibration(&read_text(path.as_ref())?)
}

pub fn write_calibration(path: impl AsRef<Path>, c: &Calibration) -> Result<()> {
    write_file(path.as_ref(), format_calibration(c).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_rpy;

    fn sample() -> Calibration {
        let l2c = RigidTransform::new(
            [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]],
            Point3::new(0.01, -0.2, 0.3),
        )
        .unwrap();
        Calibration {
            camera: CameraModel::new([480.5, 481.25, 480.0, 270.0], 960, 540, l2c).unwrap(),
            lidar_to_radar: RigidTransform::new(rotation_rpy(0.01, -0.02, 0.3), Point3::new(-0.1, 0.0, 0.6)).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(parse_calibration(&format_calibration(&c)).unwrap(), c);
    }

    #[test]
    fn missing_key_is_named() {
        let text = format_calibration(&sample());
        let text: String = text.lines().filter(|l| !l.starts_with("lidar_to_radar")).map(|l| format!("{l}\n")).collect();
        let e = parse_calibration(&text).unwrap_err();
        assert!(matches!(e, FormatError::MissingKey(ref k) if k == "lidar_to_radar"), "{e}");
    }

    #[test]
    fn non_orthonormal_rotation_rejected() {
        let text = "image_width = 4\nimage_height = 4\nintrinsics = [2.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0]\n\
                    lidar_to_camera = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]\n\
                    lidar_to_radar = [1.01, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]\n";
        let e = parse_calibration(text).unwrap_err();
        assert!(matches!(e, FormatError::Calibration(ref m) if m.contains("lidar_to_radar")), "{e}");
        let skewed = text.replacen("[2.0, 0.0, 2.0", "[2.0, 0.1, 2.0", 1).replace("1.01", "1.0");
        assert!(matches!(parse_calibration(&skewed), Err(FormatError::Calibration(_))));
        assert!(parse_calibration(&text.replace("1.01", "1.0")).is_ok());
    }
}
