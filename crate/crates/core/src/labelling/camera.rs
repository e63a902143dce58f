//! Pinhole projection of LiDAR points and label refinement from an image
//! segmentation mask.

use std::collections::BTreeSet;

use crate::geometry::{Point3, RigidTransform};
use crate::labels::ClassLabel;
use crate::par;

use super::LabelError;

/// Pinhole camera with zero skew. `lidar_to_camera` maps LiDAR points into
/// the optical frame (x right, y down, z along the optical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub lidar_to_camera: RigidTransform,
}

impl CameraModel {
    pub fn new(
        [fx, fy, cx, cy]: [f64; 4],
        width: u32,
        height: u32,
        lidar_to_camera: RigidTransform,
    ) -> Result<Self, LabelError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(LabelError::Param(format!("focal lengths must be > 0, got {fx}, {fy}")));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(LabelError::Param(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            lidar_to_camera,
        })
    }

    /// Row-major intrinsic matrix.
    pub fn intrinsics(&self) -> [[f64; 3]; 3] {
        [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
    }

    pub fn project(&self, p_lidar: Point3) -> Projection {
        let c = self.lidar_to_camera.apply(p_lidar);
        let u = self.fx * c.x / c.z + self.cx;
        let v = self.fy * c.y / c.z + self.cy;
        let valid = c.z > 0.0
            && u >= 0.0
            && v >= 0.0
            && u < self.width as f64
            && v < self.height as f64;
        Projection { u, v, valid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

impl Projection {
    /// Pixel containing the projection, when valid.
    pub fn pixel(&self) -> Option<(u32, u32)> {
        self.valid.then_some((self.u as u32, self.v as u32))
    }
}

pub fn project_to_image(points: &[Point3], cam: &CameraModel) -> Vec<Projection> {
    par::map_slice(points, |&p| cam.project(p))
}

/// What a mask source id means for labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskTarget {
    /// No mapping given; encountering it during refinement is an error.
    #[default]
    Unmapped,
    /// Known id that never overwrites a label (sky, road, void, ...).
    Ignore,
    Label(ClassLabel),
}

/// Per-pixel source class ids with their mapping onto point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMask {
    width: u32,
    height: u32,
    ids: Vec<u8>,
    mapping: [MaskTarget; 256],
}

impl SemanticMask {
    /// `mapping` pairs must have unique source ids; labels must be one of
    /// scenario, pedestrian, vehicle or bicycle.
    pub fn new(
        width: u32,
        height: u32,
        ids: Vec<u8>,
        mapping: &[(u8, MaskTarget)],
    ) -> Result<Self, LabelError> {
        if ids.len() != width as usize * height as usize {
            return Err(LabelError::Dimension(format!(
                "{width}x{height} mask needs {} pixels, got {}",
                width as usize * height as usize,
                ids.len()
            )));
        }
        let mut table = [MaskTarget::Unmapped; 256];
        for &(id, target) in mapping {
            if table[id as usize] != MaskTarget::Unmapped {
                return Err(LabelError::Param(format!("duplicate mapping for source id {id}")));
            }
            match target {
                MaskTarget::Label(ClassLabel::Empty) | MaskTarget::Unmapped => {
                    return Err(LabelError::Param(format!(
                        "source id {id} must map to a class 1..=4 or ignore"
                    )))
                }
                _ => table[id as usize] = target,
            }
        }
        Ok(Self {
            width,
            height,
            ids,
            mapping: table,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    pub fn id_at(&self, u: u32, v: u32) -> u8 {
        self.ids[v as usize * self.width as usize + u as usize]
    }

    pub fn target(&self, id: u8) -> MaskTarget {
        self.mapping[id as usize]
    }

    /// Mapped `(id, target)` pairs in id order.
    pub fn mapping(&self) -> Vec<(u8, MaskTarget)> {
        (0..=255u8)
            .filter_map(|id| match self.mapping[id as usize] {
                MaskTarget::Unmapped => None,
                t => Some((id, t)),
            })
            .collect()
    }
}

/// Overrides labels with the mask class for points that project into the
/// image and lie within `range_threshold` of the LiDAR origin. Ignored ids
/// and far points keep their labels.
pub fn camera_refine_labels(
    points: &[Point3],
    labels: &[ClassLabel],
    mask: &SemanticMask,
    cam: &CameraModel,
    range_threshold: f64,
) -> Result<Vec<ClassLabel>, LabelError> {
    if points.len() != labels.len() {
        return Err(LabelError::Dimension(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    if (mask.width, mask.height) != (cam.width, cam.height) {
        return Err(LabelError::Dimension(format!(
            "mask is {}x{}, camera image is {}x{}",
            mask.width, mask.height, cam.width, cam.height
        )));
    }
    // Ok(label) or Err(unmapped id)
    let refined: Vec<Result<ClassLabel, u8>> = par::map_range(points.len(), |i| {
        let p = points[i];
        if p.norm() > range_threshold {
            return Ok(labels[i]);
        }
        let Some((u, v)) = cam.project(p).pixel() else {
            return Ok(labels[i]);
        };
        let id = mask.id_at(u, v);
        match mask.target(id) {
            MaskTarget::Label(l) => Ok(l),
            MaskTarget::Ignore => Ok(labels[i]),
            MaskTarget::Unmapped => Err(id),
        }
    });
    let unmapped: BTreeSet<u8> = refined.iter().filter_map(|r| r.err()).collect();
    if !unmapped.is_empty() {
        return Err(LabelError::UnmappedMaskIds(unmapped.into_iter().collect()));
    }
    Ok(refined.into_iter().map(|r| r.expect("errors handled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optical_identity_cam() -> CameraModel {
        CameraModel::new([100.0, 100.0, 50.0, 50.0], 100, 100, RigidTransform::IDENTITY).unwrap()
    }

    #[test]
    fn projection_examples() {
        let cam = optical_identity_cam();
        let on_axis = cam.project(Point3::new(0.0, 0.0, 3.0));
        assert_eq!((on_axis.u, on_axis.v, on_axis.valid), (50.0, 50.0, true));
        assert!(!cam.project(Point3::new(0.0, 0.0, -3.0)).valid);
        let p = cam.project(Point3::new(1.0, 0.0, 5.0));
        assert_eq!((p.u, p.v, p.valid), (70.0, 50.0, true));
        assert!(!cam.project(Point3::new(5.0, 0.0, 5.0)).valid, "right of the image");
    }

    #[test]
    fn camera_model_validation() {
        assert!(CameraModel::new([0.0, 1.0, 1.0, 1.0], 10, 10, RigidTransform::IDENTITY).is_err());
        assert!(CameraModel::new([1.0, 1.0, 10.0, 1.0], 10, 10, RigidTransform::IDENTITY).is_err());
    }

    fn bicycle_mask() -> SemanticMask {
        SemanticMask::new(
            100,
            100,
            vec![4u8; 100 * 100],
            &[(4, MaskTarget::Label(ClassLabel::Bicycle))],
        )
        .unwrap()
    }

    #[test]
    fn refinement_rules() {
        let cam = optical_identity_cam();
        let mask = bicycle_mask();
        let pts = [
            Point3::new(0.0, 0.0, 10.0),
            Point3::new(0.0, 0.0, 30.0),
            Point3::new(0.0, 0.0, -10.0),
        ];
        let labels = [ClassLabel::Scenario; 3];
        let out = camera_refine_labels(&pts, &labels, &mask, &cam, 25.0).unwrap();
        assert_eq!(out, vec![ClassLabel::Bicycle, ClassLabel::Scenario, ClassLabel::Scenario]);
    }

    #[test]
    fn ignore_and_unmapped_ids() {
        let cam = optical_identity_cam();
        let mut ids = vec![9u8; 100 * 100];
        ids[50 * 100 + 50] = 200;
        let mask = SemanticMask::new(100, 100, ids, &[(9, MaskTarget::Ignore)]).unwrap();
        let pts = [Point3::new(0.5, 0.5, 10.0), Point3::new(0.0, 0.0, 10.0)];
        let labels = [ClassLabel::Vehicle; 2];
        let err = camera_refine_labels(&pts, &labels, &mask, &cam, 25.0).unwrap_err();
        assert_eq!(err, LabelError::UnmappedMaskIds(vec![200]));
        let out = camera_refine_labels(&pts[..1], &labels[..1], &mask, &cam, 25.0).unwrap();
        assert_eq!(out, vec![ClassLabel::Vehicle]);
    }

    #[test]
    fn mapping_validation() {
        let dup = [(1, MaskTarget::Ignore), (1, MaskTarget::Label(ClassLabel::Vehicle))];
        assert!(SemanticMask::new(1, 1, vec![1], &dup).is_err());
        assert!(SemanticMask::new(1, 1, vec![1], &[(1, MaskTarget::Label(ClassLabel::Empty))]).is_err());
        assert!(SemanticMask::new(2, 1, vec![1], &[]).is_err());
        let cam = optical_identity_cam();
        let small = SemanticMask::new(1, 1, vec![1], &[]).unwrap();
        assert!(camera_refine_labels(&[], &[], &small, &cam, 25.0).is_err());
    }
}
