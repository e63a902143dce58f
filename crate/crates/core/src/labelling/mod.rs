//! Automatic point labelling: detector boxes → radar field-of-view crop →
//! ground removal → camera refinement → DBSCAN label consistency.

mod boxes;
mod camera;
mod consistency;
mod dbscan;
mod downsample;
mod fov;
mod ground;
mod pipeline;

use thiserror::Error;

use crate::geometry::{GeometryError, Point3};
use crate::labels::ClassLabel;

pub use boxes::{assign_box_labels, Detection};
pub use camera::{
    camera_refine_labels, project_to_image, CameraModel, MaskTarget, Projection, SemanticMask,
};
pub use consistency::enforce_cluster_consistency;
pub use dbscan::{dbscan, Clustering, DbscanParams, NOISE};
pub use downsample::downsample_voxel_grid;
pub use fov::{crop_to_radar_fov, FovSpec};
pub use ground::{fit_ground_plane, remove_ground, GroundPlane, GroundStrategy, PlaneFitParams};
pub use pipeline::{
    run_labelling_pipeline, FrameInputs, GroundSelector, PipelineConfig, PipelineError,
    PipelineOutput, Stage, StageCounts,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("semantic mask ids without a mapping: {0:?}")]
    UnmappedMaskIds(Vec<u8>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Points with one class label each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<Point3>,
    pub labels: Vec<ClassLabel>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<Point3>, labels: Vec<ClassLabel>) -> Self {
        assert_eq!(points.len(), labels.len(), "points/labels length mismatch");
        Self { points, labels }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
