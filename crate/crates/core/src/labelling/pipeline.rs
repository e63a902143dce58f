use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{apply_rigid_transform, Point3, RigidTransform};
use crate::labels::ClassLabel;

use super::{
    assign_box_labels, camera_refine_labels, crop_to_radar_fov, dbscan, downsample_voxel_grid,
    enforce_cluster_consistency, remove_ground, CameraModel, DbscanParams, Detection, FovSpec,
    GroundStrategy, LabelError, LabeledPointCloud, PlaneFitParams, SemanticMask,
};

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Downsample,
    BoxLabels,
    FovCrop,
    GroundRemoval,
    CameraRefine,
    ClusterConsistency,
    RadarTransform,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Downsample => "downsample",
            Stage::BoxLabels => "box-labels",
            Stage::FovCrop => "fov-crop",
            Stage::GroundRemoval => "ground-removal",
            Stage::CameraRefine => "camera-refine",
            Stage::ClusterConsistency => "cluster-consistency",
            Stage::RadarTransform => "radar-transform",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: LabelError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T, LabelError> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Ground-removal selector as written in configs:
/// `"plane-fit"`, `"external-mask:<path>"` or `"none"`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum GroundSelector {
    #[default]
    PlaneFit,
    ExternalMask(PathBuf),
    None,
}

impl FromStr for GroundSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plane-fit" => Ok(Self::PlaneFit),
            "none" => Ok(Self::None),
            _ => match s.strip_prefix("external-mask:") {
                Some(path) if !path.is_empty() => Ok(Self::ExternalMask(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown ground strategy {s:?} (expected plane-fit, external-mask:<path> or none)"
                )),
            },
        }
    }
}

impl fmt::Display for GroundSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PlaneFit => f.write_str("plane-fit"),
            Self::None => f.write_str("none"),
            Self::ExternalMask(p) => write!(f, "external-mask:{}", p.display()),
        }
    }
}

impl Serialize for GroundSelector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroundSelector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Labelling parameters. Defaults are the reference constants: confidence
/// 0.5, camera override within 25 m, DBSCAN ε 0.6 m / 100 points, and the
/// ±70° / 51.4 m / ±15° radar field of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub confidence_threshold: f64,
    pub camera_range_threshold: f64,
    /// Leaf of the voxel-grid downsampling that produces the detector input.
    /// `None` skips it.
    pub downsample_leaf: Option<f64>,
    pub fov: FovSpec,
    pub dbscan: DbscanParams,
    pub ground: GroundSelector,
    pub plane_fit: PlaneFitParams,
    /// Filled from the frame calibration, not from config files.
    #[serde(skip)]
    pub lidar_to_radar: RigidTransform,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.5,
            camera_range_threshold: 25.0,
            downsample_leaf: Some(0.1),
            fov: FovSpec::default(),
            dbscan: DbscanParams::default(),
            ground: GroundSelector::PlaneFit,
            plane_fit: PlaneFitParams::default(),
            lidar_to_radar: RigidTransform::IDENTITY,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), LabelError> {
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold <= 1.0) {
            return Err(LabelError::Param(format!(
                "confidence threshold {} outside (0, 1]",
                self.confidence_threshold
            )));
        }
        if !(self.camera_range_threshold > 0.0) {
            return Err(LabelError::Param("camera range threshold must be > 0".into()));
        }
        if let Some(leaf) = self.downsample_leaf {
            if !(leaf > 0.0) {
                return Err(LabelError::Param(format!("downsample leaf {leaf} must be > 0")));
            }
        }
        self.fov.validate()?;
        self.dbscan.validate()
    }
}

/// Everything one frame contributes to labelling, in the LiDAR frame.
#[derive(Debug, Clone, Default)]
pub struct FrameInputs {
    pub points: Vec<Point3>,
    pub detections: Vec<Detection>,
    pub camera: Option<(CameraModel, SemanticMask)>,
    /// Ground flags aligned with `points`, required by
    /// [`GroundSelector::ExternalMask`].
    pub external_ground: Option<Vec<bool>>,
}

/// Point counts after each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub input: usize,
    pub detector_input: Option<usize>,
    pub box_targets: usize,
    pub in_fov: usize,
    pub ground: usize,
    pub camera_changed: usize,
    pub clusters: usize,
    pub consistency_changed: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    /// Surviving points in the radar frame with their final labels.
    pub cloud: LabeledPointCloud,
    /// Index into the input cloud of every output point.
    pub kept: Vec<usize>,
    /// Downsampled cloud for the detector, when enabled.
    pub detector_input: Option<Vec<Point3>>,
    pub counts: StageCounts,
}

impl PipelineOutput {
    /// Labels scattered back onto the input cloud; dropped points are
    /// `Empty`.
    pub fn labels_on_input(&self, n_input: usize) -> Vec<ClassLabel> {
        let mut out = vec![ClassLabel::Empty; n_input];
        for (&i, &l) in self.kept.iter().zip(&self.cloud.labels) {
            out[i] = l;
        }
        out
    }
}

/// Runs the labelling chain on one frame.
///
/// Stages: downsampling (detector input only) → box labels → field-of-view
/// crop → ground removal → camera refinement → cluster consistency →
/// transform into the radar frame.
pub fn run_labelling_pipeline(
    inputs: &FrameInputs,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let points = &inputs.points;
    let mut counts = StageCounts {
        input: points.len(),
        ..Default::default()
    };

    let detector_input = cfg
        .downsample_leaf
        .map(|leaf| downsample_voxel_grid(points, leaf))
        .transpose()
        .at(Stage::Downsample)?;
    counts.detector_input = detector_input.as_ref().map(Vec::len);

    let labels = assign_box_labels(points, &inputs.detections, cfg.confidence_threshold);
    counts.box_targets = labels.iter().filter(|l| l.is_target()).count();

    let (cropped, kept) = crop_to_radar_fov(points, &cfg.lidar_to_radar, &cfg.fov);
    counts.in_fov = kept.len();

    let ground = match &cfg.ground {
        GroundSelector::None => remove_ground(&cropped, GroundStrategy::None),
        GroundSelector::PlaneFit => remove_ground(&cropped, GroundStrategy::PlaneFit(&cfg.plane_fit)),
        GroundSelector::ExternalMask(path) => match &inputs.external_ground {
            Some(full) if full.len() == points.len() => {
                let mask: Vec<bool> = kept.iter().map(|&i| full[i]).collect();
                remove_ground(&cropped, GroundStrategy::External(&mask))
            }
            Some(full) => Err(LabelError::Dimension(format!(
                "external ground mask has {} entries for {} points",
                full.len(),
                points.len()
            ))),
            None => Err(LabelError::Param(format!(
                "external ground mask {} was not loaded",
                path.display()
            ))),
        },
    }
    .at(Stage::GroundRemoval)?;
    counts.ground = ground.iter().filter(|&&g| g).count();

    let (pts, kept): (Vec<Point3>, Vec<usize>) = cropped
        .into_iter()
        .zip(kept)
        .zip(&ground)
        .filter(|(_, &g)| !g)
        .map(|(pk, _)| pk)
        .unzip();
    let mut labels: Vec<ClassLabel> = kept.iter().map(|&i| labels[i]).collect();

    if let Some((cam, mask)) = &inputs.camera {
        let refined = camera_refine_labels(&pts, &labels, mask, cam, cfg.camera_range_threshold)
            .at(Stage::CameraRefine)?;
        counts.camera_changed = refined.iter().zip(&labels).filter(|(a, b)| a != b).count();
        labels = refined;
    }

    let clustering = dbscan(&pts, &cfg.dbscan).at(Stage::ClusterConsistency)?;
    counts.clusters = clustering.n_clusters;
    let consistent = enforce_cluster_consistency(&labels, &clustering.labels);
    counts.consistency_changed = consistent.iter().zip(&labels).filter(|(a, b)| a != b).count();

    let radar_pts = apply_rigid_transform(&pts, &cfg.lidar_to_radar);
    counts.output = radar_pts.len();
    debug_assert!(consistent.iter().all(|l| *l != ClassLabel::Empty));
    Ok(PipelineOutput {
        cloud: LabeledPointCloud::new(radar_pts, consistent),
        kept,
        detector_input,
        counts,
    })
}
