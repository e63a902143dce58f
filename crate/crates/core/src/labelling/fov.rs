use serde::{Deserialize, Serialize};

use crate::geometry::{cartesian_to_polar, Point3, RigidTransform};
use crate::par;

use super::LabelError;

/// Radar coverage. Angles are radians in memory and degrees in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FovSpec {
    #[serde(with = "crate::degrees")]
    pub azimuth_min: f64,
    #[serde(with = "crate::degrees")]
    pub azimuth_max: f64,
    pub range_max: f64,
    #[serde(with = "crate::degrees")]
    pub elevation_min: f64,
    #[serde(with = "crate::degrees")]
    pub elevation_max: f64,
}

impl Default for FovSpec {
    fn default() -> Self {
        Self {
            azimuth_min: (-70f64).to_radians(),
            azimuth_max: 70f64.to_radians(),
            range_max: 51.4,
            elevation_min: (-15f64).to_radians(),
            elevation_max: 15f64.to_radians(),
        }
    }
}

impl FovSpec {
    pub fn validate(&self) -> Result<(), LabelError> {
        if !(self.azimuth_min < self.azimuth_max)
            || !(self.elevation_min < self.elevation_max)
            || !(self.range_max > 0.0)
        {
            return Err(LabelError::Param(format!("invalid field of view {self:?}")));
        }
        Ok(())
    }

    /// Inclusive test on a radar-frame point.
    pub fn contains(&self, p_radar: Point3) -> bool {
        let c = cartesian_to_polar(p_radar);
        c.range <= self.range_max
            && c.azimuth >= self.azimuth_min
            && c.azimuth <= self.azimuth_max
            && c.elevation >= self.elevation_min
            && c.elevation <= self.elevation_max
    }
}

/// Keeps LiDAR points whose radar-frame polar coordinates fall inside the
/// field of view. Returned points stay in the LiDAR frame; the index list
/// maps each output to its input.
pub fn crop_to_radar_fov(
    points: &[Point3],
    lidar_to_radar: &RigidTransform,
    fov: &FovSpec,
) -> (Vec<Point3>, Vec<usize>) {
    let inside = par::map_slice(points, |&p| fov.contains(lidar_to_radar.apply(p)));
    let kept: Vec<usize> = inside
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();
    (kept.iter().map(|&i| points[i]).collect(), kept)
}
