//! Ground segmentation. The built-in strategy is an iterative least-squares
//! plane fit seeded from the lowest points; an externally computed mask can
//! be used instead.

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::par;

use super::LabelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneFitParams {
    /// Maximum point-to-plane distance of a ground point, meters.
    pub inlier_distance: f64,
    /// Share of the seed candidates (lowest first) used for the initial fit.
    pub seed_fraction: f64,
    /// Points above this height (sensor frame, meters) never seed the fit.
    pub seed_z_max: f64,
    /// Steepest accepted ground slope, degrees.
    pub max_tilt_deg: f64,
    pub iterations: usize,
}

impl Default for PlaneFitParams {
    fn default() -> Self {
        Self {
            inlier_distance: 0.15,
            seed_fraction: 0.1,
            seed_z_max: -1.0,
            max_tilt_deg: 30.0,
            iterations: 5,
        }
    }
}

/// Ground plane `z = a·x + b·y + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GroundPlane {
    pub fn distance(&self, p: Point3) -> f64 {
        (self.a * p.x + self.b * p.y + self.c - p.z).abs() / (self.a * self.a + self.b * self.b + 1.0).sqrt()
    }

    pub fn tilt(&self) -> f64 {
        self.a.hypot(self.b).atan()
    }
}

/// How ground points are identified.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundStrategy<'a> {
    PlaneFit(&'a PlaneFitParams),
    /// Precomputed flags aligned with the points passed to [`remove_ground`].
    External(&'a [bool]),
    None,
}

fn least_squares_plane(points: &[Point3], idx: &[usize]) -> Option<GroundPlane> {
    if idx.len() < 3 {
        return None;
    }
    let n = idx.len() as f64;
    let mean = idx.iter().fold(Point3::ORIGIN, |acc, &i| acc + points[i]) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        let d = points[i] - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        sxz += d.x * d.z;
        syz += d.y * d.z;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det > 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE)) || !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    Some(GroundPlane {
        a,
        b,
        c: mean.z - a * mean.x - b * mean.y,
    })
}

/// Seeds from the lowest points, then alternately collects inliers and
/// refits. `None` when no acceptable plane exists.
pub fn fit_ground_plane(points: &[Point3], params: &PlaneFitParams) -> Option<(GroundPlane, Vec<bool>)> {
    let mut candidates: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].z <= params.seed_z_max)
        .collect();
    if candidates.len() < 3 {
        return None;
    }
    candidates.sort_by(|&i, &j| points[i].z.total_cmp(&points[j].z).then(i.cmp(&j)));
    let n_seed = ((candidates.len() as f64 * params.seed_fraction).ceil() as usize)
        .clamp(3, candidates.len());
    let mut plane = least_squares_plane(points, &candidates[..n_seed])?;
    let mut mask = Vec::new();
    for _ in 0..params.iterations.max(1) {
        let next = par::map_slice(points, |&p| plane.distance(p) <= params.inlier_distance);
        if next == mask {
            break;
        }
        mask = next;
        let inliers: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| g.then_some(i))
            .collect();
        plane = least_squares_plane(points, &inliers)?;
    }
    let mask = par::map_slice(points, |&p| plane.distance(p) <= params.inlier_distance);
    (plane.tilt() <= params.max_tilt_deg.to_radians()).then_some((plane, mask))
}

/// Per-point ground flags. Degenerate geometry yields an all-false mask.
pub fn remove_ground(points: &[Point3], strategy: GroundStrategy<'_>) -> Result<Vec<bool>, LabelError> {
    match strategy {
        GroundStrategy::None => Ok(vec![false; points.len()]),
        GroundStrategy::External(mask) => {
            if mask.len() != points.len() {
                return Err(LabelError::Dimension(format!(
                    "ground mask has {} entries for {} points",
                    mask.len(),
                    points.len()
                )));
            }
            Ok(mask.to_vec())
        }
        GroundStrategy::PlaneFit(params) => {
            if !(params.inlier_distance > 0.0) || !(params.seed_fraction > 0.0 && params.seed_fraction <= 1.0) {
                return Err(LabelError::Param(format!("invalid plane-fit parameters {params:?}")));
            }
            Ok(fit_ground_plane(points, params)
                .map(|(_, mask)| mask)
                .unwrap_or_else(|| vec![false; points.len()]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn plane_with_box(seed: u64) -> (Vec<Point3>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<Point3> = (0..10_000)
            .map(|_| Point3::new(rng.random_range(2.0..40.0), rng.random_range(-20.0..20.0), -2.0))
            .collect();
        let n_plane = pts.len();
        pts.extend((0..2_000).map(|_| {
            Point3::new(
                rng.random_range(10.0..12.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.5..-0.5),
            )
        }));
        (pts, n_plane)
    }

    #[test]
    fn perfect_plane_exactly_masked() {
        let (pts, n_plane) = plane_with_box(1);
        let mask = remove_ground(&pts, GroundStrategy::PlaneFit(&PlaneFitParams::default())).unwrap();
        assert!(mask[..n_plane].iter().all(|&g| g));
        assert!(mask[n_plane..].iter().all(|&g| !g));
    }

    #[test]
    fn elevated_scene_has_no_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3> = (0..3_000)
            .map(|_| Point3::new(rng.random_range(5.0..8.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)))
            .collect();
        let mask = remove_ground(&pts, GroundStrategy::PlaneFit(&PlaneFitParams::default())).unwrap();
        assert!(mask.iter().all(|&g| !g));
    }

    #[test]
    fn tilted_noisy_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let slope = 5f64.to_radians().tan();
        let pts: Vec<Point3> = (0..10_000)
            .map(|_| {
                let x = rng.random_range(2.0..40.0);
                let y = rng.random_range(-20.0..20.0);
                Point3::new(x, y, -2.0 + slope * x + noise.sample(&mut rng))
            })
            .collect();
        let mask = remove_ground(&pts, GroundStrategy::PlaneFit(&PlaneFitParams::default())).unwrap();
        let hit = mask.iter().filter(|&&g| g).count() as f64 / pts.len() as f64;
        assert!(hit >= 0.99, "only {hit} of inliers masked");
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64, 0.0, -2.0)).collect();
        let mask = remove_ground(&pts, GroundStrategy::PlaneFit(&PlaneFitParams::default())).unwrap();
        assert!(mask.iter().all(|&g| !g));
    }

    #[test]
    fn external_and_none() {
        let pts = vec![Point3::ORIGIN; 3];
        let ext = [true, false, true];
        assert_eq!(remove_ground(&pts, GroundStrategy::External(&ext)).unwrap(), ext.to_vec());
        assert!(remove_ground(&pts, GroundStrategy::External(&ext[..2])).is_err());
        assert_eq!(remove_ground(&pts, GroundStrategy::None).unwrap(), vec![false; 3]);
    }
}
