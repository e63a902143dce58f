//! Deterministic synthetic frames with exact ground truth.
//!
//! A scene is a set of floating boxes above a flat ground plane, seen by a
//! LiDAR at the origin. Box surfaces are sampled uniformly, then culled to
//! what the sensor can see; the camera sits at the LiDAR origin so the same
//! surfaces are visible in the rendered mask. Every point carries the class
//! of the surface it was sampled from.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cartesian_to_polar, OrientedBox, Point3, RigidTransform};
use crate::io::{self, Calibration, FormatError, FrameBundle};
use crate::labelling::{crop_to_radar_fov, CameraModel, Detection, FovSpec, LabeledPointCloud, MaskTarget, SemanticMask};
use crate::labels::ClassLabel;
use crate::par;
use crate::radar::{RadarTensorRaed, N_ELEVATION};
use crate::voxel::{voxelize_labels, GridSpec, LabelCube};

/// Source ids used in rendered masks.
pub mod mask_ids {
    pub const VOID: u8 = 0;
    pub const ROAD: u8 = 7;
    pub const BUILDING: u8 = 11;
    pub const SKY: u8 = 23;
    pub const PERSON: u8 = 24;
    pub const CAR: u8 = 26;
    pub const BICYCLE: u8 = 33;
}

/// Boxes sit this far above the ground so plane fitting separates them.
pub const GROUND_CLEARANCE: f64 = 0.3;
/// Minimum gap between the footprints of two random objects.
pub const OBJECT_GAP: f64 = 1.5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    Spec(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// A target object: pedestrian, vehicle or bicycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class: ClassLabel,
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub heading: f64,
    /// Surface samples per square metre, before visibility culling.
    pub density: f64,
}

/// Static background box (building, wall, pole), labelled as scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub heading: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundSpec {
    pub height: f64,
    pub points: usize,
    pub range_min: f64,
    pub range_max: f64,
    pub azimuth_span_deg: f64,
}

impl Default for GroundSpec {
    fn default() -> Self {
        Self {
            height: -1.8,
            points: 12_000,
            range_min: 2.0,
            range_max: 52.0,
            azimuth_span_deg: 75.0,
        }
    }
}

/// Pinhole camera at the LiDAR origin looking along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Pixels within this Chebyshev distance of a class change become void.
    pub boundary_band: u32,
    /// Render a mask into the bundle.
    pub mask: bool,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            width: 960,
            height: 540,
            fx: 480.0,
            fy: 480.0,
            cx: 480.0,
            cy: 270.0,
            boundary_band: 4,
            mask: true,
        }
    }
}

impl CameraSpec {
    pub fn model(&self) -> Result<CameraModel, SynthError> {
        CameraModel::new([self.fx, self.fy, self.cx, self.cy], self.width, self.height, optical_frame())
            .map_err(|e| SynthError::Spec(e.to_string()))
    }
}

/// LiDAR (x fwd, y left, z up) to camera optical frame (x right, y down,
/// z fwd), no offset.
pub fn optical_frame() -> RigidTransform {
    RigidTransform::new([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]], Point3::ORIGIN)
        .expect("permutation matrix is orthonormal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarMountSpec {
    pub yaw_deg: f64,
    pub translation: [f64; 3],
}

impl Default for RadarMountSpec {
    fn default() -> Self {
        Self {
            yaw_deg: 1.0,
            translation: [-0.1, 0.0, 0.6],
        }
    }
}

impl RadarMountSpec {
    pub fn lidar_to_radar(&self) -> RigidTransform {
        RigidTransform::from_yaw(self.yaw_deg.to_radians(), Point3::from_array(self.translation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "action")]
pub enum Corruption {
    Drop,
    Shift { offset: [f64; 3] },
    Score { value: f64 },
}

/// Applies `action` to detections whose class and centre range match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRule {
    #[serde(default)]
    pub class: Option<ClassLabel>,
    #[serde(default)]
    pub min_range: Option<f64>,
    #[serde(default)]
    pub max_range: Option<f64>,
    #[serde(flatten)]
    pub action: Corruption,
}

impl CorruptionRule {
    pub fn drop_class_within(class: ClassLabel, min_range: f64, max_range: f64) -> Self {
        Self {
            class: Some(class),
            min_range: Some(min_range),
            max_range: Some(max_range),
            action: Corruption::Drop,
        }
    }

    fn matches(&self, d: &Detection) -> bool {
        let r = d.bbox.center().norm();
        self.class.is_none_or(|c| c == d.class)
            && self.min_range.is_none_or(|m| r >= m)
            && self.max_range.is_none_or(|m| r <= m)
    }
}

/// Point scatterers (one per object) over uniform noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarSynthSpec {
    pub n_doppler: usize,
    pub noise_floor: f32,
    pub snr_db: f32,
}

impl Default for RadarSynthSpec {
    fn default() -> Self {
        Self {
            n_doppler: 16,
            noise_floor: 1.0,
            snr_db: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
    pub structures: Vec<StructureSpec>,
    pub ground: Option<GroundSpec>,
    /// Per-axis LiDAR noise, truncated at 3σ.
    pub noise_sigma: f64,
    pub camera: CameraSpec,
    pub radar_mount: RadarMountSpec,
    pub detection_score: f64,
    pub corruption: Vec<CorruptionRule>,
    pub radar: Option<RadarSynthSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            objects: Vec::new(),
            structures: Vec::new(),
            ground: Some(GroundSpec::default()),
            noise_sigma: 0.01,
            camera: CameraSpec::default(),
            radar_mount: RadarMountSpec::default(),
            detection_score: 0.9,
            corruption: Vec::new(),
            radar: None,
        }
    }
}

fn footprint_radius(size: [f64; 3]) -> f64 {
    0.5 * size[0].hypot(size[1])
}

/// Parameters of random scene generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScene {
    /// Inclusive bounds on the number of targets attempted.
    pub targets: (usize, usize),
    pub structures: (usize, usize),
    /// Target classes drawn uniformly.
    pub classes: Vec<ClassLabel>,
    /// Centre range interval of targets, metres.
    pub target_range: (f64, f64),
    pub azimuth_deg: f64,
    pub density: f64,
}

impl Default for RandomScene {
    fn default() -> Self {
        Self {
            targets: (1, 6),
            structures: (0, 2),
            classes: vec![ClassLabel::Pedestrian, ClassLabel::Vehicle, ClassLabel::Bicycle],
            target_range: (6.0, 45.0),
            azimuth_deg: 40.0,
            density: 120.0,
        }
    }
}

impl RandomScene {
    /// Objects keep a 5 m standoff from the sensor and [`OBJECT_GAP`]
    /// between footprints; placements that cannot satisfy this are skipped.
    pub fn generate(&self, seed: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce4_e5ee_d000_0000);
        let ground = GroundSpec::default();
        let n_targets = rng.random_range(self.targets.0..=self.targets.1);
        let n_structures = rng.random_range(self.structures.0..=self.structures.1);
        let az_max = self.azimuth_deg.to_radians();
        let mut placed: Vec<(Point3, f64)> = Vec::new();
        let mut place = |rng: &mut ChaCha8Rng, size: [f64; 3], (r0, r1): (f64, f64)| -> Option<([f64; 3], f64)> {
            let radius = footprint_radius(size);
            for _ in 0..200 {
                let r = rng.random_range(r0..r1);
                let az = rng.random_range(-az_max..az_max);
                let c = Point3::new(r * az.cos(), r * az.sin(), 0.0);
                let clear = c.norm() - radius >= 5.0
                    && placed
                        .iter()
                        .all(|&(o, rad)| o.distance(c) >= rad + radius + OBJECT_GAP);
                if clear {
                    placed.push((c, radius));
                    let cz = ground.height + GROUND_CLEARANCE + size[2] / 2.0;
                    return Some(([c.x, c.y, cz], rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)));
                }
            }
            None
        };
        let mut objects = Vec::new();
        for _ in 0..n_targets {
            let class = self.classes[rng.random_range(0..self.classes.len())];
            let mut jitter = |base: f64| base * rng.random_range(0.9..1.1);
            let size = match class {
                ClassLabel::Pedestrian => [jitter(0.6), jitter(0.6), jitter(1.75)],
                ClassLabel::Vehicle => [jitter(4.5), jitter(1.8), jitter(1.5)],
                _ => [jitter(1.7), jitter(0.6), jitter(1.2)],
            };
            if let Some((center, heading)) = place(&mut rng, size, self.target_range) {
                objects.push(ObjectSpec {
                    class,
                    center,
                    size,
                    heading,
                    density: self.density,
                });
            }
        }
        let mut structures = Vec::new();
        for _ in 0..n_structures {
            let size = [
                rng.random_range(2.0..5.0),
                rng.random_range(1.0..3.0),
                rng.random_range(2.0..4.0),
            ];
            if let Some((center, heading)) = place(&mut rng, size, (6.0, 45.0)) {
                structures.push(StructureSpec {
                    center,
                    size,
                    heading,
                    density: self.density,
                });
            }
        }
        SceneSpec {
            seed,
            objects,
            structures,
            ground: Some(ground),
            ..SceneSpec::default()
        }
    }
}

impl SceneSpec {
    /// [`RandomScene::default`] for `seed`: one to six targets and up to two
    /// structures between 6 and 45 m, within ±40° of the forward axis.
    pub fn random(seed: u64) -> Self {
        RandomScene::default().generate(seed)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        for (i, o) in self.objects.iter().enumerate() {
            if !o.class.is_target() {
                return bad(format!("object {i}: class {} is not pedestrian, vehicle or bicycle", o.class.code()));
            }
            if !(o.density > 0.0 && o.density.is_finite()) {
                return bad(format!("object {i}: density must be > 0"));
            }
        }
        for (i, s) in self.structures.iter().enumerate() {
            if !(s.density > 0.0 && s.density.is_finite()) {
                return bad(format!("structure {i}: density must be > 0"));
            }
        }
        for b in self.boxes()? {
            if b.0.contains(Point3::ORIGIN) {
                return bad("a box contains the sensor origin".into());
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be >= 0", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.detection_score) {
            return bad(format!("detection score {} outside [0, 1]", self.detection_score));
        }
        if let Some(g) = &self.ground {
            if !(g.range_min >= 0.0 && g.range_max > g.range_min && g.azimuth_span_deg > 0.0) {
                return bad("ground extent is empty".into());
            }
        }
        if let Some(r) = &self.radar {
            if r.n_doppler == 0 || !(r.noise_floor > 0.0) {
                return bad("radar needs doppler bins and a positive noise floor".into());
            }
        }
        self.camera.model()?;
        Ok(())
    }

    /// `(box, class, density)` for structures then objects.
    fn boxes(&self) -> Result<Vec<(OrientedBox, ClassLabel, f64)>, SynthError> {
        let s = self
            .structures
            .iter()
            .map(|s| (s.center, s.size, s.heading, ClassLabel::Scenario, s.density));
        let o = self.objects.iter().map(|o| (o.center, o.size, o.heading, o.class, o.density));
        s.chain(o)
            .map(|(c, size, h, class, density)| {
                OrientedBox::new(Point3::from_array(c), size, h)
                    .map(|b| (b, class, density))
                    .map_err(|e| SynthError::Spec(e.to_string()))
            })
            .collect()
    }

    /// Margin added to detection boxes so noisy surface points stay inside.
    pub fn detection_margin(&self) -> f64 {
        3.0 * self.noise_sigma * 3f64.sqrt() + 0.02
    }
}

/// One generated frame and its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticFrame {
    pub frame_id: String,
    /// LiDAR frame, already rounded to what the point file stores.
    pub points: Vec<Point3>,
    /// Class of the surface each point was sampled from; ground is scenario.
    pub true_labels: Vec<ClassLabel>,
    pub ground: Vec<bool>,
    pub detections: Vec<Detection>,
    pub calibration: Calibration,
    pub mask: Option<SemanticMask>,
    pub raed: Option<RadarTensorRaed>,
    /// Labels the pipeline should assign to each input point: empty for
    /// ground and out-of-view points.
    pub gt_point_labels: Vec<ClassLabel>,
    /// Surviving points in the radar frame with their labels.
    pub gt_cloud: LabeledPointCloud,
    pub gt_cube: LabelCube,
}

fn truncated_normal(rng: &mut ChaCha8Rng, n: &Normal<f64>, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let v = n.sample(rng);
        if v.abs() <= 3.0 * sigma {
            return v;
        }
    }
}

/// Uniform surface samples of a box, drawn face by face.
fn sample_box_surface(rng: &mut ChaCha8Rng, b: &OrientedBox, density: f64) -> Vec<Point3> {
    let [hx, hy, hz] = b.size().map(|s| s * 0.5);
    let mut out = Vec::new();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let (ha, hb) = match axis {
                0 => (hy, hz),
                1 => (hx, hz),
                _ => (hx, hy),
            };
            let n = (density * 4.0 * ha * hb).round() as usize;
            for _ in 0..n {
                let a = rng.random_range(-ha..=ha);
                let c = rng.random_range(-hb..=hb);
                let local = match axis {
                    0 => Point3::new(sign * hx, a, c),
                    1 => Point3::new(a, sign * hy, c),
                    _ => Point3::new(a, c, sign * hz),
                };
                out.push(b.to_world(local));
            }
        }
    }
    out
}

/// First box hit along the ray from the origin through `p`, as
/// `(box index, entry parameter)`; `p` itself sits at parameter 1.
fn first_hit(boxes: &[(OrientedBox, ClassLabel, f64)], dir: Point3) -> Option<(usize, f64)> {
    boxes
        .iter()
        .enumerate()
        .filter_map(|(i, (b, _, _))| b.ray_entry(Point3::ORIGIN, dir).map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

const VIS_EPS: f64 = 1e-9;

fn round_f32(p: Point3) -> Point3 {
    Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)
}

/// Generates a frame. Deterministic for a given spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticFrame, SynthError> {
    spec.validate()?;
    let boxes = spec.boxes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");

    // Clean surface points and their classes.
    let mut clean: Vec<(Point3, ClassLabel, bool)> = Vec::new();
    for (b, class, density) in &boxes {
        for p in sample_box_surface(&mut rng, b, *density) {
            // Visible when no box, its own included, is entered before the
            // point itself.
            if first_hit(&boxes, p).is_some_and(|(_, t)| t >= 1.0 - VIS_EPS) {
                clean.push((p, *class, false));
            }
        }
    }
    if let Some(g) = &spec.ground {
        let span = g.azimuth_span_deg.to_radians();
        let (r0, r1) = (g.range_min * g.range_min, g.range_max * g.range_max);
        for _ in 0..g.points {
            let r = rng.random_range(r0..=r1).sqrt();
            let az = rng.random_range(-span..=span);
            let p = Point3::new(r * az.cos(), r * az.sin(), g.height);
            if first_hit(&boxes, p).is_none_or(|(_, t)| t >= 1.0 - VIS_EPS) {
                clean.push((p, ClassLabel::Scenario, true));
            }
        }
    }

    let mut points = Vec::with_capacity(clean.len());
    let mut true_labels = Vec::with_capacity(clean.len());
    let mut ground = Vec::with_capacity(clean.len());
    for &(p, class, is_ground) in &clean {
        let mut d = [0.0; 3];
        for v in &mut d {
            *v = truncated_normal(&mut rng, &noise, spec.noise_sigma);
        }
        points.push(round_f32(p + Point3::from_array(d)));
        true_labels.push(class);
        ground.push(is_ground);
    }

    // Detections: exact boxes grown by the noise margin, then corrupted.
    let margin = spec.detection_margin();
    let mut detections = Vec::new();
    for (b, class, _) in &boxes {
        if !class.is_target() {
            continue;
        }
        let bbox = b.inflated(margin).map_err(|e| SynthError::Spec(e.to_string()))?;
        let mut det = Detection::new(bbox, *class, spec.detection_score).map_err(|e| SynthError::Spec(e.to_string()))?;
        let mut dropped = false;
        let original = det;
        for rule in spec.corruption.iter().filter(|r| r.matches(&original)) {
            match rule.action {
                Corruption::Drop => dropped = true,
                Corruption::Shift { offset } => {
                    let c = det.bbox.center() + Point3::from_array(offset);
                    det.bbox = OrientedBox::new(c, det.bbox.size(), det.bbox.heading())
                        .map_err(|e| SynthError::Spec(e.to_string()))?;
                }
                Corruption::Score { value } => {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(SynthError::Spec(format!("corrupted score {value} outside [0, 1]")));
                    }
                    det.score = value;
                }
            }
        }
        if !dropped {
            detections.push(det);
        }
    }

    let camera = spec.camera.model()?;
    let lidar_to_radar = spec.radar_mount.lidar_to_radar();
    let mask = if spec.camera.mask {
        Some(render_mask(&spec.camera, &camera, &boxes, &points, &true_labels, &ground))
    } else {
        None
    };
    let raed = spec.radar.as_ref().map(|r| synth_raed(&mut rng, r, &boxes, &lidar_to_radar));

    // Ground truth under the default field of view and grid.
    let (_, kept) = crop_to_radar_fov(&points, &lidar_to_radar, &FovSpec::default());
    let mut gt_point_labels = vec![ClassLabel::Empty; points.len()];
    let mut gt_points = Vec::new();
    let mut gt_labels = Vec::new();
    for &i in &kept {
        if !ground[i] {
            gt_point_labels[i] = true_labels[i];
            gt_points.push(lidar_to_radar.apply(points[i]));
            gt_labels.push(true_labels[i]);
        }
    }
    let gt_cube = voxelize_labels(&gt_points, &gt_labels, &GridSpec::default()).cube;

    Ok(SyntheticFrame {
        frame_id: format!("synth-{}", spec.seed),
        points,
        true_labels,
        ground,
        detections,
        calibration: Calibration { camera, lidar_to_radar },
        mask,
        raed,
        gt_point_labels,
        gt_cloud: LabeledPointCloud::new(gt_points, gt_labels),
        gt_cube,
    })
}

fn class_mask_id(c: ClassLabel) -> u8 {
    match c {
        ClassLabel::Scenario => mask_ids::BUILDING,
        ClassLabel::Pedestrian => mask_ids::PERSON,
        ClassLabel::Vehicle => mask_ids::CAR,
        ClassLabel::Bicycle => mask_ids::BICYCLE,
        ClassLabel::Empty => mask_ids::VOID,
    }
}

/// Mapping written next to rendered masks.
pub fn mask_mapping() -> Vec<(u8, MaskTarget)> {
    use mask_ids::*;
    vec![
        (VOID, MaskTarget::Ignore),
        (ROAD, MaskTarget::Ignore),
        (BUILDING, MaskTarget::Label(ClassLabel::Scenario)),
        (SKY, MaskTarget::Ignore),
        (PERSON, MaskTarget::Label(ClassLabel::Pedestrian)),
        (CAR, MaskTarget::Label(ClassLabel::Vehicle)),
        (BICYCLE, MaskTarget::Label(ClassLabel::Bicycle)),
    ]
}

/// Ray-casts every pixel centre, voids a band around class changes, then
/// voids any pixel a non-ground point projects into with a different class.
fn render_mask(
    cs: &CameraSpec,
    cam: &CameraModel,
    boxes: &[(OrientedBox, ClassLabel, f64)],
    points: &[Point3],
    true_labels: &[ClassLabel],
    ground: &[bool],
) -> SemanticMask {
    let (w, h) = (cs.width as usize, cs.height as usize);
    let cam_to_lidar = cam.lidar_to_camera.inverse();
    let classes: Vec<ClassLabel> = par::map_range(w * h, |i| {
        let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
        let d_cam = Point3::new((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
        let dir = cam_to_lidar.apply(d_cam) - cam_to_lidar.apply(Point3::ORIGIN);
        first_hit(boxes, dir).map_or(ClassLabel::Empty, |(k, _)| boxes[k].1)
    });
    let k = cs.boundary_band as i64;
    let mut ids: Vec<u8> = par::map_range(w * h, |i| {
        let c = classes[i];
        if c == ClassLabel::Empty {
            let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            // Below the horizon is road, above is sky.
            let d_cam = Point3::new((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
            let dir = cam_to_lidar.apply(d_cam) - cam_to_lidar.apply(Point3::ORIGIN);
            return if dir.z < 0.0 { mask_ids::ROAD } else { mask_ids::SKY };
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for yy in (y - k).max(0)..=(y + k).min(h as i64 - 1) {
            for xx in (x - k).max(0)..=(x + k).min(w as i64 - 1) {
                let o = classes[yy as usize * w + xx as usize];
                if o != ClassLabel::Empty && o != c {
                    return mask_ids::VOID;
                }
            }
        }
        class_mask_id(c)
    });
    for ((p, &label), &g) in points.iter().zip(true_labels).zip(ground) {
        if g {
            continue;
        }
        if let Some((u, v)) = cam.project(*p).pixel() {
            let px = &mut ids[v as usize * w + u as usize];
            let expected = class_mask_id(label);
            if *px != expected && ![mask_ids::VOID, mask_ids::ROAD, mask_ids::SKY].contains(px) {
                *px = mask_ids::VOID;
            }
        }
    }
    SemanticMask::new(cs.width, cs.height, ids, &mask_mapping()).expect("mask dims and mapping are consistent")
}

fn synth_raed(
    rng: &mut ChaCha8Rng,
    spec: &RadarSynthSpec,
    boxes: &[(OrientedBox, ClassLabel, f64)],
    lidar_to_radar: &RigidTransform,
) -> RadarTensorRaed {
    let grid = GridSpec::default();
    let [nr, na, ne] = grid.dims();
    let nd = spec.n_doppler;
    let len = nd * na * nr;
    let mut power: Vec<f32> = (0..len).map(|_| rng.random_range(0.0..spec.noise_floor)).collect();
    let mut elevation: Vec<i32> = (0..len).map(|_| rng.random_range(1..=ne as i32)).collect();
    let peak = spec.noise_floor * 10f32.powf(spec.snr_db / 10.0);
    for (b, _, _) in boxes {
        let c = cartesian_to_polar(lidar_to_radar.apply(b.center()));
        let d = rng.random_range(0..nd);
        if let Some([ir, ia, ie]) = grid.bin_index(c) {
            let i = (d * na + ia) * nr + ir;
            power[i] = peak;
            elevation[i] = ie as i32 + 1;
        }
    }
    RadarTensorRaed::new([nd, na, nr], N_ELEVATION.min(ne), power, elevation).expect("synthetic tensor is valid")
}

/// File names inside a written frame directory.
pub mod files {
    pub const BUNDLE: &str = "frame.toml";
    pub const POINTS: &str = "points.pcb";
    pub const DETECTIONS: &str = "detections.txt";
    pub const CALIBRATION: &str = "calib.toml";
    pub const MASK: &str = "mask.pgm";
    pub const MASK_MAPPING: &str = "mask_mapping.txt";
    pub const GROUND: &str = "ground.gmk";
    pub const RAED_POWER: &str = "raed_power.f32";
    pub const RAED_ELEVATION: &str = "raed_elevation.i32";
    pub const GT_POINT_LABELS: &str = "gt_point_labels.pcb";
    pub const GT_CLOUD: &str = "gt_labeled.pcb";
    pub const GT_CUBE: &str = "gt_cube.u8";
}

/// Writes the frame bundle plus ground-truth files into `dir` and returns
/// the bundle path.
pub fn write_frame(frame: &SyntheticFrame, dir: &Path) -> Result<PathBuf, SynthError> {
    std::fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    io::write_point_cloud(dir.join(files::POINTS), &frame.points, None)?;
    io::write_detections(dir.join(files::DETECTIONS), &frame.detections)?;
    io::write_calibration(dir.join(files::CALIBRATION), &frame.calibration)?;
    io::write_ground_mask(dir.join(files::GROUND), &frame.ground)?;
    let mut bundle = FrameBundle {
        frame_id: frame.frame_id.clone(),
        points: files::POINTS.into(),
        detections: files::DETECTIONS.into(),
        calibration: files::CALIBRATION.into(),
        ground_mask: Some(files::GROUND.into()),
        ..FrameBundle::default()
    };
    if let Some(mask) = &frame.mask {
        io::write_semantic_mask(dir.join(files::MASK), dir.join(files::MASK_MAPPING), mask)?;
        bundle.mask = Some(files::MASK.into());
        bundle.mask_mapping = Some(files::MASK_MAPPING.into());
    }
    if let Some(raed) = &frame.raed {
        io::write_raed(dir.join(files::RAED_POWER), dir.join(files::RAED_ELEVATION), raed)?;
        bundle.raed_power = Some(files::RAED_POWER.into());
        bundle.raed_elevation = Some(files::RAED_ELEVATION.into());
    }
    io::write_point_cloud(dir.join(files::GT_POINT_LABELS), &frame.points, Some(&frame.gt_point_labels))?;
    io::write_point_cloud(dir.join(files::GT_CLOUD), &frame.gt_cloud.points, Some(&frame.gt_cloud.labels))?;
    io::write_label_cube(dir.join(files::GT_CUBE), &frame.gt_cube)?;
    let path = dir.join(files::BUNDLE);
    bundle.write(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_car() -> SceneSpec {
        SceneSpec {
            objects: vec![ObjectSpec {
                class: ClassLabel::Vehicle,
                center: [10.0, 0.0, -1.8 + GROUND_CLEARANCE + 0.75],
                size: [4.5, 1.8, 1.5],
                heading: 0.2,
                density: 120.0,
            }],
            ..SceneSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_scene(&SceneSpec::random(3)).unwrap();
        let b = generate_scene(&SceneSpec::random(3)).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.gt_cube, b.gt_cube);
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn random_scenes_respect_limits() {
        for seed in 0..20 {
            let spec = SceneSpec::random(seed);
            assert!(spec.objects.len() + spec.structures.len() <= 8);
            spec.validate().unwrap();
            let f = generate_scene(&spec).unwrap();
            assert!(f.points.len() <= 50_000, "seed {seed}: {} points", f.points.len());
        }
    }

    #[test]
    fn only_front_faces_survive() {
        let f = generate_scene(&SceneSpec { ground: None, ..one_car() }).unwrap();
        assert!(!f.points.is_empty());
        // Nothing on the far side of the car (x > centre + half length).
        assert!(f.points.iter().all(|p| p.x < 10.0 + 2.3));
        assert!(f.true_labels.iter().all(|&l| l == ClassLabel::Vehicle));
    }

    #[test]
    fn detections_contain_their_points() {
        let f = generate_scene(&one_car()).unwrap();
        let d = &f.detections[0];
        for (p, l) in f.points.iter().zip(&f.true_labels) {
            assert_eq!(d.bbox.contains(*p), *l == ClassLabel::Vehicle);
        }
    }

    #[test]
    fn plane_only_scene() {
        let f = generate_scene(&SceneSpec::default()).unwrap();
        assert!(f.ground.iter().all(|&g| g));
        assert!(f.gt_cloud.is_empty());
        assert_eq!(f.gt_cube.count(ClassLabel::Empty), f.gt_cube.len());
    }

    #[test]
    fn mask_never_contradicts_points() {
        let f = generate_scene(&SceneSpec::random(5)).unwrap();
        let mask = f.mask.as_ref().unwrap();
        for ((p, &l), &g) in f.points.iter().zip(&f.true_labels).zip(&f.ground) {
            if g {
                continue;
            }
            if let Some((u, v)) = f.calibration.camera.project(*p).pixel() {
                match mask.target(mask.id_at(u, v)) {
                    MaskTarget::Label(c) => assert_eq!(c, l),
                    MaskTarget::Ignore => {}
                    MaskTarget::Unmapped => panic!("unmapped id"),
                }
            }
        }
    }

    #[test]
    fn corruption_rules() {
        let mut spec = one_car();
        spec.corruption = vec![CorruptionRule {
            class: Some(ClassLabel::Vehicle),
            min_range: None,
            max_range: Some(20.0),
            action: Corruption::Score { value: 0.2 },
        }];
        assert_eq!(generate_scene(&spec).unwrap().detections[0].score, 0.2);
        spec.corruption = vec![CorruptionRule::drop_class_within(ClassLabel::Vehicle, 0.0, 5.0)];
        assert_eq!(generate_scene(&spec).unwrap().detections.len(), 1);
        spec.corruption = vec![CorruptionRule::drop_class_within(ClassLabel::Vehicle, 0.0, 25.0)];
        assert!(generate_scene(&spec).unwrap().detections.is_empty());
    }

    #[test]
    fn spec_toml_round_trip() {
        let mut spec = SceneSpec::random(11);
        spec.corruption.push(CorruptionRule::drop_class_within(ClassLabel::Bicycle, 0.0, 25.0));
        spec.radar = Some(RadarSynthSpec::default());
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(toml::from_str::<SceneSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn rejects_non_target_objects() {
        let mut spec = one_car();
        spec.objects[0].class = ClassLabel::Scenario;
        assert!(spec.validate().is_err());
        let mut spec = one_car();
        spec.objects[0].density = 0.0;
        assert!(spec.validate().is_err());
    }
}
