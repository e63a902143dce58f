//! Coordinate frames, rigid transforms, polar conversion and oriented boxes.
//!
//! All frames are right-handed with x forward, y left and z up. Angles are
//! radians throughout; degrees only appear at the CLI and report boundary.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

/// Orthonormality tolerance applied by [`RigidTransform::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Squared distance, evaluated as `dx*dx + dy*dy + dz*dz` in that order.
    /// Neighbourhood queries and their brute-force references both use this
    /// so that radius tests agree bit for bit.
    pub fn distance_squared(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(self, o: Point3) -> f64 {
        self.distance_squared(o).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

pub type Matrix3 = [[f64; 3]; 3];

pub const IDENTITY3: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(m: &Matrix3, p: Point3) -> Point3 {
    Point3::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
    )
}

fn transpose(m: &Matrix3) -> Matrix3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

fn determinant(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Rotation about z by `angle` radians.
pub fn rotation_z(angle: f64) -> Matrix3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Rotation from intrinsic roll (x), pitch (y), yaw (z): `Rz·Ry·Rx`.
pub fn rotation_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    mat_mul(&rotation_z(yaw), &mat_mul(&ry, &rx))
}

/// Proper rigid motion `p ↦ R·p + t`.
///
/// The rotation is validated on construction, so every value of this type
/// satisfies `RᵀR = I` and `det R = +1` within the tolerance it was built
/// with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3,
    translation: Point3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: IDENTITY3,
        translation: Point3::ORIGIN,
    };

    pub fn new(rotation: Matrix3, translation: Point3) -> Result<Self, GeometryError> {
        Self::with_tolerance(rotation, translation, ORTHONORMAL_TOL)
    }

    /// Like [`RigidTransform::new`] with a caller-chosen orthonormality
    /// tolerance (file readers accept decimal input rounded to ~1e-6).
    pub fn with_tolerance(
        rotation: Matrix3,
        translation: Point3,
        tol: f64,
    ) -> Result<Self, GeometryError> {
        if rotation.iter().flatten().any(|v| !v.is_finite()) || !translation.is_finite() {
            return Err(GeometryError::InvalidTransform("non-finite entry".into()));
        }
        let rtr = mat_mul(&transpose(&rotation), &rotation);
        let max_dev = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (rtr[i][j] - IDENTITY3[i][j]).abs())
            .fold(0.0, f64::max);
        if max_dev > tol {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {max_dev:e})"
            )));
        }
        let det = determinant(&rotation);
        if (det - 1.0).abs() > tol {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1 (reflection?)"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_yaw(yaw: f64, translation: Point3) -> Self {
        Self {
            rotation: rotation_z(yaw),
            translation,
        }
    }

    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64, translation: Point3) -> Self {
        Self {
            rotation: rotation_rpy(roll, pitch, yaw),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3 {
        &self.rotation
    }

    pub fn translation(&self) -> Point3 {
        self.translation
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        mat_vec(&self.rotation, p) + self.translation
    }

    /// `self ∘ other`: applying the result equals applying `other` first,
    /// then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: self.apply(other.translation),
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = transpose(&self.rotation);
        RigidTransform {
            rotation: rt,
            translation: -mat_vec(&rt, self.translation),
        }
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_matrix4(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Applies `t` to every point.
pub fn apply_rigid_transform(points: &[Point3], t: &RigidTransform) -> Vec<Point3> {
    par::map_slice(points, |&p| t.apply(p))
}

/// Range / azimuth / elevation of a point as seen from the frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarCoord {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

pub fn cartesian_to_polar(p: Point3) -> PolarCoord {
    let horizontal = p.x.hypot(p.y);
    PolarCoord {
        range: p.norm(),
        azimuth: p.y.atan2(p.x),
        elevation: p.z.atan2(horizontal),
    }
}

pub fn polar_to_cartesian(c: PolarCoord) -> Point3 {
    let (se, ce) = c.elevation.sin_cos();
    let (sa, ca) = c.azimuth.sin_cos();
    Point3::new(c.range * ce * ca, c.range * ce * sa, c.range * se)
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Box with centre, full extents along its local axes and a yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    center: Point3,
    size: [f64; 3],
    heading: f64,
}

impl OrientedBox {
    pub fn new(center: Point3, size: [f64; 3], heading: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !heading.is_finite() {
            return Err(GeometryError::InvalidBox("non-finite parameter".into()));
        }
        if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(GeometryError::InvalidBox(format!(
                "size components must be > 0, got {size:?}"
            )));
        }
        Ok(Self {
            center,
            size,
            heading: normalize_angle(heading),
        })
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn size(&self) -> [f64; 3] {
        self.size
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Point expressed in the box frame (centre at origin, axes aligned).
    pub fn to_local(&self, p: Point3) -> Point3 {
        let d = p - self.center;
        let (s, c) = self.heading.sin_cos();
        Point3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    pub fn to_world(&self, local: Point3) -> Point3 {
        let (s, c) = self.heading.sin_cos();
        Point3::new(
            c * local.x - s * local.y,
            s * local.x + c * local.y,
            local.z,
        ) + self.center
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Point3) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.size[0] * 0.5
            && l.y.abs() <= self.size[1] * 0.5
            && l.z.abs() <= self.size[2] * 0.5
    }

    /// Box grown by `margin` on every face.
    pub fn inflated(&self, margin: f64) -> Result<Self, GeometryError> {
        Self::new(
            self.center,
            self.size.map(|s| s + 2.0 * margin),
            self.heading,
        )
    }

    /// Eight corners in world coordinates.
    pub fn corners(&self) -> [Point3; 8] {
        let [hx, hy, hz] = self.size.map(|s| s * 0.5);
        let mut out = [Point3::ORIGIN; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -hx } else { hx };
            let sy = if i & 2 == 0 { -hy } else { hy };
            let sz = if i & 4 == 0 { -hz } else { hz };
            *c = self.to_world(Point3::new(sx, sy, sz));
        }
        out
    }

    /// Entry parameter of the ray `origin + t·dir` (t ≥ 0) into the box, if
    /// it hits.
    pub fn ray_entry(&self, origin: Point3, dir: Point3) -> Option<f64> {
        let o = self.to_local(origin);
        let (s, c) = self.heading.sin_cos();
        let d = Point3::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z);
        let half = self.size.map(|v| v * 0.5);
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((oi, di), h) in o.to_array().into_iter().zip(d.to_array()).zip(half) {
            if di.abs() < 1e-15 {
                if oi.abs() > h {
                    return None;
                }
            } else {
                let a = (-h - oi) / di;
                let b = (h - oi) / di;
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if t1 < t0 || t1 < 0.0 {
            None
        } else {
            Some(t0.max(0.0))
        }
    }
}

/// Boundary-inclusive containment mask.
pub fn points_in_oriented_box(points: &[Point3], b: &OrientedBox) -> Vec<bool> {
    par::map_slice(points, |&p| b.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn identity_transform_is_noop() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::IDENTITY.apply(p), p);
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::new(rotation_z(PI / 2.0), Point3::ORIGIN).unwrap();
        let q = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert!((q.x).abs() < EPS && (q.y - 1.0).abs() < EPS && q.z.abs() < EPS);
    }

    #[test]
    fn rejects_reflection_and_shear() {
        let reflect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(matches!(
            RigidTransform::new(reflect, Point3::ORIGIN),
            Err(GeometryError::InvalidTransform(_))
        ));
        let shear = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RigidTransform::new(shear, Point3::ORIGIN).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let t = RigidTransform::from_rpy(0.1, -0.2, 0.7, Point3::new(1.0, -2.0, 0.5));
        let p = Point3::new(3.0, 4.0, -1.0);
        let back = t.inverse().apply(t.apply(p));
        assert!(back.distance(p) < 1e-12);
    }

    #[test]
    fn polar_on_axes() {
        let c = cartesian_to_polar(Point3::new(1.0, 0.0, 0.0));
        assert_eq!((c.range, c.azimuth, c.elevation), (1.0, 0.0, 0.0));
        let c = cartesian_to_polar(Point3::new(0.0, 1.0, 0.0));
        assert!((c.range - 1.0).abs() < EPS);
        assert!((c.azimuth - PI / 2.0).abs() < EPS);
        assert_eq!(c.elevation, 0.0);
        // 3-4-5 triangle: atan2(4, 3) = 53.130102354°.
        let c = cartesian_to_polar(Point3::new(3.0, 4.0, 0.0));
        assert!((c.range - 5.0).abs() < EPS);
        assert!((c.azimuth.to_degrees() - 53.130_102_354_155_98).abs() < 1e-9);
        let c = cartesian_to_polar(Point3::ORIGIN);
        assert_eq!((c.range, c.azimuth, c.elevation), (0.0, 0.0, 0.0));
    }

    #[test]
    fn box_containment_examples() {
        let unit = OrientedBox::new(Point3::ORIGIN, [1.0, 1.0, 1.0], 0.0).unwrap();
        assert!(unit.contains(Point3::ORIGIN));
        assert!(unit.contains(Point3::new(0.5, 0.5, -0.5)), "faces inclusive");
        assert!(!unit.contains(Point3::new(0.51, 0.0, 0.0)));
        // Long axis turned onto y: local x' = y = 0.9 ≤ 1.0.
        let turned = OrientedBox::new(Point3::ORIGIN, [2.0, 1.0, 1.0], PI / 2.0).unwrap();
        assert!(turned.contains(Point3::new(0.0, 0.9, 0.0)));
        assert!(!turned.contains(Point3::new(0.9, 0.0, 0.0)));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(
            OrientedBox::new(Point3::ORIGIN, [1.0, 0.0, 1.0], 0.0),
            Err(GeometryError::InvalidBox(_))
        ));
        assert!(OrientedBox::new(Point3::ORIGIN, [1.0, -1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn heading_normalized() {
        let b = OrientedBox::new(Point3::ORIGIN, [1.0; 3], 3.0 * PI).unwrap();
        assert!((b.heading() - PI).abs() < 1e-12);
        let b = OrientedBox::new(Point3::ORIGIN, [1.0; 3], -PI).unwrap();
        assert!((b.heading() - PI).abs() < 1e-12);
    }

    #[test]
    fn ray_entry_hits_front_face() {
        let b = OrientedBox::new(Point3::new(10.0, 0.0, 0.0), [2.0, 2.0, 2.0], 0.3).unwrap();
        let t = b.ray_entry(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(t > 8.5 && t < 9.0);
        assert!(b
            .ray_entry(Point3::ORIGIN, Point3::new(-1.0, 0.0, 0.0))
            .is_none());
    }
}
