use crate::geometry::Point3;
use crate::par;

use super::LabelError;

/// Voxel-grid downsampling: one centroid per occupied `leaf`-sized cube.
///
/// Output is ordered by cell key and each centroid sums its members in
/// coordinate order, so the result does not depend on input order.
pub fn downsample_voxel_grid(points: &[Point3], leaf: f64) -> Result<Vec<Point3>, LabelError> {
    if !(leaf.is_finite() && leaf > 0.0) {
        return Err(LabelError::Param(format!("downsample leaf must be > 0, got {leaf}")));
    }
    let mut keyed: Vec<([i64; 3], [u64; 3])> = par::map_slice(points, |p| {
        (
            [
                (p.x / leaf).floor() as i64,
                (p.y / leaf).floor() as i64,
                (p.z / leaf).floor() as i64,
            ],
            // Order-preserving integer image of each coordinate so the sort
            // key is total.
            [p.x, p.y, p.z].map(|v| {
                let bits = v.to_bits();
                if bits >> 63 == 1 {
                    !bits
                } else {
                    bits | (1 << 63)
                }
            }),
        )
    });
    par::sort_unstable(&mut keyed);

    let mut out = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let key = keyed[start].0;
        let mut end = start;
        let mut sum = Point3::ORIGIN;
        while end < keyed.len() && keyed[end].0 == key {
            let [x, y, z] = keyed[end].1.map(|b| {
                f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
            });
            sum = sum + Point3::new(x, y, z);
            end += 1;
        }
        out.push(sum * (1.0 / (end - start) as f64));
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_close_points_merge_to_midpoint() {
        let pts = [Point3::new(0.0501, 0.05, 0.05), Point3::new(0.0511, 0.05, 0.05)];
        let out = downsample_voxel_grid(&pts, 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].x - 0.0506).abs() < 1e-12);
    }

    #[test]
    fn lattice_unchanged() {
        let pts: Vec<Point3> = (0..5)
            .flat_map(|i| (0..5).map(move |j| Point3::new(i as f64 + 0.05, j as f64 - 0.95, 0.05)))
            .collect();
        assert_eq!(downsample_voxel_grid(&pts, 0.1).unwrap().len(), 25);
    }

    #[test]
    fn order_independent() {
        let pts: Vec<Point3> = (0..200)
            .map(|i| Point3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), i as f64 * 1e-3))
            .collect();
        let mut rev = pts.clone();
        rev.reverse();
        assert_eq!(
            downsample_voxel_grid(&pts, 0.3).unwrap(),
            downsample_voxel_grid(&rev, 0.3).unwrap()
        );
    }

    #[test]
    fn rejects_bad_leaf() {
        assert!(downsample_voxel_grid(&[], 0.0).is_err());
        assert!(downsample_voxel_grid(&[], f64::NAN).is_err());
    }
}
