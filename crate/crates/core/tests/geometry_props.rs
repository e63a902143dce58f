use proptest::prelude::*;

use radlabel::geometry::{apply_rigid_transform, cartesian_to_polar, points_in_oriented_box, polar_to_cartesian};
use radlabel::labelling::{assign_box_labels, crop_to_radar_fov, downsample_voxel_grid, Detection, FovSpec};
use radlabel::{ClassLabel, OrientedBox, Point3, RigidTransform};

fn point() -> impl Strategy<Value = Point3> {
    (-60.0f64..60.0, -60.0f64..60.0, -10.0f64..10.0).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    let pi = std::f64::consts::PI;
    (-pi..pi, -1.5f64..1.5, -pi..pi, point())
        .prop_map(|(r, p, y, t)| RigidTransform::from_rpy(r, p, y, t))
}

proptest! {
    #[test]
    fn compose_equals_sequential(t1 in transform(), t2 in transform(), pts in proptest::collection::vec(point(), 100)) {
        let once = apply_rigid_transform(&pts, &t1.compose(&t2));
        let seq = apply_rigid_transform(&apply_rigid_transform(&pts, &t2), &t1);
        for (a, b) in once.iter().zip(&seq) {
            prop_assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn transforms_preserve_distances(t in transform(), pts in proptest::collection::vec(point(), 2..30)) {
        let out = apply_rigid_transform(&pts, &t);
        prop_assert_eq!(out.len(), pts.len());
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                prop_assert!((pts[i].distance(pts[j]) - out[i].distance(out[j])).abs() < 1e-9);
            }
            prop_assert!(t.inverse().apply(out[i]).distance(pts[i]) < 1e-9);
        }
    }

    #[test]
    fn polar_round_trip(p in point()) {
        prop_assume!(p.norm() > 1e-6);
        let c = cartesian_to_polar(p);
        prop_assert!((c.range - p.norm()).abs() < 1e-12);
        prop_assert!(polar_to_cartesian(c).distance(p) < 1e-9);
    }

    #[test]
    fn containment_is_local_half_extents(
        c in point(), dx in 0.1f64..6.0, dy in 0.1f64..6.0, dz in 0.1f64..4.0,
        heading in -7.0f64..7.0, pts in proptest::collection::vec(point(), 50),
    ) {
        let b = OrientedBox::new(c, [dx, dy, dz], heading).unwrap();
        // Also sample near the box so both outcomes occur.
        let near: Vec<Point3> = pts.iter().map(|p| c + Point3::new(p.x / 15.0, p.y / 15.0, p.z / 4.0)).collect();
        let (s, co) = heading.sin_cos();
        for (p, inside) in near.iter().zip(points_in_oriented_box(&near, &b)) {
            let d = *p - c;
            let (lx, ly) = (co * d.x + s * d.y, -s * d.x + co * d.y);
            let want = lx.abs() <= dx / 2.0 + 1e-12 && ly.abs() <= dy / 2.0 + 1e-12 && d.z.abs() <= dz / 2.0 + 1e-12;
            let clear = (lx.abs() - dx / 2.0).abs() > 1e-9 && (ly.abs() - dy / 2.0).abs() > 1e-9;
            if clear {
                prop_assert_eq!(inside, want);
            }
        }
    }

    #[test]
    fn fov_crop_is_an_ordered_subset(t in transform(), pts in proptest::collection::vec(point(), 0..200)) {
        let fov = FovSpec::default();
        let (kept, idx) = crop_to_radar_fov(&pts, &t, &fov);
        prop_assert_eq!(kept.len(), idx.len());
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for (k, &i) in kept.iter().zip(&idx) {
            prop_assert_eq!(*k, pts[i]);
            prop_assert!(fov.contains(t.apply(*k)));
        }
        prop_assert_eq!(idx.len(), pts.iter().filter(|p| fov.contains(t.apply(**p))).count());
    }

    #[test]
    fn downsampling_never_grows(pts in proptest::collection::vec(point(), 0..300), leaf in 0.05f64..10.0) {
        let out = downsample_voxel_grid(&pts, leaf).unwrap();
        prop_assert!(out.len() <= pts.len());
        prop_assert_eq!(out.is_empty(), pts.is_empty());
    }

    #[test]
    fn box_labels_only_inside_confident_boxes(
        pts in proptest::collection::vec(point(), 0..200),
        c in point(), score in 0.0f64..1.0, threshold in 0.0f64..1.0,
    ) {
        let b = OrientedBox::new(c, [20.0, 20.0, 8.0], 0.3).unwrap();
        let det = Detection::new(b, ClassLabel::Vehicle, score).unwrap();
        let labels = assign_box_labels(&pts, &[det], threshold);
        for (p, l) in pts.iter().zip(&labels) {
            let want = if score >= threshold && b.contains(*p) { ClassLabel::Vehicle } else { ClassLabel::Scenario };
            prop_assert_eq!(*l, want);
        }
    }
}
