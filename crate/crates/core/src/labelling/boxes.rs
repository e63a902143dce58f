use crate::geometry::{OrientedBox, Point3};
use crate::labels::ClassLabel;
use crate::par;

use super::LabelError;

/// One detector box: class, confidence, and the seven box parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: OrientedBox,
    pub class: ClassLabel,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: OrientedBox, class: ClassLabel, score: f64) -> Result<Self, LabelError> {
        if !class.is_target() {
            return Err(LabelError::Param(format!(
                "detection class must be pedestrian, vehicle or bicycle, got {class}"
            )));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(LabelError::Param(format!("score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, class, score })
    }
}

/// Labels every point with the class of the box containing it; points in no
/// surviving box are scenario objects.
///
/// Boxes scoring below `confidence_threshold` are ignored. A point inside
/// several boxes takes the highest score, then the smallest volume, then the
/// earliest detection.
pub fn assign_box_labels(
    points: &[Point3],
    detections: &[Detection],
    confidence_threshold: f64,
) -> Vec<ClassLabel> {
    let mut kept: Vec<(usize, &Detection)> = detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.score >= confidence_threshold)
        .collect();
    kept.sort_by(|(ia, a), (ib, b)| {
        b.score
            .total_cmp(&a.score)
            .then(a.bbox.volume().total_cmp(&b.bbox.volume()))
            .then(ia.cmp(ib))
    });
    par::map_slice(points, |&p| {
        kept.iter()
            .find(|(_, d)| d.bbox.contains(p))
            .map_or(ClassLabel::Scenario, |(_, d)| d.class)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(class: ClassLabel, score: f64, size: [f64; 3]) -> Detection {
        Detection::new(OrientedBox::new(Point3::ORIGIN, size, 0.0).unwrap(), class, score).unwrap()
    }

    #[test]
    fn confidence_gate() {
        let p = [Point3::new(0.1, 0.0, 0.0)];
        let v = det(ClassLabel::Vehicle, 0.9, [4.5, 1.8, 1.6]);
        assert_eq!(assign_box_labels(&p, &[v], 0.5), vec![ClassLabel::Vehicle]);
        let weak = det(ClassLabel::Vehicle, 0.4, [4.5, 1.8, 1.6]);
        assert_eq!(assign_box_labels(&p, &[weak], 0.5), vec![ClassLabel::Scenario]);
        let exact = det(ClassLabel::Vehicle, 0.5, [4.5, 1.8, 1.6]);
        assert_eq!(assign_box_labels(&p, &[exact], 0.5), vec![ClassLabel::Vehicle]);
    }

    #[test]
    fn overlap_tie_breaks() {
        let p = [Point3::ORIGIN];
        let v = det(ClassLabel::Vehicle, 0.9, [4.5, 1.8, 1.6]);
        let b = det(ClassLabel::Bicycle, 0.6, [1.7, 0.6, 1.1]);
        assert_eq!(assign_box_labels(&p, &[b, v], 0.5), vec![ClassLabel::Vehicle]);
        let v_same = det(ClassLabel::Vehicle, 0.6, [4.5, 1.8, 1.6]);
        assert_eq!(assign_box_labels(&p, &[v_same, b], 0.5), vec![ClassLabel::Bicycle]);
    }

    #[test]
    fn rejects_bad_detections() {
        let b = OrientedBox::new(Point3::ORIGIN, [1.0; 3], 0.0).unwrap();
        assert!(Detection::new(b, ClassLabel::Scenario, 0.9).is_err());
        assert!(Detection::new(b, ClassLabel::Vehicle, 1.2).is_err());
    }
}
