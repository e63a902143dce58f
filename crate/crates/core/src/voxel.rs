//! Polar label cube: range × azimuth × elevation bins filled by per-voxel
//! majority vote.

use serde::{Deserialize, Serialize};

use crate::geometry::{cartesian_to_polar, polar_to_cartesian, Point3, PolarCoord};
use crate::labels::{majority_vote, ClassLabel, NUM_CODES};
use crate::par;

pub const DEFAULT_N_RANGE: usize = 500;
pub const DEFAULT_N_AZIMUTH: usize = 240;
pub const DEFAULT_N_ELEVATION: usize = 34;
pub const DEFAULT_RANGE_MAX: f64 = 51.4;
pub const DEFAULT_AZIMUTH_SPAN_DEG: f64 = 70.0;
pub const DEFAULT_ELEVATION_SPAN_DEG: f64 = 15.0;

/// Bin positions within this many bin widths of an integer snap onto it, so
/// edges such as azimuth 0° land in the bin they nominally start.
const EDGE_SNAP: f64 = 1e-9;

/// One uniformly binned axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Axis {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.count as f64
    }

    /// `floor((v − min) / width)`, the upper edge clamped into the last bin.
    pub fn index(&self, v: f64) -> Option<usize> {
        if !(v >= self.min && v <= self.max) {
            return None;
        }
        let t = (v - self.min) / (self.max - self.min) * self.count as f64;
        let nearest = t.round();
        let t = if (t - nearest).abs() < EDGE_SNAP { nearest } else { t };
        Some((t.floor() as usize).min(self.count - 1))
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }
}

/// Polar grid geometry. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub range: Axis,
    pub azimuth: Axis,
    pub elevation: Axis,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            range: Axis {
                count: DEFAULT_N_RANGE,
                min: 0.0,
                max: DEFAULT_RANGE_MAX,
            },
            azimuth: Axis {
                count: DEFAULT_N_AZIMUTH,
                min: -DEFAULT_AZIMUTH_SPAN_DEG.to_radians(),
                max: DEFAULT_AZIMUTH_SPAN_DEG.to_radians(),
            },
            elevation: Axis {
                count: DEFAULT_N_ELEVATION,
                min: -DEFAULT_ELEVATION_SPAN_DEG.to_radians(),
                max: DEFAULT_ELEVATION_SPAN_DEG.to_radians(),
            },
        }
    }
}

impl GridSpec {
    pub fn dims(&self) -> [usize; 3] {
        [self.range.count, self.azimuth.count, self.elevation.count]
    }

    pub fn cell_count(&self) -> usize {
        self.range.count * self.azimuth.count * self.elevation.count
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, a) in [
            ("range", self.range),
            ("azimuth", self.azimuth),
            ("elevation", self.elevation),
        ] {
            if a.count == 0 || !(a.max > a.min) || !a.min.is_finite() || !a.max.is_finite() {
                return Err(format!("invalid {name} axis {a:?}"));
            }
        }
        Ok(())
    }

    pub fn bin_index(&self, c: PolarCoord) -> Option<[usize; 3]> {
        Some([
            self.range.index(c.range)?,
            self.azimuth.index(c.azimuth)?,
            self.elevation.index(c.elevation)?,
        ])
    }

    pub fn linear_index(&self, [ir, ia, ie]: [usize; 3]) -> usize {
        (ir * self.azimuth.count + ia) * self.elevation.count + ie
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let ne = self.elevation.count;
        let na = self.azimuth.count;
        [flat / (na * ne), (flat / ne) % na, flat % ne]
    }

    pub fn cell_center_polar(&self, [ir, ia, ie]: [usize; 3]) -> PolarCoord {
        PolarCoord {
            range: self.range.center(ir),
            azimuth: self.azimuth.center(ia),
            elevation: self.elevation.center(ie),
        }
    }

    pub fn cell_center(&self, idx: [usize; 3]) -> Point3 {
        polar_to_cartesian(self.cell_center_polar(idx))
    }
}

/// Grid-bin lookup for a polar coordinate; `None` when outside the grid.
pub fn bin_index(c: PolarCoord, grid: &GridSpec) -> Option<[usize; 3]> {
    grid.bin_index(c)
}

/// Dense cube of class codes, range-major then azimuth then elevation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCube {
    dims: [usize; 3],
    data: Vec<u8>,
}

impl LabelCube {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0; dims.iter().product()],
        }
    }

    /// Takes ownership of raw codes; every byte must be a valid class code.
    pub fn from_codes(dims: [usize; 3], data: Vec<u8>) -> Result<Self, String> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(format!(
                "cube {dims:?} needs {expected} cells, got {}",
                data.len()
            ));
        }
        if let Some(bad) = data.iter().find(|&&c| ClassLabel::from_code(c).is_none()) {
            return Err(format!("cell code {bad} outside 0..=4"));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn codes(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn flat(&self, [ir, ia, ie]: [usize; 3]) -> usize {
        (ir * self.dims[1] + ia) * self.dims[2] + ie
    }

    pub fn get(&self, idx: [usize; 3]) -> ClassLabel {
        ClassLabel::from_code(self.data[self.flat(idx)]).expect("cube holds valid codes")
    }

    pub fn set(&mut self, idx: [usize; 3], label: ClassLabel) {
        let i = self.flat(idx);
        self.data[i] = label.code();
    }

    pub fn label_at(&self, flat: usize) -> ClassLabel {
        ClassLabel::from_code(self.data[flat]).expect("cube holds valid codes")
    }

    pub fn set_flat(&mut self, flat: usize, label: ClassLabel) {
        self.data[flat] = label.code();
    }

    pub fn iter_labels(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        self.data
            .iter()
            .map(|&c| ClassLabel::from_code(c).expect("cube holds valid codes"))
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.data.iter().filter(|&&c| c == label.code()).count()
    }

    pub fn map_labels(&self, f: impl Fn(ClassLabel) -> ClassLabel) -> LabelCube {
        LabelCube {
            dims: self.dims,
            data: self.iter_labels().map(|l| f(l).code()).collect(),
        }
    }
}

/// Result of voxelization with the bookkeeping needed to audit it.
#[derive(Debug, Clone)]
pub struct Voxelized {
    pub cube: LabelCube,
    /// `(flat cell index, member count)` for every occupied cell, ascending.
    pub cell_counts: Vec<(usize, u32)>,
    pub in_grid: usize,
    pub out_of_grid: usize,
}

/// Majority-vote voxelization of labeled radar-frame points.
///
/// Points labeled `Empty` do not vote but are still counted as members of
/// their cell. Empty cells stay `0`.
pub fn voxelize_labels(points: &[Point3], labels: &[ClassLabel], grid: &GridSpec) -> Voxelized {
    assert_eq!(points.len(), labels.len(), "points/labels length mismatch");
    let bins = par::map_slice(points, |&p| {
        grid.bin_index(cartesian_to_polar(p))
            .map(|idx| grid.linear_index(idx))
    });
    let mut keyed: Vec<(usize, u8)> = bins
        .iter()
        .zip(labels)
        .filter_map(|(b, l)| b.map(|cell| (cell, l.code())))
        .collect();
    let in_grid = keyed.len();
    par::sort_unstable(&mut keyed);

    let mut cube = LabelCube::zeros(grid.dims());
    let mut cell_counts = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let cell = keyed[start].0;
        let mut tally = [0u32; NUM_CODES];
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == cell {
            tally[keyed[end].1 as usize] += 1;
            end += 1;
        }
        cube.set_flat(cell, majority_vote(&tally));
        cell_counts.push((cell, (end - start) as u32));
        start = end;
    }
    Voxelized {
        cube,
        cell_counts,
        in_grid,
        out_of_grid: points.len() - in_grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_widths() {
        let g = GridSpec::default();
        assert!((g.range.width() - 0.1028).abs() < 1e-15);
        assert!((g.azimuth.width().to_degrees() - 140.0 / 240.0).abs() < 1e-12);
        assert!((g.elevation.width().to_degrees() - 30.0 / 34.0).abs() < 1e-12);
        assert_eq!(g.cell_count(), 4_080_000);
    }

    #[test]
    fn bin_index_examples() {
        let g = GridSpec::default();
        let c = PolarCoord {
            range: 0.0514,
            azimuth: 0.0,
            elevation: 0.0,
        };
        assert_eq!(bin_index(c, &g), Some([0, 120, 17]));
        let edge = PolarCoord {
            range: 51.4,
            ..c
        };
        assert_eq!(bin_index(edge, &g).unwrap()[0], 499);
        let beyond = PolarCoord { range: 52.0, ..c };
        assert_eq!(bin_index(beyond, &g), None);
        let wide = PolarCoord {
            azimuth: 71f64.to_radians(),
            ..c
        };
        assert_eq!(bin_index(wide, &g), None);
        let low = PolarCoord {
            azimuth: -70f64.to_radians(),
            elevation: -15f64.to_radians(),
            ..c
        };
        assert_eq!(bin_index(low, &g), Some([0, 0, 0]));
        assert_eq!(bin_index(PolarCoord { range: f64::NAN, ..c }, &g), None);
    }

    #[test]
    fn empty_input_gives_zero_cube() {
        let g = GridSpec::default();
        let v = voxelize_labels(&[], &[], &g);
        assert!(v.cube.codes().iter().all(|&c| c == 0));
        assert_eq!((v.in_grid, v.out_of_grid), (0, 0));
    }

    #[test]
    fn cell_majority() {
        let g = GridSpec::default();
        let p = Point3::new(10.0, 0.01, 0.01);
        let v = voxelize_labels(
            &[p, p, p],
            &[ClassLabel::Scenario, ClassLabel::Scenario, ClassLabel::Vehicle],
            &g,
        );
        let idx = g.bin_index(cartesian_to_polar(p)).unwrap();
        assert_eq!(v.cube.get(idx), ClassLabel::Scenario);
        assert_eq!(v.cell_counts, vec![(g.linear_index(idx), 3)]);
    }

    #[test]
    fn cell_centers_map_back() {
        let g = GridSpec::default();
        for idx in [[0, 0, 0], [499, 239, 33], [250, 120, 17], [13, 201, 5]] {
            let c = cartesian_to_polar(g.cell_center(idx));
            assert_eq!(g.bin_index(c), Some(idx));
            assert_eq!(g.unravel(g.linear_index(idx)), idx);
        }
    }

    #[test]
    fn cube_rejects_bad_codes() {
        assert!(LabelCube::from_codes([1, 1, 2], vec![0, 5]).is_err());
        assert!(LabelCube::from_codes([1, 1, 2], vec![0]).is_err());
        assert!(LabelCube::from_codes([1, 1, 2], vec![4, 1]).is_ok());
    }
}
