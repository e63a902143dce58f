//! Spatial indices: a uniform hash grid for fixed-radius queries and a k-d
//! tree for nearest-neighbour distances.

use std::collections::HashMap;
use std::ops::Range;

use crate::geometry::Point3;

type CellKey = (i64, i64, i64);

fn cell_of(p: Point3, inv: f64) -> CellKey {
    (
        (p.x * inv).floor() as i64,
        (p.y * inv).floor() as i64,
        (p.z * inv).floor() as i64,
    )
}

/// Uniform grid with cell edge equal to the query radius, so every
/// neighbour lies in the 3×3×3 block around the query cell.
pub struct RadiusGrid<'a> {
    points: &'a [Point3],
    radius_sq: f64,
    inv_cell: f64,
    order: Vec<u32>,
    cells: HashMap<CellKey, Range<usize>>,
}

impl<'a> RadiusGrid<'a> {
    pub fn new(points: &'a [Point3], radius: f64) -> Self {
        assert!(radius > 0.0, "radius must be positive");
        // Slightly oversized cells keep boundary neighbours inside the 3×3×3
        // block despite rounding in `floor(x / cell)`.
        let inv_cell = 1.0 / (radius * (1.0 + 1e-9));
        let mut keyed: Vec<(CellKey, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| (cell_of(p, inv_cell), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut cells = HashMap::with_capacity(keyed.len() / 4 + 1);
        let mut start = 0;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, start..end);
            start = end;
        }
        Self {
            points,
            radius_sq: radius * radius,
            inv_cell,
            order: keyed.into_iter().map(|(_, i)| i).collect(),
            cells,
        }
    }

    /// Visits every index `j` with `‖p_j − q‖² ≤ r²` (the query point itself
    /// included when it is in the set). Cells are walked in a fixed order and
    /// indices within a cell ascend. Stops early when `visit` returns false.
    pub fn for_each_within<F: FnMut(usize) -> bool>(&self, q: Point3, mut visit: F) {
        let (cx, cy, cz) = cell_of(q, self.inv_cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(range) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in &self.order[range.clone()] {
                        let j = j as usize;
                        if self.points[j].distance_squared(q) <= self.radius_sq && !visit(j) {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Number of neighbours within the radius, saturating at `cap`.
    pub fn count_within(&self, q: Point3, cap: usize) -> usize {
        let mut n = 0;
        self.for_each_within(q, |_| {
            n += 1;
            n < cap
        });
        n
    }
}

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf(Range<usize>),
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static k-d tree over a borrowed point slice.
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

fn coord(p: Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(Node::Leaf(lo..hi));
            return id;
        }
        let axis = {
            let mut min = [f64::INFINITY; 3];
            let mut max = [f64::NEG_INFINITY; 3];
            for &i in &self.order[lo..hi] {
                let p = self.points[i as usize].to_array();
                for k in 0..3 {
                    min[k] = min[k].min(p[k]);
                    max[k] = max[k].max(p[k]);
                }
            }
            (0..3)
                .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
                .unwrap_or(0)
        };
        let mid = lo + (hi - lo) / 2;
        let points = self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            coord(points[a as usize], axis).total_cmp(&coord(points[b as usize], axis))
        });
        let value = coord(points[self.order[mid] as usize], axis);
        self.nodes.push(Node::Leaf(0..0));
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Squared distance to the nearest indexed point; `None` on an empty tree.
    pub fn nearest_distance_squared(&self, q: Point3) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, q, &mut best);
        Some(best)
    }

    pub fn nearest_distance(&self, q: Point3) -> Option<f64> {
        self.nearest_distance_squared(q).map(f64::sqrt)
    }

    fn search(&self, node: usize, q: Point3, best: &mut f64) {
        match &self.nodes[node] {
            Node::Leaf(range) => {
                for &i in &self.order[range.clone()] {
                    let d = self.points[i as usize].distance_squared(q);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            &Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(q, axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn grid_matches_scan() {
        let pts = cloud(800, 1);
        let grid = RadiusGrid::new(&pts, 0.7);
        for (i, &q) in pts.iter().enumerate().step_by(7) {
            let mut got = Vec::new();
            grid.for_each_within(q, |j| {
                got.push(j);
                true
            });
            got.sort_unstable();
            let want: Vec<usize> = (0..pts.len())
                .filter(|&j| pts[j].distance_squared(q) <= 0.49)
                .collect();
            assert_eq!(got, want, "query {i}");
        }
    }

    #[test]
    fn count_saturates() {
        let pts = vec![Point3::ORIGIN; 20];
        let grid = RadiusGrid::new(&pts, 1.0);
        assert_eq!(grid.count_within(Point3::ORIGIN, 5), 5);
        assert_eq!(grid.count_within(Point3::ORIGIN, 100), 20);
    }

    #[test]
    fn kdtree_matches_scan() {
        let pts = cloud(1000, 2);
        let queries = cloud(200, 3);
        let tree = KdTree::new(&pts);
        for q in queries {
            let want = pts
                .iter()
                .map(|p| p.distance_squared(q))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(tree.nearest_distance_squared(q), Some(want));
        }
    }

    #[test]
    fn kdtree_duplicates_and_empty() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 50];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest_distance(Point3::new(1.0, 1.0, 1.0)), Some(0.0));
        let empty: Vec<Point3> = Vec::new();
        assert_eq!(KdTree::new(&empty).nearest_distance(Point3::ORIGIN), None);
    }
}
