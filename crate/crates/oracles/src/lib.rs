//! Slow, obviously-correct references for the accelerated kernels in
//! `radlabel`. Test-only; nothing here is tuned for speed.

pub mod formats;

use std::collections::HashMap;

use rand::Rng;

use radlabel::geometry::cartesian_to_polar;
use radlabel::labels::{majority_vote, NUM_CODES};
use radlabel::radar::RadarTensorRaed;
use radlabel::voxel::{Axis, GridSpec};
use radlabel::{ClassLabel, LabelCube, Point3};

/// All-pairs DBSCAN facts that do not depend on visiting order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanReference {
    pub is_core: Vec<bool>,
    /// Neither core nor within reach of a core point.
    pub is_noise: Vec<bool>,
    /// For core points, the smallest index in their core component.
    pub core_component: Vec<Option<usize>>,
    /// Core neighbours of every point.
    pub core_neighbours: Vec<Vec<usize>>,
}

pub fn dbscan_reference(points: &[Point3], eps: f64, min_pts: usize) -> DbscanReference {
    let n = points.len();
    let eps_sq = eps * eps;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if points[j].distance_squared(points[i]) <= eps_sq {
                adj[i].push(j);
            }
        }
    }
    let is_core: Vec<bool> = adj.iter().map(|a| a.len() >= min_pts).collect();
    let core_neighbours: Vec<Vec<usize>> = adj
        .iter()
        .map(|a| a.iter().copied().filter(|&j| is_core[j]).collect())
        .collect();
    let is_noise = (0..n).map(|i| !is_core[i] && core_neighbours[i].is_empty()).collect();

    // Flood fill over core-core edges, seeds in index order.
    let mut core_component = vec![None; n];
    for seed in 0..n {
        if !is_core[seed] || core_component[seed].is_some() {
            continue;
        }
        let mut stack = vec![seed];
        core_component[seed] = Some(seed);
        while let Some(i) = stack.pop() {
            for &j in &core_neighbours[i] {
                if core_component[j].is_none() {
                    core_component[j] = Some(seed);
                    stack.push(j);
                }
            }
        }
    }
    DbscanReference {
        is_core,
        is_noise,
        core_component,
        core_neighbours,
    }
}

/// Symmetric Chamfer distance by exhaustive search.
pub fn chamfer_brute(a: &[Point3], b: &[Point3]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let directed = |from: &[Point3], to: &[Point3]| {
        from.iter()
            .map(|p| to.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    Some(0.5 * (directed(a, b) + directed(b, a)))
}

fn axis_bin(axis: &Axis, v: f64) -> Option<usize> {
    if v < axis.min || v > axis.max {
        return None;
    }
    let width = (axis.max - axis.min) / axis.count as f64;
    Some((((v - axis.min) / width).floor() as usize).min(axis.count - 1))
}

/// Exhaustive tally: per-cell class counts in a hash map, then a vote.
/// Returns the cube and the per-cell member counts (empty labels included).
pub fn voxel_tally(points: &[Point3], labels: &[ClassLabel], grid: &GridSpec) -> (LabelCube, HashMap<[usize; 3], u32>) {
    let mut tallies: HashMap<[usize; 3], [u32; NUM_CODES]> = HashMap::new();
    for (p, l) in points.iter().zip(labels) {
        let c = cartesian_to_polar(*p);
        let cell = match (
            axis_bin(&grid.range, c.range),
            axis_bin(&grid.azimuth, c.azimuth),
            axis_bin(&grid.elevation, c.elevation),
        ) {
            (Some(r), Some(a), Some(e)) => [r, a, e],
            _ => continue,
        };
        tallies.entry(cell).or_insert([0; NUM_CODES])[l.code() as usize] += 1;
    }
    let mut cube = LabelCube::zeros(grid.dims());
    let mut members = HashMap::new();
    for (cell, counts) in tallies {
        cube.set(cell, majority_vote(&counts));
        members.insert(cell, counts.iter().sum());
    }
    (cube, members)
}

/// Doppler-averaged power as `(mean, count)` indexed `[r][a][e]`, by a
/// plain loop over every (r, a, e, d).
pub fn raed_triple_loop(t: &RadarTensorRaed) -> Vec<(f64, u32)> {
    let [nd, na, nr] = t.dims();
    let ne = t.n_elevation();
    let mut out = vec![(0.0, 0); nr * na * ne];
    for r in 0..nr {
        for a in 0..na {
            for e in 0..ne {
                let mut sum = 0.0;
                let mut count = 0;
                for d in 0..nd {
                    let i = t.index(d, a, r);
                    if t.elevation()[i] as usize == e + 1 {
                        sum += f64::from(t.power()[i]);
                        count += 1;
                    }
                }
                out[(r * na + a) * ne + e] = (if count > 0 { sum / f64::from(count) } else { 0.0 }, count);
            }
        }
    }
    out
}

/// Uniform points in an axis-aligned box.
pub fn uniform_cloud<R: Rng>(rng: &mut R, n: usize, lo: Point3, hi: Point3) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            )
        })
        .collect()
}

/// Dense Gaussian-ish blobs over sparse uniform clutter, shuffled.
pub fn mixed_density_cloud<R: Rng>(rng: &mut R, n: usize) -> Vec<Point3> {
    let blobs = rng.random_range(1..=5);
    let mut pts = Vec::with_capacity(n);
    let centers: Vec<(Point3, f64)> = (0..blobs)
        .map(|_| {
            (
                Point3::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.2..1.5),
            )
        })
        .collect();
    let clutter = n / rng.random_range(3..=8);
    pts.extend(uniform_cloud(rng, clutter, Point3::new(-10.0, -10.0, -2.0), Point3::new(10.0, 10.0, 2.0)));
    while pts.len() < n {
        let (c, s) = centers[rng.random_range(0..centers.len())];
        let d = Point3::new(
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        );
        pts.push(c + d);
    }
    for i in (1..pts.len()).rev() {
        pts.swap(i, rng.random_range(0..=i));
    }
    pts
}

/// Random RAED tensor with elevation indices in `1..=ne`.
pub fn random_raed<R: Rng>(rng: &mut R, dims: [usize; 3], ne: usize) -> RadarTensorRaed {
    let n: usize = dims.iter().product();
    let power = (0..n).map(|_| rng.random_range(0.0f32..100.0)).collect();
    let elevation = (0..n).map(|_| rng.random_range(1..=ne as i32)).collect();
    RadarTensorRaed::new(dims, ne, power, elevation).expect("valid by construction")
}

/// Random labels, `Empty` included.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<ClassLabel> {
    (0..n)
        .map(|_| ClassLabel::from_code(rng.random_range(0..NUM_CODES as u8)).unwrap())
        .collect()
}

/// Detection probability by scanning the full Chebyshev neighbourhood of
/// every ground-truth cell in `classes`.
pub fn pd_brute(pred: &LabelCube, gt: &LabelCube, classes: &[ClassLabel], dilation: usize) -> (u64, u64) {
    let [nr, na, ne] = gt.dims();
    let d = dilation as i64;
    let (mut hits, mut total) = (0, 0);
    for r in 0..nr {
        for a in 0..na {
            for e in 0..ne {
                if !classes.contains(&gt.get([r, a, e])) {
                    continue;
                }
                total += 1;
                let mut found = false;
                for dr in -d..=d {
                    for da in -d..=d {
                        for de in -d..=d {
                            let (rr, aa, ee) = (r as i64 + dr, a as i64 + da, e as i64 + de);
                            if rr < 0 || aa < 0 || ee < 0 || rr >= nr as i64 || aa >= na as i64 || ee >= ne as i64 {
                                continue;
                            }
                            found |= classes.contains(&pred.get([rr as usize, aa as usize, ee as usize]));
                        }
                    }
                }
                hits += u64::from(found);
            }
        }
    }
    (hits, total)
}

/// Random cube with roughly `fill` of the cells non-empty.
pub fn random_cube<R: Rng>(rng: &mut R, dims: [usize; 3], fill: f64) -> LabelCube {
    let n = dims.iter().product();
    let codes = (0..n)
        .map(|_| if rng.random_bool(fill) { rng.random_range(1..NUM_CODES as u8) } else { 0 })
        .collect();
    LabelCube::from_codes(dims, codes).expect("codes in range")
}
