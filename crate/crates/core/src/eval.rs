//! Evaluation metrics: voxel detection probability and false-alarm rate,
//! Chamfer distance between point sets, and per-class precision / recall /
//! F1 on point labels.
//!
//! Ratios with an empty denominator are `None` ("not applicable") and are
//! skipped when averaging over frames.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::labelling::LabeledPointCloud;
use crate::labels::{ClassLabel, NUM_CODES, VRU};
use crate::par;
use crate::spatial::KdTree;
use crate::voxel::{GridSpec, LabelCube};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: prediction has {pred} elements, ground truth {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("grid mismatch: prediction is {pred:?}, ground truth is {gt:?}")]
    GridMismatch { pred: [usize; 3], gt: [usize; 3] },
}

/// Folds bicycles into the VRU code; other labels pass through.
pub fn vru_merge(labels: &[ClassLabel]) -> Vec<ClassLabel> {
    labels.iter().map(|l| l.vru_merged()).collect()
}

pub fn vru_merge_cube(cube: &LabelCube) -> LabelCube {
    cube.map_labels(ClassLabel::vru_merged)
}

/// Confusion matrix indexed `[ground truth][prediction]` by class code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub matrix: [[u64; NUM_CODES]; NUM_CODES],
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn tp(&self, c: ClassLabel) -> u64 {
        self.matrix[c as usize][c as usize]
    }

    pub fn fp(&self, c: ClassLabel) -> u64 {
        (0..NUM_CODES).map(|g| self.matrix[g][c as usize]).sum::<u64>() - self.tp(c)
    }

    pub fn fn_(&self, c: ClassLabel) -> u64 {
        self.matrix[c as usize].iter().sum::<u64>() - self.tp(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_denominator: bool,
}

/// Precision, recall and F1 from raw counts. Zero denominators give 0 and
/// raise the flag.
pub fn prf_from_counts(tp: u64, fp: u64, fn_: u64) -> ClassPrf {
    let mut flagged = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            flagged = true;
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let recall = ratio(tp as f64, (tp + fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    ClassPrf {
        precision,
        recall,
        f1,
        zero_denominator: flagged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfReport {
    pub counts: ConfusionCounts,
    /// Indexed by class code; `None` when the class is absent from both
    /// prediction and ground truth.
    pub per_class: [Option<ClassPrf>; NUM_CODES],
}

impl PrfReport {
    pub fn class(&self, c: ClassLabel) -> Option<ClassPrf> {
        self.per_class[c as usize]
    }
}

pub fn confusion_and_prf(pred: &[ClassLabel], gt: &[ClassLabel]) -> Result<PrfReport, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        counts.matrix[g as usize][p as usize] += 1;
    }
    let per_class = ClassLabel::ALL.map(|c| {
        let (tp, fp, fn_) = (counts.tp(c), counts.fp(c), counts.fn_(c));
        (tp + fp + fn_ > 0).then(|| prf_from_counts(tp, fp, fn_))
    });
    Ok(PrfReport { counts, per_class })
}

/// Options for voxel Pd / Pfa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PdPfaOptions {
    /// Chebyshev radius, in cells, within which a match counts. 0 is exact
    /// cell agreement.
    pub dilation: usize,
}

fn check_grids(pred: &LabelCube, gt: &LabelCube) -> Result<(), EvalError> {
    if pred.dims() != gt.dims() {
        return Err(EvalError::GridMismatch {
            pred: pred.dims(),
            gt: gt.dims(),
        });
    }
    Ok(())
}

/// Raw counts behind a detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Ratio {
    pub hits: u64,
    pub total: u64,
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

fn any_in_neighbourhood(cube: &LabelCube, flat: usize, radius: usize, pred: impl Fn(ClassLabel) -> bool) -> bool {
    if radius == 0 {
        return pred(cube.label_at(flat));
    }
    let [nr, na, ne] = cube.dims();
    let (ir, ia, ie) = (flat / (na * ne), (flat / ne) % na, flat % ne);
    let span = |i: usize, n: usize| i.saturating_sub(radius)..=(i + radius).min(n - 1);
    span(ir, nr).any(|r| span(ia, na).any(|a| span(ie, ne).any(|e| pred(cube.get([r, a, e])))))
}

/// `|pred ∈ S ∧ gt ∈ S| / |gt ∈ S|` for the class set `S`.
pub fn pd_for(pred: &LabelCube, gt: &LabelCube, classes: &[ClassLabel], opts: &PdPfaOptions) -> Result<Ratio, EvalError> {
    check_grids(pred, gt)?;
    let in_set = |l: ClassLabel| classes.contains(&l);
    let mut r = Ratio::default();
    for (flat, g) in gt.iter_labels().enumerate() {
        if in_set(g) {
            r.total += 1;
            if any_in_neighbourhood(pred, flat, opts.dilation, in_set) {
                r.hits += 1;
            }
        }
    }
    Ok(r)
}

/// `Pd_All = |pred≠0 ∧ gt≠0| / |gt≠0|`.
pub fn pd_all(pred: &LabelCube, gt: &LabelCube, opts: &PdPfaOptions) -> Result<Ratio, EvalError> {
    pd_for(
        pred,
        gt,
        &[ClassLabel::Scenario, ClassLabel::Pedestrian, ClassLabel::Vehicle, ClassLabel::Bicycle],
        opts,
    )
}

/// `Pfa_All = |pred≠0 ∧ gt=0| / |gt=0|`.
pub fn pfa_all(pred: &LabelCube, gt: &LabelCube, opts: &PdPfaOptions) -> Result<Ratio, EvalError> {
    check_grids(pred, gt)?;
    let mut r = Ratio::default();
    for (flat, g) in gt.iter_labels().enumerate() {
        if g == ClassLabel::Empty {
            r.total += 1;
            let alarm = pred.label_at(flat) != ClassLabel::Empty
                && !(opts.dilation > 0
                    && any_in_neighbourhood(gt, flat, opts.dilation, |l| l != ClassLabel::Empty));
            if alarm {
                r.hits += 1;
            }
        }
    }
    Ok(r)
}

/// Voxel-level detection figures for one cube pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdPfa {
    pub all: Ratio,
    pub false_alarm: Ratio,
    pub scenario: Ratio,
    pub vehicles: Ratio,
    /// Pedestrians and bicycles merged.
    pub vru: Ratio,
}

pub fn pd_pfa(pred: &LabelCube, gt: &LabelCube, opts: &PdPfaOptions) -> Result<PdPfa, EvalError> {
    check_grids(pred, gt)?;
    let merged_pred = vru_merge_cube(pred);
    let merged_gt = vru_merge_cube(gt);
    Ok(PdPfa {
        all: pd_all(pred, gt, opts)?,
        false_alarm: pfa_all(pred, gt, opts)?,
        scenario: pd_for(pred, gt, &[ClassLabel::Scenario], opts)?,
        vehicles: pd_for(pred, gt, &[ClassLabel::Vehicle], opts)?,
        vru: pd_for(&merged_pred, &merged_gt, &[VRU], opts)?,
    })
}

/// Directed mean nearest-neighbour distance from `from` to `to`.
fn directed_mean(from: &[Point3], to: &[Point3]) -> f64 {
    let tree = KdTree::new(to);
    let dists = par::map_slice(from, |&p| tree.nearest_distance(p).expect("non-empty target"));
    dists.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: the mean of the two directed mean
/// nearest-neighbour distances. `None` when either side is empty.
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(0.5 * (directed_mean(a, b) + directed_mean(b, a)))
}

/// Class selections used for the Chamfer metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassFilter {
    /// Every non-empty label.
    All,
    Scenario,
    /// Pedestrians, vehicles and bicycles.
    Targets,
}

impl ClassFilter {
    pub fn accepts(self, l: ClassLabel) -> bool {
        match self {
            Self::All => l != ClassLabel::Empty,
            Self::Scenario => l == ClassLabel::Scenario,
            Self::Targets => l.is_target(),
        }
    }
}

fn select(cloud: &LabeledPointCloud, filter: ClassFilter) -> Vec<Point3> {
    cloud
        .points
        .iter()
        .zip(&cloud.labels)
        .filter(|(_, &l)| filter.accepts(l))
        .map(|(&p, _)| p)
        .collect()
}

pub fn chamfer_distance_filtered(a: &LabeledPointCloud, b: &LabeledPointCloud, filter: ClassFilter) -> Option<f64> {
    chamfer_distance(&select(a, filter), &select(b, filter))
}

/// Cartesian centres of the cells accepted by `filter`.
pub fn cube_to_points(cube: &LabelCube, grid: &GridSpec, filter: ClassFilter) -> LabeledPointCloud {
    let mut out = LabeledPointCloud::default();
    for (flat, l) in cube.iter_labels().enumerate() {
        if filter.accepts(l) {
            out.points.push(grid.cell_center(grid.unravel(flat)));
            out.labels.push(l);
        }
    }
    out
}

/// The eight frame metrics. `None` marks a not-applicable value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub pd_all: Option<f64>,
    pub pfa_all: Option<f64>,
    pub pd_scenario: Option<f64>,
    pub pd_vehicles: Option<f64>,
    pub pd_vru: Option<f64>,
    pub cd_all: Option<f64>,
    pub cd_scenario: Option<f64>,
    pub cd_targets: Option<f64>,
}

impl DetectionMetrics {
    pub const NAMES: [&'static str; 8] = [
        "Pd_All",
        "Pfa_All",
        "Pd_Scenario",
        "Pd_Vehicles",
        "Pd_VRU",
        "CD_All",
        "CD_Scenario",
        "CD_Targets",
    ];

    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.pd_all,
            self.pfa_all,
            self.pd_scenario,
            self.pd_vehicles,
            self.pd_vru,
            self.cd_all,
            self.cd_scenario,
            self.cd_targets,
        ]
    }

    fn from_values(v: [Option<f64>; 8]) -> Self {
        Self {
            pd_all: v[0],
            pfa_all: v[1],
            pd_scenario: v[2],
            pd_vehicles: v[3],
            pd_vru: v[4],
            cd_all: v[5],
            cd_scenario: v[6],
            cd_targets: v[7],
        }
    }
}

pub fn evaluate_frame(
    pred: &LabelCube,
    gt: &LabelCube,
    grid: &GridSpec,
    opts: &PdPfaOptions,
) -> Result<DetectionMetrics, EvalError> {
    check_grids(pred, gt)?;
    if gt.dims() != grid.dims() {
        return Err(EvalError::GridMismatch {
            pred: grid.dims(),
            gt: gt.dims(),
        });
    }
    let d = pd_pfa(pred, gt, opts)?;
    let pred_pts = cube_to_points(pred, grid, ClassFilter::All);
    let gt_pts = cube_to_points(gt, grid, ClassFilter::All);
    Ok(DetectionMetrics {
        pd_all: d.all.value(),
        pfa_all: d.false_alarm.value(),
        pd_scenario: d.scenario.value(),
        pd_vehicles: d.vehicles.value(),
        pd_vru: d.vru.value(),
        cd_all: chamfer_distance_filtered(&pred_pts, &gt_pts, ClassFilter::All),
        cd_scenario: chamfer_distance_filtered(&pred_pts, &gt_pts, ClassFilter::Scenario),
        cd_targets: chamfer_distance_filtered(&pred_pts, &gt_pts, ClassFilter::Targets),
    })
}

/// Per-metric running mean that skips not-applicable frames.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsAverager {
    sums: [f64; 8],
    counts: [usize; 8],
    frames: usize,
}

impl MetricsAverager {
    pub fn add(&mut self, m: &DetectionMetrics) {
        self.frames += 1;
        for (i, v) in m.values().into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Frames that contributed to each metric.
    pub fn counts(&self) -> [usize; 8] {
        self.counts
    }

    pub fn mean(&self) -> DetectionMetrics {
        let mut v = [None; 8];
        for (i, out) in v.iter_mut().enumerate() {
            if self.counts[i] > 0 {
                *out = Some(self.sums[i] / self.counts[i] as f64);
            }
        }
        DetectionMetrics::from_values(v)
    }
}

/// Fixed-width table with the eight frame metrics; ratios in percent,
/// distances in meters.
pub fn format_metrics_table(rows: &[(String, DetectionMetrics)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "frame");
    for name in DetectionMetrics::NAMES {
        let _ = write!(out, " {name:>12}");
    }
    out.push('\n');
    for (label, m) in rows {
        let _ = write!(out, "{label:<16}");
        for (i, v) in m.values().into_iter().enumerate() {
            let cell = match v {
                None => "n/a".to_string(),
                Some(v) if i < 5 => format!("{:.2}%", v * 100.0),
                Some(v) => format!("{v:.3}m"),
            };
            let _ = write!(out, " {cell:>12}");
        }
        out.push('\n');
    }
    out
}

/// Fixed-width precision/recall/F1 table for classes present in the report.
pub fn format_prf_table(report: &PrfReport) -> String {
    let mut out = format!("{:<12} {:>10} {:>10} {:>10}\n", "class", "precision", "recall", "f1");
    for c in &ClassLabel::ALL[1..] {
        match report.class(*c) {
            None => {
                let _ = writeln!(out, "{:<12} {:>10} {:>10} {:>10}", c.name(), "n/a", "n/a", "n/a");
            }
            Some(m) => {
                let _ = writeln!(
                    out,
                    "{:<12} {:>10.4} {:>10.4} {:>10.4}{}",
                    c.name(),
                    m.precision,
                    m.recall,
                    m.f1,
                    if m.zero_denominator { "  (zero denominator)" } else { "" }
                );
            }
        }
    }
    out
}
