//! Numerical kernels of the segmentation head: broadcast fusion of the
//! occupancy and class latents, probability decoding, and the weighted
//! cross-entropy / soft-dice training losses with analytic gradients.
//!
//! Layouts follow the network tensors: occupancy `[R, A, E]`, class latent
//! `[C, R, A]`, probabilities `[K, R, A, E]`.

use ndarray::{Array3, Array4, ArrayView3, ArrayView4, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{ClassLabel, NUM_CODES};
use crate::voxel::LabelCube;

/// Lower clamp applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;
/// Default soft-dice smoothing term.
pub const DICE_SMOOTHING: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegMathError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Param(String),
}

type Result<T> = std::result::Result<T, SegMathError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// `occ[r,a,e] · cls[c,r,a]`
    #[default]
    Product,
    /// `occ[r,a,e] + cls[c,r,a]`, kept for ablations.
    Sum,
}

/// Expands a `[C, R, A]` class map against an `[R, A, E]` occupancy map
/// into a `[C, R, A, E]` volume.
pub fn broadcast_fuse(
    occ: ArrayView3<'_, f64>,
    cls: ArrayView3<'_, f64>,
    mode: FusionMode,
) -> Result<Array4<f64>> {
    let (r, a, e) = occ.dim();
    let (c, cr, ca) = cls.dim();
    if (cr, ca) != (r, a) {
        return Err(SegMathError::Shape(format!(
            "occupancy is {r}x{a}x{e} but class latent is {c}x{cr}x{ca}"
        )));
    }
    let occ4 = occ.insert_axis(Axis(0));
    let cls4 = cls.insert_axis(Axis(3));
    let occ_b = occ4.broadcast((c, r, a, e)).expect("leading axis broadcast");
    let cls_b = cls4.broadcast((c, r, a, e)).expect("trailing axis broadcast");
    Ok(match mode {
        FusionMode::Product => &occ_b * &cls_b,
        FusionMode::Sum => &occ_b + &cls_b,
    })
}

/// Per-voxel class decision: `0` when the best class probability is below
/// `empty_threshold`, otherwise `argmax + 1` (ties go to the lower channel).
/// Expects the four target-class channels (scenario, pedestrian, vehicle,
/// bicycle).
pub fn decode_labels(probs: ArrayView4<'_, f64>, empty_threshold: f64) -> Result<LabelCube> {
    let (c, r, a, e) = probs.dim();
    if c + 1 > NUM_CODES {
        return Err(SegMathError::Shape(format!(
            "{c} class channels do not fit the {} non-empty codes",
            NUM_CODES - 1
        )));
    }
    let mut cube = LabelCube::zeros([r, a, e]);
    for ((ir, ia, ie), _) in probs.index_axis(Axis(0), 0).indexed_iter() {
        let mut best = 0;
        let mut best_p = probs[[0, ir, ia, ie]];
        for ch in 1..c {
            let p = probs[[ch, ir, ia, ie]];
            if p > best_p {
                best = ch;
                best_p = p;
            }
        }
        if best_p >= empty_threshold {
            let label = ClassLabel::from_code(best as u8 + 1).expect("channel fits a class code");
            cube.set([ir, ia, ie], label);
        }
    }
    Ok(cube)
}

fn check_target(probs: &ArrayView4<'_, f64>, target: &LabelCube) -> Result<()> {
    let (k, r, a, e) = probs.dim();
    if target.dims() != [r, a, e] {
        return Err(SegMathError::Shape(format!(
            "probabilities are {k}x{r}x{a}x{e}, target cube is {:?}",
            target.dims()
        )));
    }
    if let Some(bad) = target.codes().iter().find(|&&c| c as usize >= k) {
        return Err(SegMathError::Shape(format!(
            "target code {bad} has no channel among {k}"
        )));
    }
    Ok(())
}

/// One-hot encoding of a label cube over `channels` channels
/// (channel index = class code).
pub fn one_hot(target: &LabelCube, channels: usize) -> Array4<f64> {
    let [r, a, e] = target.dims();
    let mut out = Array4::zeros((channels, r, a, e));
    for (flat, &code) in target.codes().iter().enumerate() {
        let (ir, ia, ie) = (flat / (a * e), (flat / e) % a, flat % e);
        if (code as usize) < channels {
            out[[code as usize, ir, ia, ie]] = 1.0;
        }
    }
    out
}

/// Weighted cross-entropy over `K` channels where channel `k` is the
/// probability of class code `k` (the empty class included):
/// `(1/N) Σ w_y · −ln max(p_y, 1e-12)`.
pub fn weighted_cross_entropy(
    probs: ArrayView4<'_, f64>,
    target: &LabelCube,
    weights: &[f64],
) -> Result<f64> {
    Ok(weighted_cross_entropy_grad(probs, target, weights)?.0)
}

/// Loss and gradient with respect to `probs`.
pub fn weighted_cross_entropy_grad(
    probs: ArrayView4<'_, f64>,
    target: &LabelCube,
    weights: &[f64],
) -> Result<(f64, Array4<f64>)> {
    check_target(&probs, target)?;
    let k = probs.dim().0;
    if weights.len() != k {
        return Err(SegMathError::Shape(format!(
            "{} weights for {k} channels",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(SegMathError::Param("class weights must be positive".into()));
    }
    let [_, a, e] = target.dims();
    let n = target.len() as f64;
    let mut grad = Array4::zeros(probs.dim());
    let mut total = 0.0;
    for (flat, &code) in target.codes().iter().enumerate() {
        let idx = [code as usize, flat / (a * e), (flat / e) % a, flat % e];
        let p = probs[idx];
        let w = weights[code as usize];
        if p > PROB_FLOOR {
            total += -w * p.ln();
            grad[idx] = -w / (n * p);
        } else {
            total += -w * PROB_FLOOR.ln();
        }
    }
    Ok((total / n, grad))
}

/// `1 − mean_c (2·Σ p_c g_c + s) / (Σ p_c + Σ g_c + s)` over all channels.
pub fn soft_dice(probs: ArrayView4<'_, f64>, target: ArrayView4<'_, f64>, smoothing: f64) -> Result<f64> {
    Ok(soft_dice_grad(probs, target, smoothing)?.0)
}

pub fn soft_dice_grad(
    probs: ArrayView4<'_, f64>,
    target: ArrayView4<'_, f64>,
    smoothing: f64,
) -> Result<(f64, Array4<f64>)> {
    if probs.dim() != target.dim() {
        return Err(SegMathError::Shape(format!(
            "probabilities {:?} vs target {:?}",
            probs.dim(),
            target.dim()
        )));
    }
    if !(smoothing > 0.0) {
        return Err(SegMathError::Param("dice smoothing must be > 0".into()));
    }
    let k = probs.dim().0;
    let mut grad = Array4::zeros(probs.dim());
    let mut dice_sum = 0.0;
    for c in 0..k {
        let p = probs.index_axis(Axis(0), c);
        let g = target.index_axis(Axis(0), c);
        let inter: f64 = Zip::from(&p).and(&g).fold(0.0, |acc, &pi, &gi| acc + pi * gi);
        let p_sum = p.sum();
        let g_sum = g.sum();
        let num = 2.0 * inter + smoothing;
        let den = p_sum + g_sum + smoothing;
        dice_sum += num / den;
        let den2 = den * den;
        let kf = k as f64;
        Zip::from(grad.index_axis_mut(Axis(0), c))
            .and(&g)
            .for_each(|out, &gi| *out = -(2.0 * gi * den - num) / (den2 * kf));
    }
    Ok((1.0 - dice_sum / k as f64, grad))
}

/// Loss mixing configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub smoothing: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            smoothing: DICE_SMOOTHING,
        }
    }
}

/// `α·wCE + β·SDice` on the same probability volume.
pub fn combined_loss(
    probs: ArrayView4<'_, f64>,
    target: &LabelCube,
    weights: &[f64],
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(combined_loss_grad(probs, target, weights, cfg)?.0)
}

pub fn combined_loss_grad(
    probs: ArrayView4<'_, f64>,
    target: &LabelCube,
    weights: &[f64],
    cfg: &LossConfig,
) -> Result<(f64, Array4<f64>)> {
    if !(cfg.alpha >= 0.0 && cfg.beta >= 0.0) {
        return Err(SegMathError::Param("α and β must be ≥ 0".into()));
    }
    let (ce, ce_grad) = weighted_cross_entropy_grad(probs, target, weights)?;
    let onehot = one_hot(target, probs.dim().0);
    let (dice, dice_grad) = soft_dice_grad(probs, onehot.view(), cfg.smoothing)?;
    Ok((
        cfg.alpha * ce + cfg.beta * dice,
        ce_grad * cfg.alpha + dice_grad * cfg.beta,
    ))
}

/// Inverse class-frequency weights over `channels` codes, normalized to
/// mean 1. Absent classes are counted once so their weight stays finite.
pub fn inverse_frequency_weights<'a>(
    cubes: impl IntoIterator<Item = &'a LabelCube>,
    channels: usize,
) -> Vec<f64> {
    let mut counts = vec![0u64; channels];
    for cube in cubes {
        for &c in cube.codes() {
            if (c as usize) < channels {
                counts[c as usize] += 1;
            }
        }
    }
    let raw: Vec<f64> = counts.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
    let mean = raw.iter().sum::<f64>() / channels as f64;
    raw.into_iter().map(|w| w / mean).collect()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F>(x: &Array4<f64>, step: f64, mut f: F) -> Array4<f64>
where
    F: FnMut(ArrayView4<'_, f64>) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Array4::zeros(x.dim());
    for (idx, g) in grad.indexed_iter_mut() {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(probe.view());
        probe[idx] = orig - step;
        let down = f(probe.view());
        probe[idx] = orig;
        *g = (up - down) / (2.0 * step);
    }
    grad
}

/// Norm-wise relative error `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`; zero when both
/// vanish.
pub fn relative_error(analytic: &Array4<f64>, numeric: &Array4<f64>) -> f64 {
    let diff = Zip::from(analytic)
        .and(numeric)
        .fold(0.0f64, |acc, &a, &n| acc + (a - n) * (a - n))
        .sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Largest elementwise relative error `|a − n| / max(|a|, |n|)`; entries
/// where both are below `1e-12` count as exact.
pub fn max_relative_error(analytic: &Array4<f64>, numeric: &Array4<f64>) -> f64 {
    Zip::from(analytic)
        .and(numeric)
        .fold(0.0f64, |worst, &a, &n| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-12 {
                worst
            } else {
                worst.max((a - n).abs() / scale)
            }
        })
}

/// Largest elementwise absolute error.
pub fn max_abs_error(analytic: &Array4<f64>, numeric: &Array4<f64>) -> f64 {
    Zip::from(analytic)
        .and(numeric)
        .fold(0.0f64, |worst, &a, &n| worst.max((a - n).abs()))
}

/// Outcome of one gradient-check instance: norm-wise relative errors per
/// loss, plus elementwise diagnostics over all three.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GradCheck {
    pub wce: f64,
    pub dice: f64,
    pub combined: f64,
    pub max_elementwise_relative: f64,
    pub max_abs: f64,
}

impl GradCheck {
    /// Worst norm-wise relative error.
    pub fn worst(&self) -> f64 {
        self.wce.max(self.dice).max(self.combined)
    }
}

/// Random probabilities in `[0.05, 1)` and a random target cube, used by the
/// gradient checks.
pub fn random_instance<R: Rng>(rng: &mut R, dims: [usize; 4]) -> (Array4<f64>, LabelCube) {
    let [k, r, a, e] = dims;
    let probs = Array4::from_shape_fn((k, r, a, e), |_| rng.random_range(0.05..1.0));
    let codes = (0..r * a * e)
        .map(|_| rng.random_range(0..k.min(NUM_CODES)) as u8)
        .collect();
    let target = LabelCube::from_codes([r, a, e], codes).expect("codes below channel count");
    (probs, target)
}

/// Compares analytic and central-difference gradients of all three losses.
pub fn check_gradients(
    probs: &Array4<f64>,
    target: &LabelCube,
    weights: &[f64],
    cfg: &LossConfig,
    step: f64,
) -> Result<GradCheck> {
    let (_, ce_a) = weighted_cross_entropy_grad(probs.view(), target, weights)?;
    let ce_n = central_difference(probs, step, |p| {
        weighted_cross_entropy(p, target, weights).expect("shapes checked")
    });
    let onehot = one_hot(target, probs.dim().0);
    let (_, dice_a) = soft_dice_grad(probs.view(), onehot.view(), cfg.smoothing)?;
    let dice_n = central_difference(probs, step, |p| {
        soft_dice(p, onehot.view(), cfg.smoothing).expect("shapes checked")
    });
    let (_, comb_a) = combined_loss_grad(probs.view(), target, weights, cfg)?;
    let comb_n = central_difference(probs, step, |p| {
        combined_loss(p, target, weights, cfg).expect("shapes checked")
    });
    let pairs = [(&ce_a, &ce_n), (&dice_a, &dice_n), (&comb_a, &comb_n)];
    Ok(GradCheck {
        wce: relative_error(&ce_a, &ce_n),
        dice: relative_error(&dice_a, &dice_n),
        combined: relative_error(&comb_a, &comb_n),
        max_elementwise_relative: pairs.iter().map(|(a, n)| max_relative_error(a, n)).fold(0.0, f64::max),
        max_abs: pairs.iter().map(|(a, n)| max_abs_error(a, n)).fold(0.0, f64::max),
    })
}

/// Random occupancy latent, handy for exercising the fusion kernel.
pub fn random_latent<R: Rng>(rng: &mut R, dims: [usize; 3]) -> Array3<f64> {
    Array3::from_shape_fn((dims[0], dims[1], dims[2]), |_| rng.random_range(-1.0..1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::SeedableRng;

    #[test]
    fn fuse_identity_and_annihilator() {
        let cls = Array3::from_shape_fn((4, 2, 3), |(c, r, a)| (c * 10 + r * 3 + a) as f64);
        let ones = Array3::ones((2, 3, 5));
        let fused = broadcast_fuse(ones.view(), cls.view(), FusionMode::Product).unwrap();
        assert_eq!(fused.dim(), (4, 2, 3, 5));
        for ((c, r, a, _), v) in fused.indexed_iter() {
            assert_eq!(*v, cls[[c, r, a]]);
        }
        let zeros = Array3::zeros((2, 3, 5));
        let fused = broadcast_fuse(zeros.view(), cls.view(), FusionMode::Product).unwrap();
        assert!(fused.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fuse_shape_mismatch() {
        let occ = Array3::<f64>::zeros((2, 3, 5));
        let cls = Array3::<f64>::zeros((4, 3, 2));
        assert!(matches!(
            broadcast_fuse(occ.view(), cls.view(), FusionMode::Product),
            Err(SegMathError::Shape(_))
        ));
    }

    #[test]
    fn decode_examples() {
        let mut p = Array4::zeros((4, 1, 1, 3));
        p[[1, 0, 0, 0]] = 1.0;
        p[[0, 0, 0, 2]] = 0.3;
        p[[1, 0, 0, 2]] = 0.3;
        p[[2, 0, 0, 2]] = 0.2;
        p[[3, 0, 0, 2]] = 0.2;
        let cube = decode_labels(p.view(), 0.25).unwrap();
        assert_eq!(cube.get([0, 0, 0]), ClassLabel::Pedestrian);
        assert_eq!(cube.get([0, 0, 1]), ClassLabel::Empty);
        assert_eq!(cube.get([0, 0, 2]), ClassLabel::Scenario);
    }

    #[test]
    fn wce_examples() {
        let target = LabelCube::from_codes([1, 1, 1], vec![3]).unwrap();
        let mut p = Array4::from_elem((5, 1, 1, 1), 0.2);
        let uniform = weighted_cross_entropy(p.view(), &target, &[1.0; 5]).unwrap();
        assert!((uniform - 5f64.ln()).abs() < 1e-12);
        p[[3, 0, 0, 0]] = 0.5;
        let w = [1.0, 1.0, 1.0, 2.0, 1.0];
        let l = weighted_cross_entropy(p.view(), &target, &w).unwrap();
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);
        p[[3, 0, 0, 0]] = 1.0;
        assert_eq!(weighted_cross_entropy(p.view(), &target, &w).unwrap(), 0.0);
        p[[3, 0, 0, 0]] = 0.0;
        let floored = weighted_cross_entropy(p.view(), &target, &w).unwrap();
        assert!((floored - 2.0 * -PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn wce_rejects_bad_inputs() {
        let target = LabelCube::from_codes([1, 1, 1], vec![3]).unwrap();
        let p = Array4::from_elem((5, 1, 1, 2), 0.2);
        assert!(weighted_cross_entropy(p.view(), &target, &[1.0; 5]).is_err());
        let p = Array4::from_elem((5, 1, 1, 1), 0.2);
        assert!(weighted_cross_entropy(p.view(), &target, &[1.0; 4]).is_err());
        assert!(weighted_cross_entropy(p.view(), &target, &[1.0, 1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn dice_examples() {
        let mut g = Array4::zeros((1, 1, 1, 4));
        g[[0, 0, 0, 1]] = 1.0;
        let perfect = soft_dice(g.view(), g.view(), DICE_SMOOTHING).unwrap();
        assert!(perfect <= 1e-6);
        let mut p = Array4::zeros((1, 1, 1, 4));
        p[[0, 0, 0, 1]] = 0.5;
        let half = soft_dice(p.view(), g.view(), DICE_SMOOTHING).unwrap();
        let want = 1.0 - (1.0 + DICE_SMOOTHING) / (1.5 + DICE_SMOOTHING);
        assert!((half - want).abs() < 1e-15);
        assert!((half - 1.0 / 3.0).abs() < 1e-5);
        let mut disjoint = Array4::zeros((1, 1, 1, 4));
        disjoint[[0, 0, 0, 2]] = 1.0;
        let l = soft_dice(disjoint.view(), g.view(), DICE_SMOOTHING).unwrap();
        assert!(l >= 1.0 - DICE_SMOOTHING / 2.0);
    }

    #[test]
    fn combined_degenerate_weights() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (p, t) = random_instance(&mut rng, [5, 3, 2, 2]);
        let w = [1.0, 2.0, 0.5, 1.5, 3.0];
        let ce = weighted_cross_entropy(p.view(), &t, &w).unwrap();
        let dice = soft_dice(p.view(), one_hot(&t, 5).view(), DICE_SMOOTHING).unwrap();
        let only_ce = LossConfig { beta: 0.0, ..Default::default() };
        let only_dice = LossConfig { alpha: 0.0, ..Default::default() };
        assert_eq!(combined_loss(p.view(), &t, &w, &only_ce).unwrap(), ce);
        assert_eq!(combined_loss(p.view(), &t, &w, &only_dice).unwrap(), dice);
        let both = combined_loss(p.view(), &t, &w, &LossConfig::default()).unwrap();
        assert!((both - (ce + dice)).abs() < 1e-12);
    }

    #[test]
    fn inverse_frequency_normalized() {
        let cube = LabelCube::from_codes([1, 1, 4], vec![0, 0, 0, 1]).unwrap();
        let w = inverse_frequency_weights([&cube], 2);
        assert!((w.iter().sum::<f64>() / 2.0 - 1.0).abs() < 1e-12);
        assert!((w[1] / w[0] - 3.0).abs() < 1e-12);
    }
}
