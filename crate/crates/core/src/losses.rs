//! Training objectives with analytic gradients.
//!
//! Every loss here returns its value together with the gradient with
//! respect to its tensor input (Dirichlet parameters or raw decoder scores).
//! The network's autodiff tape takes these gradients as seeds, so the
//! losses themselves stay plain `f64` code that is easy to test.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmlError};
use crate::evidential::{DirichletParams, EvidenceMap};
use crate::mask::LabelMap;
use crate::special::{digamma, ln_gamma, trigamma};

/// Smoothing added to numerator and denominator of every soft Dice.
pub const DICE_SMOOTH: f64 = 1.0;

/// Validated one-hot target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHot {
    index: usize,
    len: usize,
}

impl OneHot {
    pub fn new(y: &[f64]) -> Result<Self> {
        let ones: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1.0)
            .map(|(i, _)| i)
            .collect();
        let zeros = y.iter().filter(|v| **v == 0.0).count();
        if ones.len() != 1 || zeros + 1 != y.len() {
            return Err(UmlError::invalid(format!("{y:?} is not one-hot")));
        }
        Ok(Self {
            index: ones[0],
            len: y.len(),
        })
    }

    pub fn from_index(index: usize, len: usize) -> Result<Self> {
        if index >= len {
            return Err(UmlError::invalid(format!("class {index} out of range for {len} classes")));
        }
        Ok(Self { index, len })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.len).map(|i| if i == self.index { 1.0 } else { 0.0 }).collect()
    }
}

fn check_target(alpha: &DirichletParams, y: &OneHot) -> Result<()> {
    if alpha.classes() != y.len() {
        return Err(UmlError::invalid(format!(
            "target has {} classes, alpha has {}",
            y.len(),
            alpha.classes()
        )));
    }
    Ok(())
}

/// Remove the evidence of the true class: its alpha entry becomes 1.
pub fn adjusted_alpha(alpha: &DirichletParams, y: &OneHot) -> Result<DirichletParams> {
    check_target(alpha, y)?;
    let mut a = alpha.alpha().to_vec();
    a[y.index()] = 1.0;
    DirichletParams::new(a)
}

/// `KL(Dir(alpha) || Dir(1, ..., 1))`.
pub fn kl_dirichlet_uniform(alpha: &DirichletParams) -> f64 {
    kl_uniform_raw(alpha.alpha())
}

fn kl_uniform_raw(alpha: &[f64]) -> f64 {
    if alpha.iter().all(|&a| a == 1.0) {
        return 0.0;
    }
    let k = alpha.len() as f64;
    let s: f64 = alpha.iter().sum();
    let dg_s = digamma(s);
    let mut v = ln_gamma(s) - ln_gamma(k);
    for &a in alpha {
        v += (a - 1.0) * (digamma(a) - dg_s) - ln_gamma(a);
    }
    v.max(0.0)
}

/// Gradient of [`kl_uniform_raw`]: `(a_j - 1) ψ₁(a_j) - (S - K) ψ₁(S)`.
fn kl_uniform_grad(alpha: &[f64], out: &mut [f64]) {
    let k = alpha.len() as f64;
    let s: f64 = alpha.iter().sum();
    let tg_s = (s - k) * trigamma(s);
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = (a - 1.0) * trigamma(a) - tg_s;
    }
}

/// Expected cross-entropy under `Dir(alpha)`: `ψ(T) - ψ(alpha_y)`.
pub fn evidential_ce(alpha: &DirichletParams, y: &OneHot) -> Result<f64> {
    check_target(alpha, y)?;
    Ok(digamma(alpha.strength()) - digamma(alpha.alpha()[y.index()]))
}

/// Classification objective: expected CE plus `lambda_c` times the KL of
/// the evidence-masked Dirichlet to the uniform one.
pub fn classification_loss(alpha: &DirichletParams, y: &OneHot, lambda_c: f64) -> Result<f64> {
    Ok(classification_loss_with_grad(alpha, y, lambda_c)?.0)
}

/// [`classification_loss`] and its gradient with respect to `alpha`.
pub fn classification_loss_with_grad(
    alpha: &DirichletParams,
    y: &OneHot,
    lambda_c: f64,
) -> Result<(f64, Vec<f64>)> {
    check_lambda("lambda_c", lambda_c)?;
    check_target(alpha, y)?;
    let a = alpha.alpha();
    let t = alpha.strength();
    let tg_t = trigamma(t);
    let mut grad: Vec<f64> = vec![tg_t; a.len()];
    grad[y.index()] -= trigamma(a[y.index()]);
    let mut value = digamma(t) - digamma(a[y.index()]);
    if lambda_c > 0.0 {
        let mut adj = a.to_vec();
        adj[y.index()] = 1.0;
        value += lambda_c * kl_uniform_raw(&adj);
        let mut kg = vec![0.0; a.len()];
        kl_uniform_grad(&adj, &mut kg);
        for (j, (g, k)) in grad.iter_mut().zip(&kg).enumerate() {
            if j != y.index() {
                *g += lambda_c * k;
            }
        }
    }
    Ok((value, grad))
}

fn check_lambda(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(UmlError::config(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn check_mask(classes: usize, height: usize, width: usize, mask: &LabelMap) -> Result<()> {
    if mask.height() != height || mask.width() != width {
        return Err(UmlError::invalid(format!(
            "mask is {}x{}, prediction is {height}x{width}",
            mask.height(),
            mask.width()
        )));
    }
    mask.check_classes(classes)
}

/// `1 - mean_q Dice_q` between channel-major probabilities and a mask, with
/// its gradient with respect to the probabilities.
pub fn soft_dice_with_grad(probs: &[f64], classes: usize, mask: &LabelMap) -> (f64, Vec<f64>) {
    let hw = mask.len();
    debug_assert_eq!(probs.len(), classes * hw);
    let labels = mask.labels();
    let mut grad = vec![0.0; probs.len()];
    let mut dice_sum = 0.0;
    let qf = classes as f64;
    for q in 0..classes {
        let plane = &probs[q * hw..(q + 1) * hw];
        let mut inter = 0.0;
        let mut psum = 0.0;
        let mut ysum = 0.0;
        for (&p, &l) in plane.iter().zip(labels) {
            psum += p;
            if l as usize == q {
                inter += p;
                ysum += 1.0;
            }
        }
        let num = 2.0 * inter + DICE_SMOOTH;
        let den = psum + ysum + DICE_SMOOTH;
        dice_sum += num / den;
        let gplane = &mut grad[q * hw..(q + 1) * hw];
        let base = -num / (den * den);
        let on = 2.0 / den;
        for (g, &l) in gplane.iter_mut().zip(labels) {
            let d = if l as usize == q { on + base } else { base };
            *g = -d / qf;
        }
    }
    (1.0 - dice_sum / qf, grad)
}

/// Soft Dice over the Dirichlet means of an alpha map.
pub fn evidential_dice(alpha_map: &EvidenceMap, mask: &LabelMap) -> Result<f64> {
    Ok(evidential_dice_with_grad(alpha_map, mask)?.0)
}

/// [`evidential_dice`] and its gradient with respect to alpha.
pub fn evidential_dice_with_grad(alpha_map: &EvidenceMap, mask: &LabelMap) -> Result<(f64, Vec<f64>)> {
    let (q, h, w) = (alpha_map.classes(), alpha_map.height(), alpha_map.width());
    check_mask(q, h, w, mask)?;
    let probs = alpha_map.expected_probability();
    let (value, gp) = soft_dice_with_grad(&probs, q, mask);
    let hw = h * w;
    let strength = alpha_map.strength();
    let mut grad = vec![0.0; probs.len()];
    // dp_q/dalpha_j = (delta_qj - p_q) / S
    for px in 0..hw {
        let dot: f64 = (0..q).map(|c| gp[c * hw + px] * probs[c * hw + px]).sum();
        for c in 0..q {
            grad[c * hw + px] = (gp[c * hw + px] - dot) / strength[px];
        }
    }
    Ok((value, grad))
}

/// Components of the mutual (initial-mask) objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MutualTerms {
    pub ce: f64,
    pub kl: f64,
    pub dice: f64,
    pub total: f64,
}

/// Per-pixel expected CE plus `lambda_m1` KL (both averaged over pixels)
/// plus `lambda_m2` evidential Dice.
pub fn mutual_loss(alpha_map: &EvidenceMap, mask: &LabelMap, lambda_m1: f64, lambda_m2: f64) -> Result<f64> {
    Ok(mutual_loss_with_grad(alpha_map, mask, lambda_m1, lambda_m2)?.0.total)
}

pub fn mutual_loss_with_grad(
    alpha_map: &EvidenceMap,
    mask: &LabelMap,
    lambda_m1: f64,
    lambda_m2: f64,
) -> Result<(MutualTerms, Vec<f64>)> {
    check_lambda("lambda_m1", lambda_m1)?;
    check_lambda("lambda_m2", lambda_m2)?;
    let (q, h, w) = (alpha_map.classes(), alpha_map.height(), alpha_map.width());
    check_mask(q, h, w, mask)?;
    let hw = h * w;
    let inv_n = 1.0 / hw as f64;
    let alpha = alpha_map.alpha();
    let strength = alpha_map.strength();
    let labels = mask.labels();
    let mut grad = vec![0.0; alpha.len()];
    let mut ce = 0.0;
    let mut kl = 0.0;
    let mut a = vec![0.0; q];
    let mut kg = vec![0.0; q];
    for px in 0..hw {
        let y = labels[px] as usize;
        for c in 0..q {
            a[c] = alpha[c * hw + px];
        }
        let s = strength[px];
        ce += digamma(s) - digamma(a[y]);
        let tg_s = trigamma(s) * inv_n;
        for c in 0..q {
            grad[c * hw + px] = tg_s;
        }
        grad[y * hw + px] -= trigamma(a[y]) * inv_n;
        if lambda_m1 > 0.0 {
            a[y] = 1.0;
            kl += kl_uniform_raw(&a);
            kl_uniform_grad(&a, &mut kg);
            for c in 0..q {
                if c != y {
                    grad[c * hw + px] += lambda_m1 * kg[c] * inv_n;
                }
            }
        }
    }
    ce *= inv_n;
    kl *= inv_n;
    let mut dice = 0.0;
    if lambda_m2 > 0.0 {
        let (d, dg) = evidential_dice_with_grad(alpha_map, mask)?;
        dice = d;
        grad.iter_mut().zip(&dg).for_each(|(g, d)| *g += lambda_m2 * d);
    } else {
        dice = evidential_dice(alpha_map, mask).unwrap_or(dice);
    }
    let total = ce + lambda_m1 * kl + lambda_m2 * dice;
    Ok((MutualTerms { ce, kl, dice, total }, grad))
}

/// Raw per-class scores of one decoder scale, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ScoreMap {
    pub fn new(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != classes * height * width {
            return Err(UmlError::invalid(format!(
                "score map {classes}x{height}x{width} needs {} values, got {}",
                classes * height * width,
                values.len()
            )));
        }
        Ok(Self {
            classes,
            height,
            width,
            values,
        })
    }

    /// Per-pixel softmax over channels.
    pub fn softmax(&self) -> Vec<f64> {
        let hw = self.height * self.width;
        let mut out = vec![0.0; self.values.len()];
        for px in 0..hw {
            let m = (0..self.classes)
                .map(|c| self.values[c * hw + px])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for c in 0..self.classes {
                let e = (self.values[c * hw + px] - m).exp();
                out[c * hw + px] = e;
                z += e;
            }
            for c in 0..self.classes {
                out[c * hw + px] /= z;
            }
        }
        out
    }
}

/// Nearest-neighbour upsampling of a channel-major map by `factor`.
pub fn upsample_nearest(values: &[f64], classes: usize, height: usize, width: usize, factor: usize) -> Vec<f64> {
    let (oh, ow) = (height * factor, width * factor);
    let mut out = vec![0.0; classes * oh * ow];
    for c in 0..classes {
        for y in 0..oh {
            for x in 0..ow {
                out[(c * oh + y) * ow + x] = values[(c * height + y / factor) * width + x / factor];
            }
        }
    }
    out
}

/// Soft-Dice loss of one decoder scale after softmax and nearest upsampling
/// to the mask resolution; gradient is with respect to the raw scores.
pub fn scale_dice_with_grad(scores: &ScoreMap, mask: &LabelMap) -> Result<(f64, Vec<f64>)> {
    let (q, h, w) = (scores.classes, scores.height, scores.width);
    if h == 0 || !mask.height().is_multiple_of(h) || !mask.width().is_multiple_of(w) || mask.height() / h != mask.width() / w {
        return Err(UmlError::config(format!(
            "scale {h}x{w} does not divide mask {}x{}",
            mask.height(),
            mask.width()
        )));
    }
    mask.check_classes(q)?;
    let factor = mask.height() / h;
    let probs = scores.softmax();
    let up = upsample_nearest(&probs, q, h, w, factor);
    let (value, gup) = soft_dice_with_grad(&up, q, mask);
    // fold the upsampled gradient back onto the coarse grid
    let (oh, ow) = (mask.height(), mask.width());
    let mut gp = vec![0.0; probs.len()];
    for c in 0..q {
        for y in 0..oh {
            for x in 0..ow {
                gp[(c * h + y / factor) * w + x / factor] += gup[(c * oh + y) * ow + x];
            }
        }
    }
    // softmax backward
    let hw = h * w;
    let mut grad = vec![0.0; probs.len()];
    for px in 0..hw {
        let dot: f64 = (0..q).map(|c| gp[c * hw + px] * probs[c * hw + px]).sum();
        for c in 0..q {
            grad[c * hw + px] = probs[c * hw + px] * (gp[c * hw + px] - dot);
        }
    }
    Ok((value, grad))
}

/// Mean of the per-scale soft-Dice losses over the four decoder outputs.
pub fn deep_supervision_loss(scales: &[ScoreMap], mask: &LabelMap) -> Result<f64> {
    Ok(deep_supervision_loss_with_grad(scales, mask)?.0)
}

pub fn deep_supervision_loss_with_grad(scales: &[ScoreMap], mask: &LabelMap) -> Result<(f64, Vec<Vec<f64>>)> {
    if scales.len() != 4 {
        return Err(UmlError::config(format!("deep supervision expects 4 scales, got {}", scales.len())));
    }
    let classes = scales[0].classes;
    for (i, s) in scales.iter().enumerate() {
        let f = 1usize << i;
        if s.classes != classes || s.height * f != mask.height() || s.width * f != mask.width() {
            return Err(UmlError::config(format!(
                "scale {} is {}x{}x{}, expected {classes}x{}x{}",
                i + 1,
                s.classes,
                s.height,
                s.width,
                mask.height() / f,
                mask.width() / f
            )));
        }
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(4);
    for s in scales {
        let (v, mut g) = scale_dice_with_grad(s, mask)?;
        total += v;
        g.iter_mut().for_each(|x| *x *= 0.25);
        grads.push(g);
    }
    Ok((total / 4.0, grads))
}

/// Task weights and regularizer coefficients of the joint objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_m: f64,
    pub w_c: f64,
    pub w_s: f64,
    /// Peak value of the annealed KL coefficient on the mutual loss.
    pub lambda_m1: f64,
    pub lambda_m2: f64,
    /// Peak value of the annealed KL coefficient on the classification loss.
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_m: 0.1,
            w_c: 0.5,
            w_s: 0.4,
            lambda_m1: 1.0,
            lambda_m2: 1.0,
            lambda_c: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_m", self.w_m),
            ("w_c", self.w_c),
            ("w_s", self.w_s),
            ("lambda_m1", self.lambda_m1),
            ("lambda_m2", self.lambda_m2),
            ("lambda_c", self.lambda_c),
        ] {
            check_lambda(name, v)?;
        }
        Ok(())
    }
}

/// `w_m L_m + w_c L_c + w_s L_s`.
pub fn total_loss(mutual: f64, cls: f64, seg: f64, weights: &LossWeights) -> f64 {
    weights.w_m * mutual + weights.w_c * cls + weights.w_s * seg
}

/// Linear warm-up from 0 to `max_value` over `ramp_epochs` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub max_value: f64,
    pub ramp_epochs: i64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            max_value: 1.0,
            ramp_epochs: 10,
        }
    }
}

pub fn anneal(epoch: usize, schedule: &AnnealSchedule) -> Result<f64> {
    if schedule.ramp_epochs <= 0 {
        return Err(UmlError::config(format!(
            "ramp_epochs must be positive, got {}",
            schedule.ramp_epochs
        )));
    }
    Ok(schedule.max_value * (epoch as f64 / schedule.ramp_epochs as f64).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    fn oh(i: usize, k: usize) -> OneHot {
        OneHot::from_index(i, k).unwrap()
    }

    #[test]
    fn adjusted_alpha_examples() {
        let y = OneHot::new(&[1.0, 0.0]).unwrap();
        assert_eq!(adjusted_alpha(&dp(&[4.0, 2.0]), &y).unwrap().alpha(), &[1.0, 2.0]);
        let y = OneHot::new(&[0.0, 1.0]).unwrap();
        assert_eq!(adjusted_alpha(&dp(&[1.0, 1.0]), &y).unwrap().alpha(), &[1.0, 1.0]);
        let y = OneHot::new(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(adjusted_alpha(&dp(&[5.0, 3.0, 2.0]), &y).unwrap().alpha(), &[5.0, 3.0, 1.0]);
    }

    #[test]
    fn one_hot_validation() {
        assert!(OneHot::new(&[1.0, 1.0]).is_err());
        assert!(OneHot::new(&[0.5, 0.5]).is_err());
        assert!(OneHot::new(&[0.0, 0.0]).is_err());
        assert!(matches!(OneHot::from_index(2, 2), Err(UmlError::InvalidInput(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_dirichlet_uniform(&dp(&[1.0, 1.0])), 0.0);
        let expected = std::f64::consts::LN_2 - 0.5;
        assert!((kl_dirichlet_uniform(&dp(&[2.0, 1.0])) - expected).abs() < 1e-12);
        assert!((expected - 0.19315).abs() < 1e-5);
    }

    #[test]
    fn evidential_ce_examples() {
        let y = oh(0, 2);
        assert!((evidential_ce(&dp(&[2.0, 1.0]), &y).unwrap() - 0.5).abs() < 1e-9);
        assert!((evidential_ce(&dp(&[1.0, 1.0]), &y).unwrap() - 1.0).abs() < 1e-9);
        assert!(evidential_ce(&dp(&[1001.0, 1.0]), &y).unwrap() < 0.002);
    }

    #[test]
    fn classification_loss_examples() {
        let y = oh(0, 2);
        assert!((classification_loss(&dp(&[2.0, 1.0]), &y, 0.0).unwrap() - 0.5).abs() < 1e-9);
        for lc in [0.0, 0.3, 1.0, 5.0] {
            for i in 0..2 {
                let v = classification_loss(&dp(&[1.0, 1.0]), &oh(i, 2), lc).unwrap();
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
        let mut prev = classification_loss(&dp(&[3.0, 1.0]), &y, 0.5).unwrap();
        for wrong in [1.5, 2.0, 4.0, 10.0] {
            let v = classification_loss(&dp(&[3.0, wrong]), &y, 0.5).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(matches!(
            classification_loss(&dp(&[2.0, 1.0]), &y, -1.0),
            Err(UmlError::Config(_))
        ));
    }

    fn half_mask(n: usize) -> LabelMap {
        let labels = (0..n * n).map(|i| if i < n * n / 2 { 0 } else { 1 }).collect();
        LabelMap::new(n, n, labels).unwrap()
    }

    #[test]
    fn evidential_dice_perfect_and_uniform() {
        let n = 64;
        let mask = half_mask(n);
        // near one-hot Dirichlet means
        let mut alpha = vec![1.0; 2 * n * n];
        for (px, &l) in mask.labels().iter().enumerate() {
            alpha[l as usize * n * n + px] = 1e9;
        }
        let map = EvidenceMap::new(2, n, n, alpha).unwrap();
        assert!(evidential_dice(&map, &mask).unwrap() <= 0.01);

        let uniform = EvidenceMap::new(2, n, n, vec![1.0; 2 * n * n]).unwrap();
        let pixels = (n * n) as f64;
        let per_class = (2.0 * 0.5 * pixels / 2.0 + 1.0) / (0.5 * pixels + pixels / 2.0 + 1.0);
        let v = evidential_dice(&uniform, &mask).unwrap();
        assert!((v - (1.0 - per_class)).abs() < 1e-12);
        // per-class Dice tends to 1/2, so the loss tends to 1/2
        assert!((v - 0.5).abs() < 0.01);
    }

    #[test]
    fn evidential_dice_label_swap_symmetry() {
        let (h, w) = (3, 4);
        let alpha: Vec<f64> = (0..2 * h * w).map(|i| 1.0 + ((i * 37) % 11) as f64 * 0.7).collect();
        let labels: Vec<u8> = (0..h * w).map(|i| ((i * 5) % 3 == 0) as u8).collect();
        let mask = LabelMap::new(h, w, labels.clone()).unwrap();
        let map = EvidenceMap::new(2, h, w, alpha.clone()).unwrap();
        let mut swapped_alpha = alpha[h * w..].to_vec();
        swapped_alpha.extend_from_slice(&alpha[..h * w]);
        let swapped_mask = LabelMap::new(h, w, labels.iter().map(|l| 1 - l).collect()).unwrap();
        let swapped = EvidenceMap::new(2, h, w, swapped_alpha).unwrap();
        let a = evidential_dice(&map, &mask).unwrap();
        let b = evidential_dice(&swapped, &swapped_mask).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn evidential_dice_shape_mismatch() {
        let map = EvidenceMap::new(2, 2, 2, vec![1.0; 8]).unwrap();
        let mask = LabelMap::filled(3, 2, 0);
        assert!(matches!(evidential_dice(&map, &mask), Err(UmlError::InvalidInput(_))));
    }

    #[test]
    fn mutual_loss_degenerate_weights_and_uniform_kl() {
        let (h, w) = (4, 4);
        let alpha: Vec<f64> = (0..3 * h * w).map(|i| 1.0 + (i % 7) as f64 * 0.9).collect();
        let map = EvidenceMap::new(3, h, w, alpha).unwrap();
        let mask = LabelMap::new(h, w, (0..h * w).map(|i| (i % 3) as u8).collect()).unwrap();
        let ce_only = mutual_loss(&map, &mask, 0.0, 0.0).unwrap();
        let mean_ce: f64 = (0..h * w)
            .map(|px| evidential_ce(&map.pixel_params(px), &oh(mask.labels()[px] as usize, 3)).unwrap())
            .sum::<f64>()
            / (h * w) as f64;
        assert!((ce_only - mean_ce).abs() < 1e-12);

        let uniform = EvidenceMap::new(3, h, w, vec![1.0; 3 * h * w]).unwrap();
        let (terms, _) = mutual_loss_with_grad(&uniform, &mask, 1.0, 0.0).unwrap();
        assert_eq!(terms.kl, 0.0);
        assert!(matches!(mutual_loss(&map, &mask, -0.1, 0.0), Err(UmlError::Config(_))));
    }

    fn score(classes: usize, size: usize, seed: usize) -> ScoreMap {
        let v = (0..classes * size * size)
            .map(|i| (((i + seed) * 7919) % 97) as f64 / 20.0 - 2.4)
            .collect();
        ScoreMap::new(classes, size, size, v).unwrap()
    }

    #[test]
    fn deep_supervision_average_and_errors() {
        let mask = LabelMap::new(8, 8, (0..64).map(|i| (i % 3) as u8).collect()).unwrap();
        let scales: Vec<ScoreMap> = (0..4).map(|i| score(3, 8 >> i, i)).collect();
        let v = deep_supervision_loss(&scales, &mask).unwrap();
        let by_hand: f64 = scales
            .iter()
            .map(|s| scale_dice_with_grad(s, &mask).unwrap().0)
            .sum::<f64>()
            / 4.0;
        assert!((v - by_hand).abs() < 1e-12);
        assert!(matches!(
            deep_supervision_loss(&scales[..3], &mask),
            Err(UmlError::Config(_))
        ));
        let mut bad = scales.clone();
        bad[2] = score(3, 4, 0);
        assert!(matches!(deep_supervision_loss(&bad, &mask), Err(UmlError::Config(_))));
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert!((total_loss(1.0, 1.0, 1.0, &w) - 1.0).abs() < 1e-12);
        assert!((total_loss(2.0, 1.0, 0.5, &w) - 0.9).abs() < 1e-12);
        let only_cls = LossWeights { w_m: 0.0, w_s: 0.0, w_c: 1.0, ..w };
        assert_eq!(total_loss(7.0, 3.0, 5.0, &only_cls), 3.0);
    }

    #[test]
    fn anneal_examples() {
        let s = AnnealSchedule { max_value: 1.0, ramp_epochs: 10 };
        assert_eq!(anneal(0, &s).unwrap(), 0.0);
        assert_eq!(anneal(10, &s).unwrap(), 1.0);
        assert_eq!(anneal(5, &s).unwrap(), 0.5);
        assert_eq!(anneal(30, &s).unwrap(), 1.0);
        let bad = AnnealSchedule { max_value: 1.0, ramp_epochs: 0 };
        assert!(matches!(anneal(3, &bad), Err(UmlError::Config(_))));
    }
}
