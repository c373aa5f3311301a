//! Classification (accuracy, F1) and segmentation (Dice, ASSD) metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmlError};
use crate::mask::LabelMap;

fn check_lengths(preds: &[usize], gts: &[usize]) -> Result<()> {
    if preds.is_empty() {
        return Err(UmlError::invalid("metrics need at least one prediction"));
    }
    if preds.len() != gts.len() {
        return Err(UmlError::invalid(format!(
            "{} predictions for {} targets",
            preds.len(),
            gts.len()
        )));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], gts: &[usize]) -> Result<f64> {
    check_lengths(preds, gts)?;
    let hits = preds.iter().zip(gts).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Binary confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }
}

pub fn confusion(preds: &[usize], gts: &[usize], positive_class: usize) -> Result<Confusion> {
    check_lengths(preds, gts)?;
    if positive_class > 1 {
        return Err(UmlError::invalid(format!("positive class {positive_class} is not binary")));
    }
    let mut c = Confusion::default();
    for (&p, &g) in preds.iter().zip(gts) {
        if p > 1 || g > 1 {
            return Err(UmlError::invalid(format!("non-binary label pair ({p}, {g})")));
        }
        match (p == positive_class, g == positive_class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Positive-class F1, `2TP / (2TP + FP + FN)`; 0 when undefined.
pub fn f1_score(preds: &[usize], gts: &[usize], positive_class: usize) -> Result<f64> {
    Ok(confusion(preds, gts, positive_class)?.f1())
}

/// Unweighted mean of one-vs-rest F1 over `classes`.
pub fn macro_f1(preds: &[usize], gts: &[usize], classes: usize) -> Result<f64> {
    check_lengths(preds, gts)?;
    let mut sum = 0.0;
    for k in 0..classes {
        let p: Vec<usize> = preds.iter().map(|&v| (v == k) as usize).collect();
        let g: Vec<usize> = gts.iter().map(|&v| (v == k) as usize).collect();
        sum += f1_score(&p, &g, 1)?;
    }
    Ok(sum / classes as f64)
}

fn check_shapes(a: &LabelMap, b: &LabelMap) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(UmlError::invalid(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// `2|P ∩ G| / (|P| + |G|)` for one class; 1 when both are empty.
pub fn dice_score(pred: &LabelMap, gt: &LabelMap, class_id: u8) -> Result<f64> {
    dice_region(pred, gt, &[class_id])
}

/// Dice of the region made of every label in `labels`.
pub fn dice_region(pred: &LabelMap, gt: &LabelMap, labels: &[u8]) -> Result<f64> {
    check_shapes(pred, gt)?;
    let mut inter = 0usize;
    let mut p = 0usize;
    let mut g = 0usize;
    for (&a, &b) in pred.labels().iter().zip(gt.labels()) {
        let (ia, ib) = (labels.contains(&a), labels.contains(&b));
        p += ia as usize;
        g += ib as usize;
        inter += (ia && ib) as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Foreground pixels of `class_id` that touch the image border or have a
/// 4-neighbour of another class, in raster order.
pub fn surface_pixels(mask: &LabelMap, class_id: u8) -> Vec<(usize, usize)> {
    region_surface(mask, &[class_id])
}

/// Surface of the region made of every label in `labels`.
pub fn region_surface(mask: &LabelMap, labels: &[u8]) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let inside = |y: usize, x: usize| labels.contains(&mask.get(y, x));
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !inside(y, x) {
                continue;
            }
            let border = y == 0 || x == 0 || y + 1 == h || x + 1 == w;
            if border || !inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1) {
                out.push((y, x));
            }
        }
    }
    out
}

/// Exact squared Euclidean distance to the nearest feature pixel (Meijster
/// et al. two-pass transform, integer arithmetic only).
fn squared_distance_transform(features: &[bool], h: usize, w: usize) -> Vec<i64> {
    let inf = (h + w + 1) as i64;
    let mut g = vec![0i64; h * w];
    for x in 0..w {
        g[x] = if features[x] { 0 } else { inf };
        for y in 1..h {
            g[y * w + x] = if features[y * w + x] {
                0
            } else {
                (g[(y - 1) * w + x] + 1).min(inf)
            };
        }
        for y in (0..h.saturating_sub(1)).rev() {
            if g[(y + 1) * w + x] < g[y * w + x] {
                g[y * w + x] = g[(y + 1) * w + x] + 1;
            }
        }
    }
    let mut dt = vec![0i64; h * w];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (uu - ii))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q as usize], u);
                if wv < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wv;
                }
            }
        }
        for u in (0..w).rev() {
            dt[y * w + u] = f(u as i64, s[q as usize]);
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    dt
}

fn mean_surface_distance(from: &[(usize, usize)], to: &[(usize, usize)], h: usize, w: usize) -> f64 {
    let mut features = vec![false; h * w];
    for &(y, x) in to {
        features[y * w + x] = true;
    }
    let dt = squared_distance_transform(&features, h, w);
    let mut sum = 0.0;
    for &(y, x) in from {
        sum += (dt[y * w + x] as f64).sqrt();
    }
    sum / from.len() as f64
}

/// Average symmetric surface distance in pixels; `None` when either
/// surface is empty (the pair is excluded from aggregates).
pub fn assd(pred: &LabelMap, gt: &LabelMap, class_id: u8) -> Result<Option<f64>> {
    assd_region(pred, gt, &[class_id])
}

/// ASSD of the region made of every label in `labels`.
pub fn assd_region(pred: &LabelMap, gt: &LabelMap, labels: &[u8]) -> Result<Option<f64>> {
    check_shapes(pred, gt)?;
    let sp = region_surface(pred, labels);
    let sg = region_surface(gt, labels);
    if sp.is_empty() || sg.is_empty() {
        return Ok(None);
    }
    let (h, w) = (pred.height(), pred.width());
    let forward = mean_surface_distance(&sp, &sg, h, w);
    let backward = mean_surface_distance(&sg, &sp, h, w);
    Ok(Some((forward + backward) / 2.0))
}

/// Aggregated evaluation of one split at one noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub sigma: f64,
    pub n: usize,
    pub acc: f64,
    pub f1: f64,
    /// Structure key -> mean per-image Dice.
    pub dice_per_class: BTreeMap<u8, f64>,
    /// Structure key -> mean per-image ASSD over non-excluded images.
    pub assd_per_class: BTreeMap<u8, Option<f64>>,
    pub counts: Confusion,
    pub n_excluded_assd: usize,
    pub mean_uc: f64,
    pub mean_us: f64,
}

impl MetricsReport {
    pub fn mean_dice(&self) -> f64 {
        if self.dice_per_class.is_empty() {
            return 0.0;
        }
        self.dice_per_class.values().sum::<f64>() / self.dice_per_class.len() as f64
    }
}

/// Per-image outcome used to build a [`MetricsReport`].
#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub pred_label: usize,
    pub true_label: usize,
    pub pred_mask: LabelMap,
    pub true_mask: LabelMap,
    pub uc: f64,
    pub mean_us: f64,
}

/// A scored structure: a report key and the labels that make up its region.
#[derive(Clone, Copy, Debug)]
pub struct Structure {
    pub key: u8,
    pub labels: &'static [u8],
}

/// Reduce per-image outcomes in order; Dice/ASSD are per image then averaged.
pub fn summarize(split: &str, sigma: f64, outcomes: &[SampleOutcome], structures: &[Structure]) -> Result<MetricsReport> {
    if outcomes.is_empty() {
        return Err(UmlError::invalid("cannot summarize an empty split"));
    }
    let preds: Vec<usize> = outcomes.iter().map(|o| o.pred_label).collect();
    let gts: Vec<usize> = outcomes.iter().map(|o| o.true_label).collect();
    let counts = confusion(&preds, &gts, 1)?;
    let mut dice_per_class = BTreeMap::new();
    let mut assd_per_class = BTreeMap::new();
    let mut n_excluded_assd = 0;
    for st in structures {
        let mut dsum = 0.0;
        let mut asum = 0.0;
        let mut acount = 0usize;
        for o in outcomes {
            dsum += dice_region(&o.pred_mask, &o.true_mask, st.labels)?;
            match assd_region(&o.pred_mask, &o.true_mask, st.labels)? {
                Some(v) => {
                    asum += v;
                    acount += 1;
                }
                None => n_excluded_assd += 1,
            }
        }
        dice_per_class.insert(st.key, dsum / outcomes.len() as f64);
        assd_per_class.insert(st.key, (acount > 0).then(|| asum / acount as f64));
    }
    let n = outcomes.len() as f64;
    Ok(MetricsReport {
        split: split.to_string(),
        sigma,
        n: outcomes.len(),
        acc: accuracy(&preds, &gts)?,
        f1: counts.f1(),
        dice_per_class,
        assd_per_class,
        counts,
        n_excluded_assd,
        mean_uc: outcomes.iter().map(|o| o.uc).sum::<f64>() / n,
        mean_us: outcomes.iter().map(|o| o.mean_us).sum::<f64>() / n,
    })
}
