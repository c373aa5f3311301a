//! The joint training objective evaluated on a forward graph: loss values in
//! 64-bit plus the gradient seeds that start the backward pass.

use serde::{Deserialize, Serialize};
use uml_autograd::{Element, Graph, Tensor, Var};

use crate::error::{Result, UmlError};
use crate::evidential::{DirichletParams, EvidenceMap};
use crate::losses::{
    classification_loss_with_grad, deep_supervision_loss_with_grad, mutual_loss_with_grad, total_loss, LossWeights,
    OneHot, ScoreMap,
};
use crate::mask::LabelMap;
use crate::model::ForwardVars;

/// Batch-mean loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub mutual: f64,
    pub cls: f64,
    pub seg: f64,
    pub total: f64,
}

impl std::ops::Add for LossTerms {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { mutual: self.mutual + o.mutual, cls: self.cls + o.cls, seg: self.seg + o.seg, total: self.total + o.total }
    }
}

/// Output variables paired with the gradient that seeds the backward pass.
pub type GradSeeds<T> = Vec<(Var, Tensor<T>)>;

impl LossTerms {
    pub fn scaled(self, s: f64) -> Self {
        Self { mutual: self.mutual * s, cls: self.cls * s, seg: self.seg * s, total: self.total * s }
    }

    fn first_non_finite(&self) -> Option<(&'static str, f64)> {
        [("L_m", self.mutual), ("L_c", self.cls), ("L_s", self.seg), ("total", self.total)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
    }
}

/// Targets of one batch, aligned with the batch axis.
pub struct Targets<'a> {
    pub masks: &'a [&'a LabelMap],
    pub labels: &'a [usize],
}

fn values<T: Element>(g: &Graph<T>, v: Var, i: usize) -> Vec<f64> {
    g.value(v).sample(i).data().iter().map(|x| x.as_f64()).collect()
}

fn check_finite<T: Element>(g: &Graph<T>, v: Var, name: &str, epoch: usize) -> Result<()> {
    if let Some(x) = g.value(v).data().iter().find(|x| !x.is_finite()) {
        return Err(UmlError::Numerical { epoch, term: name.to_string(), value: x.as_f64() });
    }
    Ok(())
}

/// Mean over the batch of `w_m L_m + w_c L_c + w_s L_s`, with the gradient
/// seeds for α^s, α^c and s_1..s_4. `weights` carries the lambdas in force
/// (already annealed).
pub fn batch_objective<T: Element>(
    g: &Graph<T>,
    v: &ForwardVars,
    targets: &Targets,
    weights: &LossWeights,
    epoch: usize,
) -> Result<(LossTerms, GradSeeds<T>)> {
    check_finite(g, v.seg_alpha, "seg_alpha", epoch)?;
    check_finite(g, v.cls_alpha, "cls_alpha", epoch)?;
    for (i, &s) in v.scales.iter().enumerate() {
        check_finite(g, s, &format!("s_{}", i + 1), epoch)?;
    }
    let (n, q, h, w) = g.value(v.seg_alpha).dims4();
    if targets.masks.len() != n || targets.labels.len() != n {
        return Err(UmlError::invalid(format!(
            "batch of {n} with {} masks and {} labels",
            targets.masks.len(),
            targets.labels.len()
        )));
    }
    let k = g.value(v.cls_alpha).shape()[1];
    let inv_n = 1.0 / n as f64;
    let mut terms = LossTerms::default();
    let mut seg_grad = Vec::with_capacity(n * q * h * w);
    let mut cls_grad = Vec::with_capacity(n * k);
    let mut scale_grads: [Vec<T>; 4] = Default::default();
    for i in 0..n {
        let mask = targets.masks[i];
        let map = EvidenceMap::new(q, h, w, values(g, v.seg_alpha, i))?;
        let (mt, mg) = mutual_loss_with_grad(&map, mask, weights.lambda_m1, weights.lambda_m2)?;
        let alpha = DirichletParams::new(values(g, v.cls_alpha, i))?;
        let y = OneHot::from_index(targets.labels[i], k)?;
        let (lc, cg) = classification_loss_with_grad(&alpha, &y, weights.lambda_c)?;
        let scales = v
            .scales
            .iter()
            .map(|&s| {
                let (_, sq, sh, sw) = g.value(s).dims4();
                ScoreMap::new(sq, sh, sw, values(g, s, i))
            })
            .collect::<Result<Vec<_>>>()?;
        let (ls, sg) = deep_supervision_loss_with_grad(&scales, mask)?;
        let sample = LossTerms { mutual: mt.total, cls: lc, seg: ls, total: total_loss(mt.total, lc, ls, weights) };
        if let Some((term, value)) = sample.first_non_finite() {
            return Err(UmlError::Numerical { epoch, term: term.to_string(), value });
        }
        terms = terms + sample;
        seg_grad.extend(mg.iter().map(|d| T::from_f64(d * weights.w_m * inv_n)));
        cls_grad.extend(cg.iter().map(|d| T::from_f64(d * weights.w_c * inv_n)));
        for (dst, src) in scale_grads.iter_mut().zip(&sg) {
            dst.extend(src.iter().map(|d| T::from_f64(d * weights.w_s * inv_n)));
        }
    }
    let mut seeds = vec![
        (v.seg_alpha, Tensor::from_vec(&[n, q, h, w], seg_grad)),
        (v.cls_alpha, Tensor::from_vec(&[n, k], cls_grad)),
    ];
    for (&s, data) in v.scales.iter().zip(scale_grads) {
        seeds.push((s, Tensor::from_vec(g.value(s).shape(), data)));
    }
    Ok((terms.scaled(inv_n), seeds))
}
