//! Subjective-logic opinions from Dirichlet evidence.
//!
//! Raw scores become non-negative evidence through softplus, evidence
//! becomes Dirichlet parameters `alpha = e + 1`, and the Dirichlet strength
//! `T = sum(alpha)` splits unit mass into per-class beliefs `e_k / T` and a
//! single uncertainty mass `K / T`. Image-level and per-pixel decisions use
//! the same formulas.

use crate::error::{Result, UmlError};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Non-negative, finite evidence values.
#[derive(Clone, Debug, PartialEq)]
pub struct Evidence(Vec<f64>);

impl Evidence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(UmlError::invalid(format!("evidence must be finite and >= 0, got {v}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Map raw logits (any shape, flattened) to evidence via softplus.
pub fn softplus_evidence(logits: &[f64]) -> Result<Evidence> {
    if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
        return Err(UmlError::invalid(format!("non-finite logit {v}")));
    }
    Ok(Evidence(logits.iter().map(|&x| softplus(x)).collect()))
}

/// Dirichlet concentration with its cached strength.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    strength: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(UmlError::config("Dirichlet needs at least one class"));
        }
        if let Some(a) = alpha.iter().find(|a| !a.is_finite() || **a < 1.0) {
            return Err(UmlError::invalid(format!("alpha entries must be finite and >= 1, got {a}")));
        }
        let strength = alpha.iter().sum();
        Ok(Self { alpha, strength })
    }

    pub fn from_evidence(e: &Evidence) -> Self {
        let alpha: Vec<f64> = e.values().iter().map(|v| v + 1.0).collect();
        let strength = alpha.iter().sum();
        Self { alpha, strength }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    /// Dirichlet mean `alpha_k / T`.
    pub fn expected_probability(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.strength).collect()
    }

    pub fn opinion(&self) -> Opinion {
        let k = self.alpha.len() as f64;
        Opinion {
            beliefs: self.alpha.iter().map(|a| (a - 1.0) / self.strength).collect(),
            uncertainty: k / self.strength,
        }
    }
}

/// Belief masses plus one uncertainty mass, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Opinion {
    pub beliefs: Vec<f64>,
    pub uncertainty: f64,
}

impl Opinion {
    pub fn total_mass(&self) -> f64 {
        self.beliefs.iter().sum::<f64>() + self.uncertainty
    }

    /// Index of the largest belief (first on ties).
    pub fn predicted_class(&self) -> usize {
        argmax(&self.beliefs)
    }
}

fn check_classes(k: usize) -> Result<()> {
    match k {
        0 => Err(UmlError::config("class count must be positive")),
        1 => Err(UmlError::config("a single class carries no decision; need K >= 2")),
        _ => Ok(()),
    }
}

/// Image-level Dirichlet parameters and opinion from `K` evidence values.
pub fn classification_opinion(evidence: &Evidence, k: usize) -> Result<(DirichletParams, Opinion)> {
    check_classes(k)?;
    if evidence.len() != k {
        return Err(UmlError::config(format!(
            "expected {k} evidence values, got {}",
            evidence.len()
        )));
    }
    let params = DirichletParams::from_evidence(evidence);
    let opinion = params.opinion();
    Ok((params, opinion))
}

/// Per-pixel Dirichlet parameters, `classes x height x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceMap {
    classes: usize,
    height: usize,
    width: usize,
    alpha: Vec<f64>,
    strength: Vec<f64>,
}

impl EvidenceMap {
    pub fn new(classes: usize, height: usize, width: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != classes * height * width {
            return Err(UmlError::invalid(format!(
                "alpha map {classes}x{height}x{width} needs {} values, got {}",
                classes * height * width,
                alpha.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !a.is_finite() || **a < 1.0) {
            return Err(UmlError::invalid(format!("alpha entries must be finite and >= 1, got {a}")));
        }
        let hw = height * width;
        let mut strength = vec![0.0; hw];
        for plane in alpha.chunks(hw) {
            strength.iter_mut().zip(plane).for_each(|(s, a)| *s += a);
        }
        Ok(Self {
            classes,
            height,
            width,
            alpha,
            strength,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Channel-major alpha values.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn strength(&self) -> &[f64] {
        &self.strength
    }

    pub fn pixel_params(&self, pixel: usize) -> DirichletParams {
        let hw = self.pixels();
        let alpha = (0..self.classes).map(|q| self.alpha[q * hw + pixel]).collect();
        DirichletParams {
            alpha,
            strength: self.strength[pixel],
        }
    }

    /// Dirichlet mean per pixel, channel-major like `alpha`.
    pub fn expected_probability(&self) -> Vec<f64> {
        let hw = self.pixels();
        self.alpha
            .iter()
            .enumerate()
            .map(|(i, a)| a / self.strength[i % hw])
            .collect()
    }

    pub fn opinion_map(&self) -> OpinionMap {
        let hw = self.pixels();
        let q = self.classes as f64;
        OpinionMap {
            classes: self.classes,
            height: self.height,
            width: self.width,
            beliefs: self
                .alpha
                .iter()
                .enumerate()
                .map(|(i, a)| (a - 1.0) / self.strength[i % hw])
                .collect(),
            uncertainty: self.strength.iter().map(|s| q / s).collect(),
        }
    }
}

/// Per-pixel beliefs (`classes x height x width`) and uncertainty
/// (`height x width`).
#[derive(Clone, Debug, PartialEq)]
pub struct OpinionMap {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub beliefs: Vec<f64>,
    pub uncertainty: Vec<f64>,
}

impl OpinionMap {
    pub fn pixel(&self, pixel: usize) -> Opinion {
        let hw = self.height * self.width;
        Opinion {
            beliefs: (0..self.classes).map(|q| self.beliefs[q * hw + pixel]).collect(),
            uncertainty: self.uncertainty[pixel],
        }
    }

    pub fn mean_uncertainty(&self) -> f64 {
        self.uncertainty.iter().sum::<f64>() / self.uncertainty.len() as f64
    }
}

/// Per-pixel opinions from a `classes x height x width` evidence tensor.
pub fn segmentation_opinion(
    evidence: &Evidence,
    classes: usize,
    height: usize,
    width: usize,
) -> Result<(EvidenceMap, OpinionMap)> {
    check_classes(classes)?;
    if evidence.len() != classes * height * width {
        return Err(UmlError::config(format!(
            "evidence has {} values, expected {classes} channels of {height}x{width}",
            evidence.len()
        )));
    }
    let alpha = evidence.values().iter().map(|e| e + 1.0).collect();
    let map = EvidenceMap::new(classes, height, width, alpha)?;
    let opinions = map.opinion_map();
    Ok((map, opinions))
}

/// Index of the maximum (first on ties).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softplus_reference_points() {
        let e = softplus_evidence(&[0.0, 50.0, -100.0]).unwrap();
        assert!(close(e.values()[0], std::f64::consts::LN_2, 1e-12));
        assert!(close(e.values()[1], 50.0, 1e-9));
        assert!(e.values()[2] >= 0.0 && e.values()[2] < 1e-30);
    }

    #[test]
    fn softplus_rejects_non_finite() {
        assert!(matches!(softplus_evidence(&[f64::NAN]), Err(UmlError::InvalidInput(_))));
        assert!(softplus_evidence(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn classification_opinion_examples() {
        let (p, o) = classification_opinion(&Evidence::new(vec![0.0, 0.0]).unwrap(), 2).unwrap();
        assert_eq!(p.alpha(), &[1.0, 1.0]);
        assert_eq!(o.beliefs, vec![0.0, 0.0]);
        assert_eq!(o.uncertainty, 1.0);

        let (p, o) = classification_opinion(&Evidence::new(vec![3.0, 1.0]).unwrap(), 2).unwrap();
        assert_eq!(p.alpha(), &[4.0, 2.0]);
        assert_eq!(p.strength(), 6.0);
        assert!(close(o.beliefs[0], 0.5, 1e-12));
        assert!(close(o.beliefs[1], 1.0 / 6.0, 1e-12));
        assert!(close(o.uncertainty, 1.0 / 3.0, 1e-12));

        let (_, o) = classification_opinion(&Evidence::new(vec![18.0, 0.0]).unwrap(), 2).unwrap();
        assert!(close(o.beliefs[0], 0.9, 1e-12));
        assert_eq!(o.beliefs[1], 0.0);
        assert!(close(o.uncertainty, 0.1, 1e-12));
    }

    #[test]
    fn classification_opinion_rejects_bad_k() {
        let e = Evidence::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(classification_opinion(&e, 0), Err(UmlError::Config(_))));
        assert!(matches!(classification_opinion(&e, 3), Err(UmlError::Config(_))));
        let one = Evidence::new(vec![1.0]).unwrap();
        assert!(matches!(classification_opinion(&one, 1), Err(UmlError::Config(_))));
    }

    #[test]
    fn segmentation_opinion_examples() {
        let zero = Evidence::new(vec![0.0; 3 * 2 * 2]).unwrap();
        let (_, o) = segmentation_opinion(&zero, 3, 2, 2).unwrap();
        assert!(o.uncertainty.iter().all(|&u| u == 1.0));

        // pixel 1 of a 1x2 map carries e = [2, 0, 1]
        let ev = Evidence::new(vec![0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let (m, o) = segmentation_opinion(&ev, 3, 1, 2).unwrap();
        assert_eq!(m.pixel_params(1).alpha(), &[3.0, 1.0, 2.0]);
        assert_eq!(m.strength()[1], 6.0);
        let p = o.pixel(1);
        assert!(close(p.beliefs[0], 1.0 / 3.0, 1e-12));
        assert_eq!(p.beliefs[1], 0.0);
        assert!(close(p.beliefs[2], 1.0 / 6.0, 1e-12));
        assert!(close(p.uncertainty, 0.5, 1e-12));
    }

    #[test]
    fn one_pixel_map_is_classification() {
        let ev = Evidence::new(vec![0.4, 2.5, 7.0]).unwrap();
        let (m, o) = segmentation_opinion(&ev, 3, 1, 1).unwrap();
        let (p, c) = classification_opinion(&ev, 3).unwrap();
        assert_eq!(&m.pixel_params(0), &p);
        assert_eq!(o.pixel(0), c);
    }

    #[test]
    fn segmentation_channel_mismatch_is_config_error() {
        let ev = Evidence::new(vec![0.0; 8]).unwrap();
        assert!(matches!(segmentation_opinion(&ev, 3, 2, 2), Err(UmlError::Config(_))));
    }

    #[test]
    fn expected_probability_examples() {
        let p = DirichletParams::new(vec![1.0, 1.0]).unwrap().expected_probability();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = DirichletParams::new(vec![4.0, 2.0]).unwrap().expected_probability();
        assert!(close(p[0], 2.0 / 3.0, 1e-12) && close(p[1], 1.0 / 3.0, 1e-12));
        let p = DirichletParams::new(vec![1.0; 3]).unwrap().expected_probability();
        assert!(p.iter().all(|v| close(*v, 1.0 / 3.0, 1e-15)));
    }

    #[test]
    fn dirichlet_rejects_alpha_below_one() {
        assert!(DirichletParams::new(vec![0.5, 2.0]).is_err());
        assert!(EvidenceMap::new(2, 1, 1, vec![1.0, 0.9]).is_err());
    }
}
