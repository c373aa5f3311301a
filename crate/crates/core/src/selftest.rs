//! Quick invariant and oracle checks runnable from the command line.

use uml_autograd::{Graph, Tensor};

use crate::evidential::{softplus_evidence, classification_opinion, segmentation_opinion, Evidence};
use crate::losses::{classification_loss_with_grad, evidential_ce, kl_dirichlet_uniform, mutual_loss_with_grad, OneHot};
use crate::evidential::{DirichletParams, EvidenceMap};
use crate::mask::LabelMap;
use crate::metrics::{assd, surface_pixels};
use crate::model::{reliable_mask, Model, ModelConfig};
use crate::rng::SplitMix64;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check { name, passed: worst <= tol, detail: format!("worst {worst:.3e} (tol {tol:.0e})") }
}

fn opinions_sum_to_one(rng: &mut SplitMix64) -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..3000 {
        let k = [2, 3, 5][i % 3];
        let logits: Vec<f64> = (0..k).map(|_| rng.uniform(-20.0, 20.0)).collect();
        let e = softplus_evidence(&logits).expect("finite logits");
        let (_, op) = classification_opinion(&e, k).expect("valid k");
        worst = worst.max((op.total_mass() - 1.0).abs());
    }
    for _ in 0..20 {
        let e = Evidence::new((0..3 * 16).map(|_| rng.uniform(0.0, 50.0)).collect()).expect("non-negative");
        let (_, ops) = segmentation_opinion(&e, 3, 4, 4).expect("shape");
        for p in 0..16 {
            worst = worst.max((ops.pixel(p).total_mass() - 1.0).abs());
        }
    }
    check("opinion mass sums to one", worst, 1e-9)
}

/// `KL(Beta(a, b) || Beta(1, 1))` by the midpoint rule on a substituted grid.
fn kl_beta_quadrature(a: f64, b: f64) -> f64 {
    let n = 200_000;
    let (mut z, mut m) = (0.0, 0.0);
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let p = x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0);
        z += p;
        if p > 0.0 {
            m += p * p.ln();
        }
    }
    z /= n as f64;
    m /= n as f64;
    m / z - z.ln()
}

fn kl_matches_quadrature(rng: &mut SplitMix64) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (a, b) = (rng.uniform(1.0, 6.0), rng.uniform(1.0, 6.0));
        let kl = kl_dirichlet_uniform(&DirichletParams::new(vec![a, b]).expect("alpha >= 1"));
        worst = worst.max((kl - kl_beta_quadrature(a, b)).abs());
    }
    check("KL to uniform matches quadrature", worst, 1e-3)
}

fn ce_hand_value() -> Check {
    let alpha = DirichletParams::new(vec![2.0, 1.0]).expect("valid");
    let y = OneHot::from_index(0, 2).expect("valid");
    // psi(3) - psi(2) = 1/2
    let v = evidential_ce(&alpha, &y).expect("valid");
    check("expected cross-entropy hand value", (v - 0.5).abs(), 1e-12)
}

fn loss_gradients(rng: &mut SplitMix64) -> Check {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1e-3);
    for _ in 0..4 {
        let a: Vec<f64> = (0..3).map(|_| rng.uniform(1.1, 8.0)).collect();
        let y = OneHot::from_index(1, 3).expect("valid");
        let f = |v: &[f64]| classification_loss_with_grad(&DirichletParams::new(v.to_vec()).unwrap(), &y, 0.7).unwrap().0;
        let (_, g) = classification_loss_with_grad(&DirichletParams::new(a.clone()).unwrap(), &y, 0.7).unwrap();
        for j in 0..3 {
            let (mut p, mut m) = (a.clone(), a.clone());
            p[j] += h;
            m[j] -= h;
            worst = worst.max(rel((f(&p) - f(&m)) / (2.0 * h), g[j]));
        }
    }
    let mask = LabelMap::new(2, 2, vec![0, 1, 2, 1]).expect("shape");
    let a: Vec<f64> = (0..12).map(|_| rng.uniform(1.1, 6.0)).collect();
    let f = |v: &[f64]| mutual_loss_with_grad(&EvidenceMap::new(3, 2, 2, v.to_vec()).unwrap(), &mask, 0.5, 1.0).unwrap().0.total;
    let (_, g) = mutual_loss_with_grad(&EvidenceMap::new(3, 2, 2, a.clone()).unwrap(), &mask, 0.5, 1.0).unwrap();
    for j in 0..12 {
        let (mut p, mut m) = (a.clone(), a.clone());
        p[j] += h;
        m[j] -= h;
        worst = worst.max(rel((f(&p) - f(&m)) / (2.0 * h), g[j]));
    }
    check("loss gradients match finite differences", worst, 1e-5)
}

fn assd_matches_brute_force(rng: &mut SplitMix64) -> Check {
    let mut mismatches = 0;
    for _ in 0..30 {
        let (hh, ww) = (12, 15);
        let mut draw = || {
            LabelMap::new(hh, ww, (0..hh * ww).map(|_| (rng.next_f64() < 0.3) as u8).collect()).expect("shape")
        };
        let (p, g) = (draw(), draw());
        let fast = assd(&p, &g, 1).expect("shape");
        let (sp, sg) = (surface_pixels(&p, 1), surface_pixels(&g, 1));
        let brute = if sp.is_empty() || sg.is_empty() {
            None
        } else {
            let mean = |a: &[(usize, usize)], b: &[(usize, usize)]| {
                a.iter()
                    .map(|&(y, x)| {
                        b.iter()
                            .map(|&(v, u)| ((y as f64 - v as f64).powi(2) + (x as f64 - u as f64).powi(2)).sqrt())
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
                    / a.len() as f64
            };
            Some((mean(&sp, &sg) + mean(&sg, &sp)) / 2.0)
        };
        mismatches += (fast != brute) as usize;
    }
    Check { name: "ASSD equals brute force", passed: mismatches == 0, detail: format!("{mismatches} mismatches") }
}

fn reliable_mask_identity() -> Check {
    let mut g = Graph::<f64>::new();
    let s1 = g.input(Tensor::from_vec(&[1, 2, 1, 2], vec![0.5, -1.0, 2.0, 3.0]));
    let a = g.input(Tensor::from_vec(&[1, 2, 1, 2], vec![1.0, 4.0, 2.0, 1.5]));
    let u = g.input(Tensor::from_vec(&[1, 1, 1, 2], vec![0.0, 1.0]));
    let m = reliable_mask(&mut g, s1, a, u).expect("aligned");
    let v = g.value(m).data();
    let e = (-1.0f64).exp();
    let worst = [(v[0] - 1.5).abs(), (v[1] - 3.0 * e).abs(), (v[2] - 4.0).abs(), (v[3] - 4.5 * e).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    check("reliable mask gate", worst, 1e-15)
}

fn model_shapes() -> Check {
    let cfg = ModelConfig { widths: [4, 4, 8, 8], decoder_widths: [4, 4, 4], ..ModelConfig::default() };
    let model = Model::<f64>::new(cfg).expect("valid config");
    let result = model.forward(Tensor::zeros(&[1, 1, 16, 24]));
    let passed = match &result {
        Ok(out) => {
            let o = &out[0];
            o.decoder_outputs.iter().enumerate().all(|(i, s)| s.height == 16 >> i && s.width == 24 >> i)
                && o.seg_uncertainty.iter().all(|u| u.is_finite() && *u > 0.0 && *u <= 1.0)
                && (o.cls_opinion.total_mass() - 1.0).abs() < 1e-12
        }
        Err(_) => false,
    };
    Check { name: "model shape contract", passed, detail: format!("{:?}", result.as_ref().err()) }
}

/// Run every check; the caller decides how to report failures.
pub fn run() -> Vec<Check> {
    let mut rng = SplitMix64::new(0x5e1f_7e57);
    vec![
        opinions_sum_to_one(&mut rng),
        kl_matches_quadrature(&mut rng),
        ce_hand_value(),
        loss_gradients(&mut rng),
        assd_matches_brute_force(&mut rng),
        reliable_mask_identity(),
        model_shapes(),
    ]
}
