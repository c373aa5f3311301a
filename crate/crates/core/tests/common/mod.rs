//! Oracles and fixtures shared by the integration test targets.

#![allow(dead_code)]

use uml::evidential::softplus;
use uml::losses::LossWeights;
use uml::mask::LabelMap;
use uml::model::{image_batch, Model, ModelConfig, SUBMODULES};
use uml::objective::{batch_objective, Targets};
use uml::rng::SplitMix64;
use uml_autograd::{Element, Graph, Tensor};

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out
}

/// `KL(Dir(a) || Dir(1))` by quadrature of the unnormalised density
/// `f = prod x_i^(a_i - 1)`: `KL = E_f[ln f]/Z - ln Z - ln Gamma(K)`, with the
/// normaliser `Z` itself integrated numerically. K = 2 or 3.
pub fn kl_quadrature(a: &[f64]) -> f64 {
    let nodes = gauss_legendre(96);
    let f = |x: &[f64]| x.iter().zip(a).map(|(xi, ai)| xi.powf(ai - 1.0)).product::<f64>();
    let (mut z, mut m) = (0.0, 0.0);
    let mut acc = |x: &[f64], w: f64| {
        let v = f(x);
        z += w * v;
        if v > 0.0 {
            m += w * v * v.ln();
        }
    };
    let ln_gamma_k = match a.len() {
        2 => {
            for &(u, w) in &nodes {
                acc(&[u, 1.0 - u], w);
            }
            0.0
        }
        3 => {
            // Duffy map of the unit square onto the simplex, Jacobian (1 - u)
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    let x1 = u;
                    let x2 = (1.0 - u) * v;
                    acc(&[x1, x2, 1.0 - x1 - x2], wu * wv * (1.0 - u));
                }
            }
            2f64.ln()
        }
        k => panic!("oracle supports K = 2 or 3, got {k}"),
    };
    m / z - z.ln() - ln_gamma_k
}

pub fn random_mask(rng: &mut SplitMix64, h: usize, w: usize, q: usize) -> LabelMap {
    LabelMap::new(h, w, (0..h * w).map(|_| (rng.next_f64() * q as f64) as u8).collect()).unwrap()
}

pub fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
}

pub const H: f64 = 1e-5;

pub fn alpha_from_logits(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| softplus(v) + 1.0).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Central differences of `f` at `z` against `grad_alpha * sigmoid(z)`.
pub fn check_through_softplus(z: &[f64], grad_alpha: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..z.len() {
        let (mut p, mut m) = (z.to_vec(), z.to_vec());
        p[j] += H;
        m[j] -= H;
        let fd = (f(&p) - f(&m)) / (2.0 * H);
        worst = worst.max(rel_err(fd, grad_alpha[j] * sigmoid(z[j])));
    }
    worst
}

/// O(n^2) ASSD straight from the definition. Summation runs in raster order
/// like the library, so results must agree to the last bit.
pub fn brute_force_assd(p: &LabelMap, g: &LabelMap, class: u8) -> Option<f64> {
    let boundary = |m: &LabelMap| {
        let mut out = Vec::new();
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(y, x) != class {
                    continue;
                }
                let neighbours = [(0isize, 1isize), (0, -1), (1, 0), (-1, 0)];
                let edge = neighbours.iter().any(|&(dy, dx)| {
                    let (ny, nx) = (y as isize + dy, x as isize + dx);
                    ny < 0 || nx < 0 || ny >= m.height() as isize || nx >= m.width() as isize
                        || m.get(ny as usize, nx as usize) != class
                });
                if edge {
                    out.push((y as f64, x as f64));
                }
            }
        }
        out
    };
    let (sp, sg) = (boundary(p), boundary(g));
    if sp.is_empty() || sg.is_empty() {
        return None;
    }
    let directed = |a: &[(f64, f64)], b: &[(f64, f64)]| {
        let mut sum = 0.0;
        for &(y, x) in a {
            let mut best = f64::INFINITY;
            for &(v, u) in b {
                best = best.min(((y - v).powi(2) + (x - u).powi(2)).sqrt());
            }
            sum += best;
        }
        sum / a.len() as f64
    };
    Some((directed(&sp, &sg) + directed(&sg, &sp)) / 2.0)
}

pub fn random_binary_mask(rng: &mut SplitMix64, h: usize, w: usize, density: f64) -> LabelMap {
    LabelMap::new(h, w, (0..h * w).map(|_| (rng.next_f64() < density) as u8).collect()).unwrap()
}

/// Random filled rectangles and blobs, closer to real segmentation masks.
pub fn random_shapes(rng: &mut SplitMix64, h: usize, w: usize) -> LabelMap {
    let mut m = LabelMap::filled(h, w, 0);
    for _ in 0..1 + (rng.next_f64() * 3.0) as usize {
        let (cy, cx) = (rng.uniform(0.0, h as f64), rng.uniform(0.0, w as f64));
        let (ry, rx) = (rng.uniform(1.0, h as f64 / 2.0), rng.uniform(1.0, w as f64 / 2.0));
        for y in 0..h {
            for x in 0..w {
                if ((y as f64 - cy) / ry).powi(2) + ((x as f64 - cx) / rx).powi(2) <= 1.0 {
                    m.set(y, x, 1);
                }
            }
        }
    }
    m
}


pub const IMG_H: usize = 16;
pub const IMG_W: usize = 16;

pub fn small_model(use_un: bool, use_ui: bool) -> ModelConfig {
    ModelConfig {
        widths: [4, 6, 8, 8],
        decoder_widths: [6, 4, 4],
        top_width: 4,
        mask_width: 3,
        use_un,
        use_ui,
        init_seed: 7,
        ..ModelConfig::default()
    }
}

pub fn images(n: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| (0..IMG_H * IMG_W).map(|_| rng.next_f64() as f32).collect()).collect()
}

pub fn batch<T: Element>(imgs: &[Vec<f32>]) -> Tensor<T> {
    let refs: Vec<&[f32]> = imgs.iter().map(|v| v.as_slice()).collect();
    image_batch(&refs, IMG_H, IMG_W).unwrap()
}

pub fn masks(n: usize) -> Vec<LabelMap> {
    (0..n)
        .map(|k| {
            let mut m = LabelMap::filled(IMG_H, IMG_W, 0);
            for y in 3..12 {
                for x in 4..13 {
                    let inner = (5 + k..10).contains(&y) && (6..11).contains(&x);
                    m.set(y, x, if inner { 2 } else { 1 });
                }
            }
            m
        })
        .collect()
}

pub struct GradientProbe {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
}

/// Central differences of the batch objective (64-bit, step 1e-5) against
/// the tape in precision `T`, six coordinates per submodule. The relative
/// error is floored at 1% of the largest gradient in the submodule.
pub fn full_model_gradient_probes<T: Element>() -> Vec<GradientProbe> {
    let x = images(2, 12);
    let model64 = Model::<f64>::new(small_model(true, true)).unwrap();
    let model = model64.cast::<T>();
    let ms = masks(x.len());
    let refs: Vec<&LabelMap> = ms.iter().collect();
    let labels = [0usize, 1];
    let loss_of = |m: &Model<f64>| {
        let mut g = Graph::new();
        let input = g.input(batch(&x));
        let vars = m.forward_graph(&mut g, input).unwrap();
        batch_objective(&g, &vars, &Targets { masks: &refs, labels: &labels }, &LossWeights::default(), 0)
            .unwrap()
            .0
            .total
    };
    let mut g = Graph::<T>::new();
    let input = g.input(batch(&x));
    let vars = model.forward_graph(&mut g, input).unwrap();
    let (_, seeds) =
        batch_objective(&g, &vars, &Targets { masks: &refs, labels: &labels }, &LossWeights::default(), 0).unwrap();
    let grads = g.backward(&seeds);
    let mut rng = SplitMix64::new(77);
    let h = 1e-5;
    let mut probes = Vec::new();
    for sub in SUBMODULES {
        let tensors: Vec<_> = model64.params().iter().filter(|(_, p)| p.name.starts_with(&format!("{sub}."))).collect();
        let scale = tensors
            .iter()
            .flat_map(|(id, _)| grads.param_grad(*id).unwrap().data().iter().map(|v| v.as_f64().abs()))
            .fold(0.0, f64::max);
        for trial in 0..6 {
            let (id, p) = tensors[trial % tensors.len()];
            let j = (rng.next_f64() * p.value.numel() as f64) as usize;
            let analytic = grads.param_grad(id).unwrap().data()[j].as_f64();
            let mut plus = model64.clone();
            plus.params_mut().get_mut(id).value.data_mut()[j] += h;
            let mut minus = model64.clone();
            minus.params_mut().get_mut(id).value.data_mut()[j] -= h;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2 * scale).max(1e-8);
            probes.push(GradientProbe { name: format!("{}[{j}]", p.name), analytic, numeric, rel });
        }
    }
    probes
}

