//! Adam with decoupled weight decay.

use crate::params::{ParamId, ParamStore};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied as `p -= lr * weight_decay * p` to
    /// parameters flagged `decay`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Element> Adam<T> {
    pub fn new<S: Element>(cfg: AdamConfig, store: &ParamStore<S>) -> Self {
        let first = store.iter().map(|(_, p)| vec![T::zero(); p.value.numel()]).collect();
        let second = store.iter().map(|(_, p)| vec![T::zero(); p.value.numel()]).collect();
        Self {
            cfg,
            step: 0,
            first,
            second,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn update(&mut self, store: &mut ParamStore<T>, grads: &[(ParamId, Tensor<T>)]) {
        self.step += 1;
        let c = &self.cfg;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let step_size = T::from_f64(c.lr / bc1);
        let inv_bc2_sqrt = T::from_f64(1.0 / bc2.sqrt());
        let eps = T::from_f64(c.eps);
        let decay = T::from_f64(c.lr * c.weight_decay);
        for (id, g) in grads {
            let param = store.get_mut(*id);
            assert_eq!(param.value.shape(), g.shape(), "gradient shape for {}", param.name);
            let m = &mut self.first[id.0];
            let v = &mut self.second[id.0];
            let apply_decay = param.decay && c.weight_decay > 0.0;
            for (((p, &gi), mi), vi) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                if apply_decay {
                    *p = *p - decay * *p;
                }
                *p = *p - step_size * *mi / (vi.sqrt() * inv_bc2_sqrt + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::from_vec(&[2], vec![1.0, -1.0]), false);
        let mut adam = Adam::new(AdamConfig { lr: 0.01, ..Default::default() }, &store);
        let g = Tensor::from_vec(&[2], vec![3.0, -0.5]);
        adam.update(&mut store, &[(id, g)]);
        let v = store.get(id).value.data();
        assert!((v[0] - 0.99).abs() < 1e-6);
        assert!((v[1] + 0.99).abs() < 1e-6);
    }

    #[test]
    fn decay_only_touches_flagged_params() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::from_vec(&[1], vec![2.0]), true);
        let b = store.add("b", Tensor::from_vec(&[1], vec![2.0]), false);
        let cfg = AdamConfig { lr: 0.1, weight_decay: 0.5, ..Default::default() };
        let mut adam = Adam::new(cfg, &store);
        let zero = Tensor::from_vec(&[1], vec![0.0]);
        adam.update(&mut store, &[(w, zero.clone()), (b, zero)]);
        assert!((store.get(w).value.data()[0] - 1.9).abs() < 1e-12);
        assert_eq!(store.get(b).value.data()[0], 2.0);
    }
}
