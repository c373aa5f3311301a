//! Tape of tensor operations with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Nodes are appended in
//! evaluation order, so the tape is already topologically sorted and the
//! backward pass is a single reverse sweep.

use crate::kernels;
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Element, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv2d { x: Var, w: Var, b: Var, k: usize, pad: usize },
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulChannel(Var, Var),
    MulPixel(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Recip(Var),
    SumChannels(Var),
    Concat(Vec<Var>),
    Upsample2(Var),
    AvgPool2(Var),
    GlobalAvgPool(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(usize, ParamId)>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for every parameter node on the tape. Parameters the
    /// objective does not depend on get an all-zero gradient.
    pub fn params(&self) -> Vec<(ParamId, Tensor<T>)> {
        self.params
            .iter()
            .filter_map(|&(node, id)| self.grads[node].clone().map(|g| (id, g)))
            .collect()
    }

    pub fn param_grad(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params
            .iter()
            .find(|(_, p)| *p == id)
            .and_then(|&(node, _)| self.grads[node].as_ref())
    }
}

pub struct Graph<T: Element> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Constant input; no gradient is tracked through it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf whose gradient is reported by the backward pass.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    /// Stride-1 convolution; weight `[cout, cin, k, k]`, bias `[cout]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, pad: usize) -> Var {
        let (n, cin, h, wd) = self.value(x).dims4();
        let ws = self.value(w).shape().to_vec();
        assert_eq!(ws.len(), 4, "conv weight must be rank 4");
        let (cout, k) = (ws[0], ws[2]);
        assert_eq!(ws[1], cin, "conv: input has {cin} channels, weight expects {}", ws[1]);
        assert_eq!(self.value(b).numel(), cout, "conv: bias length");
        let (oh, ow) = (kernels::conv_out(h, k, pad), kernels::conv_out(wd, k, pad));
        let (kk, hw) = (cin * k * k, oh * ow);
        let mut out = vec![T::zero(); n * cout * hw];
        let mut col = if k == 1 && pad == 0 { Vec::new() } else { vec![T::zero(); kk * hw] };
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            let bv = self.value(b).data();
            for s in 0..n {
                let xs = &xv[s * cin * h * wd..(s + 1) * cin * h * wd];
                let cols: &[T] = if col.is_empty() {
                    xs
                } else {
                    kernels::im2col(xs, cin, h, wd, k, pad, &mut col);
                    &col
                };
                let os = &mut out[s * cout * hw..(s + 1) * cout * hw];
                for (c, chunk) in os.chunks_mut(hw).enumerate() {
                    chunk.fill(bv[c]);
                }
                T::gemm(cout, kk, hw, wv, kk as isize, 1, cols, hw as isize, 1, T::one(), os, hw as isize, 1);
            }
        }
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        self.push(Tensor::from_vec(&[n, cout, oh, ow], out), Op::Conv2d { x, w, b, k, pad }, ng)
    }

    /// `x [n, in] -> x W^T + b`, weight `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (n, din) = self.value(x).dims2();
        let (dout, win) = self.value(w).dims2();
        assert_eq!(din, win, "linear: input width {din} vs weight {win}");
        let mut out = vec![T::zero(); n * dout];
        let bv = self.value(b).data();
        for row in out.chunks_mut(dout) {
            row.copy_from_slice(bv);
        }
        T::gemm(
            n,
            din,
            dout,
            self.value(x).data(),
            din as isize,
            1,
            self.value(w).data(),
            1,
            din as isize,
            T::one(),
            &mut out,
            dout as isize,
            1,
        );
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        self.push(Tensor::from_vec(&[n, dout], out), Op::Linear { x, w, b }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p + q);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p - q);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p * q);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    /// `x [n, c, h, w] * g [n, c]`, broadcasting `g` over space.
    pub fn mul_channel(&mut self, x: Var, g: Var) -> Var {
        let (n, c, h, w) = self.value(x).dims4();
        assert_eq!(self.value(g).shape(), &[n, c], "mul_channel: gate shape");
        let hw = h * w;
        let gv = self.value(g).data();
        let mut out = self.value(x).data().to_vec();
        for (i, plane) in out.chunks_mut(hw).enumerate() {
            let s = gv[i];
            plane.iter_mut().for_each(|v| *v *= s);
        }
        let ng = self.ng(x) || self.ng(g);
        self.push(Tensor::from_vec(&[n, c, h, w], out), Op::MulChannel(x, g), ng)
    }

    /// `x [n, c, h, w] * g [n, 1, h, w]`, broadcasting `g` over channels.
    pub fn mul_pixel(&mut self, x: Var, g: Var) -> Var {
        let (n, c, h, w) = self.value(x).dims4();
        assert_eq!(self.value(g).shape(), &[n, 1, h, w], "mul_pixel: gate shape");
        let hw = h * w;
        let gv = self.value(g).data();
        let mut out = self.value(x).data().to_vec();
        for (i, plane) in out.chunks_mut(hw).enumerate() {
            let gs = &gv[(i / c) * hw..(i / c + 1) * hw];
            plane.iter_mut().zip(gs).for_each(|(v, &s)| *v *= s);
        }
        let ng = self.ng(x) || self.ng(g);
        self.push(Tensor::from_vec(&[n, c, h, w], out), Op::MulPixel(x, g), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        let v = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, s), ng)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        let v = self.value(a).map(|x| x + s);
        let ng = self.ng(a);
        self.push(v, Op::AddScalar(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        let ng = self.ng(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    /// `ln(1 + e^x)`, evaluated without overflow for large `|x|`.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        let ng = self.ng(a);
        self.push(v, Op::Softplus(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.exp());
        let ng = self.ng(a);
        self.push(v, Op::Exp(a), ng)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.recip());
        let ng = self.ng(a);
        self.push(v, Op::Recip(a), ng)
    }

    /// `[n, c, h, w] -> [n, 1, h, w]`.
    pub fn sum_channels(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let hw = h * w;
        let av = self.value(a).data();
        let mut out = vec![T::zero(); n * hw];
        for s in 0..n {
            let dst = &mut out[s * hw..(s + 1) * hw];
            for ch in 0..c {
                let src = &av[(s * c + ch) * hw..(s * c + ch + 1) * hw];
                dst.iter_mut().zip(src).for_each(|(d, &v)| *d += v);
            }
        }
        let ng = self.ng(a);
        self.push(Tensor::from_vec(&[n, 1, h, w], out), Op::SumChannels(a), ng)
    }

    /// Concatenate NCHW tensors along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let (n, _, h, w) = self.value(parts[0]).dims4();
        let hw = h * w;
        let mut total_c = 0;
        for &p in parts {
            let (pn, pc, ph, pw) = self.value(p).dims4();
            assert_eq!((pn, ph, pw), (n, h, w), "concat: spatial/batch mismatch");
            total_c += pc;
        }
        let mut out = Vec::with_capacity(n * total_c * hw);
        for s in 0..n {
            for &p in parts {
                let t = self.value(p);
                let pc = t.shape()[1];
                out.extend_from_slice(&t.data()[s * pc * hw..(s + 1) * pc * hw]);
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(Tensor::from_vec(&[n, total_c, h, w], out), Op::Concat(parts.to_vec()), ng)
    }

    pub fn upsample2(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let mut out = vec![T::zero(); n * c * 4 * h * w];
        kernels::upsample2(self.value(a).data(), n * c, h, w, &mut out);
        let ng = self.ng(a);
        self.push(Tensor::from_vec(&[n, c, 2 * h, 2 * w], out), Op::Upsample2(a), ng)
    }

    pub fn avg_pool2(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2 needs even sizes, got {h}x{w}");
        let mut out = vec![T::zero(); n * c * h * w / 4];
        kernels::avgpool2(self.value(a).data(), n * c, h, w, &mut out);
        let ng = self.ng(a);
        self.push(Tensor::from_vec(&[n, c, h / 2, w / 2], out), Op::AvgPool2(a), ng)
    }

    /// `[n, c, h, w] -> [n, c]` spatial mean.
    pub fn global_avg_pool(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let inv = T::from_f64(1.0 / (h * w) as f64);
        let out = self
            .value(a)
            .data()
            .chunks(h * w)
            .map(|p| p.iter().copied().sum::<T>() * inv)
            .collect();
        let ng = self.ng(a);
        self.push(Tensor::from_vec(&[n, c], out), Op::GlobalAvgPool(a), ng)
    }

    /// Reverse sweep seeded with `d(objective)/d(var)` for each seed.
    pub fn backward(&self, seeds: &[(Var, Tensor<T>)]) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for (v, g) in seeds {
            assert_eq!(
                g.shape(),
                self.value(*v).shape(),
                "seed gradient shape mismatch"
            );
            accumulate(&mut grads, *v, g.clone());
        }
        for idx in (0..self.nodes.len()).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((i, id)),
                _ => None,
            })
            .collect::<Vec<_>>();
        for &(i, _) in &params {
            if grads[i].is_none() {
                grads[i] = Some(Tensor::zeros(self.nodes[i].value.shape()));
            }
        }
        Gradients { grads, params }
    }

    fn backprop_node(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv2d { x, w, b, k, pad } => self.conv_backward(*x, *w, *b, *k, *pad, g, grads),
            Op::Linear { x, w, b } => self.linear_backward(*x, *w, *b, g, grads),
            Op::Add(a, b) => {
                self.send(grads, *a, || g.clone());
                self.send(grads, *b, || g.clone());
            }
            Op::Sub(a, b) => {
                self.send(grads, *a, || g.clone());
                self.send(grads, *b, || g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                self.send(grads, *a, || g.zip_map(self.value(*b), |p, q| p * q));
                self.send(grads, *b, || g.zip_map(self.value(*a), |p, q| p * q));
            }
            Op::MulChannel(x, gate) => {
                let (n, c, h, w) = g.dims4();
                let hw = h * w;
                let gv = self.value(*gate).data();
                self.send(grads, *x, || {
                    let mut out = g.data().to_vec();
                    for (i, plane) in out.chunks_mut(hw).enumerate() {
                        plane.iter_mut().for_each(|v| *v *= gv[i]);
                    }
                    Tensor::from_vec(&[n, c, h, w], out)
                });
                self.send(grads, *gate, || {
                    let xv = self.value(*x).data();
                    let out = g
                        .data()
                        .chunks(hw)
                        .zip(xv.chunks(hw))
                        .map(|(gp, xp)| gp.iter().zip(xp).map(|(&a, &b)| a * b).sum())
                        .collect();
                    Tensor::from_vec(&[n, c], out)
                });
            }
            Op::MulPixel(x, gate) => {
                let (n, c, h, w) = g.dims4();
                let hw = h * w;
                let gatev = self.value(*gate).data();
                self.send(grads, *x, || {
                    let mut out = g.data().to_vec();
                    for (i, plane) in out.chunks_mut(hw).enumerate() {
                        let gs = &gatev[(i / c) * hw..(i / c + 1) * hw];
                        plane.iter_mut().zip(gs).for_each(|(v, &s)| *v *= s);
                    }
                    Tensor::from_vec(&[n, c, h, w], out)
                });
                self.send(grads, *gate, || {
                    let xv = self.value(*x).data();
                    let mut out = vec![T::zero(); n * hw];
                    for (i, (gp, xp)) in g.data().chunks(hw).zip(xv.chunks(hw)).enumerate() {
                        let dst = &mut out[(i / c) * hw..(i / c + 1) * hw];
                        for ((d, &a), &b) in dst.iter_mut().zip(gp).zip(xp) {
                            *d += a * b;
                        }
                    }
                    Tensor::from_vec(&[n, 1, h, w], out)
                });
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.send(grads, *a, || g.map(|v| v * s));
            }
            Op::AddScalar(a) => self.send(grads, *a, || g.clone()),
            Op::Relu(a) => self.send(grads, *a, || {
                g.zip_map(&node.value, |d, y| if y > T::zero() { d } else { T::zero() })
            }),
            Op::Sigmoid(a) => self.send(grads, *a, || {
                g.zip_map(&node.value, |d, y| d * y * (T::one() - y))
            }),
            Op::Softplus(a) => self.send(grads, *a, || {
                g.zip_map(self.value(*a), |d, x| d * sigmoid(x))
            }),
            Op::Exp(a) => self.send(grads, *a, || g.zip_map(&node.value, |d, y| d * y)),
            Op::Recip(a) => self.send(grads, *a, || g.zip_map(&node.value, |d, y| -d * y * y)),
            Op::SumChannels(a) => self.send(grads, *a, || {
                let (n, c, h, w) = self.value(*a).dims4();
                let hw = h * w;
                let mut out = Vec::with_capacity(n * c * hw);
                for s in 0..n {
                    for _ in 0..c {
                        out.extend_from_slice(&g.data()[s * hw..(s + 1) * hw]);
                    }
                }
                Tensor::from_vec(&[n, c, h, w], out)
            }),
            Op::Concat(parts) => {
                let (n, total_c, h, w) = g.dims4();
                let hw = h * w;
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).shape()[1];
                    self.send(grads, p, || {
                        let mut out = Vec::with_capacity(n * pc * hw);
                        for s in 0..n {
                            let base = (s * total_c + offset) * hw;
                            out.extend_from_slice(&g.data()[base..base + pc * hw]);
                        }
                        Tensor::from_vec(&[n, pc, h, w], out)
                    });
                    offset += pc;
                }
            }
            Op::Upsample2(a) => self.send(grads, *a, || {
                let (n, c, h, w) = self.value(*a).dims4();
                let mut out = vec![T::zero(); n * c * h * w];
                kernels::upsample2_backward(g.data(), n * c, h, w, &mut out);
                Tensor::from_vec(&[n, c, h, w], out)
            }),
            Op::AvgPool2(a) => self.send(grads, *a, || {
                let (n, c, h, w) = g.dims4();
                let mut out = vec![T::zero(); n * c * h * w * 4];
                kernels::avgpool2_backward(g.data(), n * c, h, w, &mut out);
                Tensor::from_vec(&[n, c, 2 * h, 2 * w], out)
            }),
            Op::GlobalAvgPool(a) => self.send(grads, *a, || {
                let (n, c, h, w) = self.value(*a).dims4();
                let inv = T::from_f64(1.0 / (h * w) as f64);
                let mut out = Vec::with_capacity(n * c * h * w);
                for &d in g.data() {
                    out.extend(std::iter::repeat_n(d * inv, h * w));
                }
                Tensor::from_vec(&[n, c, h, w], out)
            }),
        }
    }

    fn send(&self, grads: &mut [Option<Tensor<T>>], v: Var, f: impl FnOnce() -> Tensor<T>) {
        if self.ng(v) {
            accumulate(grads, v, f());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &self,
        x: Var,
        w: Var,
        b: Var,
        k: usize,
        pad: usize,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) {
        let (n, cin, h, wd) = self.value(x).dims4();
        let (_, cout, oh, ow) = g.dims4();
        let (kk, hw) = (cin * k * k, oh * ow);
        let direct = k == 1 && pad == 0;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let gv = g.data();

        if self.ng(b) {
            let db = (0..cout)
                .map(|c| {
                    (0..n)
                        .map(|s| gv[(s * cout + c) * hw..(s * cout + c + 1) * hw].iter().copied().sum::<T>())
                        .sum()
                })
                .collect();
            accumulate(grads, b, Tensor::from_vec(&[cout], db));
        }
        let need_w = self.ng(w);
        let need_x = self.ng(x);
        if !need_w && !need_x {
            return;
        }
        let mut dw = if need_w { vec![T::zero(); cout * kk] } else { Vec::new() };
        let mut dx = if need_x { vec![T::zero(); n * cin * h * wd] } else { Vec::new() };
        let mut col = if direct { Vec::new() } else { vec![T::zero(); kk * hw] };
        let mut dcol = if direct || !need_x { Vec::new() } else { vec![T::zero(); kk * hw] };
        for s in 0..n {
            let gs = &gv[s * cout * hw..(s + 1) * cout * hw];
            let xs = &xv[s * cin * h * wd..(s + 1) * cin * h * wd];
            if need_w {
                let cols: &[T] = if direct {
                    xs
                } else {
                    kernels::im2col(xs, cin, h, wd, k, pad, &mut col);
                    &col
                };
                T::gemm(cout, hw, kk, gs, hw as isize, 1, cols, 1, hw as isize, T::one(), &mut dw, kk as isize, 1);
            }
            if need_x {
                let dxs = &mut dx[s * cin * h * wd..(s + 1) * cin * h * wd];
                if direct {
                    T::gemm(kk, cout, hw, wv, 1, kk as isize, gs, hw as isize, 1, T::zero(), dxs, hw as isize, 1);
                } else {
                    T::gemm(kk, cout, hw, wv, 1, kk as isize, gs, hw as isize, 1, T::zero(), &mut dcol, hw as isize, 1);
                    kernels::col2im(&dcol, cin, h, wd, k, pad, dxs);
                }
            }
        }
        if need_w {
            let shape = self.value(w).shape().to_vec();
            accumulate(grads, w, Tensor::from_vec(&shape, dw));
        }
        if need_x {
            accumulate(grads, x, Tensor::from_vec(&[n, cin, h, wd], dx));
        }
    }

    fn linear_backward(&self, x: Var, w: Var, b: Var, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let (n, din) = self.value(x).dims2();
        let (_, dout) = g.dims2();
        let gv = g.data();
        self.send(grads, b, || {
            let db = (0..dout).map(|j| (0..n).map(|i| gv[i * dout + j]).sum()).collect();
            Tensor::from_vec(&[dout], db)
        });
        self.send(grads, w, || {
            let mut dw = vec![T::zero(); dout * din];
            T::gemm(dout, n, din, gv, 1, dout as isize, self.value(x).data(), din as isize, 1, T::zero(), &mut dw, din as isize, 1);
            Tensor::from_vec(&[dout, din], dw)
        });
        self.send(grads, x, || {
            let mut dx = vec![T::zero(); n * din];
            T::gemm(n, dout, din, gv, dout as isize, 1, self.value(w).data(), din as isize, 1, T::zero(), &mut dx, din as isize, 1);
            Tensor::from_vec(&[n, din], dx)
        });
    }
}

fn accumulate<T: Element>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softplus<T: Element>(x: T) -> T {
    // max(x, 0) + ln(1 + e^{-|x|})
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}
