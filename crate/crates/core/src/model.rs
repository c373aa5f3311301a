//! The joint network: two encoders, a feature mixer, a segmentation evidence
//! head, the uncertainty-gated segmentation decoder (UN), the uncertainty
//! instructor (UI) that feeds reliable segmentation features to the
//! classifier, and the classification evidence head.
//!
//! Every stage is a function that appends nodes to an autodiff [`Graph`], so
//! the same code serves inference, training and gradient checks.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use uml_autograd::{Element, Graph, ParamId, ParamStore, Tensor, Var};

use crate::error::{Result, UmlError};
use crate::evidential::{argmax, DirichletParams, EvidenceMap, Opinion};
use crate::losses::ScoreMap;
use crate::mask::LabelMap;
use crate::rng::{derive_seed, SplitMix64};

/// Names of the parameter groups, used as prefixes of parameter names.
pub const SUBMODULES: [&str; 7] = ["cls_enc", "seg_enc", "mixer", "evidence_head", "un", "ui", "classifier"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    /// Encoder widths at strides 1, 2, 4, 8.
    pub widths: [usize; 4],
    /// Decoder widths at strides 8, 4, 2 (shared by the evidence head and UN).
    pub decoder_widths: [usize; 3],
    /// Width of the full-resolution UN block.
    pub top_width: usize,
    /// Output channels of the convolution applied to the reliable mask.
    pub mask_width: usize,
    /// Segmentation classes Q.
    pub seg_classes: usize,
    /// Image classes K.
    pub cls_classes: usize,
    pub use_un: bool,
    pub use_ui: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            widths: [16, 32, 64, 128],
            decoder_widths: [32, 32, 16],
            top_width: 8,
            mask_width: 8,
            seg_classes: 3,
            cls_classes: 2,
            use_un: true,
            use_ui: true,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = self.widths.iter().chain(&self.decoder_widths);
        if self.in_channels == 0 || widths.copied().any(|w| w == 0) || self.top_width == 0 || self.mask_width == 0 {
            return Err(UmlError::config("all model widths must be positive"));
        }
        if self.seg_classes < 2 || self.cls_classes < 2 {
            return Err(UmlError::config(format!(
                "need at least 2 classes per head, got Q={} K={}",
                self.seg_classes, self.cls_classes
            )));
        }
        Ok(())
    }

    /// Channels of the reliable segmentation feature r^s.
    pub fn reliable_width(&self) -> usize {
        self.mask_width + self.widths[0] + self.decoder_widths[2]
    }
}

/// Four feature maps at strides 1, 2, 4, 8.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pyramid(pub [Var; 4]);

#[derive(Clone, Copy, Debug)]
struct Conv {
    w: ParamId,
    b: ParamId,
    pad: usize,
}

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct Layers {
    cls_enc: [Conv; 4],
    seg_enc: [Conv; 4],
    seg_skip: [Conv; 4],
    att_from_seg: [Linear; 4],
    att_from_cls: [Linear; 4],
    mix_fuse: [Conv; 4],
    proj_cls: Conv,
    proj_seg: Conv,
    ev_d4: Conv,
    ev_d3: Conv,
    ev_d2: Conv,
    ev_out: Conv,
    un_b4: Conv,
    un_b3: Conv,
    un_b2: Conv,
    un_t1: Conv,
    un_s4: Conv,
    un_s3: Conv,
    un_s2: Conv,
    un_s1: Conv,
    un_mask: Conv,
    ui_gate: Conv,
    fc: Linear,
}

struct Builder<'a, T: Element> {
    store: &'a mut ParamStore<T>,
    seed: u64,
}

impl<T: Element> Builder<'_, T> {
    fn weight(&mut self, name: String, shape: &[usize], fan_in: usize) -> ParamId {
        let mut rng = SplitMix64::new(derive_seed(self.seed, self.store.len() as u64));
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::from_f64(std * z)
            })
            .collect();
        self.store.add(name, Tensor::from_vec(shape, data), true)
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> Conv {
        let w = self.weight(format!("{name}.w"), &[cout, cin, k, k], cin * k * k);
        let b = self.store.add(format!("{name}.b"), Tensor::zeros(&[cout]), false);
        Conv { w, b, pad: k / 2 }
    }

    fn linear(&mut self, name: &str, din: usize, dout: usize) -> Linear {
        let w = self.weight(format!("{name}.w"), &[dout, din], din);
        let b = self.store.add(format!("{name}.b"), Tensor::zeros(&[dout]), false);
        Linear { w, b }
    }
}

/// Graph handles for every product of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub cls_pyramid: Pyramid,
    pub seg_pyramid: Pyramid,
    pub mutual: Pyramid,
    /// f^c_4 and f^s_4 after the mutual feature is added back.
    pub cls_top: Var,
    pub seg_top: Var,
    pub seg_logits: Var,
    /// M = α^s, `[n, Q, H, W]`.
    pub seg_alpha: Var,
    /// U^s, `[n, 1, H, W]`.
    pub seg_uncertainty: Var,
    /// s_1..s_4 at strides 1, 2, 4, 8.
    pub scales: [Var; 4],
    pub reliable_mask: Var,
    pub reliable_seg: Var,
    pub reliable_cls: Var,
    pub cls_logits: Var,
    /// α^c, `[n, K]`.
    pub cls_alpha: Var,
}

/// UN decoder products.
#[derive(Clone, Copy, Debug)]
pub struct DecoderVars {
    pub scales: [Var; 4],
    pub reliable_mask: Var,
    pub reliable_seg: Var,
}

/// Per-image results of a forward pass, in 64-bit.
#[derive(Clone, Debug)]
pub struct ModelOutput {
    pub cls_alpha: DirichletParams,
    pub cls_opinion: Opinion,
    pub seg_alpha_map: EvidenceMap,
    /// U^s, row-major `H x W`.
    pub seg_uncertainty: Vec<f64>,
    pub decoder_outputs: Vec<ScoreMap>,
    pub final_seg: LabelMap,
    /// r^s as `[C, H, W]`.
    pub reliable_seg_feature: Tensor<f64>,
    /// r^c as `[C, H/8, W/8]`.
    pub reliable_cls_feature: Tensor<f64>,
}

#[derive(Clone, Debug)]
pub struct Model<T: Element> {
    cfg: ModelConfig,
    store: ParamStore<T>,
    layers: Layers,
}

impl<T: Element> Model<T> {
    /// He-initialised weights (fan-in), zero biases; each tensor draws from
    /// its own stream derived from `cfg.init_seed`.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let [c1, c2, c3, c4] = cfg.widths;
        let [d4, d3, d2] = cfg.decoder_widths;
        let q = cfg.seg_classes;
        let mut b = Builder { store: &mut store, seed: cfg.init_seed };
        let ins = [cfg.in_channels, c1, c2, c3];
        let outs = cfg.widths;
        let cls_enc = std::array::from_fn(|i| b.conv(&format!("cls_enc.s{}", i + 1), ins[i], outs[i], 3));
        let seg_enc = std::array::from_fn(|i| b.conv(&format!("seg_enc.s{}", i + 1), ins[i], outs[i], 3));
        let seg_skip = std::array::from_fn(|i| b.conv(&format!("seg_enc.skip{}", i + 1), ins[i], outs[i], 1));
        let att_from_seg = std::array::from_fn(|i| b.linear(&format!("mixer.att_s{}", i + 1), outs[i], outs[i]));
        let att_from_cls = std::array::from_fn(|i| b.linear(&format!("mixer.att_c{}", i + 1), outs[i], outs[i]));
        let mix_fuse = std::array::from_fn(|i| b.conv(&format!("mixer.fuse{}", i + 1), 2 * outs[i], outs[i], 1));
        let proj_cls = b.conv("mixer.proj_c", c4, c4, 1);
        let proj_seg = b.conv("mixer.proj_s", c4, c4, 1);
        let ev_d4 = b.conv("evidence_head.d4", c4, d4, 1);
        let ev_d3 = b.conv("evidence_head.d3", d4 + c3, d3, 3);
        let ev_d2 = b.conv("evidence_head.d2", d3 + c2, d2, 3);
        let ev_out = b.conv("evidence_head.out", d2 + c1, q, 1);
        let un_b4 = b.conv("un.b4", c4, d4, 1);
        let un_b3 = b.conv("un.b3", d4 + c3, d3, 3);
        let un_b2 = b.conv("un.b2", d3 + c2, d2, 3);
        let un_t1 = b.conv("un.t1", c1 + d2, cfg.top_width, 3);
        let un_s4 = b.conv("un.s4", c4, q, 1);
        let un_s3 = b.conv("un.s3", d3, q, 1);
        let un_s2 = b.conv("un.s2", d2, q, 1);
        let un_s1 = b.conv("un.s1", cfg.top_width, q, 1);
        let un_mask = b.conv("un.mask", q, cfg.mask_width, 3);
        let ui_gate = b.conv("ui.gate", cfg.reliable_width(), c4, 1);
        let fc = b.linear("classifier.fc", c4, cfg.cls_classes);
        let layers = Layers {
            cls_enc,
            seg_enc,
            seg_skip,
            att_from_seg,
            att_from_cls,
            mix_fuse,
            proj_cls,
            proj_seg,
            ev_d4,
            ev_d3,
            ev_d2,
            ev_out,
            un_b4,
            un_b3,
            un_b2,
            un_t1,
            un_s4,
            un_s3,
            un_s2,
            un_s1,
            un_mask,
            ui_gate,
            fc,
        };
        Ok(Self { cfg, store, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Same architecture and weights in another precision.
    pub fn cast<U: Element>(&self) -> Model<U> {
        Model { cfg: self.cfg.clone(), store: self.store.cast(), layers: self.layers.clone() }
    }

    /// Replace all weights; names and shapes must match exactly.
    pub fn load_params(&mut self, other: ParamStore<T>) -> Result<()> {
        if other.len() != self.store.len() {
            return Err(UmlError::invalid(format!(
                "expected {} parameter tensors, got {}",
                self.store.len(),
                other.len()
            )));
        }
        for ((_, a), (_, b)) in self.store.iter().zip(other.iter()) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(UmlError::invalid(format!(
                    "parameter mismatch: {} {:?} vs {} {:?}",
                    a.name,
                    a.value.shape(),
                    b.name,
                    b.value.shape()
                )));
            }
        }
        self.store = other;
        Ok(())
    }

    fn conv(&self, g: &mut Graph<T>, c: Conv, x: Var) -> Var {
        let w = g.param(&self.store, c.w);
        let b = g.param(&self.store, c.b);
        g.conv2d(x, w, b, c.pad)
    }

    fn linear(&self, g: &mut Graph<T>, l: Linear, x: Var) -> Var {
        let w = g.param(&self.store, l.w);
        let b = g.param(&self.store, l.b);
        g.linear(x, w, b)
    }

    /// Two independent encoders. The classification branch is a plain conv
    /// stack; the segmentation branch adds a 1x1 projection shortcut per stage.
    pub fn encode(&self, g: &mut Graph<T>, image: Var) -> Result<(Pyramid, Pyramid)> {
        let (_, c, h, w) = g.value(image).dims4();
        if c != self.cfg.in_channels {
            return Err(UmlError::config(format!("expected {} input channels, got {c}", self.cfg.in_channels)));
        }
        if h == 0 || w == 0 || h % 8 != 0 || w % 8 != 0 {
            return Err(UmlError::config(format!("input {h}x{w} is not divisible by 8")));
        }
        let mut cls = [image; 4];
        let mut seg = [image; 4];
        let (mut xc, mut xs) = (image, image);
        for i in 0..4 {
            if i > 0 {
                xc = g.avg_pool2(xc);
                xs = g.avg_pool2(xs);
            }
            let yc = self.conv(g, self.layers.cls_enc[i], xc);
            xc = g.relu(yc);
            let body = self.conv(g, self.layers.seg_enc[i], xs);
            let body = g.relu(body);
            let skip = self.conv(g, self.layers.seg_skip[i], xs);
            xs = g.add(body, skip);
            cls[i] = xc;
            seg[i] = xs;
        }
        Ok((Pyramid(cls), Pyramid(seg)))
    }

    /// `f^m_i = Conv1x1(concat(f^c_i * A(f^s_i), f^s_i * A(f^c_i)))` with
    /// `A(f) = sigmoid(Linear(GAP(f)))`; the last mutual feature is projected
    /// back onto both stage-4 features. Returns `(f^m, f^c_4', f^s_4')`.
    pub fn mix_features(&self, g: &mut Graph<T>, cls: &Pyramid, seg: &Pyramid) -> Result<(Pyramid, Var, Var)> {
        let mut mutual = [cls.0[0]; 4];
        for (i, m) in mutual.iter_mut().enumerate() {
            let (fc, fs) = (cls.0[i], seg.0[i]);
            if g.value(fc).shape() != g.value(fs).shape() {
                return Err(UmlError::config(format!(
                    "stage {} shapes differ: {:?} vs {:?}",
                    i + 1,
                    g.value(fc).shape(),
                    g.value(fs).shape()
                )));
            }
            let ps = g.global_avg_pool(fs);
            let a_s = self.linear(g, self.layers.att_from_seg[i], ps);
            let a_s = g.sigmoid(a_s);
            let pc = g.global_avg_pool(fc);
            let a_c = self.linear(g, self.layers.att_from_cls[i], pc);
            let a_c = g.sigmoid(a_c);
            let c_att = g.mul_channel(fc, a_s);
            let s_att = g.mul_channel(fs, a_c);
            let cat = g.concat(&[c_att, s_att]);
            *m = self.conv(g, self.layers.mix_fuse[i], cat);
        }
        let pc = self.conv(g, self.layers.proj_cls, mutual[3]);
        let cls_top = g.add(cls.0[3], pc);
        let ps = self.conv(g, self.layers.proj_seg, mutual[3]);
        let seg_top = g.add(seg.0[3], ps);
        Ok((Pyramid(mutual), cls_top, seg_top))
    }

    /// Decode the mutual pyramid to full-resolution Dirichlet parameters.
    /// Returns `(logits, α^s, U^s)`.
    pub fn evidence_head(&self, g: &mut Graph<T>, mutual: &Pyramid) -> (Var, Var, Var) {
        let l = &self.layers;
        let d = self.conv(g, l.ev_d4, mutual.0[3]);
        let mut d = g.relu(d);
        for (conv, skip) in [(l.ev_d3, mutual.0[2]), (l.ev_d2, mutual.0[1])] {
            let up = g.upsample2(d);
            let cat = g.concat(&[up, skip]);
            let y = self.conv(g, conv, cat);
            d = g.relu(y);
        }
        let up = g.upsample2(d);
        let cat = g.concat(&[up, mutual.0[0]]);
        let logits = self.conv(g, l.ev_out, cat);
        let e = g.softplus(logits);
        let alpha = g.add_scalar(e, 1.0);
        let u = uncertainty_from_alpha(g, alpha, self.cfg.seg_classes);
        (logits, alpha, u)
    }

    /// UNet-style decoder over the segmentation pyramid. With `gate =
    /// Some((M, U))` the bottom feature is scaled by `exp(-d^3(U))` and the
    /// reliable mask `(s_1 + M) * exp(-U)` feeds r^s; with `None` the decoder
    /// is ungated and r^s is built from s_1 directly.
    pub fn un_decode(&self, g: &mut Graph<T>, seg: &Pyramid, seg_top: Var, gate: Option<(Var, Var)>) -> Result<DecoderVars> {
        let l = &self.layers;
        let bottom = match gate {
            Some((_, u)) => {
                let (_, _, h, w) = g.value(seg.0[0]).dims4();
                if g.value(u).shape()[2..] != [h, w] {
                    return Err(UmlError::invalid("uncertainty map does not match the stage-1 size"));
                }
                let mut du = u;
                for _ in 0..3 {
                    du = g.avg_pool2(du);
                }
                let neg = g.scale(du, -1.0);
                let gate = g.exp(neg);
                g.mul_pixel(seg_top, gate)
            }
            None => seg_top,
        };
        let s4 = self.conv(g, l.un_s4, bottom);
        let b = self.conv(g, l.un_b4, bottom);
        let b4 = g.relu(b);
        let up = g.upsample2(b4);
        let cat = g.concat(&[up, seg.0[2]]);
        let b = self.conv(g, l.un_b3, cat);
        let b3 = g.relu(b);
        let s3 = self.conv(g, l.un_s3, b3);
        let up = g.upsample2(b3);
        let cat = g.concat(&[up, seg.0[1]]);
        let b = self.conv(g, l.un_b2, cat);
        let b2 = g.relu(b);
        let s2 = self.conv(g, l.un_s2, b2);
        let fb2 = g.upsample2(b2);
        let cat = g.concat(&[seg.0[0], fb2]);
        let t = self.conv(g, l.un_t1, cat);
        let t1 = g.relu(t);
        let s1 = self.conv(g, l.un_s1, t1);
        let mr = match gate {
            Some((m, u)) => reliable_mask(g, s1, m, u)?,
            None => s1,
        };
        let mc = self.conv(g, l.un_mask, mr);
        let rs = g.concat(&[mc, seg.0[0], fb2]);
        Ok(DecoderVars { scales: [s1, s2, s3, s4], reliable_mask: mr, reliable_seg: rs })
    }

    /// `r^c = f^c_4 + sigmoid(Conv1x1(d^3(r^s))) * f^c_4`.
    pub fn ui_fuse(&self, g: &mut Graph<T>, cls_top: Var, reliable_seg: Var) -> Result<Var> {
        let (_, _, h4, w4) = g.value(cls_top).dims4();
        let (_, _, h, w) = g.value(reliable_seg).dims4();
        if h != 8 * h4 || w != 8 * w4 {
            return Err(UmlError::config(format!(
                "r^s is {h}x{w} but f^c_4 is {h4}x{w4}; expected a stride of 8"
            )));
        }
        let mut d = reliable_seg;
        for _ in 0..3 {
            d = g.avg_pool2(d);
        }
        let gate = self.conv(g, self.layers.ui_gate, d);
        let gate = g.sigmoid(gate);
        let gated = g.mul(gate, cls_top);
        Ok(g.add(cls_top, gated))
    }

    /// Global average pool, linear map to K logits, `α^c = softplus + 1`.
    /// Returns `(logits, α^c)`.
    pub fn classify(&self, g: &mut Graph<T>, feature: Var) -> (Var, Var) {
        let p = g.global_avg_pool(feature);
        let logits = self.linear(g, self.layers.fc, p);
        let e = g.softplus(logits);
        (logits, g.add_scalar(e, 1.0))
    }

    /// Full forward pass of a `[n, in_channels, H, W]` batch.
    pub fn forward_graph(&self, g: &mut Graph<T>, images: Var) -> Result<ForwardVars> {
        let (cls_pyramid, seg_pyramid) = self.encode(g, images)?;
        let (mutual, cls_top, seg_top) = self.mix_features(g, &cls_pyramid, &seg_pyramid)?;
        let (seg_logits, seg_alpha, seg_uncertainty) = self.evidence_head(g, &mutual);
        let gate = self.cfg.use_un.then_some((seg_alpha, seg_uncertainty));
        let dec = self.un_decode(g, &seg_pyramid, seg_top, gate)?;
        let reliable_cls = if self.cfg.use_ui {
            self.ui_fuse(g, cls_top, dec.reliable_seg)?
        } else {
            cls_top
        };
        let (cls_logits, cls_alpha) = self.classify(g, reliable_cls);
        Ok(ForwardVars {
            cls_pyramid,
            seg_pyramid,
            mutual,
            cls_top,
            seg_top,
            seg_logits,
            seg_alpha,
            seg_uncertainty,
            scales: dec.scales,
            reliable_mask: dec.reliable_mask,
            reliable_seg: dec.reliable_seg,
            reliable_cls,
            cls_logits,
            cls_alpha,
        })
    }

    /// Inference on a batch; returns one [`ModelOutput`] per image.
    pub fn forward(&self, images: Tensor<T>) -> Result<Vec<ModelOutput>> {
        let mut g = Graph::new();
        let x = g.input(images);
        let vars = self.forward_graph(&mut g, x)?;
        extract_outputs(&g, &vars)
    }
}

/// `U = Q / sum_k α_k` per pixel, `[n, 1, H, W]`.
pub fn uncertainty_from_alpha<T: Element>(g: &mut Graph<T>, alpha: Var, classes: usize) -> Var {
    let s = g.sum_channels(alpha);
    let r = g.recip(s);
    g.scale(r, classes as f64)
}

/// `M^r = (s_1 + M) * exp(-U)`, with U broadcast over channels.
pub fn reliable_mask<T: Element>(g: &mut Graph<T>, s1: Var, alpha: Var, u: Var) -> Result<Var> {
    let (n, _, h, w) = g.value(s1).dims4();
    if g.value(alpha).shape() != g.value(s1).shape() || g.value(u).shape() != [n, 1, h, w] {
        return Err(UmlError::invalid(format!(
            "reliable mask inputs misaligned: s1 {:?}, alpha {:?}, U {:?}",
            g.value(s1).shape(),
            g.value(alpha).shape(),
            g.value(u).shape()
        )));
    }
    let sum = g.add(s1, alpha);
    let neg = g.scale(u, -1.0);
    let gate = g.exp(neg);
    Ok(g.mul_pixel(sum, gate))
}

fn sample_f64<T: Element>(t: &Tensor<T>, i: usize) -> Vec<f64> {
    t.sample(i).data().iter().map(|v| v.as_f64()).collect()
}

/// Convert graph values into per-image 64-bit outputs.
pub fn extract_outputs<T: Element>(g: &Graph<T>, v: &ForwardVars) -> Result<Vec<ModelOutput>> {
    let alpha = g.value(v.seg_alpha);
    let (n, q, h, w) = alpha.dims4();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let cls_alpha = DirichletParams::new(sample_f64(g.value(v.cls_alpha), i))?;
        let cls_opinion = cls_alpha.opinion();
        let seg_alpha_map = EvidenceMap::new(q, h, w, sample_f64(alpha, i))?;
        let seg_uncertainty = seg_alpha_map.strength().iter().map(|s| q as f64 / s).collect();
        let mut decoder_outputs = Vec::with_capacity(4);
        for &s in &v.scales {
            let (_, sq, sh, sw) = g.value(s).dims4();
            decoder_outputs.push(ScoreMap::new(sq, sh, sw, sample_f64(g.value(s), i))?);
        }
        let s1 = &decoder_outputs[0].values;
        let hw = h * w;
        let labels = (0..hw)
            .map(|p| {
                let scores: Vec<f64> = (0..q).map(|c| s1[c * hw + p]).collect();
                argmax(&scores) as u8
            })
            .collect();
        let final_seg = LabelMap::new(h, w, labels)?;
        let rs = g.value(v.reliable_seg).sample(i);
        let rc = g.value(v.reliable_cls).sample(i);
        out.push(ModelOutput {
            cls_alpha,
            cls_opinion,
            seg_alpha_map,
            seg_uncertainty,
            decoder_outputs,
            final_seg,
            reliable_seg_feature: strip_batch(rs.cast()),
            reliable_cls_feature: strip_batch(rc.cast()),
        });
    }
    Ok(out)
}

fn strip_batch(t: Tensor<f64>) -> Tensor<f64> {
    let shape = t.shape()[1..].to_vec();
    t.reshape(&shape)
}

/// Stack single-channel images into a `[n, 1, H, W]` batch.
pub fn image_batch<T: Element>(images: &[&[f32]], height: usize, width: usize) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(images.len() * height * width);
    for img in images {
        if img.len() != height * width {
            return Err(UmlError::invalid(format!("image has {} pixels, expected {}", img.len(), height * width)));
        }
        data.extend(img.iter().map(|&v| T::from_f64(v as f64)));
    }
    Ok(Tensor::from_vec(&[images.len(), 1, height, width], data))
}
