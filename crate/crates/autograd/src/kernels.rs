//! Raw spatial kernels on single NCHW samples: im2col/col2im for stride-1
//! convolution, 2x nearest upsampling and 2x average pooling.

use crate::tensor::Element;

/// Output spatial size of a stride-1 convolution.
pub fn conv_out(size: usize, k: usize, pad: usize) -> usize {
    size + 2 * pad + 1 - k
}

/// Unfold one `c x h x w` sample into a `(c*k*k) x (oh*ow)` column matrix.
pub fn im2col<T: Element>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    col: &mut [T],
) {
    let oh = conv_out(h, k, pad);
    let ow = conv_out(w, k, pad);
    debug_assert_eq!(col.len(), c * k * k * oh * ow);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = oy as isize + ki as isize - pad as isize;
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    // valid ox range: 0 <= ox + kj - pad < w
                    let lo = pad.saturating_sub(kj).min(ow);
                    let hi = (w + pad).saturating_sub(kj).min(ow).max(lo);
                    out_row[..lo].fill(T::zero());
                    out_row[hi..].fill(T::zero());
                    let shift = lo + kj - pad;
                    out_row[lo..hi].copy_from_slice(&src[shift..shift + (hi - lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add a column matrix back into a sample.
pub fn col2im<T: Element>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    x: &mut [T],
) {
    let oh = conv_out(h, k, pad);
    let ow = conv_out(w, k, pad);
    for ch in 0..c {
        let plane = &mut x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = oy as isize + ki as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let lo = pad.saturating_sub(kj).min(ow);
                    let hi = (w + pad).saturating_sub(kj).min(ow).max(lo);
                    let shift = lo + kj - pad;
                    let dst = &mut plane[iy as usize * w + shift..iy as usize * w + shift + (hi - lo)];
                    for (d, &s) in dst.iter_mut().zip(&src[oy * ow + lo..oy * ow + hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Nearest-neighbour 2x upsampling of a stack of `planes` planes of `h x w`.
pub fn upsample2<T: Element>(x: &[T], planes: usize, h: usize, w: usize, out: &mut [T]) {
    let (oh, ow) = (2 * h, 2 * w);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let (top, bottom) = dst[2 * y * ow..(2 * y + 2) * ow].split_at_mut(ow);
            for (x, &v) in row.iter().enumerate() {
                top[2 * x] = v;
                top[2 * x + 1] = v;
            }
            bottom.copy_from_slice(top);
        }
    }
}

/// Adjoint of [`upsample2`]: sum each 2x2 block of the gradient.
pub fn upsample2_backward<T: Element>(g: &[T], planes: usize, h: usize, w: usize, out: &mut [T]) {
    let ow = 2 * w;
    for p in 0..planes {
        let src = &g[p * 4 * h * w..(p + 1) * 4 * h * w];
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * ow + 2 * x;
                dst[y * w + x] = src[i] + src[i + 1] + src[i + ow] + src[i + ow + 1];
            }
        }
    }
}

/// 2x2 average pooling with stride 2; `h` and `w` must be even.
pub fn avgpool2<T: Element>(x: &[T], planes: usize, h: usize, w: usize, out: &mut [T]) {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let i = 2 * y * w + 2 * x;
                dst[y * ow + x] = (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * quarter;
            }
        }
    }
}

/// Adjoint of [`avgpool2`]; `h x w` is the pooled (output) size.
pub fn avgpool2_backward<T: Element>(g: &[T], planes: usize, h: usize, w: usize, out: &mut [T]) {
    let ow = 2 * w;
    let quarter = T::from_f64(0.25);
    for p in 0..planes {
        let src = &g[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * 4 * h * w..(p + 1) * 4 * h * w];
        for y in 0..h {
            for x in 0..w {
                let v = src[y * w + x] * quarter;
                let i = 2 * y * ow + 2 * x;
                dst[i] = v;
                dst[i + 1] = v;
                dst[i + ow] = v;
                dst[i + ow + 1] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], c: usize, h: usize, w: usize, k: usize, pad: usize, wt: &[f64]) -> Vec<f64> {
        // single output channel
        let (oh, ow) = (conv_out(h, k, pad), conv_out(w, k, pad));
        let mut out = vec![0.0; oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ch in 0..c {
                    for ki in 0..k {
                        for kj in 0..k {
                            let iy = oy as isize + ki as isize - pad as isize;
                            let ix = ox as isize + kj as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                acc += x[ch * h * w + iy as usize * w + ix as usize]
                                    * wt[(ch * k + ki) * k + kj];
                            }
                        }
                    }
                }
                out[oy * ow + ox] = acc;
            }
        }
        out
    }

    #[test]
    fn im2col_matches_direct_convolution() {
        let (c, h, w) = (2, 5, 4);
        let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        for &(k, pad) in &[(3, 1), (1, 0), (3, 0), (5, 2)] {
            let wt: Vec<f64> = (0..c * k * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let (oh, ow) = (conv_out(h, k, pad), conv_out(w, k, pad));
            let mut col = vec![0.0; c * k * k * oh * ow];
            im2col(&x, c, h, w, k, pad, &mut col);
            let mut out = vec![0.0; oh * ow];
            f64::gemm(1, c * k * k, oh * ow, &wt, (c * k * k) as isize, 1, &col, (oh * ow) as isize, 1, 0.0, &mut out, (oh * ow) as isize, 1);
            let direct = naive_conv(&x, c, h, w, k, pad, &wt);
            for (a, b) in out.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, h, w, k, pad) = (3, 4, 6, 3, 1);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.61).cos()).collect();
        let n = c * k * k * h * w;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.23).sin()).collect();
        let mut col = vec![0.0; n];
        im2col(&x, c, h, w, k, pad, &mut col);
        let mut back = vec![0.0; c * h * w];
        col2im(&y, c, h, w, k, pad, &mut back);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn pooling_and_upsampling_adjoints() {
        let (p, h, w) = (2, 2, 3);
        let x: Vec<f64> = (0..p * h * w).map(|i| i as f64 + 0.5).collect();
        let g: Vec<f64> = (0..p * 4 * h * w).map(|i| (i as f64).sqrt()).collect();
        let mut up = vec![0.0; p * 4 * h * w];
        upsample2(&x, p, h, w, &mut up);
        let mut back = vec![0.0; p * h * w];
        upsample2_backward(&g, p, h, w, &mut back);
        let lhs: f64 = up.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);

        let mut pooled = vec![0.0; p * h * w];
        avgpool2(&g, p, 2 * h, 2 * w, &mut pooled);
        let mut pb = vec![0.0; p * 4 * h * w];
        avgpool2_backward(&x, p, h, w, &mut pb);
        let lhs: f64 = pooled.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs: f64 = g.iter().zip(&pb).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
