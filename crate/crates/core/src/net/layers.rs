//! Forward and backward kernels for the convolutional branch layers.
//!
//! Activations are channel-major (`[c][y][x]`). Convolution is a
//! cross-correlation with zero padding; weights are `[out][in][ky][kx]`.

use super::config::Shape3;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub input: Shape3,
    pub output: Shape3,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Output columns `[lo, hi)` whose receptive column `ox * stride + kx - pad` is in bounds.
    #[inline]
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > kx {
            (self.pad - kx).div_ceil(s)
        } else {
            0
        };
        let hi = if self.input.width + self.pad > kx {
            ((self.input.width - 1 + self.pad - kx) / s + 1).min(self.output.width)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    #[inline]
    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad)?;
        (iy < self.input.height).then_some(iy)
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, w: &[f64], b: &[f64], input: &[f64], out: &mut [f64]) {
    let (ih, iw) = (g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let cin = g.input.channels;
    let s = g.stride;
    for o in 0..g.output.channels {
        let out_plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        out_plane.fill(b[o]);
        for c in 0..cin {
            let in_plane = &input[c * ih * iw..(c + 1) * ih * iw];
            let wk = &w[((o * cin + c) * g.kh) * g.kw..((o * cin + c) * g.kh + g.kh) * g.kw];
            for ky in 0..g.kh {
                for oy in 0..oh {
                    let Some(iy) = g.in_row(oy, ky) else { continue };
                    let in_row = &in_plane[iy * iw..(iy + 1) * iw];
                    let out_row = &mut out_plane[oy * ow..(oy + 1) * ow];
                    for kx in 0..g.kw {
                        let wv = wk[ky * g.kw + kx];
                        let (lo, hi) = g.col_range(kx);
                        if s == 1 {
                            let off = lo + kx - g.pad;
                            for (o_v, i_v) in out_row[lo..hi].iter_mut().zip(&in_row[off..]) {
                                *o_v += wv * i_v;
                            }
                        } else {
                            for ox in lo..hi {
                                out_row[ox] += wv * in_row[ox * s + kx - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients and, when `din` is given, input gradients.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    w: &[f64],
    input: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let (ih, iw) = (g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let cin = g.input.channels;
    let s = g.stride;
    for o in 0..g.output.channels {
        let dout_plane = &dout[o * oh * ow..(o + 1) * oh * ow];
        db[o] += dout_plane.iter().sum::<f64>();
        for c in 0..cin {
            let in_plane = &input[c * ih * iw..(c + 1) * ih * iw];
            let base = (o * cin + c) * g.kh * g.kw;
            for ky in 0..g.kh {
                for oy in 0..oh {
                    let Some(iy) = g.in_row(oy, ky) else { continue };
                    let in_row = &in_plane[iy * iw..(iy + 1) * iw];
                    let d_row = &dout_plane[oy * ow..(oy + 1) * ow];
                    for kx in 0..g.kw {
                        let (lo, hi) = g.col_range(kx);
                        let k = base + ky * g.kw + kx;
                        let mut acc = 0.0;
                        if s == 1 {
                            let off = lo + kx - g.pad;
                            for (d, i_v) in d_row[lo..hi].iter().zip(&in_row[off..]) {
                                acc += d * i_v;
                            }
                        } else {
                            for ox in lo..hi {
                                acc += d_row[ox] * in_row[ox * s + kx - g.pad];
                            }
                        }
                        dw[k] += acc;
                        if let Some(din) = din.as_deref_mut() {
                            let wv = w[k];
                            let din_row = &mut din[c * ih * iw + iy * iw..c * ih * iw + (iy + 1) * iw];
                            if s == 1 {
                                let off = lo + kx - g.pad;
                                for (di, d) in din_row[off..].iter_mut().zip(&d_row[lo..hi]) {
                                    *di += wv * d;
                                }
                            } else {
                                for ox in lo..hi {
                                    din_row[ox * s + kx - g.pad] += wv * d_row[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling; records the flat input index of each winner (first max wins ties).
pub(crate) fn maxpool_forward(
    input_shape: Shape3,
    output_shape: Shape3,
    kernel: usize,
    stride: usize,
    input: &[f64],
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let (ih, iw) = (input_shape.height, input_shape.width);
    let (oh, ow) = (output_shape.height, output_shape.width);
    for c in 0..input_shape.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let i = c * ih * iw + (oy * stride + ky) * iw + ox * stride + kx;
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                let o = c * oh * ow + oy * ow + ox;
                out[o] = best;
                argmax[o] = best_i;
            }
        }
    }
}

pub(crate) fn maxpool_backward(argmax: &[usize], dout: &[f64], din: &mut [f64]) {
    for (&i, &d) in argmax.iter().zip(dout) {
        din[i] += d;
    }
}

/// `out = W x + b`, `W` is `[out][in]`.
pub(crate) fn fc_forward(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * n..(j + 1) * n];
        *o = b[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn fc_backward(
    w: &[f64],
    x: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    din: Option<&mut [f64]>,
) {
    let n = x.len();
    for (j, &d) in dout.iter().enumerate() {
        db[j] += d;
        if d == 0.0 {
            continue;
        }
        for (g, xi) in dw[j * n..(j + 1) * n].iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(din) = din {
        for (j, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (di, wv) in din.iter_mut().zip(&w[j * n..(j + 1) * n]) {
                *di += d * wv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition with explicit bounds checks.
    fn conv_naive(g: &ConvGeom, w: &[f64], b: &[f64], input: &[f64]) -> Vec<f64> {
        let (ih, iw) = (g.input.height as isize, g.input.width as isize);
        let mut out = vec![0.0; g.output.len()];
        for o in 0..g.output.channels {
            for oy in 0..g.output.height {
                for ox in 0..g.output.width {
                    let mut acc = b[o];
                    for c in 0..g.input.channels {
                        for ky in 0..g.kh {
                            for kx in 0..g.kw {
                                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                                let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                if iy < 0 || ix < 0 || iy >= ih || ix >= iw {
                                    continue;
                                }
                                acc += w[((o * g.input.channels + c) * g.kh + ky) * g.kw + kx]
                                    * input[(c * ih as usize + iy as usize) * iw as usize + ix as usize];
                            }
                        }
                    }
                    out[(o * g.output.height + oy) * g.output.width + ox] = acc;
                }
            }
        }
        out
    }

    fn geom(c: usize, h: usize, w: usize, o: usize, k: usize, stride: usize, pad: usize) -> ConvGeom {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        ConvGeom {
            input: Shape3::new(c, h, w),
            output: Shape3::new(o, oh, ow),
            kh: k,
            kw: k,
            stride,
            pad,
        }
    }

    fn seq(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 23) as f64 * scale - 0.5).collect()
    }

    #[test]
    fn conv_matches_naive_definition() {
        for (k, stride, pad) in [(3, 1, 1), (5, 2, 2), (3, 2, 0), (2, 1, 0), (5, 1, 3)] {
            let g = geom(2, 9, 7, 3, k, stride, pad);
            let w = seq(3 * 2 * k * k, 0.05);
            let b = vec![0.1, -0.2, 0.3];
            let x = seq(2 * 9 * 7, 0.04);
            let mut out = vec![0.0; g.output.len()];
            conv_forward(&g, &w, &b, &x, &mut out);
            let want = conv_naive(&g, &w, &b, &x);
            for (a, e) in out.iter().zip(&want) {
                assert!((a - e).abs() < 1e-12, "k{k} s{stride} p{pad}");
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <dout, conv(x)> is linear in x and w, so the input gradient must
        // satisfy <din, x> = <dout, conv_nobias(x)>
        for (k, stride, pad) in [(3, 1, 1), (5, 2, 2), (3, 2, 0)] {
            let g = geom(2, 8, 8, 3, k, stride, pad);
            let w = seq(3 * 2 * k * k, 0.05);
            let zero = vec![0.0; 3];
            let x = seq(2 * 64, 0.03);
            let dout = seq(g.output.len(), 0.02);
            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; 3];
            let mut din = vec![0.0; x.len()];
            conv_backward(&g, &w, &x, &dout, &mut dw, &mut db, Some(&mut din));
            let y = conv_naive(&g, &w, &zero, &x);
            let lhs: f64 = din.iter().zip(&x).map(|(a, b)| a * b).sum();
            let rhs: f64 = dout.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
            let lhs_w: f64 = dw.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((lhs_w - rhs).abs() < 1e-10);
            assert!((db.iter().sum::<f64>() - dout.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_routes_gradient_to_winner() {
        let s_in = Shape3::new(1, 2, 4);
        let s_out = Shape3::new(1, 1, 2);
        let x = [1.0, 5.0, 0.0, 2.0, 3.0, 4.0, 9.0, 1.0];
        let mut out = [0.0; 2];
        let mut idx = [0; 2];
        maxpool_forward(s_in, s_out, 2, 2, &x, &mut out, &mut idx);
        assert_eq!(out, [5.0, 9.0]);
        let mut din = [0.0; 8];
        maxpool_backward(&idx, &[1.0, 2.0], &mut din);
        assert_eq!(din, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }
}
