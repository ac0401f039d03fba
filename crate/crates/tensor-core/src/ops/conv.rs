use super::dims4;
use crate::counter::add_macs;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn conv_out_extent(h: usize, pad: usize, k: usize, stride: usize) -> usize {
    (h + 2 * pad - k) / stride + 1
}

/// Output-x range [lo, hi) for which ix = ox*stride + kx - pad stays inside
/// [0, extent).
fn valid_out_range(extent: usize, out_extent: usize, stride: usize, pad: usize, kx: usize) -> (usize, usize) {
    let lo = if kx >= pad {
        0
    } else {
        (pad - kx).div_ceil(stride)
    };
    // largest ox with ox*stride + kx - pad <= extent - 1
    let hi = if extent + pad > kx {
        (((extent + pad - kx - 1) / stride) + 1).min(out_extent)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Zero-padded cross-correlation on raw buffers. `out` must be zeroed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_raw<T: Scalar>(
    x: &[T],
    w: &[T],
    out: &mut [T],
    (b, cin, h, wd): (usize, usize, usize, usize),
    (cout, k): (usize, usize),
    stride: usize,
    pad: usize,
) {
    let ho = conv_out_extent(h, pad, k, stride);
    let wo = conv_out_extent(wd, pad, k, stride);
    for bi in 0..b {
        for co in 0..cout {
            let out_base = (bi * cout + co) * ho * wo;
            for ci in 0..cin {
                let x_base = (bi * cin + ci) * h * wd;
                let w_base = (co * cin + ci) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = w[w_base + ky * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let (ox_lo, ox_hi) = valid_out_range(wd, wo, stride, pad, kx);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in 0..ho {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let x_row = x_base + iy as usize * wd;
                            let o_row = out_base + oy * wo;
                            if stride == 1 {
                                let xs = &x[x_row + ox_lo + kx - pad..x_row + ox_hi + kx - pad];
                                let os = &mut out[o_row + ox_lo..o_row + ox_hi];
                                for (o, &xv) in os.iter_mut().zip(xs) {
                                    *o = *o + wv * xv;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    let ix = ox * stride + kx - pad;
                                    out[o_row + ox] = out[o_row + ox] + wv * x[x_row + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// 2-d convolution of (B,Cin,H,W) with (Cout,Cin,k,k), zero padding.
    pub fn conv2d(&self, w: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
        let (b, cin, h, wd) = dims4(self, "conv2d")?;
        let (cout, cin_w, k, k2) = dims4(w, "conv2d")?;
        if cin != cin_w || k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: self.shape().to_vec(),
                rhs: w.shape().to_vec(),
            });
        }
        if k % 2 == 0 {
            return Err(TensorError::InvalidArg {
                op: "conv2d",
                msg: format!("kernel extent must be odd, got {k}"),
            });
        }
        if stride == 0 || h + 2 * pad < k || wd + 2 * pad < k {
            return Err(TensorError::InvalidArg {
                op: "conv2d",
                msg: format!("invalid stride/pad {stride}/{pad} for input {h}x{wd} kernel {k}"),
            });
        }
        let ho = conv_out_extent(h, pad, k, stride);
        let wo = conv_out_extent(wd, pad, k, stride);
        add_macs((b * cout * ho * wo * cin * k * k) as u64);
        let mut out = vec![T::zero(); b * cout * ho * wo];
        conv2d_raw(
            self.data(),
            w.data(),
            &mut out,
            (b, cin, h, wd),
            (cout, k),
            stride,
            pad,
        );
        Ok(Tensor::from_op(
            out,
            vec![b, cout, ho, wo],
            Op::Conv2d {
                x: self.clone(),
                w: w.clone(),
                stride,
                pad,
            },
        ))
    }

    /// 1x1 convolution collecting information across channels per pixel.
    pub fn pointwise_conv(&self, w: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, _, k, k2) = dims4(w, "pointwise_conv")?;
        if k != 1 || k2 != 1 {
            return Err(TensorError::InvalidArg {
                op: "pointwise_conv",
                msg: format!("kernel must be 1x1, got shape {:?}", w.shape()),
            });
        }
        self.conv2d(w, 1, 0)
    }

    /// Per-channel 3x3-style convolution: kernel (C,1,k,k), same padding.
    /// Channel c of the output depends only on channel c of the input.
    pub fn depthwise_conv2d(&self, w: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, wd) = dims4(self, "depthwise_conv2d")?;
        let (cw, one, k, k2) = dims4(w, "depthwise_conv2d")?;
        if cw != c || one != 1 || k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "depthwise_conv2d",
                lhs: self.shape().to_vec(),
                rhs: w.shape().to_vec(),
            });
        }
        if k % 2 == 0 {
            return Err(TensorError::InvalidArg {
                op: "depthwise_conv2d",
                msg: format!("kernel extent must be odd, got {k}"),
            });
        }
        let pad = k / 2;
        add_macs((b * c * h * wd * k * k) as u64);
        let mut out = vec![T::zero(); b * c * h * wd];
        let x = self.data();
        let wv = w.data();
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * h * wd;
                let w_base = ci * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let kv = wv[w_base + ky * k + kx];
                        if kv == T::zero() {
                            continue;
                        }
                        let ox_lo = pad.saturating_sub(kx);
                        let ox_hi = (wd + pad).saturating_sub(kx).min(wd);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in 0..h {
                            let iy = (oy + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let x_row = base + iy as usize * wd;
                            let o_row = base + oy * wd;
                            let xs = &x[x_row + ox_lo + kx - pad..x_row + ox_hi + kx - pad];
                            let os = &mut out[o_row + ox_lo..o_row + ox_hi];
                            for (o, &xv) in os.iter_mut().zip(xs) {
                                *o = *o + kv * xv;
                            }
                        }
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, c, h, wd],
            Op::DepthwiseConv2d {
                x: self.clone(),
                w: w.clone(),
                pad,
            },
        ))
    }

    /// Add a per-channel bias (C) to a (B,C,H,W) tensor.
    pub fn add_bias_channel(&self, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, w) = dims4(self, "add_bias_channel")?;
        if bias.shape() != [c] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias_channel",
                lhs: self.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let mut out = self.data().to_vec();
        let bv = bias.data();
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * h * w;
                let add = bv[ci];
                for o in &mut out[base..base + h * w] {
                    *o = *o + add;
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            Op::AddBiasChannel(self.clone(), bias.clone()),
        ))
    }

    /// Add a row vector (N) to every row of a (B,N) matrix.
    pub fn add_bias_row(&self, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, n) = super::dims2(self, "add_bias_row")?;
        if bias.shape() != [n] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias_row",
                lhs: self.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let mut out = self.data().to_vec();
        let bv = bias.data();
        for bi in 0..b {
            for j in 0..n {
                out[bi * n + j] = out[bi * n + j] + bv[j];
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            Op::AddBiasRow(self.clone(), bias.clone()),
        ))
    }
}
