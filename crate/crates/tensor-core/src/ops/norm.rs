use super::dims4;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) const LAYERNORM_EPS: f64 = 1e-5;

impl<T: Scalar> Tensor<T> {
    /// Normalize over the channel dimension per spatial location, then apply
    /// a per-channel gain and bias.
    pub fn layernorm(&self, gain: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, w) = dims4(self, "layernorm")?;
        if c < 2 {
            return Err(TensorError::DegenerateNorm(c));
        }
        if gain.shape() != [c] || bias.shape() != [c] {
            return Err(TensorError::ShapeMismatch {
                op: "layernorm",
                lhs: self.shape().to_vec(),
                rhs: gain.shape().to_vec(),
            });
        }
        let eps = T::from_f64_c(LAYERNORM_EPS);
        let n = T::from_f64_c(c as f64);
        let x = self.data();
        let g = gain.data();
        let bb = bias.data();
        let hw = h * w;
        let mut out = vec![T::zero(); x.len()];
        for bi in 0..b {
            for p in 0..hw {
                let base = bi * c * hw + p;
                let mut mean = T::zero();
                for ci in 0..c {
                    mean = mean + x[base + ci * hw];
                }
                mean = mean / n;
                let mut var = T::zero();
                for ci in 0..c {
                    let d = x[base + ci * hw] - mean;
                    var = var + d * d;
                }
                var = var / n;
                let inv_std = T::one() / (var + eps).sqrt();
                for ci in 0..c {
                    let xhat = (x[base + ci * hw] - mean) * inv_std;
                    out[base + ci * hw] = g[ci] * xhat + bb[ci];
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            Op::LayerNorm {
                x: self.clone(),
                gain: gain.clone(),
                bias: bias.clone(),
                eps,
            },
        ))
    }

    /// Softmax along `axis`, computed with max subtraction for stability.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        if axis >= self.shape().len() {
            return Err(TensorError::InvalidArg {
                op: "softmax",
                msg: format!("axis {} out of range for shape {:?}", axis, self.shape()),
            });
        }
        let shape = self.shape();
        let n = shape[axis];
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let x = self.data();
        let mut out = vec![T::zero(); x.len()];
        for o in 0..outer {
            for j in 0..inner {
                let idx = |i: usize| (o * n + i) * inner + j;
                let mut maxv = x[idx(0)];
                for i in 1..n {
                    maxv = maxv.max(x[idx(i)]);
                }
                let mut denom = T::zero();
                for i in 0..n {
                    let e = (x[idx(i)] - maxv).exp();
                    out[idx(i)] = e;
                    denom = denom + e;
                }
                for i in 0..n {
                    out[idx(i)] = out[idx(i)] / denom;
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            shape.to_vec(),
            Op::Softmax {
                input: self.clone(),
                axis,
            },
        ))
    }
}
