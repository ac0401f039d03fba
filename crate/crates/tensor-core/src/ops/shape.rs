use super::dims4;
use crate::counter::add_macs;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(TensorError::InvalidArg {
                op: "reshape",
                msg: format!(
                    "cannot reshape {:?} ({} elements) to {:?}",
                    self.shape(),
                    self.numel(),
                    shape
                ),
            });
        }
        // Row-major layout is preserved, the buffer is reused as-is.
        Ok(Tensor::from_op(
            self.data().to_vec(),
            shape.to_vec(),
            Op::Reshape(self.clone()),
        ))
    }

    /// Contiguous channel slice [start, start+len) of a (B,C,H,W) tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        let (b, c, h, w) = dims4(self, "slice_channels")?;
        if start + len > c {
            return Err(TensorError::InvalidArg {
                op: "slice_channels",
                msg: format!("slice {start}+{len} exceeds {c} channels"),
            });
        }
        let hw = h * w;
        let x = self.data();
        let mut out = vec![T::zero(); b * len * hw];
        for bi in 0..b {
            let src = (bi * c + start) * hw;
            let dst = bi * len * hw;
            out[dst..dst + len * hw].copy_from_slice(&x[src..src + len * hw]);
        }
        Ok(Tensor::from_op(
            out,
            vec![b, len, h, w],
            Op::SliceChannels {
                x: self.clone(),
                start,
                len,
            },
        ))
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c1, h, w) = dims4(self, "concat_channels")?;
        let (b2, c2, h2, w2) = dims4(rhs, "concat_channels")?;
        if b != b2 || h != h2 || w != w2 {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                lhs: self.shape().to_vec(),
                rhs: rhs.shape().to_vec(),
            });
        }
        let hw = h * w;
        let mut out = vec![T::zero(); b * (c1 + c2) * hw];
        for bi in 0..b {
            let dst = bi * (c1 + c2) * hw;
            out[dst..dst + c1 * hw].copy_from_slice(&self.data()[bi * c1 * hw..(bi + 1) * c1 * hw]);
            out[dst + c1 * hw..dst + (c1 + c2) * hw]
                .copy_from_slice(&rhs.data()[bi * c2 * hw..(bi + 1) * c2 * hw]);
        }
        Ok(Tensor::from_op(
            out,
            vec![b, c1 + c2, h, w],
            Op::ConcatChannels(self.clone(), rhs.clone()),
        ))
    }

    /// Single sample of a batched tensor, keeping the batch axis.
    pub fn slice_batch(&self, index: usize) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.is_empty() || index >= shape[0] {
            return Err(TensorError::InvalidArg {
                op: "slice_batch",
                msg: format!("batch index {} out of range for {:?}", index, shape),
            });
        }
        let per: usize = shape[1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[0] = 1;
        let out = self.data()[index * per..(index + 1) * per].to_vec();
        Ok(Tensor::from_op(
            out,
            out_shape,
            Op::SliceBatch {
                x: self.clone(),
                index,
            },
        ))
    }

    /// Concatenate along the leading axis; trailing extents must agree.
    pub fn concat_batch(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArg {
                op: "concat_batch",
                msg: "need at least one part".into(),
            });
        }
        let tail = &parts[0].shape()[1..];
        let mut batch = 0usize;
        for p in parts {
            if p.shape().is_empty() || &p.shape()[1..] != tail {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_batch",
                    lhs: parts[0].shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            batch += p.shape()[0];
        }
        let mut out = Vec::with_capacity(batch * tail.iter().product::<usize>());
        for p in parts {
            out.extend_from_slice(p.data());
        }
        let mut shape = vec![batch];
        shape.extend_from_slice(tail);
        Ok(Tensor::from_op(
            out,
            shape,
            Op::ConcatBatch(parts.to_vec()),
        ))
    }

    /// Repeat a batch-1 tensor along the batch axis.
    pub fn repeat_batch(&self, batch: usize) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.is_empty() || shape[0] != 1 {
            return Err(TensorError::InvalidArg {
                op: "repeat_batch",
                msg: format!("expected leading extent 1, got {:?}", shape),
            });
        }
        let per = self.numel();
        let mut out = Vec::with_capacity(per * batch);
        for _ in 0..batch {
            out.extend_from_slice(self.data());
        }
        let mut out_shape = shape.to_vec();
        out_shape[0] = batch;
        Ok(Tensor::from_op(
            out,
            out_shape,
            Op::RepeatBatch(self.clone(), batch),
        ))
    }

    /// Scale each (batch, channel) plane of x by s[b,c].
    pub fn scale_channels(&self, s: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, h, w) = dims4(self, "scale_channels")?;
        if s.shape() != [b, c] {
            return Err(TensorError::ShapeMismatch {
                op: "scale_channels",
                lhs: self.shape().to_vec(),
                rhs: s.shape().to_vec(),
            });
        }
        add_macs(self.numel() as u64);
        let hw = h * w;
        let mut out = self.data().to_vec();
        let sv = s.data();
        for bi in 0..b {
            for ci in 0..c {
                let f = sv[bi * c + ci];
                let base = (bi * c + ci) * hw;
                for o in &mut out[base..base + hw] {
                    *o = *o * f;
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            Op::ScaleChannels(self.clone(), s.clone()),
        ))
    }
}
