use super::dims2;
use crate::counter::add_macs;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// C = A * B on raw row-major buffers, accumulating into `out`.
pub(crate) fn matmul_raw<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (kk, &a_ik) in a_row.iter().enumerate() {
            if a_ik == T::zero() {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + a_ik * bv;
            }
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// Standard 2-d matrix product.
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k) = dims2(self, "matmul")?;
        let (k2, n) = dims2(rhs, "matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: rhs.shape().to_vec(),
            });
        }
        add_macs((m * n * k) as u64);
        let mut out = vec![T::zero(); m * n];
        matmul_raw(self.data(), rhs.data(), &mut out, m, k, n);
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            Op::Matmul(self.clone(), rhs.clone()),
        ))
    }

    pub fn transpose2(&self) -> Result<Tensor<T>> {
        let (m, n) = dims2(self, "transpose")?;
        let src = self.data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        Ok(Tensor::from_op(out, vec![n, m], Op::Transpose(self.clone())))
    }

    /// Scale every column of a 2-d matrix to unit L2 norm. Columns whose
    /// norm falls below `eps` are divided by `eps` instead.
    pub fn l2norm_cols(&self, eps: T) -> Result<Tensor<T>> {
        let (m, n) = dims2(self, "l2norm_cols")?;
        let src = self.data();
        let mut out = vec![T::zero(); m * n];
        for j in 0..n {
            let mut sq = T::zero();
            for i in 0..m {
                let v = src[i * n + j];
                sq = sq + v * v;
            }
            let norm = sq.sqrt().max(eps);
            for i in 0..m {
                out[i * n + j] = src[i * n + j] / norm;
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            Op::L2NormCols(self.clone(), eps),
        ))
    }
}
