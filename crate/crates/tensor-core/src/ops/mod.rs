//! Forward implementations. Each op validates shapes, computes the result
//! and records itself on the output when gradients are tracked.

mod conv;
pub(crate) mod elementwise;
mod linalg;
mod norm;
mod reduce;
mod resize;
mod shape;

use crate::error::{Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn dims4<T: Scalar>(
    t: &Tensor<T>,
    op: &'static str,
) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(TensorError::InvalidArg {
            op,
            msg: format!("expected 4-d tensor, got shape {:?}", t.shape()),
        }),
    }
}

pub(crate) fn dims2<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize)> {
    match *t.shape() {
        [m, n] => Ok((m, n)),
        _ => Err(TensorError::InvalidArg {
            op,
            msg: format!("expected 2-d tensor, got shape {:?}", t.shape()),
        }),
    }
}
