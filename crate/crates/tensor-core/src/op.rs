use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Recorded operation together with the inputs it consumed. Each variant has
/// a matching backward rule in `backward.rs`.
pub enum Op<T: Scalar> {
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    Neg(Tensor<T>),
    AddScalar(Tensor<T>, T),
    MulScalar(Tensor<T>, T),
    /// Elementwise multiply by a one-element tensor (broadcast scalar).
    MulScalarTensor(Tensor<T>, Tensor<T>),
    Abs(Tensor<T>),
    LeakyRelu(Tensor<T>, T),
    Gelu(Tensor<T>),
    Softplus(Tensor<T>),
    /// y = x^(-1/2), requires x > 0.
    Rsqrt(Tensor<T>),
    Softmax {
        input: Tensor<T>,
        axis: usize,
    },
    /// Normalization over the channel axis per spatial location.
    LayerNorm {
        x: Tensor<T>,
        gain: Tensor<T>,
        bias: Tensor<T>,
        eps: T,
    },
    Matmul(Tensor<T>, Tensor<T>),
    /// 2-D transpose.
    Transpose(Tensor<T>),
    Reshape(Tensor<T>),
    /// Columns of a 2-D matrix scaled to unit L2 norm.
    L2NormCols(Tensor<T>, T),
    Conv2d {
        x: Tensor<T>,
        w: Tensor<T>,
        stride: usize,
        pad: usize,
    },
    DepthwiseConv2d {
        x: Tensor<T>,
        w: Tensor<T>,
        pad: usize,
    },
    /// x: (B,C,H,W) plus bias of shape (C).
    AddBiasChannel(Tensor<T>, Tensor<T>),
    /// x: (B,N) plus bias of shape (N).
    AddBiasRow(Tensor<T>, Tensor<T>),
    /// x: (B,C,H,W) scaled per (batch, channel) by s: (B,C).
    ScaleChannels(Tensor<T>, Tensor<T>),
    SliceChannels {
        x: Tensor<T>,
        start: usize,
        len: usize,
    },
    ConcatChannels(Tensor<T>, Tensor<T>),
    SliceBatch {
        x: Tensor<T>,
        index: usize,
    },
    /// Concatenation along the leading (batch) axis.
    ConcatBatch(Vec<Tensor<T>>),
    /// (1,C,H,W) repeated along the batch axis.
    RepeatBatch(Tensor<T>, usize),
    UpsampleNearest2(Tensor<T>),
    DownsampleArea(Tensor<T>, usize),
    Sum(Tensor<T>),
    Mean(Tensor<T>),
}

impl<T: Scalar> Op<T> {
    pub(crate) fn parents(&self) -> Vec<&Tensor<T>> {
        match self {
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MulScalarTensor(a, b)
            | Op::Matmul(a, b)
            | Op::AddBiasChannel(a, b)
            | Op::AddBiasRow(a, b)
            | Op::ScaleChannels(a, b)
            | Op::ConcatChannels(a, b) => vec![a, b],
            Op::Conv2d { x, w, .. } | Op::DepthwiseConv2d { x, w, .. } => vec![x, w],
            Op::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
            Op::ConcatBatch(parts) => parts.iter().collect(),
            Op::Neg(a)
            | Op::AddScalar(a, _)
            | Op::MulScalar(a, _)
            | Op::Abs(a)
            | Op::LeakyRelu(a, _)
            | Op::Gelu(a)
            | Op::Softplus(a)
            | Op::Rsqrt(a)
            | Op::Softmax { input: a, .. }
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::L2NormCols(a, _)
            | Op::SliceChannels { x: a, .. }
            | Op::SliceBatch { x: a, .. }
            | Op::RepeatBatch(a, _)
            | Op::UpsampleNearest2(a)
            | Op::DownsampleArea(a, _)
            | Op::Sum(a)
            | Op::Mean(a) => vec![a],
        }
    }

    pub(crate) fn into_parents(self) -> Vec<Tensor<T>> {
        match self {
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MulScalarTensor(a, b)
            | Op::Matmul(a, b)
            | Op::AddBiasChannel(a, b)
            | Op::AddBiasRow(a, b)
            | Op::ScaleChannels(a, b)
            | Op::ConcatChannels(a, b) => vec![a, b],
            Op::Conv2d { x, w, .. } | Op::DepthwiseConv2d { x, w, .. } => vec![x, w],
            Op::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
            Op::ConcatBatch(parts) => parts,
            Op::Neg(a)
            | Op::AddScalar(a, _)
            | Op::MulScalar(a, _)
            | Op::Abs(a)
            | Op::LeakyRelu(a, _)
            | Op::Gelu(a)
            | Op::Softplus(a)
            | Op::Rsqrt(a)
            | Op::Softmax { input: a, .. }
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::L2NormCols(a, _)
            | Op::SliceChannels { x: a, .. }
            | Op::SliceBatch { x: a, .. }
            | Op::RepeatBatch(a, _)
            | Op::UpsampleNearest2(a)
            | Op::DownsampleArea(a, _)
            | Op::Sum(a)
            | Op::Mean(a) => vec![a],
        }
    }
}
