//! Depth-wise (channel) self-attention and the conventional spatial
//! reference. The channel variant keeps its score matrix in channel space
//! (Ch x Ch), so score storage is independent of resolution; the spatial
//! variant scores in token space (HW x HW) and exists only for complexity
//! benchmarks and small-instance tests.

use tensor_core::{counter, Scalar, Tensor};

use crate::error::{GformerError, Result};
use crate::layers::{Conv2dLayer, DepthwiseLayer};
use crate::params::{Bound, Init, ParamLayout};

const COLUMN_NORM_EPS: f64 = 1e-12;

/// Spatial token budget above which the reference refuses to allocate its
/// HW x HW score matrix.
pub const SPATIAL_REFERENCE_MAX_TOKENS: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttentionStats {
    /// Scalars held by all score matrices of the call.
    pub score_elems: usize,
    /// Multiply-accumulates spent computing the scores, measured by the op
    /// counter around the score product.
    pub score_macs: u64,
}

impl std::ops::AddAssign for AttentionStats {
    fn add_assign(&mut self, rhs: Self) {
        self.score_elems += rhs.score_elems;
        self.score_macs += rhs.score_macs;
    }
}

/// Single-head channel attention over token matrices q,k,v of shape
/// (HW, Ch). Query/key columns are L2-normalized, the score is the Ch x Ch
/// channel product, rows are softmaxed after scaling by theta, and the
/// output is v times the score.
pub fn channel_head_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    theta: &Tensor<T>,
) -> Result<(Tensor<T>, AttentionStats)> {
    let eps = T::from_f64_c(COLUMN_NORM_EPS);
    let qn = q.l2norm_cols(eps)?;
    let kn = k.l2norm_cols(eps)?;
    let before = counter::macs();
    let beta = qn.transpose2()?.matmul(&kn)?;
    let score_macs = counter::macs() - before;
    let s = beta.mul_scalar_tensor(theta)?.softmax(1)?;
    let out = v.matmul(&s)?;
    Ok((
        out,
        AttentionStats {
            score_elems: beta.numel(),
            score_macs,
        },
    ))
}

/// Single-head conventional attention with the token-space score matrix.
pub fn spatial_head_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    theta: &Tensor<T>,
) -> Result<(Tensor<T>, AttentionStats)> {
    let hw = q.shape()[0];
    if hw > SPATIAL_REFERENCE_MAX_TOKENS {
        return Err(GformerError::Eval(format!(
            "spatial reference refuses {hw} tokens (limit {SPATIAL_REFERENCE_MAX_TOKENS})"
        )));
    }
    let before = counter::macs();
    let alpha = q.matmul(&k.transpose2()?)?;
    let score_macs = counter::macs() - before;
    let s = alpha.mul_scalar_tensor(theta)?.softmax(1)?;
    let out = s.matmul(v)?;
    Ok((
        out,
        AttentionStats {
            score_elems: alpha.numel(),
            score_macs,
        },
    ))
}

/// Multi-head depth-wise self-attention layer: pixel (1x1) convolution
/// followed by a depth-wise convolution generates Q, K, V; per head the
/// channel score is built and applied; heads are concatenated and projected.
/// The caller adds the residual.
#[derive(Debug, Clone)]
pub struct AttentionLayer {
    qkv_pw: Conv2dLayer,
    qkv_dw: DepthwiseLayer,
    theta: String,
    proj: Conv2dLayer,
    pub heads: usize,
    pub channels: usize,
}

impl AttentionLayer {
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        channels: usize,
        heads: usize,
        theta_init: f64,
    ) -> AttentionLayer {
        assert!(heads > 0 && channels % heads == 0);
        let qkv_pw = Conv2dLayer::new(
            layout,
            &format!("{name}.qkv_pw"),
            channels,
            3 * channels,
            1,
            1,
            true,
            None,
        );
        let qkv_dw = DepthwiseLayer::new(layout, &format!("{name}.qkv_dw"), 3 * channels, 3, false);
        let theta = format!("{name}.theta");
        layout.add(&theta, &[heads], Init::Const(theta_init));
        let proj = Conv2dLayer::new(
            layout,
            &format!("{name}.proj"),
            channels,
            channels,
            1,
            1,
            true,
            None,
        );
        AttentionLayer {
            qkv_pw,
            qkv_dw,
            theta,
            proj,
            heads,
            channels,
        }
    }

    fn project_qkv<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let c = self.channels;
        let qkv = self.qkv_dw.forward(p, &self.qkv_pw.forward(p, x)?)?;
        Ok((
            qkv.slice_channels(0, c)?,
            qkv.slice_channels(c, c)?,
            qkv.slice_channels(2 * c, c)?,
        ))
    }

    fn run_heads<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
        spatial: bool,
    ) -> Result<(Tensor<T>, AttentionStats)> {
        let shape = x.shape().to_vec();
        let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        if c != self.channels {
            return Err(GformerError::Config(format!(
                "attention layer expects {} channels, got {c}",
                self.channels
            )));
        }
        let (q, k, v) = self.project_qkv(p, x)?;
        let ch = c / self.heads;
        let hw = h * w;
        let theta = p.get(&self.theta);
        let mut stats = AttentionStats::default();
        let mut batch_parts = Vec::with_capacity(b);
        for bi in 0..b {
            let mut merged: Option<Tensor<T>> = None;
            for hd in 0..self.heads {
                let tokens = |t: &Tensor<T>| -> Result<Tensor<T>> {
                    Ok(t.slice_batch(bi)?
                        .slice_channels(hd * ch, ch)?
                        .reshape(&[ch, hw])?
                        .transpose2()?)
                };
                let (qh, kh, vh) = (tokens(&q)?, tokens(&k)?, tokens(&v)?);
                let th = theta.slice_batch(hd)?;
                let (out, st) = if spatial {
                    spatial_head_attention(&qh, &kh, &vh, &th)?
                } else {
                    channel_head_attention(&qh, &kh, &vh, &th)?
                };
                stats += st;
                let out = out.transpose2()?.reshape(&[1, ch, h, w])?;
                merged = Some(match merged {
                    None => out,
                    Some(m) => m.concat_channels(&out)?,
                });
            }
            batch_parts.push(merged.expect("at least one head"));
        }
        let full = Tensor::concat_batch(&batch_parts)?;
        let out = self.proj.forward(p, &full)?;
        Ok((out, stats))
    }

    /// Depth-wise self-attention with channel-space scores.
    pub fn dsa<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, AttentionStats)> {
        self.run_heads(p, x, false)
    }

    /// Conventional spatial-score attention over the same projections.
    /// Benchmark/reference only, never part of the trained model.
    pub fn spatial_reference<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, AttentionStats)> {
        self.run_heads(p, x, true)
    }
}

/// One interchangeable attention-score strategy, selectable by name in the
/// benchmark.
pub trait ScoreKernel: Send + Sync {
    fn name(&self) -> &'static str;
    /// Extents of the score matrix for a single head over (hw, ch) tokens.
    fn score_shape(&self, hw: usize, ch: usize) -> (usize, usize);
    /// Run single-head attention on (hw, ch) token matrices.
    fn run(
        &self,
        q: &Tensor<f32>,
        k: &Tensor<f32>,
        v: &Tensor<f32>,
        theta: f32,
    ) -> Result<(Tensor<f32>, AttentionStats)>;
}

pub struct ChannelScoreKernel;

impl ScoreKernel for ChannelScoreKernel {
    fn name(&self) -> &'static str {
        "channel"
    }
    fn score_shape(&self, _hw: usize, ch: usize) -> (usize, usize) {
        (ch, ch)
    }
    fn run(
        &self,
        q: &Tensor<f32>,
        k: &Tensor<f32>,
        v: &Tensor<f32>,
        theta: f32,
    ) -> Result<(Tensor<f32>, AttentionStats)> {
        channel_head_attention(q, k, v, &Tensor::scalar(theta))
    }
}

pub struct SpatialScoreKernel;

impl ScoreKernel for SpatialScoreKernel {
    fn name(&self) -> &'static str {
        "spatial"
    }
    fn score_shape(&self, hw: usize, _ch: usize) -> (usize, usize) {
        (hw, hw)
    }
    fn run(
        &self,
        q: &Tensor<f32>,
        k: &Tensor<f32>,
        v: &Tensor<f32>,
        theta: f32,
    ) -> Result<(Tensor<f32>, AttentionStats)> {
        spatial_head_attention(q, k, v, &Tensor::scalar(theta))
    }
}

/// All registered score strategies.
pub fn score_kernels() -> Vec<Box<dyn ScoreKernel>> {
    vec![Box::new(ChannelScoreKernel), Box::new(SpatialScoreKernel)]
}

/// Look a strategy up by name.
pub fn score_kernel(name: &str) -> Option<Box<dyn ScoreKernel>> {
    score_kernels().into_iter().find(|k| k.name() == name)
}
