//! Transformer building blocks: the gated depth-wise feed-forward network
//! and the residual transformer block around it.

use tensor_core::{Scalar, Tensor};

use crate::attention::{AttentionLayer, AttentionStats};
use crate::error::Result;
use crate::layers::{Conv2dLayer, DepthwiseLayer, LayerNormLayer};
use crate::params::{Bound, ParamLayout};

/// Gated depth-wise feed-forward: 1x1 expansion to two hidden branches,
/// depth-wise 3x3 on both, gelu-gated product, 1x1 projection back.
#[derive(Debug, Clone)]
pub struct DfnLayer {
    pw_in: Conv2dLayer,
    dw: DepthwiseLayer,
    pw_out: Conv2dLayer,
    pub hidden: usize,
}

impl DfnLayer {
    pub fn new(layout: &mut ParamLayout, name: &str, channels: usize, hidden: usize) -> DfnLayer {
        let pw_in = Conv2dLayer::new(
            layout,
            &format!("{name}.pw_in"),
            channels,
            2 * hidden,
            1,
            1,
            true,
            None,
        );
        let dw = DepthwiseLayer::new(layout, &format!("{name}.dw"), 2 * hidden, 3, false);
        let pw_out = Conv2dLayer::new(
            layout,
            &format!("{name}.pw_out"),
            hidden,
            channels,
            1,
            1,
            true,
            None,
        );
        DfnLayer {
            pw_in,
            dw,
            pw_out,
            hidden,
        }
    }

    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.dw.forward(p, &self.pw_in.forward(p, x)?)?;
        let gate = y.slice_channels(0, self.hidden)?;
        let value = y.slice_channels(self.hidden, self.hidden)?;
        let gated = gate.gelu().mul(&value)?;
        self.pw_out.forward(p, &gated)
    }
}

/// Pre-norm residual block: x + DSA(LN(x)), then + DFN(LN(.)).
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    ln1: LayerNormLayer,
    pub attn: AttentionLayer,
    ln2: LayerNormLayer,
    dfn: DfnLayer,
}

impl TransformerBlock {
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        channels: usize,
        heads: usize,
        hidden: usize,
        theta_init: f64,
    ) -> TransformerBlock {
        TransformerBlock {
            ln1: LayerNormLayer::new(layout, &format!("{name}.ln1"), channels),
            attn: AttentionLayer::new(layout, &format!("{name}.attn"), channels, heads, theta_init),
            ln2: LayerNormLayer::new(layout, &format!("{name}.ln2"), channels),
            dfn: DfnLayer::new(layout, &format!("{name}.dfn"), channels, hidden),
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, AttentionStats)> {
        let (attended, stats) = self.attn.dsa(p, &self.ln1.forward(p, x)?)?;
        let x = x.add(&attended)?;
        let ff = self.dfn.forward(p, &self.ln2.forward(p, &x)?)?;
        Ok((x.add(&ff)?, stats))
    }
}
