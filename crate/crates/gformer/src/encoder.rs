//! Hierarchical encoder: transformer levels over decreasing resolutions,
//! strided convolutional refinement, and the MLP head producing the latent
//! code.

use tensor_core::{Scalar, Tensor};

use crate::attention::AttentionStats;
use crate::blocks::TransformerBlock;
use crate::config::ModelConfig;
use crate::error::{GformerError, Result};
use crate::layers::{Conv2dLayer, LinearLayer};
use crate::params::{Bound, Init, ParamLayout};

/// Ordered skip features plus the latent code.
pub struct FeatureBundle<T: Scalar> {
    /// Deepest-first: skips[0] is the lowest-resolution map.
    pub skips: Vec<Tensor<T>>,
    /// (B, latent_dim)
    pub latent: Tensor<T>,
}

pub struct Encoder {
    cfg: ModelConfig,
    embed: Conv2dLayer,
    blocks: Vec<TransformerBlock>,
    downs: Vec<Conv2dLayer>,
    refines: Vec<Conv2dLayer>,
    mlp_in: LinearLayer,
    mlp_out: LinearLayer,
}

impl Encoder {
    pub fn new(layout: &mut ParamLayout, cfg: &ModelConfig) -> Encoder {
        let embed = Conv2dLayer::new(layout, "enc.embed", 3, cfg.channels[0], 3, 1, true, None);
        let mut blocks = Vec::new();
        let mut downs = Vec::new();
        for (i, (&c, &h)) in cfg.channels.iter().zip(&cfg.heads).enumerate() {
            blocks.push(TransformerBlock::new(
                layout,
                &format!("enc.t{i}"),
                c,
                h,
                cfg.ffn_hidden(c),
                cfg.theta_init,
            ));
            if i + 1 < cfg.levels_transformer {
                downs.push(Conv2dLayer::new(
                    layout,
                    &format!("enc.down{i}"),
                    c,
                    cfg.channels[i + 1],
                    3,
                    2,
                    true,
                    None,
                ));
            }
        }
        let mut refines = Vec::new();
        for j in 0..cfg.levels_conv_refine {
            let cin = if j == 0 {
                *cfg.channels.last().expect("at least one level")
            } else {
                cfg.refine_channels
            };
            refines.push(Conv2dLayer::new(
                layout,
                &format!("enc.r{j}"),
                cin,
                cfg.refine_channels,
                3,
                2,
                true,
                None,
            ));
        }
        let deep = cfg.deepest_resolution();
        let flat = cfg.refine_channels * deep * deep;
        let mlp_in = LinearLayer::new(layout, "enc.mlp_in", flat, cfg.latent_dim, Init::Zeros);
        let mlp_out = LinearLayer::new(
            layout,
            "enc.mlp_out",
            cfg.latent_dim,
            cfg.latent_dim,
            Init::Zeros,
        );
        Encoder {
            cfg: cfg.clone(),
            embed,
            blocks,
            downs,
            refines,
            mlp_in,
            mlp_out,
        }
    }

    /// Produce all skip features (deepest-first) and the latent code.
    pub fn forward<T: Scalar>(
        &self,
        p: &Bound<T>,
        x: &Tensor<T>,
    ) -> Result<(FeatureBundle<T>, AttentionStats)> {
        let shape = x.shape().to_vec();
        let r = self.cfg.input_resolution;
        if shape.len() != 4 || shape[1] != 3 || shape[2] != r || shape[3] != r {
            return Err(GformerError::Config(format!(
                "encoder expects (B,3,{r},{r}), got {shape:?}"
            )));
        }
        let batch = shape[0];
        let mut stats = AttentionStats::default();
        let mut skips_shallow_first = Vec::with_capacity(self.cfg.levels());

        let mut feat = self.embed.forward(p, x)?;
        for (i, block) in self.blocks.iter().enumerate() {
            let (out, st) = block.forward(p, &feat)?;
            stats += st;
            skips_shallow_first.push(out.clone());
            feat = if i < self.downs.len() {
                self.downs[i].forward(p, &out)?
            } else {
                out
            };
        }
        for refine in &self.refines {
            feat = refine.forward(p, &feat)?.gelu();
            skips_shallow_first.push(feat.clone());
        }

        let deep = self.cfg.deepest_resolution();
        let flat = self.cfg.refine_channels * deep * deep;
        let flattened = feat.reshape(&[batch, flat])?;
        let latent = self
            .mlp_out
            .forward(p, &self.mlp_in.forward(p, &flattened)?.gelu())?;

        skips_shallow_first.reverse();
        Ok((
            FeatureBundle {
                skips: skips_shallow_first,
                latent,
            },
            stats,
        ))
    }
}
