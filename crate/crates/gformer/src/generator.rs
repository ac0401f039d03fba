//! Style-modulated generator blocks: a learned constant input at the
//! deepest resolution, per-level affine styles from the latent code, and
//! weight-demodulated 3x3 convolutions. No noise injection, so outputs are
//! a pure function of (weights, latent).

use tensor_core::{Scalar, Tensor};

use crate::config::ModelConfig;
use crate::error::{GformerError, Result};
use crate::layers::LinearLayer;
use crate::params::{Bound, Init, ParamLayout};

const DEMOD_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GenLevel {
    style: LinearLayer,
    w: String,
    b: String,
    pub cin: usize,
    pub cout: usize,
}

pub struct GeneratorBlocks {
    cfg: ModelConfig,
    const_input: String,
    pub levels: Vec<GenLevel>,
    prior_rgb_w: String,
    prior_rgb_b: String,
}

impl GeneratorBlocks {
    pub fn new(layout: &mut ParamLayout, cfg: &ModelConfig) -> GeneratorBlocks {
        let dec = cfg.decoder_channels();
        let deep = cfg.deepest_resolution();
        let const_input = "gen.const".to_string();
        layout.add(&const_input, &[1, dec[0], deep, deep], Init::Normal(1.0));
        let mut levels = Vec::with_capacity(cfg.levels());
        for (i, &cout) in dec.iter().enumerate() {
            let cin = if i == 0 { dec[0] } else { dec[i - 1] };
            // style bias starts at one so modulation is near-identity
            let style = LinearLayer::new(
                layout,
                &format!("gen.l{i}.style"),
                cfg.latent_dim,
                cin,
                Init::Ones,
            );
            let w = format!("gen.l{i}.conv.w");
            let b = format!("gen.l{i}.conv.b");
            layout.add(&w, &[cout, cin, 3, 3], Init::FanIn(cin * 9));
            layout.add(&b, &[cout], Init::Zeros);
            levels.push(GenLevel {
                style,
                w,
                b,
                cin,
                cout,
            });
        }
        let prior_rgb_w = "gen.prior_rgb.w".to_string();
        let prior_rgb_b = "gen.prior_rgb.b".to_string();
        layout.add(&prior_rgb_w, &[3, dec[cfg.levels() - 1], 1, 1], Init::FanIn(dec[cfg.levels() - 1]));
        layout.add(&prior_rgb_b, &[3], Init::Const(0.5));
        GeneratorBlocks {
            cfg: cfg.clone(),
            const_input,
            levels,
            prior_rgb_w,
            prior_rgb_b,
        }
    }

    /// The learned constant map broadcast over the batch.
    pub fn const_input<T: Scalar>(&self, p: &Bound<T>, batch: usize) -> Result<Tensor<T>> {
        Ok(p.get(&self.const_input).repeat_batch(batch)?)
    }

    /// Style-modulated, optionally weight-demodulated convolution.
    ///
    /// Modulation scales input channels by the per-sample style, which is
    /// algebraically identical to scaling the weights; demodulation then
    /// rescales each output channel so the effective per-sample weight has
    /// unit norm.
    pub fn modulated_conv<T: Scalar>(
        &self,
        p: &Bound<T>,
        level: usize,
        x: &Tensor<T>,
        latent: &Tensor<T>,
        demodulate: bool,
    ) -> Result<Tensor<T>> {
        let lv = &self.levels[level];
        if x.shape()[1] != lv.cin {
            return Err(GformerError::Config(format!(
                "generator level {level} expects {} input channels, got {}",
                lv.cin,
                x.shape()[1]
            )));
        }
        if latent.shape().len() != 2 || latent.shape()[1] != self.cfg.latent_dim {
            return Err(GformerError::Config(format!(
                "style source must be (B,{}), got {:?}",
                self.cfg.latent_dim,
                latent.shape()
            )));
        }
        let style = lv.style.forward(p, latent)?; // (B, cin)
        let w = p.get(&lv.w);
        let modulated_in = x.scale_channels(&style)?;
        let mut y = modulated_in.conv2d(w, 1, 1)?;
        if demodulate {
            // d[b,o] = rsqrt(sum_{i,k} (w[o,i,k] * s[b,i])^2 + eps)
            let cout = lv.cout;
            let cin = lv.cin;
            let wsq = w
                .mul(w)?
                .reshape(&[cout * cin, 9])?
                .matmul(&Tensor::ones(&[9, 1]))?
                .reshape(&[cout, cin])?;
            let s2 = style.mul(&style)?; // (B, cin)
            let v = s2.matmul(&wsq.transpose2()?)?; // (B, cout)
            let d = v.add_scalar(T::from_f64_c(DEMOD_EPS)).rsqrt();
            y = y.scale_channels(&d)?;
        }
        Ok(y.add_bias_channel(p.get(&lv.b))?)
    }

    /// Full prior synthesis from latent codes alone: const input, modulated
    /// blocks with x2 upsampling between levels, and the RGB head.
    pub fn prior_forward<T: Scalar>(
        &self,
        p: &Bound<T>,
        latent: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let batch = latent.shape()[0];
        let mut x = self.const_input(p, batch)?;
        for level in 0..self.levels.len() {
            if level > 0 {
                x = x.upsample_nearest2()?;
            }
            x = self
                .modulated_conv(p, level, &x, latent, true)?
                .gelu();
        }
        self.rgb_head(p, &x)
    }

    /// 1x1 head mapping the last feature map to a 3-channel image.
    pub fn rgb_head<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.pointwise_conv(p.get(&self.prior_rgb_w))?
            .add_bias_channel(p.get(&self.prior_rgb_b))?)
    }
}
