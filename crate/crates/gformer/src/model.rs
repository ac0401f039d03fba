//! The full restoration network: U-shaped wiring of encoder, feature
//! modulator, and generative prior blocks.

use tensor_core::{Scalar, Tensor};

use crate::attention::AttentionStats;
use crate::config::ModelConfig;
use crate::encoder::{Encoder, FeatureBundle};
use crate::error::{GformerError, Result};
use crate::generator::GeneratorBlocks;
use crate::modulator::Modulator;
use crate::params::{ParamLayout, ParamSet, Bound};

pub struct ForwardOutput<T: Scalar> {
    /// Restored image, (B,3,R,R), unclamped.
    pub restored: Tensor<T>,
    /// One intermediate RGB per level, deepest-first, before prior injection.
    pub pyramid: Vec<Tensor<T>>,
    pub latent: Tensor<T>,
    pub attention: AttentionStats,
}

pub struct Gformer {
    pub cfg: ModelConfig,
    pub encoder: Encoder,
    pub generator: GeneratorBlocks,
    pub modulator: Modulator,
    layout: ParamLayout,
}

impl Gformer {
    pub fn new(cfg: ModelConfig) -> Result<Gformer> {
        cfg.validate()?;
        let mut layout = ParamLayout::default();
        let encoder = Encoder::new(&mut layout, &cfg);
        let generator = GeneratorBlocks::new(&mut layout, &cfg);
        let modulator = Modulator::new(&mut layout, &cfg);
        Ok(Gformer {
            cfg,
            encoder,
            generator,
            modulator,
            layout,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn init_params<T: Scalar>(&self, seed: u64) -> ParamSet<T> {
        self.layout.init_params(seed)
    }

    /// Encode, fuse, generate, and modulate level by level.
    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<ForwardOutput<T>> {
        let (bundle, attention) = self.encoder.forward(p, x)?;
        let FeatureBundle { skips, latent } = bundle;
        if skips.len() != self.cfg.levels() {
            return Err(GformerError::Config(format!(
                "encoder produced {} skips for {} generator blocks",
                skips.len(),
                self.cfg.levels()
            )));
        }
        let batch = x.shape()[0];
        let mut pyramid = Vec::with_capacity(skips.len());
        let mut fusion_state = self.modulator.latent_to_base(p, &latent)?;
        let mut gen_state: Option<Tensor<T>> = None;
        for (level, skip) in skips.iter().enumerate() {
            let fusion = self.modulator.fuse(p, level, &fusion_state, skip)?;
            pyramid.push(self.modulator.to_rgb(p, level, &fusion)?);
            let gen_in = match gen_state {
                None => self.generator.const_input(p, batch)?,
                Some(prev) => prev.upsample_nearest2()?,
            };
            let f_g = self
                .generator
                .modulated_conv(p, level, &gen_in, &latent, true)?
                .gelu();
            let f_out = self.modulator.modulate(p, level, &f_g, &fusion)?;
            gen_state = Some(f_out);
            fusion_state = fusion;
        }
        let restored = self
            .modulator
            .final_rgb(p, &gen_state.expect("at least one level"))?;
        Ok(ForwardOutput {
            restored,
            pyramid,
            latent,
            attention,
        })
    }
}
