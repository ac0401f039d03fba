//! Iris feature modulator: fuses skip features with the decoder state,
//! renders per-level RGB pyramid images, and applies the channel-split
//! spatial feature transform to the generator output.

use tensor_core::{Scalar, Tensor};

use crate::config::ModelConfig;
use crate::error::{GformerError, Result};
use crate::layers::{Conv2dLayer, LinearLayer};
use crate::params::{Bound, Init, ParamLayout};

/// Channel-split spatial feature transform: the first `split0` channels of
/// f_g pass through untouched, the rest are scaled by mu and shifted by
/// sigma, and the two parts are concatenated back.
pub fn cs_sft<T: Scalar>(
    f_g: &Tensor<T>,
    mu: &Tensor<T>,
    sigma: &Tensor<T>,
    split0: usize,
) -> Result<Tensor<T>> {
    let c = f_g.shape()[1];
    if split0 > c {
        return Err(GformerError::Config(format!(
            "split point {split0} exceeds {c} channels"
        )));
    }
    let split1 = c - split0;
    if mu.shape() != sigma.shape()
        || mu.shape().len() != 4
        || mu.shape()[1] != split1
        || mu.shape()[0] != f_g.shape()[0]
        || mu.shape()[2] != f_g.shape()[2]
        || mu.shape()[3] != f_g.shape()[3]
    {
        return Err(GformerError::Config(format!(
            "modulation maps must be shaped like the modulated split ({split1} channels), got {:?}",
            mu.shape()
        )));
    }
    if split0 == 0 {
        return Ok(f_g.mul(mu)?.add(sigma)?);
    }
    if split1 == 0 {
        return Ok(f_g.clone());
    }
    let keep = f_g.slice_channels(0, split0)?;
    let modulated = f_g.slice_channels(split0, split1)?.mul(mu)?.add(sigma)?;
    Ok(keep.concat_channels(&modulated)?)
}

struct ModLevel {
    align: Option<Conv2dLayer>,
    fusion: Conv2dLayer,
    to_rgb: Conv2dLayer,
    mu: Conv2dLayer,
    sigma: Conv2dLayer,
}

pub struct Modulator {
    cfg: ModelConfig,
    latent_to_map: LinearLayer,
    levels: Vec<ModLevel>,
    final_rgb: Conv2dLayer,
}

impl Modulator {
    pub fn new(layout: &mut ParamLayout, cfg: &ModelConfig) -> Modulator {
        let dec = cfg.decoder_channels();
        let deep = cfg.deepest_resolution();
        let latent_to_map = LinearLayer::new(
            layout,
            "mod.latent_map",
            cfg.latent_dim,
            dec[0] * deep * deep,
            Init::Zeros,
        );
        let mut levels = Vec::with_capacity(cfg.levels());
        for (i, &c) in dec.iter().enumerate() {
            let align = if i > 0 && dec[i - 1] != c {
                Some(Conv2dLayer::new(
                    layout,
                    &format!("mod.l{i}.align"),
                    dec[i - 1],
                    c,
                    1,
                    1,
                    true,
                    None,
                ))
            } else {
                None
            };
            let fusion = Conv2dLayer::new(
                layout,
                &format!("mod.l{i}.fusion"),
                c,
                c,
                3,
                1,
                true,
                None,
            );
            let to_rgb = Conv2dLayer::new(
                layout,
                &format!("mod.l{i}.to_rgb"),
                c,
                3,
                1,
                1,
                true,
                None,
            );
            let split1 = c - cfg.split_point(c);
            let mu = Conv2dLayer::new(
                layout,
                &format!("mod.l{i}.mu"),
                c,
                split1,
                3,
                1,
                true,
                Some(Init::Normal(0.02)),
            );
            let sigma = Conv2dLayer::new(
                layout,
                &format!("mod.l{i}.sigma"),
                c,
                split1,
                3,
                1,
                true,
                Some(Init::Normal(0.02)),
            );
            levels.push(ModLevel {
                align,
                fusion,
                to_rgb,
                mu,
                sigma,
            });
        }
        let final_rgb = Conv2dLayer::new(
            layout,
            "mod.final_rgb",
            dec[cfg.levels() - 1],
            3,
            1,
            1,
            true,
            None,
        );
        Modulator {
            cfg: cfg.clone(),
            latent_to_map,
            levels,
            final_rgb,
        }
    }

    /// The latent code reshaped to the deepest fusion map (level 0 entry).
    pub fn latent_to_base<T: Scalar>(
        &self,
        p: &Bound<T>,
        latent: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let batch = latent.shape()[0];
        let deep = self.cfg.deepest_resolution();
        let c = self.cfg.decoder_channels()[0];
        Ok(self
            .latent_to_map
            .forward(p, latent)?
            .reshape(&[batch, c, deep, deep])?)
    }

    /// Fuse the previous fusion state with the skip of this level:
    /// conv3x3(upsampled/aligned previous + skip).
    pub fn fuse<T: Scalar>(
        &self,
        p: &Bound<T>,
        level: usize,
        prev: &Tensor<T>,
        skip: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let lv = &self.levels[level];
        let mut carried = if level == 0 {
            prev.clone()
        } else {
            prev.upsample_nearest2()?
        };
        if let Some(align) = &lv.align {
            carried = align.forward(p, &carried)?;
        }
        if carried.shape() != skip.shape() {
            return Err(GformerError::Config(format!(
                "fusion wiring mismatch at level {level}: carried {:?} vs skip {:?}",
                carried.shape(),
                skip.shape()
            )));
        }
        lv.fusion.forward(p, &carried.add(skip)?)
    }

    /// Intermediate RGB rendering of a fusion feature.
    pub fn to_rgb<T: Scalar>(
        &self,
        p: &Bound<T>,
        level: usize,
        fusion: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.levels[level].to_rgb.forward(p, fusion)
    }

    /// Modulate the generator output with mu/sigma derived from the fusion
    /// feature, touching only the second channel split.
    pub fn modulate<T: Scalar>(
        &self,
        p: &Bound<T>,
        level: usize,
        f_g: &Tensor<T>,
        fusion: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let lv = &self.levels[level];
        let mu = lv.mu.forward(p, fusion)?.add_scalar(T::one());
        let sigma = lv.sigma.forward(p, fusion)?;
        let split0 = self.cfg.split_point(f_g.shape()[1]);
        cs_sft(f_g, &mu, &sigma, split0)
    }

    /// Final 1x1 projection of the last modulated feature to RGB.
    pub fn final_rgb<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.final_rgb.forward(p, x)
    }
}
