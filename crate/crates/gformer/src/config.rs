use crate::error::{GformerError, Result};

/// Full architectural hyperparameters.
///
/// Transformer levels run shallow-to-deep with per-level heads/channels; the
/// convolutional refinement levels that follow share one channel width. The
/// decoder mirrors the encoder schedule, so the number of generator blocks
/// equals `levels_transformer + levels_conv_refine`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_resolution: usize,
    pub levels_transformer: usize,
    pub levels_conv_refine: usize,
    /// Attention heads per transformer level, shallow first.
    pub heads: Vec<usize>,
    /// Channels per transformer level, shallow first.
    pub channels: Vec<usize>,
    /// Channel width of every conv-refinement level.
    pub refine_channels: usize,
    pub latent_dim: usize,
    /// Feed-forward channel multiplication coefficient.
    pub ffn_expansion: f64,
    /// Fraction of channels left untouched by the channel-split transform.
    pub split_fraction: f64,
    /// Initial value of the learnable attention scale, per head.
    pub theta_init: f64,
}

impl ModelConfig {
    pub fn preset(name: &str) -> Result<ModelConfig> {
        let cfg = match name {
            "paper-256" => ModelConfig {
                input_resolution: 256,
                levels_transformer: 4,
                levels_conv_refine: 3,
                heads: vec![1, 2, 4, 8],
                channels: vec![64, 128, 256, 512],
                refine_channels: 512,
                latent_dim: 512,
                ffn_expansion: 2.66,
                split_fraction: 0.5,
                theta_init: 1.0,
            },
            "toy-64" => ModelConfig {
                input_resolution: 64,
                levels_transformer: 2,
                levels_conv_refine: 2,
                heads: vec![1, 2],
                channels: vec![8, 16],
                refine_channels: 16,
                latent_dim: 32,
                ffn_expansion: 2.66,
                split_fraction: 0.5,
                theta_init: 1.0,
            },
            other => {
                return Err(GformerError::Config(format!(
                    "unknown preset '{other}' (available: paper-256, toy-64)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Total level count == generator block count.
    pub fn levels(&self) -> usize {
        self.levels_transformer + self.levels_conv_refine
    }

    /// Resolution of the deepest feature map (the first generator input).
    pub fn deepest_resolution(&self) -> usize {
        self.input_resolution >> (self.levels() - 1)
    }

    /// Encoder channel widths, shallow first.
    pub fn encoder_channels(&self) -> Vec<usize> {
        let mut out = self.channels.clone();
        out.extend(std::iter::repeat(self.refine_channels).take(self.levels_conv_refine));
        out
    }

    /// Skip / decoder channel widths, deepest first (index 0 is the
    /// deepest level, matching the generator block order).
    pub fn decoder_channels(&self) -> Vec<usize> {
        let mut out = self.encoder_channels();
        out.reverse();
        out
    }

    /// Skip resolutions deepest first: deepest * 2^(i).
    pub fn skip_resolutions(&self) -> Vec<usize> {
        let base = self.deepest_resolution();
        (0..self.levels()).map(|i| base << i).collect()
    }

    /// Feed-forward hidden width for a level of `c` channels, rounded to the
    /// nearest integer.
    pub fn ffn_hidden(&self, c: usize) -> usize {
        (self.ffn_expansion * c as f64).round() as usize
    }

    /// Channel split point: floor(c * split_fraction) channels pass through
    /// untouched, the remainder is modulated.
    pub fn split_point(&self, c: usize) -> usize {
        (c as f64 * self.split_fraction).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GformerError::Config(msg));
        if self.levels_transformer == 0 || self.levels_conv_refine == 0 {
            return fail("need at least one transformer and one refinement level".into());
        }
        if self.heads.len() != self.levels_transformer || self.channels.len() != self.levels_transformer {
            return fail(format!(
                "heads ({}) and channels ({}) must list one entry per transformer level ({})",
                self.heads.len(),
                self.channels.len(),
                self.levels_transformer
            ));
        }
        for (c, h) in self.channels.iter().zip(&self.heads) {
            if *h == 0 || c % h != 0 {
                return fail(format!("channels {c} not divisible by heads {h}"));
            }
        }
        let shift = self.levels() - 1;
        if self.input_resolution == 0 || self.input_resolution % (1 << shift) != 0 {
            return fail(format!(
                "input resolution {} not divisible by 2^{} levels",
                self.input_resolution, shift
            ));
        }
        if self.deepest_resolution() < 4 {
            return fail(format!(
                "deepest feature map {}x{} is smaller than 4x4",
                self.deepest_resolution(),
                self.deepest_resolution()
            ));
        }
        if self.refine_channels == 0 || self.latent_dim == 0 {
            return fail("refine_channels and latent_dim must be positive".into());
        }
        if self.ffn_expansion <= 0.0 {
            return fail("ffn_expansion must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return fail(format!("split_fraction {} outside [0,1]", self.split_fraction));
        }
        Ok(())
    }

    /// Flat key=value serialization, one pair per line.
    pub fn to_kv(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "input_resolution={}\nlevels_transformer={}\nlevels_conv_refine={}\nheads={}\nchannels={}\nrefine_channels={}\nlatent_dim={}\nffn_expansion={}\nsplit_fraction={}\ntheta_init={}\n",
            self.input_resolution,
            self.levels_transformer,
            self.levels_conv_refine,
            list(&self.heads),
            list(&self.channels),
            self.refine_channels,
            self.latent_dim,
            self.ffn_expansion,
            self.split_fraction,
            self.theta_init,
        )
    }

    pub fn from_kv(text: &str) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::preset("toy-64")?;
        let mut seen = std::collections::HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                GformerError::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            seen.insert(key.to_string());
            cfg.apply_kv(key, value)?;
        }
        let required = [
            "input_resolution",
            "levels_transformer",
            "levels_conv_refine",
            "heads",
            "channels",
            "refine_channels",
            "latent_dim",
        ];
        for key in required {
            if !seen.contains(key) {
                return Err(GformerError::Config(format!("missing key '{key}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a single key=value override.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| GformerError::Config(format!("invalid {what} '{value}'"));
        let parse_usize = |v: &str, what: &str| v.parse::<usize>().map_err(|_| bad(what));
        let parse_f64 = |v: &str, what: &str| v.parse::<f64>().map_err(|_| bad(what));
        let parse_list = |v: &str, what: &str| -> Result<Vec<usize>> {
            v.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad(what)))
                .collect()
        };
        match key {
            "input_resolution" => self.input_resolution = parse_usize(value, key)?,
            "levels_transformer" => self.levels_transformer = parse_usize(value, key)?,
            "levels_conv_refine" => self.levels_conv_refine = parse_usize(value, key)?,
            "heads" => self.heads = parse_list(value, key)?,
            "channels" => self.channels = parse_list(value, key)?,
            "refine_channels" => self.refine_channels = parse_usize(value, key)?,
            "latent_dim" => self.latent_dim = parse_usize(value, key)?,
            "ffn_expansion" => self.ffn_expansion = parse_f64(value, key)?,
            "split_fraction" => self.split_fraction = parse_f64(value, key)?,
            "theta_init" => self.theta_init = parse_f64(value, key)?,
            other => {
                return Err(GformerError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_matches_published_schedule() {
        let cfg = ModelConfig::preset("paper-256").unwrap();
        assert_eq!(cfg.heads, vec![1, 2, 4, 8]);
        assert_eq!(cfg.channels, vec![64, 128, 256, 512]);
        assert_eq!(cfg.levels(), 7);
        assert_eq!(cfg.deepest_resolution(), 4);
        assert_eq!(cfg.skip_resolutions(), vec![4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(
            cfg.decoder_channels(),
            vec![512, 512, 512, 512, 256, 128, 64]
        );
        assert_eq!(cfg.latent_dim, 512);
    }

    #[test]
    fn toy_preset_has_four_levels() {
        let cfg = ModelConfig::preset("toy-64").unwrap();
        assert_eq!(cfg.levels(), 4);
        assert_eq!(cfg.skip_resolutions(), vec![8, 16, 32, 64]);
    }

    #[test]
    fn ffn_hidden_width_rounds_to_nearest() {
        let cfg = ModelConfig::preset("paper-256").unwrap();
        assert_eq!(cfg.ffn_hidden(64), 170); // 2.66 * 64 = 170.24
    }

    #[test]
    fn kv_roundtrip() {
        let cfg = ModelConfig::preset("paper-256").unwrap();
        let parsed = ModelConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn invalid_heads_rejected() {
        let mut cfg = ModelConfig::preset("toy-64").unwrap();
        cfg.heads = vec![3, 2]; // 8 % 3 != 0
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(ModelConfig::preset("huge-1024").is_err());
    }
}
