//! Restoration pipeline for degraded iris-like images: a hierarchical
//! transformer encoder feeding a style-modulated generative prior through a
//! channel-split feature modulator, with a parametric degradation
//! synthesizer and a biometric evaluation harness around it.

pub mod attention;
pub mod bench;
pub mod blocks;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod degrade;
pub mod discriminator;
pub mod encoder;
pub mod error;
pub mod evalrun;
pub mod generator;
pub mod image;
pub mod iris;
pub mod layers;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod modulator;
pub mod params;
pub mod perceptual;
pub mod synth;
pub mod train;
pub mod verify;

pub use config::ModelConfig;
pub use error::{GformerError, Result};
pub use model::Gformer;
