//! Frozen feature extractor standing in for a pretrained perceptual
//! network: five strided convolutions with fixed seeded weights, never
//! trained. Gradients flow through it into the image being scored.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tensor_core::{Scalar, Tensor};

use crate::error::Result;

/// Seed fixing the extractor weights for every run.
const EXTRACTOR_SEED: u64 = 0x5eed_fea7;

pub struct PerceptualExtractor<T: Scalar> {
    weights: Vec<Tensor<T>>,
}

pub const EXTRACTOR_CHANNELS: [usize; 5] = [8, 16, 32, 64, 128];

impl<T: Scalar> PerceptualExtractor<T> {
    pub fn new() -> PerceptualExtractor<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(EXTRACTOR_SEED);
        let mut weights = Vec::with_capacity(EXTRACTOR_CHANNELS.len());
        let mut cin = 3usize;
        for &cout in &EXTRACTOR_CHANNELS {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let dist = Normal::new(0.0f64, std).expect("valid std");
            let data: Vec<T> = (0..cout * cin * 9)
                .map(|_| T::from_f64_c(dist.sample(&mut rng)))
                .collect();
            weights.push(Tensor::from_vec(data, &[cout, cin, 3, 3]).expect("kernel shape"));
            cin = cout;
        }
        PerceptualExtractor { weights }
    }

    /// Feature maps of all five layers.
    pub fn features(&self, img: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut out = Vec::with_capacity(self.weights.len());
        let mut x = img.clone();
        for w in &self.weights {
            x = x.conv2d(w, 2, 1)?.gelu();
            out.push(x.clone());
        }
        Ok(out)
    }
}

impl<T: Scalar> Default for PerceptualExtractor<T> {
    fn default() -> Self {
        Self::new()
    }
}
