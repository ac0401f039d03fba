//! The four training objectives and the discriminator's loss. Component
//! values are logged as weighted contributions so the total is exactly
//! their sum.

use tensor_core::{Scalar, Tensor};

use crate::error::{GformerError, Result};
use crate::perceptual::PerceptualExtractor;

/// Balancing weights of the total objective; the pyramid term is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub perceptual: f64,
    pub adversarial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            l1: 0.1,
            perceptual: 1.0,
            adversarial: 0.1,
        }
    }
}

/// Weighted contributions per component; `total` is exactly their sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossParts {
    pub l1: f64,
    pub perceptual: f64,
    pub adversarial: f64,
    pub pyramid: f64,
    pub total: f64,
}

/// Mean absolute difference.
pub fn l1_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(GformerError::Eval(format!(
            "l1 shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.sub(b)?.abs_t().mean())
}

/// Mean L1 over the concatenated features of all extractor layers.
pub fn perceptual_loss<T: Scalar>(
    phi: &PerceptualExtractor<T>,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(GformerError::Eval(format!(
            "perceptual shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let fa = phi.features(a)?;
    let fb = phi.features(b)?;
    let mut acc: Option<Tensor<T>> = None;
    let mut count = 0usize;
    for (x, y) in fa.iter().zip(&fb) {
        count += x.numel();
        let s = x.sub(y)?.abs_t().sum();
        acc = Some(match acc {
            None => s,
            Some(t) => t.add(&s)?,
        });
    }
    Ok(acc
        .expect("extractor has layers")
        .mul_scalar(T::from_f64_c(1.0 / count as f64)))
}

/// Generator-side adversarial term: mean softplus(-D(fake)).
pub fn adversarial_loss_g<T: Scalar>(d_logit_fake: &Tensor<T>) -> Tensor<T> {
    d_logit_fake.neg_t().softplus().mean()
}

/// Non-saturating logistic discriminator loss:
/// mean softplus(-D(real)) + mean softplus(D(fake)).
pub fn discriminator_loss<T: Scalar>(
    d_logit_real: &Tensor<T>,
    d_logit_fake: &Tensor<T>,
) -> Result<Tensor<T>> {
    Ok(d_logit_real
        .neg_t()
        .softplus()
        .mean()
        .add(&d_logit_fake.softplus().mean())?)
}

/// Sum over levels of the mean L1 between each intermediate RGB and the
/// ground truth area-downsampled to that level's resolution.
pub fn pyramid_loss<T: Scalar>(pyramid: &[Tensor<T>], y: &Tensor<T>) -> Result<Tensor<T>> {
    if pyramid.is_empty() {
        return Err(GformerError::Eval("empty pyramid".into()));
    }
    let full = y.shape()[2];
    let mut acc: Option<Tensor<T>> = None;
    for level in pyramid {
        let r = level.shape()[2];
        if full % r != 0 {
            return Err(GformerError::Eval(format!(
                "pyramid level {r} does not divide ground truth {full}"
            )));
        }
        let target = y.downsample_area(full / r)?;
        let term = l1_loss(level, &target)?;
        acc = Some(match acc {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    Ok(acc.expect("non-empty"))
}

/// Weighted total objective. Returns the scalar graph node and the
/// component log.
pub fn total_loss<T: Scalar>(
    phi: &PerceptualExtractor<T>,
    y: &Tensor<T>,
    y_hat: &Tensor<T>,
    pyramid: &[Tensor<T>],
    d_logit_fake: &Tensor<T>,
    w: &LossWeights,
) -> Result<(Tensor<T>, LossParts)> {
    let l1 = l1_loss(y, y_hat)?.mul_scalar(T::from_f64_c(w.l1));
    let per = perceptual_loss(phi, y, y_hat)?.mul_scalar(T::from_f64_c(w.perceptual));
    let adv = adversarial_loss_g(d_logit_fake).mul_scalar(T::from_f64_c(w.adversarial));
    let pyr = pyramid_loss(pyramid, y)?;
    let total = l1.add(&per)?.add(&adv)?.add(&pyr)?;
    let parts = LossParts {
        l1: l1.item().to_f64_c(),
        perceptual: per.item().to_f64_c(),
        adversarial: adv.item().to_f64_c(),
        pyramid: pyr.item().to_f64_c(),
        total: total.item().to_f64_c(),
    };
    Ok((total, parts))
}
