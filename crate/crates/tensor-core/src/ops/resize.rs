use super::dims4;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tensor<T> {
    /// Nearest-neighbor x2 upsampling: each pixel replicated 2x2.
    pub fn upsample_nearest2(&self) -> Result<Tensor<T>> {
        let (b, c, h, w) = dims4(self, "upsample_nearest2")?;
        let x = self.data();
        let mut out = vec![T::zero(); b * c * 4 * h * w];
        let (h2, w2) = (2 * h, 2 * w);
        for bc in 0..b * c {
            let src = bc * h * w;
            let dst = bc * h2 * w2;
            for y in 0..h2 {
                let sy = y / 2;
                for xo in 0..w2 {
                    out[dst + y * w2 + xo] = x[src + sy * w + xo / 2];
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, c, h2, w2],
            Op::UpsampleNearest2(self.clone()),
        ))
    }

    /// Area downsampling: each output pixel is the mean of a tau x tau block.
    /// tau = 1 is the identity.
    pub fn downsample_area(&self, tau: usize) -> Result<Tensor<T>> {
        if tau == 0 {
            return Err(TensorError::InvalidArg {
                op: "downsample_area",
                msg: "factor must be >= 1".into(),
            });
        }
        if tau == 1 {
            return Ok(self.clone());
        }
        let (b, c, h, w) = dims4(self, "downsample_area")?;
        if h % tau != 0 || w % tau != 0 {
            return Err(TensorError::InvalidArg {
                op: "downsample_area",
                msg: format!("extent {h}x{w} not divisible by factor {tau}"),
            });
        }
        let (ho, wo) = (h / tau, w / tau);
        let x = self.data();
        let inv = T::one() / T::from_f64_c((tau * tau) as f64);
        let mut out = vec![T::zero(); b * c * ho * wo];
        for bc in 0..b * c {
            let src = bc * h * w;
            let dst = bc * ho * wo;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = T::zero();
                    for dy in 0..tau {
                        let row = src + (oy * tau + dy) * w + ox * tau;
                        for dx in 0..tau {
                            acc = acc + x[row + dx];
                        }
                    }
                    out[dst + oy * wo + ox] = acc * inv;
                }
            }
        }
        Ok(Tensor::from_op(
            out,
            vec![b, c, ho, wo],
            Op::DownsampleArea(self.clone(), tau),
        ))
    }
}
