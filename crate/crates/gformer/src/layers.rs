//! Thin layer wrappers tying parameter names to their forward ops.

use tensor_core::{Scalar, Tensor};

use crate::error::Result;
use crate::params::{Bound, Init, ParamLayout};

#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    w: String,
    b: Option<String>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2dLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        bias: bool,
        w_init: Option<Init>,
    ) -> Conv2dLayer {
        let w = format!("{name}.w");
        layout.add(&w, &[cout, cin, k, k], w_init.unwrap_or(Init::FanIn(cin * k * k)));
        let b = bias.then(|| {
            let b = format!("{name}.b");
            layout.add(&b, &[cout], Init::Zeros);
            b
        });
        Conv2dLayer {
            w,
            b,
            stride,
            pad: k / 2,
        }
    }

    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.conv2d(p.get(&self.w), self.stride, self.pad)?;
        if let Some(b) = &self.b {
            y = y.add_bias_channel(p.get(b))?;
        }
        Ok(y)
    }

    pub fn weight_name(&self) -> &str {
        &self.w
    }
}

#[derive(Debug, Clone)]
pub struct DepthwiseLayer {
    w: String,
    b: Option<String>,
}

impl DepthwiseLayer {
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        channels: usize,
        k: usize,
        bias: bool,
    ) -> DepthwiseLayer {
        let w = format!("{name}.w");
        layout.add(&w, &[channels, 1, k, k], Init::FanIn(k * k));
        let b = bias.then(|| {
            let b = format!("{name}.b");
            layout.add(&b, &[channels], Init::Zeros);
            b
        });
        DepthwiseLayer { w, b }
    }

    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.depthwise_conv2d(p.get(&self.w))?;
        if let Some(b) = &self.b {
            y = y.add_bias_channel(p.get(b))?;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone)]
pub struct LinearLayer {
    w: String,
    b: String,
}

impl LinearLayer {
    pub fn new(
        layout: &mut ParamLayout,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias_init: Init,
    ) -> LinearLayer {
        let w = format!("{name}.w");
        let b = format!("{name}.b");
        layout.add(&w, &[fan_in, fan_out], Init::FanIn(fan_in));
        layout.add(&b, &[fan_out], bias_init);
        LinearLayer { w, b }
    }

    /// x: (B, fan_in) -> (B, fan_out)
    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.matmul(p.get(&self.w))?.add_bias_row(p.get(&self.b))?)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormLayer {
    gain: String,
    bias: String,
}

impl LayerNormLayer {
    pub fn new(layout: &mut ParamLayout, name: &str, channels: usize) -> LayerNormLayer {
        let gain = format!("{name}.gain");
        let bias = format!("{name}.bias");
        layout.add(&gain, &[channels], Init::Ones);
        layout.add(&bias, &[channels], Init::Zeros);
        LayerNormLayer { gain, bias }
    }

    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.layernorm(p.get(&self.gain), p.get(&self.bias))?)
    }
}
