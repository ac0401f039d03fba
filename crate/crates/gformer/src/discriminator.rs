//! Convolutional discriminator: strided stack halving the resolution down
//! to 4x4, then a linear head to a single logit per image.

use tensor_core::{Scalar, Tensor};

use crate::error::{GformerError, Result};
use crate::layers::{Conv2dLayer, LinearLayer};
use crate::params::{Bound, Init, ParamLayout};

pub struct Discriminator {
    input_resolution: usize,
    convs: Vec<Conv2dLayer>,
    head: LinearLayer,
    head_in: usize,
}

impl Discriminator {
    pub fn new(layout: &mut ParamLayout, input_resolution: usize) -> Discriminator {
        assert!(input_resolution >= 8 && input_resolution.is_power_of_two());
        let mut convs = Vec::new();
        let mut cin = 3usize;
        let mut cout = 16usize;
        let mut res = input_resolution;
        while res > 4 {
            convs.push(Conv2dLayer::new(
                layout,
                &format!("disc.c{}", convs.len()),
                cin,
                cout,
                3,
                2,
                true,
                None,
            ));
            cin = cout;
            cout = (cout * 2).min(128);
            res /= 2;
        }
        let head_in = cin * 16;
        let head = LinearLayer::new(layout, "disc.head", head_in, 1, Init::Zeros);
        Discriminator {
            input_resolution,
            convs,
            head,
            head_in,
        }
    }

    /// One logit per image: (B,3,R,R) -> (B,1).
    pub fn forward<T: Scalar>(&self, p: &Bound<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = x.shape();
        let r = self.input_resolution;
        if shape.len() != 4 || shape[1] != 3 || shape[2] != r || shape[3] != r {
            return Err(GformerError::Config(format!(
                "discriminator expects (B,3,{r},{r}), got {shape:?}"
            )));
        }
        let batch = shape[0];
        let mut feat = x.clone();
        for conv in &self.convs {
            feat = conv.forward(p, &feat)?.gelu();
        }
        let flat = feat.reshape(&[batch, self.head_in])?;
        self.head.forward(p, &flat)
    }
}
