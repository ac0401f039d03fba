//! Central finite-difference gradient checker. This is the independent
//! oracle every backward rule is verified against; it never touches the
//! analytic path other than to read the gradients it is checking.

use crate::error::Result;
use crate::tensor::Tensor;

/// Default perturbation step.
pub const GRADCHECK_EPS: f64 = 1e-4;

/// Check the analytic gradient of a scalar-valued function against central
/// finite differences on every element of every input, returning the largest
/// relative error max |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
pub fn gradcheck<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let all: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| (0..t.numel()).map(move |ei| (ti, ei)))
        .collect();
    gradcheck_sampled(f, inputs, eps, &all)
}

/// Same as [`gradcheck`] but only perturbs the listed (input, element)
/// coordinates. Inputs must be leaf variables.
pub fn gradcheck_sampled<F>(
    f: F,
    inputs: &[Tensor<f64>],
    eps: f64,
    samples: &[(usize, usize)],
) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let loss = f(inputs)?;
    let grads = loss.backward()?;
    let analytic: Vec<Option<Vec<f64>>> = inputs
        .iter()
        .map(|t| grads.get(t).map(|g| g.to_vec()))
        .collect();

    let mut max_rel = 0.0f64;
    for &(ti, ei) in samples {
        let a = analytic[ti].as_ref().map_or(0.0, |g| g[ei]);

        let eval = |delta: f64| -> Result<f64> {
            let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
            let mut data = inputs[ti].data().to_vec();
            data[ei] += delta;
            probe[ti] = Tensor::var(data, inputs[ti].shape())?;
            Ok(f(&probe)?.item())
        };
        let plus = eval(eps)?;
        let minus = eval(-eps)?;
        let numeric = (plus - minus) / (2.0 * eps);

        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
