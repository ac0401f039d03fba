use crate::error::{Result, TensorError};
use crate::scalar::Scalar;

/// Adam optimizer state for a fixed list of parameter arrays.
///
/// First/second moment buffers shape-match their parameters; the step counter
/// increases by one per update and drives the bias correction.
pub struct AdamState<T: Scalar> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

pub const ADAM_DEFAULT_LR: f64 = 2e-4;

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: T, param_lens: &[usize]) -> Self {
        AdamState {
            lr,
            beta1: T::from_f64_c(0.9),
            beta2: T::from_f64_c(0.999),
            eps: T::from_f64_c(1e-8),
            step: 0,
            m: param_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: param_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }
}

/// One Adam update with bias correction, in place over the parameter arrays.
pub fn adam_step<T: Scalar>(
    params: &mut [Vec<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TensorError::InvalidArg {
            op: "adam_step",
            msg: format!(
                "parameter/gradient/state count mismatch: {}/{}/{}",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs: vec![p.len()],
                rhs: vec![g.len()],
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let bc1 = one - state.beta1.powi(t);
    let bc2 = one - state.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = state.beta1 * m[k] + (one - state.beta1) * gk;
            v[k] = state.beta2 * v[k] + (one - state.beta2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] = p[k] - state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
