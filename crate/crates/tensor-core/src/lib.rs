//! Minimal dense tensor engine with reverse-mode automatic differentiation.
//!
//! Tensors are immutable values holding a flat buffer plus a shape. Every
//! forward operation optionally records the op that produced it; calling
//! [`Tensor::backward`] on a scalar walks the recorded graph in reverse
//! topological order and accumulates gradients for all leaf variables.
//!
//! The engine is generic over the element type: `f32` is the training
//! precision, `f64` exists for the finite-difference gradient checker.

mod adam;
mod backward;
pub mod counter;
mod error;
mod gradcheck;
mod op;
pub mod ops;
mod scalar;
mod tensor;

pub use adam::{adam_step, AdamState, ADAM_DEFAULT_LR};
pub use backward::Gradients;
pub use error::{Result, TensorError};
pub use gradcheck::{gradcheck, gradcheck_sampled, GRADCHECK_EPS};
pub use op::Op;
pub use scalar::Scalar;
pub use tensor::{Tensor, TensorId};
