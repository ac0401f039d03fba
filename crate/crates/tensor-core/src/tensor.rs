use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub u64);

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> TensorId {
    TensorId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
}

pub(crate) struct TensorInner<T: Scalar> {
    pub(crate) id: TensorId,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Arc<Vec<T>>,
    /// Op that produced this tensor; None for leaves and for results that do
    /// not participate in differentiation.
    pub(crate) op: Option<Op<T>>,
    /// Leaf that accumulates a gradient during backward.
    pub(crate) variable: bool,
    /// True when a gradient can flow through this tensor.
    pub(crate) tracked: bool,
}

/// Dense n-dimensional array participating in a reverse-mode graph.
///
/// Image-like data uses batch x channels x height x width layout. Cloning is
/// cheap (reference count); the buffer is immutable after creation.
pub struct Tensor<T: Scalar> {
    pub(crate) inner: Arc<TensorInner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={:?}, var={})",
            self.inner.id.0, self.inner.shape, self.inner.variable
        )
    }
}

impl<T: Scalar> Tensor<T> {
    pub(crate) fn from_op(data: Vec<T>, shape: Vec<usize>, op: Op<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let tracked = op.parents().iter().any(|p| p.inner.tracked);
        Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape,
                data: Arc::new(data),
                op: if tracked { Some(op) } else { None },
                variable: false,
                tracked,
            }),
        }
    }

    /// Leaf tensor that does not require gradients.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::InvalidArg {
                op: "from_vec",
                msg: format!("shape {:?} does not cover {} elements", shape, data.len()),
            });
        }
        Ok(Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape: shape.to_vec(),
                data: Arc::new(data),
                op: None,
                variable: false,
                tracked: false,
            }),
        })
    }

    /// Leaf tensor that accumulates a gradient during backward.
    pub fn var(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let t = Self::from_vec(data, shape)?;
        // Sole owner here, safe to flip the flags in place.
        let mut inner = Arc::try_unwrap(t.inner).ok().expect("fresh tensor");
        inner.variable = true;
        inner.tracked = true;
        Ok(Tensor {
            inner: Arc::new(inner),
        })
    }

    pub fn scalar(v: T) -> Self {
        Self::from_vec(vec![v], &[1]).expect("scalar")
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_vec(vec![T::zero(); shape.iter().product()], shape).expect("zeros")
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::from_vec(vec![T::one(); shape.iter().product()], shape).expect("ones")
    }

    pub fn id(&self) -> TensorId {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.variable
    }

    pub(crate) fn tracked(&self) -> bool {
        self.inner.tracked
    }

    pub(crate) fn op(&self) -> Option<&Op<T>> {
        self.inner.op.as_ref()
    }

    /// Single element of a scalar tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data[0]
    }

    /// Same data, detached from the graph (gradients do not flow through).
    pub fn detach(&self) -> Tensor<T> {
        Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape: self.inner.shape.clone(),
                data: Arc::clone(&self.inner.data),
                op: None,
                variable: false,
                tracked: false,
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.iter().all(|v| v.is_finite())
    }
}

// Graphs can get thousands of nodes deep; dropping them recursively through
// Arc would overflow the stack, so parents are unlinked iteratively.
impl<T: Scalar> Drop for TensorInner<T> {
    fn drop(&mut self) {
        let mut stack: Vec<Op<T>> = Vec::new();
        if let Some(op) = self.op.take() {
            stack.push(op);
        }
        while let Some(op) = stack.pop() {
            for parent in op.into_parents() {
                if let Some(inner) = Arc::into_inner(parent.inner) {
                    let mut inner = inner;
                    if let Some(op) = inner.op.take() {
                        stack.push(op);
                    }
                }
            }
        }
    }
}
