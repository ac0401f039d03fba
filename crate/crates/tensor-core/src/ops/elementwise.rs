use crate::counter::add_macs;
use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

pub(crate) fn gelu_scalar<T: Scalar>(x: T) -> T {
    let c = T::from_f64_c(0.7978845608028654); // sqrt(2/pi)
    let a = T::from_f64_c(0.044715);
    let half = T::from_f64_c(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (T::one() + u.tanh())
}

pub(crate) fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let c = T::from_f64_c(0.7978845608028654);
    let a = T::from_f64_c(0.044715);
    let half = T::from_f64_c(0.5);
    let three = T::from_f64_c(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + three * a * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

pub(crate) fn softplus_scalar<T: Scalar>(x: T) -> T {
    // max(x, 0) + ln(1 + exp(-|x|)) avoids overflow on either side.
    x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
}

pub(crate) fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            Op::Add(self.clone(), rhs.clone()),
        ))
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, rhs)?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            Op::Sub(self.clone(), rhs.clone()),
        ))
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("mul", self, rhs)?;
        add_macs(self.numel() as u64);
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            Op::Mul(self.clone(), rhs.clone()),
        ))
    }

    pub fn neg_t(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&a| -a).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::Neg(self.clone()))
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        let data = self.data().iter().map(|&a| a + c).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::AddScalar(self.clone(), c))
    }

    pub fn mul_scalar(&self, c: T) -> Tensor<T> {
        let data = self.data().iter().map(|&a| a * c).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::MulScalar(self.clone(), c))
    }

    /// Multiply by a one-element tensor (e.g. a learnable scale).
    pub fn mul_scalar_tensor(&self, s: &Tensor<T>) -> Result<Tensor<T>> {
        if s.numel() != 1 {
            return Err(TensorError::InvalidArg {
                op: "mul_scalar_tensor",
                msg: format!("scale must have one element, got shape {:?}", s.shape()),
            });
        }
        let c = s.data()[0];
        add_macs(self.numel() as u64);
        let data = self.data().iter().map(|&a| a * c).collect();
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            Op::MulScalarTensor(self.clone(), s.clone()),
        ))
    }

    /// |x|, with subgradient 0 at the kink.
    pub fn abs_t(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&a| a.abs()).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::Abs(self.clone()))
    }

    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        let data = self
            .data()
            .iter()
            .map(|&a| if a >= T::zero() { a } else { a * slope })
            .collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            Op::LeakyRelu(self.clone(), slope),
        )
    }

    /// Tanh-form GELU.
    pub fn gelu(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&a| gelu_scalar(a)).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::Gelu(self.clone()))
    }

    /// ln(1 + exp(x)), overflow-safe.
    pub fn softplus(&self) -> Tensor<T> {
        let data = self.data().iter().map(|&a| softplus_scalar(a)).collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::Softplus(self.clone()))
    }

    /// x^(-1/2) for strictly positive x.
    pub fn rsqrt(&self) -> Tensor<T> {
        let data = self
            .data()
            .iter()
            .map(|&a| T::one() / a.sqrt())
            .collect();
        Tensor::from_op(data, self.shape().to_vec(), Op::Rsqrt(self.clone()))
    }
}
