use crate::op::Op;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tensor<T> {
    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Tensor<T> {
        let mut acc = T::zero();
        for &v in self.data() {
            acc = acc + v;
        }
        Tensor::from_op(vec![acc], vec![1], Op::Sum(self.clone()))
    }

    /// Mean of all elements, as a scalar tensor.
    pub fn mean(&self) -> Tensor<T> {
        let n = T::from_f64_c(self.numel() as f64);
        let mut acc = T::zero();
        for &v in self.data() {
            acc = acc + v;
        }
        Tensor::from_op(vec![acc / n], vec![1], Op::Mean(self.clone()))
    }
}
