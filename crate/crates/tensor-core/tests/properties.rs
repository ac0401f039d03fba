//! Randomized invariants over the op set.

use proptest::prelude::*;
use tensor_core::Tensor;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_slices_sum_to_one(data in finite_vec(24)) {
        let t = Tensor::from_vec(data, &[2, 3, 4]).unwrap();
        for axis in 0..3 {
            let y = t.softmax(axis).unwrap();
            let shape = y.shape().to_vec();
            let n = shape[axis];
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            for o in 0..outer {
                for j in 0..inner {
                    let mut s = 0.0;
                    for i in 0..n {
                        let v = y.data()[(o * n + i) * inner + j];
                        prop_assert!(v > 0.0 && v < 1.0 + 1e-12);
                        s += v;
                    }
                    prop_assert!((s - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn layernorm_centers_channels(data in finite_vec(2 * 6 * 2 * 2)) {
        let x = Tensor::from_vec(data, &[2, 6, 2, 2]).unwrap();
        let gain = Tensor::ones(&[6]);
        let bias = Tensor::zeros(&[6]);
        let y = x.layernorm(&gain, &bias).unwrap();
        let hw = 4;
        for b in 0..2 {
            for p in 0..hw {
                let mut mean = 0.0;
                for c in 0..6 {
                    mean += y.data()[b * 6 * hw + c * hw + p];
                }
                mean /= 6.0;
                prop_assert!(mean.abs() < 1e-5, "per-location mean {mean}");
            }
        }
    }

    #[test]
    fn upsample_downsample_roundtrip_identity(data in finite_vec(2 * 3 * 4 * 4)) {
        let x = Tensor::from_vec(data, &[2, 3, 4, 4]).unwrap();
        let y = x.upsample_nearest2().unwrap().downsample_area(2).unwrap();
        prop_assert_eq!(y.data(), x.data());
    }

    #[test]
    fn forward_ops_keep_values_finite(data in finite_vec(2 * 4 * 4 * 4)) {
        let x = Tensor::from_vec(data, &[2, 4, 4, 4]).unwrap();
        let gain = Tensor::ones(&[4]);
        let bias = Tensor::zeros(&[4]);
        let y = x
            .layernorm(&gain, &bias).unwrap()
            .gelu()
            .softmax(1).unwrap()
            .abs_t()
            .softplus();
        prop_assert!(y.is_finite());
    }
}
