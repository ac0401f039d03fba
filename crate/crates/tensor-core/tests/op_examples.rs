//! Hand-checkable forward values for every op, plus the named error paths.

use tensor_core::{Tensor, TensorError};

fn t64(data: &[f64], shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(data.to_vec(), shape).unwrap()
}

#[test]
fn matmul_identity() {
    let eye = t64(&[1.0, 0.0, 0.0, 1.0], &[2, 2]);
    let m = t64(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
    let out = eye.matmul(&m).unwrap();
    assert_eq!(out.data(), m.data());
}

#[test]
fn matmul_selector_row() {
    let sel = t64(&[1.0, 0.0, 0.0, 0.0], &[2, 2]);
    let m = t64(&[5.0, 6.0, 7.0, 8.0], &[2, 2]);
    let out = sel.matmul(&m).unwrap();
    assert_eq!(out.data(), &[5.0, 6.0, 0.0, 0.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let a = t64(&[1.0; 6], &[2, 3]);
    let b = t64(&[1.0; 8], &[2, 4]);
    let err = a.matmul(&b).unwrap_err();
    match err {
        TensorError::ShapeMismatch { lhs, rhs, .. } => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 4]);
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn conv2d_one_by_one_identity_kernel() {
    let x = t64(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
    let w = t64(&[1.0], &[1, 1, 1, 1]);
    let out = x.conv2d(&w, 1, 0).unwrap();
    assert_eq!(out.shape(), &[1, 1, 2, 2]);
    assert_eq!(out.data(), x.data());
}

#[test]
fn conv2d_averaging_kernel_preserves_constant_interior() {
    let c = 0.37f64;
    let x = Tensor::from_vec(vec![c; 36], &[1, 1, 6, 6]).unwrap();
    let w = Tensor::from_vec(vec![1.0 / 9.0; 9], &[1, 1, 3, 3]).unwrap();
    let out = x.conv2d(&w, 1, 1).unwrap();
    assert_eq!(out.shape(), &[1, 1, 6, 6]);
    // Zero padding: the interior is exactly the constant, the border is not.
    for y in 1..5 {
        for xx in 1..5 {
            assert!((out.data()[y * 6 + xx] - c).abs() < 1e-12);
        }
    }
    assert!(out.data()[0] < c); // corner sees 5 zero-padded taps
}

#[test]
fn conv2d_channel_mismatch() {
    let x = t64(&[0.0; 2 * 3 * 4 * 4], &[2, 3, 4, 4]);
    let w = t64(&[0.0; 4 * 2 * 9], &[4, 2, 3, 3]);
    assert!(matches!(
        x.conv2d(&w, 1, 1),
        Err(TensorError::ShapeMismatch { .. })
    ));
}

#[test]
fn depthwise_delta_kernel_is_identity() {
    let x = t64(&[1.0, -2.0, 3.0, 0.5, 4.0, 5.0, 6.0, 7.0], &[1, 2, 2, 2]);
    let mut k = vec![0.0; 2 * 9];
    k[4] = 1.0; // center of channel 0
    k[9 + 4] = 1.0; // center of channel 1
    let w = t64(&k, &[2, 1, 3, 3]);
    let out = x.depthwise_conv2d(&w).unwrap();
    assert_eq!(out.data(), x.data());
}

#[test]
fn depthwise_channels_stay_separated() {
    // channel 0 nonzero, channel 1 zero; an arbitrary kernel on channel 1
    // must keep output channel 1 zero.
    let mut data = vec![0.0; 2 * 16];
    for v in data.iter_mut().take(16) {
        *v = 1.5;
    }
    let x = t64(&data, &[1, 2, 4, 4]);
    let mut k = vec![0.0; 2 * 9];
    for v in k.iter_mut().skip(9) {
        *v = 0.7;
    }
    let w = t64(&k, &[2, 1, 3, 3]);
    let out = x.depthwise_conv2d(&w).unwrap();
    assert!(out.data()[16..].iter().all(|&v| v == 0.0));
}

#[test]
fn depthwise_kernel_count_mismatch() {
    let x = t64(&[0.0; 3 * 16], &[1, 3, 4, 4]);
    let w = t64(&[0.0; 2 * 9], &[2, 1, 3, 3]);
    assert!(matches!(
        x.depthwise_conv2d(&w),
        Err(TensorError::ShapeMismatch { .. })
    ));
}

#[test]
fn pointwise_identity_matrix() {
    let x = t64(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &[1, 2, 2, 2]);
    let w = t64(&[1.0, 0.0, 0.0, 1.0], &[2, 2, 1, 1]);
    let out = x.pointwise_conv(&w).unwrap();
    assert_eq!(out.data(), x.data());
}

#[test]
fn pointwise_ones_row_sums_channels() {
    let x = t64(&[1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0], &[1, 2, 2, 2]);
    let w = t64(&[1.0, 1.0], &[1, 2, 1, 1]);
    let out = x.pointwise_conv(&w).unwrap();
    assert_eq!(out.data(), &[11.0, 22.0, 33.0, 44.0]);
}

#[test]
fn layernorm_constant_channels_give_zeros() {
    let x = t64(&[3.0; 2 * 4], &[1, 2, 2, 2]);
    let gain = t64(&[1.0, 1.0], &[2]);
    let bias = t64(&[0.0, 0.0], &[2]);
    let out = x.layernorm(&gain, &bias).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn layernorm_symmetric_pair_keeps_unit_values() {
    // channels [1,-1] at every location: mean 0, variance 1
    let x = t64(&[1.0, 1.0, -1.0, -1.0], &[1, 2, 1, 2]);
    let gain = t64(&[1.0, 1.0], &[2]);
    let bias = t64(&[0.0, 0.0], &[2]);
    let out = x.layernorm(&gain, &bias).unwrap();
    for (&o, &i) in out.data().iter().zip(x.data()) {
        assert!((o - i).abs() < 1e-4, "got {o} want ~{i}");
    }
}

#[test]
fn layernorm_rejects_single_channel() {
    let x = t64(&[1.0; 4], &[1, 1, 2, 2]);
    let g = t64(&[1.0], &[1]);
    let b = t64(&[0.0], &[1]);
    assert!(matches!(
        x.layernorm(&g, &b),
        Err(TensorError::DegenerateNorm(1))
    ));
}

#[test]
fn softmax_symmetry_and_forced_values() {
    let x = t64(&[0.0, 0.0], &[2]);
    let out = x.softmax(0).unwrap();
    assert!((out.data()[0] - 0.5).abs() < 1e-12);
    assert!((out.data()[1] - 0.5).abs() < 1e-12);

    let x = t64(&[0.0, 3.0f64.ln()], &[2]);
    let out = x.softmax(0).unwrap();
    assert!((out.data()[0] - 0.25).abs() < 1e-12);
    assert!((out.data()[1] - 0.75).abs() < 1e-12);
}

#[test]
fn softmax_large_inputs_do_not_overflow() {
    let x = t64(&[1000.0, 1000.0], &[2]);
    let out = x.softmax(0).unwrap();
    assert!((out.data()[0] - 0.5).abs() < 1e-12);
    assert!(out.is_finite());
}

#[test]
fn downsample_block_mean() {
    let x = t64(&[1.0, 1.0, 3.0, 3.0], &[1, 1, 2, 2]);
    let out = x.downsample_area(2).unwrap();
    assert_eq!(out.shape(), &[1, 1, 1, 1]);
    assert_eq!(out.data(), &[2.0]);
}

#[test]
fn downsample_factor_one_is_identity() {
    let x = t64(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
    let out = x.downsample_area(1).unwrap();
    assert_eq!(out.data(), x.data());
}

#[test]
fn upsample_then_downsample_roundtrip() {
    let x = t64(&[0.25, -1.5, 2.0, 7.0, 0.0, 1.0], &[1, 1, 2, 3]);
    let out = x.upsample_nearest2().unwrap().downsample_area(2).unwrap();
    assert_eq!(out.data(), x.data());
}

#[test]
fn downsample_rejects_non_divisible_extent() {
    let x = t64(&[0.0; 9], &[1, 1, 3, 3]);
    assert!(x.downsample_area(2).is_err());
}

#[test]
fn backward_of_sum_is_ones() {
    let x = Tensor::var(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let grads = x.sum().backward().unwrap();
    assert_eq!(grads.get(&x).unwrap(), &[1.0, 1.0, 1.0]);
}

#[test]
fn backward_of_half_square_sum_is_input() {
    let x = Tensor::var(vec![1.0f64, -2.0, 3.0], &[3]).unwrap();
    let loss = x.mul(&x).unwrap().sum().mul_scalar(0.5);
    let grads = loss.backward().unwrap();
    let g = grads.get(&x).unwrap();
    for (&gv, &xv) in g.iter().zip(x.data()) {
        assert!((gv - xv).abs() < 1e-12);
    }
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let x = Tensor::var(vec![1.0, 2.0], &[2]).unwrap();
    let y = x.mul_scalar(2.0);
    assert!(matches!(
        y.backward(),
        Err(TensorError::NonScalarLoss(ref s)) if s == &vec![2]
    ));
}

#[test]
fn unused_variables_simply_have_no_gradient_entry() {
    let x = Tensor::var(vec![1.0, 2.0], &[2]).unwrap();
    let unused = Tensor::var(vec![5.0], &[1]).unwrap();
    let grads = x.sum().backward().unwrap();
    assert!(grads.get(&unused).is_none());
}

#[test]
fn dual_consumer_accumulates_both_contributions() {
    // x feeding two products must receive the sum of both gradients,
    // matching the fused single-op reference x * (a + b).
    let xd = vec![0.3f64, -0.7, 1.1, 2.0];
    let ad = vec![1.0, 2.0, 3.0, 4.0];
    let bd = vec![-0.5, 0.25, 0.75, -2.0];

    let x = Tensor::var(xd.clone(), &[4]).unwrap();
    let a = Tensor::from_vec(ad.clone(), &[4]).unwrap();
    let b = Tensor::from_vec(bd.clone(), &[4]).unwrap();
    let loss = x.mul(&a).unwrap().sum().add(&x.mul(&b).unwrap().sum()).unwrap();
    let g_split = loss.backward().unwrap().take(&x).unwrap();

    let x2 = Tensor::var(xd, &[4]).unwrap();
    let ab = a.add(&b).unwrap();
    let g_fused = x2.mul(&ab).unwrap().sum().backward().unwrap().take(&x2).unwrap();

    for (&s, &f) in g_split.iter().zip(&g_fused) {
        assert!((s - f).abs() < 1e-12);
    }
}

#[test]
fn forward_is_bit_deterministic() {
    let data: Vec<f32> = (0..64).map(|i| ((i * 37 + 11) % 97) as f32 * 0.013).collect();
    let run = || {
        let x = Tensor::from_vec(data.clone(), &[1, 4, 4, 4]).unwrap();
        let g = Tensor::from_vec(vec![1.0f32; 4], &[4]).unwrap();
        let b = Tensor::from_vec(vec![0.0f32; 4], &[4]).unwrap();
        let y = x.layernorm(&g, &b).unwrap().softmax(1).unwrap().gelu();
        y.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
