//! Finite-difference verification of every backward rule. The checker is
//! the independent oracle; tolerances follow the per-op contracts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{gradcheck, Tensor, GRADCHECK_EPS};

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::var(data, shape).unwrap()
}

/// Offset away from zero so |x| and leaky-relu kinks are not sampled.
fn randn_off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::var(data, shape).unwrap()
}

#[test]
fn gradcheck_of_sum_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = randn(&mut rng, &[6]);
    let err = gradcheck(|t| Ok(t[0].sum()), &[x], GRADCHECK_EPS).unwrap();
    assert!(err < 1e-9, "err={err}");
}

#[test]
fn gradcheck_l1_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = randn_off_zero(&mut rng, &[12]);
    let target = Tensor::from_vec(vec![3.0; 12], &[12]).unwrap();
    let err = gradcheck(
        |t| Ok(t[0].sub(&target)?.abs_t().mean()),
        &[x],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = randn(&mut rng, &[3, 4]);
    let b = randn(&mut rng, &[4, 2]);
    let err = gradcheck(
        |t| Ok(t[0].matmul(&t[1])?.mul(&t[0].matmul(&t[1])?)?.mean()),
        &[a, b],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_conv2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = randn(&mut rng, &[2, 3, 8, 8]);
    let w = randn(&mut rng, &[4, 3, 3, 3]);
    let err = gradcheck(
        |t| {
            let y = t[0].conv2d(&t[1], 1, 1)?;
            Ok(y.mul(&y)?.mean())
        },
        &[x, w],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_conv2d_strided() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = randn(&mut rng, &[1, 2, 6, 6]);
    let w = randn(&mut rng, &[3, 2, 3, 3]);
    let err = gradcheck(
        |t| {
            let y = t[0].conv2d(&t[1], 2, 1)?;
            Ok(y.mul(&y)?.mean())
        },
        &[x, w],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_depthwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = randn(&mut rng, &[1, 4, 6, 6]);
    let w = randn(&mut rng, &[4, 1, 3, 3]);
    let err = gradcheck(
        |t| {
            let y = t[0].depthwise_conv2d(&t[1])?;
            Ok(y.mul(&y)?.mean())
        },
        &[x, w],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = randn(&mut rng, &[2, 3, 4, 4]);
    let w = randn(&mut rng, &[5, 3, 1, 1]);
    let err = gradcheck(
        |t| {
            let y = t[0].pointwise_conv(&t[1])?;
            Ok(y.mul(&y)?.mean())
        },
        &[x, w],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_layernorm() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = randn(&mut rng, &[2, 5, 3, 3]);
    let gain = randn(&mut rng, &[5]);
    let bias = randn(&mut rng, &[5]);
    let err = gradcheck(
        |t| {
            let y = t[0].layernorm(&t[1], &t[2])?;
            Ok(y.mul(&y)?.mean())
        },
        &[x, gain, bias],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = randn(&mut rng, &[2, 6]);
    let sel = Tensor::from_vec((0..12).map(|i| (i as f64 * 0.31).sin()).collect(), &[2, 6]).unwrap();
    let err = gradcheck(
        |t| Ok(t[0].softmax(1)?.mul(&sel)?.mean()),
        &[x],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_bias_scale_slice_concat() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = randn(&mut rng, &[2, 4, 3, 3]);
    let cb = randn(&mut rng, &[4]);
    let s = randn(&mut rng, &[2, 4]);
    let err = gradcheck(
        |t| {
            let y = t[0].add_bias_channel(&t[1])?.scale_channels(&t[2])?;
            let lo = y.slice_channels(0, 2)?;
            let hi = y.slice_channels(2, 2)?;
            let z = lo.concat_channels(&hi)?;
            Ok(z.mul(&z)?.mean())
        },
        &[x, cb, s],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_unary_stack() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = randn_off_zero(&mut rng, &[10]);
    let err = gradcheck(
        |t| {
            let y = t[0].gelu().softplus().leaky_relu(0.2);
            let z = y.add_scalar(1.5).rsqrt();
            Ok(z.mean())
        },
        &[x],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_l2norm_cols_and_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = randn(&mut rng, &[5, 3]);
    let sel = Tensor::from_vec((0..15).map(|i| (i as f64 * 0.7).cos()).collect(), &[3, 5]).unwrap();
    let err = gradcheck(
        |t| Ok(t[0].l2norm_cols(1e-12)?.transpose2()?.mul(&sel)?.mean()),
        &[x],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_resize_and_batch_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = randn(&mut rng, &[1, 2, 4, 4]);
    let err = gradcheck(
        |t| {
            let y = t[0].upsample_nearest2()?.downsample_area(4)?;
            let z = y.repeat_batch(1)?.slice_batch(0)?;
            Ok(z.mul(&z)?.mean())
        },
        &[x],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_concat_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let a = randn(&mut rng, &[1, 2, 3, 3]);
    let b = randn(&mut rng, &[2, 2, 3, 3]);
    let err = gradcheck(
        |t| {
            let z = Tensor::concat_batch(&[t[0].clone(), t[1].clone()])?;
            Ok(z.mul(&z)?.mean())
        },
        &[a, b],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_mul_scalar_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = randn(&mut rng, &[3, 3]);
    let s = randn(&mut rng, &[1]);
    let err = gradcheck(
        |t| Ok(t[0].mul_scalar_tensor(&t[1])?.softmax(1)?.mul(&t[0])?.mean()),
        &[x, s],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-6, "err={err}");
}

#[test]
fn gradcheck_composite_chain() {
    // conv -> layernorm -> softmax -> L1, the full composite contract.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = randn(&mut rng, &[1, 3, 5, 5]);
    let w = randn(&mut rng, &[4, 3, 3, 3]);
    let gain = randn(&mut rng, &[4]);
    let bias = randn(&mut rng, &[4]);
    // Alternating 0/1 target: softmax outputs live strictly inside (0,1),
    // so residuals change sign across elements and never hit the L1 kink.
    let target =
        Tensor::from_vec((0..100).map(|i| (i % 2) as f64).collect(), &[1, 4, 5, 5]).unwrap();
    let err = gradcheck(
        |t| {
            let y = t[0]
                .conv2d(&t[1], 1, 1)?
                .layernorm(&t[2], &t[3])?
                .softmax(1)?;
            Ok(y.sub(&target)?.abs_t().mean())
        },
        &[x, w, gain, bias],
        GRADCHECK_EPS,
    )
    .unwrap();
    assert!(err <= 1e-5, "err={err}");
}
