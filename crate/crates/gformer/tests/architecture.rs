//! Architecture contracts: attention semantics and complexity, block
//! identities, modulator behavior, and full-model shape/determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{counter, Tensor};

use gformer::attention::{
    channel_head_attention, score_kernel, score_kernels, spatial_head_attention, AttentionLayer,
    SPATIAL_REFERENCE_MAX_TOKENS,
};
use gformer::blocks::{DfnLayer, TransformerBlock};
use gformer::config::ModelConfig;
use gformer::model::Gformer;
use gformer::modulator::cs_sft;
use gformer::params::{ParamLayout, ParamSet};

fn randn32(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).unwrap()
}

#[test]
fn zero_theta_attention_averages_value_channels() {
    // theta = 0 makes every softmax row uniform, so each output channel is
    // the mean over value channels at each token.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = randn32(&mut rng, &[6, 4]);
    let k = randn32(&mut rng, &[6, 4]);
    let v = randn32(&mut rng, &[6, 4]);
    let (out, _) = channel_head_attention(&q, &k, &v, &Tensor::scalar(0.0f32)).unwrap();
    for p in 0..6 {
        let mean: f32 = (0..4).map(|c| v.data()[p * 4 + c]).sum::<f32>() / 4.0;
        for c in 0..4 {
            assert!((out.data()[p * 4 + c] - mean).abs() < 1e-6);
        }
    }
}

#[test]
fn single_pixel_attention_matches_hand_arithmetic() {
    // H=W=1, C=2: Q,K,V are 1x2 rows. Columns normalize to sign, the score
    // is the 2x2 outer product of signs, rows softmax, out = V * S.
    let q = Tensor::from_vec(vec![0.5f32, -2.0], &[1, 2]).unwrap();
    let k = Tensor::from_vec(vec![1.5f32, 0.25], &[1, 2]).unwrap();
    let v = Tensor::from_vec(vec![3.0f32, -1.0], &[1, 2]).unwrap();
    let theta = 0.7f32;
    let (out, stats) = channel_head_attention(&q, &k, &v, &Tensor::scalar(theta)).unwrap();

    // hand evaluation in scalar arithmetic
    let qn = [1.0f32, -1.0]; // 0.5/|0.5|, -2/|-2|
    let kn = [1.0f32, 1.0];
    let beta = [
        qn[0] * kn[0],
        qn[0] * kn[1],
        qn[1] * kn[0],
        qn[1] * kn[1],
    ];
    let row_softmax = |a: f32, b: f32| {
        let (ea, eb) = ((theta * a).exp(), (theta * b).exp());
        (ea / (ea + eb), eb / (ea + eb))
    };
    let (s00, s01) = row_softmax(beta[0], beta[1]);
    let (s10, s11) = row_softmax(beta[2], beta[3]);
    let expected = [
        v.data()[0] * s00 + v.data()[1] * s10,
        v.data()[0] * s01 + v.data()[1] * s11,
    ];
    assert!((out.data()[0] - expected[0]).abs() < 1e-6);
    assert!((out.data()[1] - expected[1]).abs() < 1e-6);
    assert_eq!(stats.score_elems, 4);
}

#[test]
fn channel_score_memory_is_resolution_independent() {
    // heads * (C/heads)^2 scalars at HW in {64, 256, 1024}.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut layout = ParamLayout::default();
    let attn = AttentionLayer::new(&mut layout, "a", 8, 2, 1.0);
    let params: ParamSet<f32> = layout.init_params(3);
    let bound = params.bind();
    let mut elems = Vec::new();
    for side in [8usize, 16, 32] {
        let x = randn32(&mut rng, &[1, 8, side, side]);
        let (_, stats) = attn.dsa(&bound, &x).unwrap();
        elems.push(stats.score_elems);
    }
    assert_eq!(elems[0], 2 * 4 * 4);
    assert_eq!(elems[0], elems[1]);
    assert_eq!(elems[1], elems[2]);
}

#[test]
fn spatial_score_memory_grows_sixteenfold_per_doubling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut layout = ParamLayout::default();
    let attn = AttentionLayer::new(&mut layout, "a", 4, 1, 1.0);
    let params: ParamSet<f32> = layout.init_params(4);
    let bound = params.bind();
    let x8 = randn32(&mut rng, &[1, 4, 8, 8]);
    let x16 = randn32(&mut rng, &[1, 4, 16, 16]);
    let (_, s8) = attn.spatial_reference(&bound, &x8).unwrap();
    let (_, s16) = attn.spatial_reference(&bound, &x16).unwrap();
    assert_eq!(s8.score_elems, 64 * 64);
    assert_eq!(s16.score_elems, 16 * s8.score_elems);
    // channel attention on the same inputs keeps its score constant
    let (_, c8) = attn.dsa(&bound, &x8).unwrap();
    let (_, c16) = attn.dsa(&bound, &x16).unwrap();
    assert_eq!(c8.score_elems, c16.score_elems);
}

#[test]
fn spatial_reference_refuses_big_token_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q = randn32(&mut rng, &[SPATIAL_REFERENCE_MAX_TOKENS + 1, 1]);
    let k = randn32(&mut rng, &[SPATIAL_REFERENCE_MAX_TOKENS + 1, 1]);
    let v = randn32(&mut rng, &[SPATIAL_REFERENCE_MAX_TOKENS + 1, 1]);
    assert!(spatial_head_attention(&q, &k, &v, &Tensor::scalar(1.0f32)).is_err());
}

#[test]
fn two_by_two_single_channel_score_shapes() {
    // 2x2 image, C=1: alpha is 4x4, beta is 1x1.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = randn32(&mut rng, &[4, 1]);
    let k = randn32(&mut rng, &[4, 1]);
    let v = randn32(&mut rng, &[4, 1]);
    let (_, sp) = spatial_head_attention(&q, &k, &v, &Tensor::scalar(1.0f32)).unwrap();
    let (_, ch) = channel_head_attention(&q, &k, &v, &Tensor::scalar(1.0f32)).unwrap();
    assert_eq!(sp.score_elems, 16);
    assert_eq!(ch.score_elems, 1);
}

#[test]
fn measured_score_flops_follow_the_two_laws() {
    // spatial (HW)^2 * C vs channel HW * C^2, exact MAC counts at one head.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (hw, c) in [(64usize, 8usize), (256, 8), (1024, 4)] {
        let q = randn32(&mut rng, &[hw, c]);
        let k = randn32(&mut rng, &[hw, c]);
        let v = randn32(&mut rng, &[hw, c]);
        let (_, ch) = channel_head_attention(&q, &k, &v, &Tensor::scalar(1.0f32)).unwrap();
        assert_eq!(ch.score_macs, (hw * c * c) as u64, "channel law at hw={hw}");
        let (_, sp) = spatial_head_attention(&q, &k, &v, &Tensor::scalar(1.0f32)).unwrap();
        assert_eq!(sp.score_macs, (hw * hw * c) as u64, "spatial law at hw={hw}");
    }
}

#[test]
fn kernel_registry_lists_both_strategies() {
    let names: Vec<_> = score_kernels().iter().map(|k| k.name()).collect();
    assert_eq!(names, vec!["channel", "spatial"]);
    assert!(score_kernel("channel").is_some());
    assert!(score_kernel("spatial").is_some());
    assert!(score_kernel("nope").is_none());
    let k = score_kernel("channel").unwrap();
    assert_eq!(k.score_shape(4096, 16), (16, 16));
    let s = score_kernel("spatial").unwrap();
    assert_eq!(s.score_shape(64, 16), (64, 64));
}

#[test]
fn dfn_with_zero_weights_outputs_zero() {
    let mut layout = ParamLayout::default();
    let dfn = DfnLayer::new(&mut layout, "d", 6, 16);
    let mut params: ParamSet<f32> = layout.init_params(7);
    params.zero_prefix("d.");
    let bound = params.bind();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = randn32(&mut rng, &[1, 6, 4, 4]);
    let y = dfn.forward(&bound, &x).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn zeroed_transformer_block_is_bit_exact_identity() {
    let mut layout = ParamLayout::default();
    let block = TransformerBlock::new(&mut layout, "t", 8, 2, 21, 1.0);
    let mut params: ParamSet<f32> = layout.init_params(9);
    params.zero_prefix("t.");
    let bound = params.bind();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = randn32(&mut rng, &[2, 8, 4, 4]);
    let (y, _) = block.forward(&bound, &x).unwrap();
    let xb: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
    let yb: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(xb, yb);
}

#[test]
fn transformer_block_is_stable_under_large_inputs() {
    let mut layout = ParamLayout::default();
    let block = TransformerBlock::new(&mut layout, "t", 8, 1, 21, 1.0);
    let params: ParamSet<f32> = layout.init_params(11);
    let bound = params.bind();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut x = randn32(&mut rng, &[1, 8, 6, 6]);
    x = x.mul_scalar(100.0);
    let (y, _) = block.forward(&bound, &x).unwrap();
    assert!(y.is_finite());
}

#[test]
fn cs_sft_identity_modulation_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let fg = randn32(&mut rng, &[2, 5, 3, 3]);
    let ones = Tensor::ones(&[2, 3, 3, 3]);
    let zeros = Tensor::zeros(&[2, 3, 3, 3]);
    let out = cs_sft(&fg, &ones, &zeros, 2).unwrap();
    let a: Vec<u32> = fg.data().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u32> = out.data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn cs_sft_zero_modulation_keeps_first_split_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let fg = randn32(&mut rng, &[1, 4, 2, 2]);
    let zeros = Tensor::zeros(&[1, 2, 2, 2]);
    let out = cs_sft(&fg, &zeros, &zeros, 2).unwrap();
    assert_eq!(&out.data()[..8], &fg.data()[..8]);
    assert!(out.data()[8..].iter().all(|&v| v == 0.0));
}

#[test]
fn cs_sft_modulation_cost_is_half_of_full_channel_variant() {
    // elementwise modulation MACs scale with the modulated split
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let fg = randn32(&mut rng, &[1, 8, 8, 8]);
    let mu_half = randn32(&mut rng, &[1, 4, 8, 8]);
    let sg_half = randn32(&mut rng, &[1, 4, 8, 8]);
    counter::reset_macs();
    cs_sft(&fg, &mu_half, &sg_half, 4).unwrap();
    let half_cost = counter::macs();

    let mu_full = randn32(&mut rng, &[1, 8, 8, 8]);
    let sg_full = randn32(&mut rng, &[1, 8, 8, 8]);
    counter::reset_macs();
    cs_sft(&fg, &mu_full, &sg_full, 0).unwrap();
    let full_cost = counter::macs();
    assert_eq!(half_cost * 2, full_cost);
}

#[test]
fn odd_channel_split_floors_to_first_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = ModelConfig::preset("toy-64").unwrap();
    assert_eq!(cfg.split_point(5), 2); // floor(5 * 0.5)
    let fg = randn32(&mut rng, &[1, 5, 2, 2]);
    let mu = randn32(&mut rng, &[1, 3, 2, 2]);
    let sg = randn32(&mut rng, &[1, 3, 2, 2]);
    let out = cs_sft(&fg, &mu, &sg, 2).unwrap();
    assert_eq!(out.shape(), &[1, 5, 2, 2]);
    assert_eq!(&out.data()[..8], &fg.data()[..8]);
}

#[test]
fn modulated_conv_with_unit_style_and_no_demod_is_plain_convolution() {
    let cfg = ModelConfig::preset("toy-64").unwrap();
    let model = Gformer::new(cfg.clone()).unwrap();
    let mut params: ParamSet<f32> = model.init_params(17);
    // force the style affine to output exactly one: zero weights, unit bias
    params.zero_prefix("gen.l0.style.w");
    let bound = params.bind();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let x = randn32(&mut rng, &[1, 16, 8, 8]);
    let latent = randn32(&mut rng, &[1, 32]);
    let no_demod = model
        .generator
        .modulated_conv(&bound, 0, &x, &latent, false)
        .unwrap();
    let w = bound.get("gen.l0.conv.w");
    let b = bound.get("gen.l0.conv.b");
    let plain = x.conv2d(w, 1, 1).unwrap().add_bias_channel(b).unwrap();
    let a: Vec<u32> = no_demod.data().iter().map(|v| v.to_bits()).collect();
    let p: Vec<u32> = plain.data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, p);
}

#[test]
fn demodulation_gives_unit_effective_weight_norm() {
    let cfg = ModelConfig::preset("toy-64").unwrap();
    let model = Gformer::new(cfg.clone()).unwrap();
    let params: ParamSet<f64> = model.init_params(19);
    let bound = params.bind();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let latent_data: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let latent = Tensor::from_vec(latent_data, &[1, 32]).unwrap();

    // feed a centered impulse per input channel and measure response energy:
    // with demodulation the effective per-output-channel weight norm is 1.
    let w = bound.get("gen.l0.conv.w");
    let style_w = bound.get("gen.l0.style.w");
    let style_b = bound.get("gen.l0.style.b");
    let style = latent
        .matmul(style_w)
        .unwrap()
        .add_bias_row(style_b)
        .unwrap();
    let (cout, cin) = (w.shape()[0], w.shape()[1]);
    for o in 0..cout {
        let mut norm2 = 0.0;
        for i in 0..cin {
            for kk in 0..9 {
                let wv = w.data()[(o * cin + i) * 9 + kk] * style.data()[i];
                norm2 += wv * wv;
            }
        }
        let d = 1.0 / (norm2 + 1e-8).sqrt();
        let eff: f64 = (0..cin)
            .flat_map(|i| (0..9).map(move |kk| (i, kk)))
            .map(|(i, kk)| {
                let wv = w.data()[(o * cin + i) * 9 + kk] * style.data()[i] * d;
                wv * wv
            })
            .sum();
        assert!((eff.sqrt() - 1.0).abs() < 1e-6, "channel {o}: {}", eff.sqrt());
    }
}

#[test]
fn toy_forward_shapes_and_determinism() {
    let cfg = ModelConfig::preset("toy-64").unwrap();
    let model = Gformer::new(cfg.clone()).unwrap();
    let params: ParamSet<f32> = model.init_params(21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = randn32(&mut rng, &[2, 3, 64, 64]);

    let run = || {
        let bound = params.bind();
        let out = model.forward(&bound, &x).unwrap();
        (
            out.restored.shape().to_vec(),
            out.pyramid.iter().map(|p| p.shape().to_vec()).collect::<Vec<_>>(),
            out.restored.data().iter().map(|v| v.to_bits()).collect::<Vec<u32>>(),
        )
    };
    let (shape, pyr, bits) = run();
    assert_eq!(shape, vec![2, 3, 64, 64]);
    assert_eq!(
        pyr,
        vec![
            vec![2, 3, 8, 8],
            vec![2, 3, 16, 16],
            vec![2, 3, 32, 32],
            vec![2, 3, 64, 64],
        ]
    );
    let (_, _, bits2) = run();
    assert_eq!(bits, bits2, "same weights and input must be bit-identical");
}

#[test]
fn wrong_input_resolution_is_a_config_error() {
    let cfg = ModelConfig::preset("toy-64").unwrap();
    let model = Gformer::new(cfg).unwrap();
    let params: ParamSet<f32> = model.init_params(23);
    let bound = params.bind();
    let x = Tensor::zeros(&[1, 3, 32, 32]);
    assert!(model.forward(&bound, &x).is_err());
}

#[test]
fn forward_never_fails_on_shape_for_valid_configs() {
    // a few random small valid configs beyond the presets
    let variants = [
        (32usize, 1usize, 1usize, vec![4usize], vec![1usize], 8usize, 16usize),
        (32, 2, 1, vec![4, 8], vec![1, 2], 8, 8),
        (64, 1, 2, vec![6], vec![2], 10, 12),
    ];
    for (res, lt, lc, channels, heads, refine, latent) in variants {
        let cfg = ModelConfig {
            input_resolution: res,
            levels_transformer: lt,
            levels_conv_refine: lc,
            heads,
            channels,
            refine_channels: refine,
            latent_dim: latent,
            ffn_expansion: 2.66,
            split_fraction: 0.5,
            theta_init: 1.0,
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.skip_resolutions().len(), cfg.levels());
        let model = Gformer::new(cfg.clone()).unwrap();
        let params: ParamSet<f32> = model.init_params(24);
        let bound = params.bind();
        let x = Tensor::zeros(&[1, 3, res, res]);
        let out = model.forward(&bound, &x).unwrap();
        assert_eq!(out.restored.shape(), &[1, 3, res, res]);
        assert_eq!(out.pyramid.len(), cfg.levels());
    }
}

#[test]
fn paper_preset_structure_is_exact() {
    let cfg = ModelConfig::preset("paper-256").unwrap();
    let model = Gformer::new(cfg.clone()).unwrap();
    // structural assertions without running the 256^2 forward
    assert_eq!(cfg.levels(), 7);
    assert_eq!(cfg.skip_resolutions(), vec![4, 8, 16, 32, 64, 128, 256]);
    assert_eq!(cfg.decoder_channels(), vec![512, 512, 512, 512, 256, 128, 64]);
    let params: ParamSet<f32> = model.init_params(25);
    let latent_map = params.get("mod.latent_map.w").unwrap();
    assert_eq!(latent_map.shape, vec![512, 512 * 16]);
    let const_input = params.get("gen.const").unwrap();
    assert_eq!(const_input.shape, vec![1, 512, 4, 4]);
    // 7 generator levels registered
    for i in 0..7 {
        assert!(params.get(&format!("gen.l{i}.conv.w")).is_some());
    }
    assert!(params.get("gen.l7.conv.w").is_none());
}
