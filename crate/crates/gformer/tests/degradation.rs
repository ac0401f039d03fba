//! Degradation model and procedural texture contracts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gformer::degrade::{
    degrade, degrade_with_kernels, gaussian_kernel, motion_kernel, sample_params,
    sample_params_for_resolution, DegradationParams, Kernel,
};
use gformer::image::ImageBuf;
use gformer::iris::{iris_code, match_score, IrisCode};
use gformer::metrics::ScoreSet;
use gformer::synth::{pixel_correlation, synth_iris};

fn all_odd_sizes() -> impl Iterator<Item = usize> {
    (3..=15).step_by(2)
}

#[test]
fn gaussian_kernels_are_unit_mass_symmetric_center_peaked() {
    for delta in all_odd_sizes() {
        let k = gaussian_kernel(delta).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-6, "delta={delta}");
        let n = k.size;
        let center = k.data[(n / 2) * n + n / 2];
        for y in 0..n {
            for x in 0..n {
                // 90-degree rotation symmetry
                let rot = k.data[x * n + (n - 1 - y)];
                assert!((k.data[y * n + x] - rot).abs() < 1e-12);
                assert!(k.data[y * n + x] <= center);
                assert!(k.data[y * n + x] >= 0.0);
            }
        }
    }
}

#[test]
fn gaussian_rejects_even_and_out_of_range_sizes() {
    assert!(gaussian_kernel(4).is_err());
    assert!(gaussian_kernel(1).is_err());
    assert!(gaussian_kernel(17).is_err());
}

#[test]
fn gaussian_delta3_center_exceeds_edges() {
    let k = gaussian_kernel(3).unwrap();
    let center = k.data[4];
    for (i, &v) in k.data.iter().enumerate() {
        if i != 4 {
            assert!(center > v);
        }
    }
}

#[test]
fn gaussian_impulse_variance_matches_truncated_moment() {
    // Direct moment computation on the degraded impulse. With sigma =
    // delta/4 = 3.75 the +-7 truncation keeps only ~77% of the untruncated
    // variance; the frozen oracle value is 10.8925 (sigma^2 would be 14.06).
    let n = 31;
    let mut img = ImageBuf::new(n, n, 1);
    img.data[(n / 2) * n + n / 2] = 1.0;
    let g = gaussian_kernel(15).unwrap();
    let out = degrade_with_kernels(&img, &g, &Kernel::impulse(1), 1).unwrap();
    let total: f64 = out.data.iter().map(|&v| v as f64).sum();
    let mut var_x = 0.0f64;
    let mut var_y = 0.0f64;
    for y in 0..n {
        for x in 0..n {
            let w = out.data[y * n + x] as f64 / total;
            let dx = x as f64 - (n / 2) as f64;
            let dy = y as f64 - (n / 2) as f64;
            var_x += w * dx * dx;
            var_y += w * dy * dy;
        }
    }
    assert!((var_x - 10.8925).abs() < 0.01, "var_x={var_x}");
    assert!((var_y - 10.8925).abs() < 0.01, "var_y={var_y}");
}

#[test]
fn motion_axis_aligned_is_uniform_row() {
    let k = motion_kernel(3, 0.0).unwrap();
    let third = 1.0 / 3.0;
    assert_eq!(k.data[3], third);
    assert_eq!(k.data[4], third);
    assert_eq!(k.data[5], third);
    let mass_off_row: f64 = k
        .data
        .iter()
        .enumerate()
        .filter(|(i, _)| !(3..6).contains(i))
        .map(|(_, &v)| v)
        .sum();
    assert_eq!(mass_off_row, 0.0);
}

#[test]
fn motion_kernels_are_unit_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for gamma in all_odd_sizes() {
        for _ in 0..5 {
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            let k = motion_kernel(gamma, angle).unwrap();
            assert!((k.sum() - 1.0).abs() < 1e-6);
            assert!(k.data.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn motion_quarter_turn_is_transpose() {
    for gamma in all_odd_sizes() {
        let k0 = motion_kernel(gamma, 0.0).unwrap();
        let k90 = motion_kernel(gamma, std::f64::consts::FRAC_PI_2).unwrap();
        let n = gamma;
        for y in 0..n {
            for x in 0..n {
                assert!((k90.data[y * n + x] - k0.data[x * n + y]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn motion_rejects_out_of_range() {
    assert!(motion_kernel(2, 0.0).is_err());
    assert!(motion_kernel(17, 0.0).is_err());
}

#[test]
fn degrade_divides_resolution_by_tau() {
    let img = synth_iris(1, 1, 256);
    let p = DegradationParams {
        delta: 7,
        gamma: 5,
        angle: 0.7,
        tau: 4,
        seed: 0,
    };
    let out = degrade(&img, &p).unwrap();
    assert_eq!(out.width, 64);
    assert_eq!(out.height, 64);
}

#[test]
fn impulse_kernels_at_tau_one_are_bit_exact_identity() {
    let img = synth_iris(2, 9, 64);
    let out = degrade_with_kernels(&img, &Kernel::impulse(3), &Kernel::impulse(5), 1).unwrap();
    assert_eq!(out.data, img.data);
}

#[test]
fn constant_images_pass_through_bit_exact() {
    for &c in &[0.0f32, 0.37, 0.5, 0.73, 1.0] {
        let img = ImageBuf::from_planes(32, 32, 1, vec![c; 32 * 32]).unwrap();
        for (delta, gamma, angle, tau) in
            [(3, 3, 0.0, 1), (15, 15, 1.1, 2), (9, 7, 2.6, 4), (5, 11, 0.3, 2)]
        {
            let p = DegradationParams {
                delta,
                gamma,
                angle,
                tau,
                seed: 0,
            };
            let out = degrade(&img, &p).unwrap();
            assert!(
                out.data.iter().all(|&v| v == c),
                "constant {c} drifted under {p:?}"
            );
        }
    }
}

#[test]
fn degrade_rejects_non_divisible_extent() {
    let img = ImageBuf::new(30, 30, 1);
    let p = DegradationParams {
        delta: 3,
        gamma: 3,
        angle: 0.0,
        tau: 4,
        seed: 0,
    };
    assert!(degrade(&img, &p).is_err());
}

#[test]
fn degrade_is_deterministic() {
    let img = synth_iris(5, 5, 64);
    let p = DegradationParams {
        delta: 9,
        gamma: 7,
        angle: 1.234,
        tau: 2,
        seed: 42,
    };
    let a = degrade(&img, &p).unwrap();
    let b = degrade(&img, &p).unwrap();
    let bits_a: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
    let bits_b: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits_a, bits_b);
}

#[test]
fn parameter_sampling_matches_stated_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = 10_000usize;
    let mut delta_counts = [0usize; 7];
    let mut tau_counts = [0usize; 4];
    for _ in 0..n {
        let p = sample_params(&mut rng);
        p.validate().unwrap();
        delta_counts[(p.delta - 3) / 2] += 1;
        tau_counts[p.tau - 1] += 1;
    }
    // each delta frequency within 3 sigma of 1/7
    let expect = n as f64 / 7.0;
    let sigma = (n as f64 * (1.0 / 7.0) * (6.0 / 7.0)).sqrt();
    for (i, &c) in delta_counts.iter().enumerate() {
        assert!(
            (c as f64 - expect).abs() <= 3.0 * sigma,
            "delta bin {i}: {c} vs {expect}+-{:.1}",
            3.0 * sigma
        );
    }
    let expect_tau = n as f64 / 4.0;
    let sigma_tau = (n as f64 * 0.25 * 0.75).sqrt();
    for &c in &tau_counts {
        assert!((c as f64 - expect_tau).abs() <= 3.0 * sigma_tau);
    }
}

#[test]
fn same_seed_gives_identical_parameter_stream() {
    let draw = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..50).map(|_| sample_params(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

#[test]
fn resolution_constrained_sampling_only_returns_dividing_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p = sample_params_for_resolution(&mut rng, 64);
        assert!(64 % p.tau == 0);
        p.validate().unwrap();
    }
}

#[test]
fn same_identity_samples_are_strongly_correlated() {
    for id in [1u64, 99, 12345] {
        let a = synth_iris(id, 1, 64);
        let b = synth_iris(id, 2, 64);
        let corr = pixel_correlation(&a, &b);
        assert!(corr > 0.9, "identity {id}: corr {corr}");
    }
}

#[test]
fn different_identities_decorrelate_on_average() {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..100u64 {
        let a = synth_iris(1000 + i, 0, 64);
        let b = synth_iris(2000 + i, 0, 64);
        total += pixel_correlation(&a, &b);
        count += 1;
    }
    let avg = total / count as f64;
    assert!(avg < 0.5, "average cross-identity correlation {avg}");
}

#[test]
fn synth_output_stays_in_unit_range() {
    let img = synth_iris(3, 4, 128);
    assert!(img.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert_eq!(img.channels, 3);
}

#[test]
fn genuine_pairs_outscore_impostor_pairs() {
    // Matcher separation on clean synthetic data, no restoration involved.
    let mut scores = ScoreSet::default();
    for id in 0..12u64 {
        let a = iris_code(&synth_iris(id, 0, 64)).unwrap();
        let b = iris_code(&synth_iris(id, 1, 64)).unwrap();
        scores.genuine.push(match_score(&a, &b).unwrap());
        let c = iris_code(&synth_iris(id + 100, 0, 64)).unwrap();
        scores.impostor.push(match_score(&a, &c).unwrap());
    }
    let gm: f64 = scores.genuine.iter().sum::<f64>() / scores.genuine.len() as f64;
    let im: f64 = scores.impostor.iter().sum::<f64>() / scores.impostor.len() as f64;
    assert!(
        gm > im + 0.05,
        "genuine mean {gm} should clearly exceed impostor mean {im}"
    );
}

#[test]
fn random_codes_match_near_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut total = 0.0;
    let n = 1000;
    for _ in 0..n {
        let a = IrisCode::from_words((0..256).map(|_| rng.gen()).collect()).unwrap();
        let b = IrisCode::from_words((0..256).map(|_| rng.gen()).collect()).unwrap();
        total += match_score(&a, &b).unwrap();
    }
    let avg = total / n as f64;
    assert!((avg - 0.5).abs() < 0.02, "avg={avg}");
}
