//! Procedural iris-like textures: a dark pupil disc, a textured annulus of
//! band-limited radial/angular noise, and a limbus ring fading into sclera.
//! The identity seed fixes the structure; the sample seed only jitters
//! photometry, so two samples of one identity stay strongly correlated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::ImageBuf;

struct TextureWave {
    amplitude: f64,
    angular_freq: f64,
    radial_freq: f64,
    phase: f64,
}

/// Generate one iris-like sample as a 3-channel grayscale replica in [0,1].
pub fn synth_iris(identity_seed: u64, sample_seed: u64, resolution: usize) -> ImageBuf {
    let mut id_rng = ChaCha8Rng::seed_from_u64(identity_seed);
    let r_unit = resolution as f64 / 2.0;
    let pupil_r = r_unit * id_rng.gen_range(0.14..0.26);
    let limbus_r = r_unit * id_rng.gen_range(0.80..0.95);
    let base = id_rng.gen_range(0.48..0.62);

    let mut waves = Vec::with_capacity(18);
    for k in 1..=18usize {
        waves.push(TextureWave {
            amplitude: id_rng.gen_range(0.3..1.0) / (k as f64).powf(0.25),
            angular_freq: id_rng.gen_range(2..18) as f64,
            radial_freq: id_rng.gen_range(0.15..0.9),
            phase: id_rng.gen_range(0.0..std::f64::consts::TAU),
        });
    }
    // pure radial rings, the concentric banding
    let mut rings = Vec::with_capacity(6);
    for _ in 0..6 {
        rings.push((
            id_rng.gen_range(0.3..1.0),
            id_rng.gen_range(0.2..0.8),
            id_rng.gen_range(0.0..std::f64::consts::TAU),
        ));
    }
    let norm: f64 = (waves.iter().map(|w| w.amplitude * w.amplitude).sum::<f64>() / 2.0
        + rings.iter().map(|(a, _, _)| a * a).sum::<f64>() / 2.0)
        .sqrt();
    let texture_gain = 0.24 / norm;

    let mut sample_rng = ChaCha8Rng::seed_from_u64(sample_seed ^ identity_seed.rotate_left(17));
    let brightness = sample_rng.gen_range(-0.04..0.04);
    let contrast = sample_rng.gen_range(0.95..1.05);
    let noise = Normal::new(0.0f64, 0.01).expect("valid sigma");

    let mut img = ImageBuf::new(resolution, resolution, 1);
    let c = (resolution as f64 - 1.0) / 2.0;
    for y in 0..resolution {
        for x in 0..resolution {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let r = (dx * dx + dy * dy).sqrt();
            let phi = dy.atan2(dx);

            let mut v = if r < pupil_r {
                0.08
            } else if r < limbus_r {
                let mut tex = 0.0;
                for w in &waves {
                    tex += w.amplitude
                        * (w.angular_freq * phi + w.radial_freq * r + w.phase).cos();
                }
                for (a, f, p) in &rings {
                    tex += a * (f * r + p).cos();
                }
                base + texture_gain * tex
            } else {
                0.88 - 0.05 * ((r - limbus_r) / r_unit)
            };

            // short ramps so the pupil and limbus edges are not aliased
            let ramp = |d: f64| (d / 1.5).clamp(0.0, 1.0);
            if r >= pupil_r && r < pupil_r + 1.5 {
                let t = ramp(r - pupil_r);
                v = 0.08 * (1.0 - t) + v * t;
            }
            if r >= limbus_r && r < limbus_r + 1.5 {
                let t = ramp(r - limbus_r);
                let sclera = 0.88 - 0.05 * ((r - limbus_r) / r_unit);
                v = v * (1.0 - t) + sclera * t;
            }

            let v = (v * contrast + brightness + noise.sample(&mut sample_rng)).clamp(0.0, 1.0);
            img.data[y * resolution + x] = v as f32;
        }
    }
    img.to_rgb()
}

/// Pearson correlation between two equally sized gray images.
pub fn pixel_correlation(a: &ImageBuf, b: &ImageBuf) -> f64 {
    let ag = a.to_gray();
    let bg = b.to_gray();
    assert_eq!(ag.data.len(), bg.data.len());
    let n = ag.data.len() as f64;
    let ma = ag.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = bg.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in ag.data.iter().zip(&bg.data) {
        let dx = x as f64 - ma;
        let dy = y as f64 - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    cov / (va.sqrt() * vb.sqrt()).max(1e-12)
}
