//! Parametric degradation: Gaussian blur, linear motion blur, and area
//! downsampling applied to a high-quality image. Convolutions use reflect
//! padding and double precision internally so that unit-mass kernels
//! preserve constant images bit-exactly after the cast back to f32.

use rand::Rng;

use crate::error::{GformerError, Result};
use crate::image::ImageBuf;

pub const BLUR_SIZE_MIN: usize = 3;
pub const BLUR_SIZE_MAX: usize = 15;
pub const TAU_MIN: usize = 1;
pub const TAU_MAX: usize = 4;

/// One sample of the degradation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationParams {
    /// Gaussian kernel size in pixels, odd.
    pub delta: usize,
    /// Motion kernel length in pixels, odd.
    pub gamma: usize,
    /// Motion direction in radians, [0, pi).
    pub angle: f64,
    /// Integer downsampling factor.
    pub tau: usize,
    pub seed: u64,
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GformerError::Degrade(msg));
        if self.delta % 2 == 0 || !(BLUR_SIZE_MIN..=BLUR_SIZE_MAX).contains(&self.delta) {
            return bad(format!("delta {} must be odd in [3,15]", self.delta));
        }
        if self.gamma % 2 == 0 || !(BLUR_SIZE_MIN..=BLUR_SIZE_MAX).contains(&self.gamma) {
            return bad(format!("gamma {} must be odd in [3,15]", self.gamma));
        }
        if !(TAU_MIN..=TAU_MAX).contains(&self.tau) {
            return bad(format!("tau {} must be in [1,4]", self.tau));
        }
        if !(0.0..std::f64::consts::PI).contains(&self.angle) {
            return bad(format!("angle {} outside [0, pi)", self.angle));
        }
        Ok(())
    }
}

/// Square convolution kernel with unit mass.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    /// Identity kernel (single center tap). Test hook for the pipeline.
    pub fn impulse(size: usize) -> Kernel {
        let mut data = vec![0.0; size * size];
        data[(size / 2) * size + size / 2] = 1.0;
        Kernel { size, data }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Gaussian blur kernel of extent `delta`, sigma = delta / 4, normalized to
/// unit mass.
pub fn gaussian_kernel(delta: usize) -> Result<Kernel> {
    if delta % 2 == 0 || !(BLUR_SIZE_MIN..=BLUR_SIZE_MAX).contains(&delta) {
        return Err(GformerError::Degrade(format!(
            "gaussian size {delta} must be odd in [3,15]"
        )));
    }
    let sigma = delta as f64 / 4.0;
    let half = (delta / 2) as isize;
    let mut data = Vec::with_capacity(delta * delta);
    for y in -half..=half {
        for x in -half..=half {
            let r2 = (x * x + y * y) as f64;
            data.push((-r2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = data.iter().sum();
    for v in &mut data {
        *v /= s;
    }
    Ok(Kernel { size: delta, data })
}

/// Linear motion blur: `gamma` unit-weight samples along a line through the
/// center at `angle`, splatted onto the grid by bilinear interpolation.
/// Coordinates within 1e-9 of an integer are snapped so axis-aligned
/// kernels come out exact.
pub fn motion_kernel(gamma: usize, angle: f64) -> Result<Kernel> {
    if gamma % 2 == 0 || !(BLUR_SIZE_MIN..=BLUR_SIZE_MAX).contains(&gamma) {
        return Err(GformerError::Degrade(format!(
            "motion length {gamma} must be odd in [3,15]"
        )));
    }
    let size = gamma;
    let half = (size / 2) as isize;
    let mut data = vec![0.0f64; size * size];
    let (dy, dx) = angle.sin_cos(); // (sin, cos)
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    let weight = 1.0 / gamma as f64;
    let steps = (gamma - 1) as isize / 2;
    for t in -steps..=steps {
        let x = snap(t as f64 * dx);
        let y = snap(t as f64 * dy);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        for (cy, wy) in [(y0 as isize, 1.0 - fy), (y0 as isize + 1, fy)] {
            for (cx, wx) in [(x0 as isize, 1.0 - fx), (x0 as isize + 1, fx)] {
                let w = wy * wx;
                if w == 0.0 {
                    continue;
                }
                let gy = cy + half;
                let gx = cx + half;
                debug_assert!(gy >= 0 && gy < size as isize && gx >= 0 && gx < size as isize);
                data[gy as usize * size + gx as usize] += weight * w;
            }
        }
    }
    let s: f64 = data.iter().sum();
    for v in &mut data {
        *v /= s;
    }
    Ok(Kernel { size, data })
}

/// Reflect-101 index: mirrors across the edge without repeating it.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // for the kernel radii used here one fold is enough, loop for safety
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

fn conv_reflect(plane: &[f64], w: usize, h: usize, k: &Kernel) -> Vec<f64> {
    let half = (k.size / 2) as isize;
    let mut out = vec![0.0f64; plane.len()];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in -half..=half {
                let sy = reflect(y + ky, h);
                for kx in -half..=half {
                    let sx = reflect(x + kx, w);
                    let kv = k.data[(ky + half) as usize * k.size + (kx + half) as usize];
                    acc += kv * plane[sy * w + sx];
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Degradation pipeline with explicit kernels (the parametric entry point
/// below builds them from `DegradationParams`).
pub fn degrade_with_kernels(
    img: &ImageBuf,
    gaussian: &Kernel,
    motion: &Kernel,
    tau: usize,
) -> Result<ImageBuf> {
    if img.width % tau != 0 || img.height % tau != 0 {
        return Err(GformerError::Degrade(format!(
            "extent {}x{} not divisible by tau {}",
            img.width, img.height, tau
        )));
    }
    let (w, h) = (img.width, img.height);
    let (wo, ho) = (w / tau, h / tau);
    let mut out = ImageBuf::new(wo, ho, img.channels);
    for c in 0..img.channels {
        let plane: Vec<f64> = img.plane(c).iter().map(|&v| v as f64).collect();
        let blurred = conv_reflect(&plane, w, h, gaussian);
        let motioned = conv_reflect(&blurred, w, h, motion);
        let dst = &mut out.data[c * wo * ho..(c + 1) * wo * ho];
        let inv = 1.0 / (tau * tau) as f64;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0f64;
                for dy in 0..tau {
                    let row = (oy * tau + dy) * w + ox * tau;
                    for dx in 0..tau {
                        acc += motioned[row + dx];
                    }
                }
                dst[oy * wo + ox] = (acc * inv).clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(out)
}

/// x = (y * g_delta * m_gamma) downsampled by tau, clamped to [0,1].
pub fn degrade(img: &ImageBuf, p: &DegradationParams) -> Result<ImageBuf> {
    p.validate()?;
    let g = gaussian_kernel(p.delta)?;
    let m = motion_kernel(p.gamma, p.angle)?;
    degrade_with_kernels(img, &g, &m, p.tau)
}

/// Uniform draw: delta and gamma over the odd sizes {3,5,...,15}, tau over
/// {1,2,3,4}, angle over [0, pi).
pub fn sample_params<R: Rng>(rng: &mut R) -> DegradationParams {
    let odd = |r: &mut R| 3 + 2 * r.gen_range(0..7usize);
    DegradationParams {
        delta: odd(rng),
        gamma: odd(rng),
        angle: rng.gen_range(0.0..std::f64::consts::PI),
        tau: rng.gen_range(TAU_MIN..=TAU_MAX),
        seed: rng.gen(),
    }
}

/// Like [`sample_params`] but re-draws until tau divides the given extent;
/// the sampled tau range includes factors (e.g. 3) that do not divide
/// power-of-two resolutions.
pub fn sample_params_for_resolution<R: Rng>(rng: &mut R, resolution: usize) -> DegradationParams {
    loop {
        let p = sample_params(rng);
        if resolution % p.tau == 0 {
            return p;
        }
    }
}
