//! Deterministic iris-code matcher: sign bits of oriented even-symmetric
//! Gabor responses on a 64x64 gray image, compared by Hamming similarity.

use crate::error::{GformerError, Result};
use crate::image::ImageBuf;

pub const CODE_GRID: usize = 64;
pub const CODE_ORIENTATIONS: usize = 4;
pub const CODE_BITS: usize = CODE_ORIENTATIONS * CODE_GRID * CODE_GRID;

/// Fixed-length binary iris code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisCode {
    words: Vec<u64>,
}

impl IrisCode {
    pub fn len_bits(&self) -> usize {
        CODE_BITS
    }

    /// Build a code from raw words (for synthetic-score experiments).
    pub fn from_words(words: Vec<u64>) -> Result<IrisCode> {
        if words.len() != CODE_BITS / 64 {
            return Err(GformerError::Eval(format!(
                "expected {} words, got {}",
                CODE_BITS / 64,
                words.len()
            )));
        }
        Ok(IrisCode { words })
    }

    fn set(&mut self, idx: usize, v: bool) {
        if v {
            self.words[idx / 64] |= 1u64 << (idx % 64);
        }
    }

    pub fn hamming(&self, other: &IrisCode) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Even-symmetric zero-mean Gabor kernel at the given orientation.
fn gabor_kernel(theta: f64, size: usize, sigma: f64, wavelength: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let (s, c) = theta.sin_cos();
    let mut k = Vec::with_capacity(size * size);
    for y in -half..=half {
        for x in -half..=half {
            let xr = x as f64 * c + y as f64 * s;
            let r2 = (x * x + y * y) as f64;
            k.push((-r2 / (2.0 * sigma * sigma)).exp() * (std::f64::consts::TAU * xr / wavelength).cos());
        }
    }
    // subtract the mean twice so the residual is far below response scale
    for _ in 0..2 {
        let mean: f64 = k.iter().sum::<f64>() / k.len() as f64;
        for v in &mut k {
            *v -= mean;
        }
    }
    k
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
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

/// Compute the binary code of an image. The image is converted to gray and
/// area-downsampled to 64x64, so extents must be >= 64 and divisible by 64
/// after integer reduction.
pub fn iris_code(img: &ImageBuf) -> Result<IrisCode> {
    if img.width < CODE_GRID || img.height < CODE_GRID {
        return Err(GformerError::Eval(format!(
            "image {}x{} too small for a {}x{} code",
            img.width, img.height, CODE_GRID, CODE_GRID
        )));
    }
    if img.width != img.height || img.width % CODE_GRID != 0 {
        return Err(GformerError::Eval(format!(
            "image extent {}x{} must be a square multiple of {}",
            img.width, img.height, CODE_GRID
        )));
    }
    let gray = img.to_gray().downsample_area(img.width / CODE_GRID)?;
    let plane: Vec<f64> = gray.data.iter().map(|&v| v as f64).collect();

    let size = 9;
    let half = (size / 2) as isize;
    let mut code = IrisCode {
        words: vec![0u64; CODE_BITS / 64],
    };
    for (oi, theta) in (0..CODE_ORIENTATIONS)
        .map(|i| i as f64 * std::f64::consts::PI / CODE_ORIENTATIONS as f64)
        .enumerate()
    {
        let k = gabor_kernel(theta, size, 2.5, 8.0);
        for y in 0..CODE_GRID as isize {
            for x in 0..CODE_GRID as isize {
                let mut acc = 0.0;
                for ky in -half..=half {
                    let sy = reflect(y + ky, CODE_GRID);
                    for kx in -half..=half {
                        let sx = reflect(x + kx, CODE_GRID);
                        acc += k[(ky + half) as usize * size + (kx + half) as usize]
                            * plane[sy * CODE_GRID + sx];
                    }
                }
                let idx = (oi * CODE_GRID + y as usize) * CODE_GRID + x as usize;
                code.set(idx, acc > 0.0);
            }
        }
    }
    Ok(code)
}

/// Similarity in [0,1]: 1 - normalized Hamming distance.
pub fn match_score(a: &IrisCode, b: &IrisCode) -> Result<f64> {
    if a.words.len() != b.words.len() {
        return Err(GformerError::Eval(format!(
            "code length mismatch: {} vs {} words",
            a.words.len(),
            b.words.len()
        )));
    }
    Ok(1.0 - a.hamming(b) as f64 / CODE_BITS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_is_deterministic_and_self_matches() {
        let img = crate::synth::synth_iris(7, 1, 64);
        let a = iris_code(&img).unwrap();
        let b = iris_code(&img).unwrap();
        assert_eq!(a, b);
        assert_eq!(match_score(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn complement_scores_zero() {
        let img = crate::synth::synth_iris(7, 1, 64);
        let a = iris_code(&img).unwrap();
        let mut inv = a.clone();
        for w in &mut inv.words {
            *w = !*w;
        }
        assert_eq!(match_score(&a, &inv).unwrap(), 0.0);
    }

    #[test]
    fn uniform_brightness_shift_leaves_code_unchanged() {
        let img = crate::synth::synth_iris(11, 3, 64);
        let mut shifted = img.clone();
        for v in &mut shifted.data {
            *v += 0.001;
        }
        let a = iris_code(&img).unwrap();
        let b = iris_code(&shifted).unwrap();
        assert_eq!(a.hamming(&b), 0, "zero-mean filters must ignore DC shifts");
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = ImageBuf::new(32, 32, 1);
        assert!(iris_code(&img).is_err());
    }
}
