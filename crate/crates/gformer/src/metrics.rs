//! Image-quality metrics (PSNR, SSIM) and recognition metrics (ROC, AUC,
//! EER, TAR@FAR) over genuine/impostor score sets.

use crate::error::{GformerError, Result};
use crate::image::ImageBuf;

/// 10*log10(max^2 / MSE); +inf for identical inputs.
pub fn psnr(a: &ImageBuf, b: &ImageBuf, max_val: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height || a.channels != b.channels {
        return Err(GformerError::Eval(format!(
            "psnr shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    let mut mse = 0.0f64;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let d = x as f64 - y as f64;
        mse += d * d;
    }
    mse /= a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

const SSIM_WINDOW: usize = 8;

/// Single-scale SSIM with sliding 8x8 uniform windows. Color inputs are
/// averaged to luma first. C1 = (0.01 R)^2, C2 = (0.03 R)^2.
pub fn ssim(a: &ImageBuf, b: &ImageBuf, max_val: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height || a.channels != b.channels {
        return Err(GformerError::Eval(format!(
            "ssim shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(GformerError::Eval(format!(
            "image {}x{} smaller than the {}x{} SSIM window",
            a.width, a.height, SSIM_WINDOW, SSIM_WINDOW
        )));
    }
    let ga = a.to_gray();
    let gb = b.to_gray();
    let (w, h) = (ga.width, ga.height);
    let c1 = (0.01 * max_val) * (0.01 * max_val);
    let c2 = (0.03 * max_val) * (0.03 * max_val);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;

    let mut total = 0.0f64;
    let mut windows = 0usize;
    for wy in 0..=(h - SSIM_WINDOW) {
        for wx in 0..=(w - SSIM_WINDOW) {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                let row = (wy + dy) * w + wx;
                for dx in 0..SSIM_WINDOW {
                    let x = ga.data[row + dx] as f64;
                    let y = gb.data[row + dx] as f64;
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = sxx / n - mx * mx;
            let vy = syy / n - my * my;
            let cov = sxy / n - mx * my;
            let val = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += val;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Genuine and impostor similarity scores.
#[derive(Debug, Clone, Default)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScoreSet {
    /// Probability that a random genuine score exceeds a random impostor
    /// score, ties counted half. The rank-statistic route to the AUC.
    pub fn auc_mann_whitney(&self) -> f64 {
        let mut wins = 0.0f64;
        for &g in &self.genuine {
            for &i in &self.impostor {
                if g > i {
                    wins += 1.0;
                } else if g == i {
                    wins += 0.5;
                }
            }
        }
        wins / (self.genuine.len() as f64 * self.impostor.len() as f64)
    }
}

/// ROC curve swept over all distinct thresholds plus sentinel endpoints:
/// FAR and TAR are both non-decreasing along the point list, which starts
/// at (0,0) and ends at (1,1).
#[derive(Debug, Clone)]
pub struct RocCurve {
    /// (FAR, TAR) per threshold, thresholds descending.
    pub points: Vec<(f64, f64)>,
}

/// Accept iff score >= threshold. FAR(t) = fraction of impostor scores >= t,
/// TAR(t) = fraction of genuine scores >= t.
pub fn roc(scores: &ScoreSet) -> Result<RocCurve> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(GformerError::Eval(
            "ROC needs non-empty genuine and impostor sets".into(),
        ));
    }
    let mut thresholds: Vec<f64> = scores
        .genuine
        .iter()
        .chain(&scores.impostor)
        .copied()
        .collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    thresholds.dedup();

    let mut gen_sorted = scores.genuine.clone();
    gen_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut imp_sorted = scores.impostor.clone();
    imp_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let ng = gen_sorted.len() as f64;
    let ni = imp_sorted.len() as f64;
    let mut points = vec![(0.0, 0.0)]; // threshold +inf
    let (mut gi, mut ii) = (0usize, 0usize);
    for &t in &thresholds {
        while gi < gen_sorted.len() && gen_sorted[gi] >= t {
            gi += 1;
        }
        while ii < imp_sorted.len() && imp_sorted[ii] >= t {
            ii += 1;
        }
        points.push((ii as f64 / ni, gi as f64 / ng));
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0)); // threshold -inf
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the ROC curve over FAR in [0,1].
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        let (f1, t1) = pair[0];
        let (f2, t2) = pair[1];
        area += (f2 - f1) * (t1 + t2) / 2.0;
    }
    area
}

/// Equal error rate: the value where FAR equals FRR = 1 - TAR, linearly
/// interpolated between the bracketing sweep points.
pub fn eer(curve: &RocCurve) -> f64 {
    let mut prev: Option<(f64, f64)> = None; // (far, frr)
    for &(far, tar) in &curve.points {
        let frr = 1.0 - tar;
        let diff = far - frr;
        if diff == 0.0 {
            return far;
        }
        if let Some((pf, pr)) = prev {
            let pdiff = pf - pr;
            if pdiff < 0.0 && diff > 0.0 {
                // interpolate between (pf,pr) and (far,frr)
                let denom = (far - pf) - (frr - pr);
                let t = if denom.abs() < 1e-300 {
                    0.0
                } else {
                    (pr - pf) / denom
                };
                return pf + t * (far - pf);
            }
        }
        prev = Some((far, frr));
    }
    // FAR never catches FRR inside the sweep; the curve still ends at (1,1)
    1.0
}

/// TAR at the loosest operating point whose FAR does not exceed the target
/// (conservative step convention, no interpolation).
pub fn tar_at_far(curve: &RocCurve, far_target: f64) -> f64 {
    let mut best = 0.0f64;
    for &(far, tar) in &curve.points {
        if far <= far_target && tar > best {
            best = tar;
        }
    }
    best
}

/// All recognition metrics of one score set. The AUC is computed by both
/// routes (trapezoid and Mann-Whitney) and cross-checked.
#[derive(Debug, Clone)]
pub struct RankMetrics {
    pub auc: f64,
    pub eer: f64,
    pub tar_far_001: f64,
    pub tar_far_01: f64,
    pub tar_far_1: f64,
}

pub fn rank_metrics(scores: &ScoreSet) -> Result<(RankMetrics, RocCurve)> {
    let curve = roc(scores)?;
    let a = auc(&curve);
    let mw = scores.auc_mann_whitney();
    if (a - mw).abs() > 1e-9 {
        return Err(GformerError::Eval(format!(
            "AUC routes disagree: trapezoid {a} vs Mann-Whitney {mw}"
        )));
    }
    Ok((
        RankMetrics {
            auc: a,
            eer: eer(&curve),
            tar_far_001: tar_at_far(&curve, 0.001),
            tar_far_01: tar_at_far(&curve, 0.01),
            tar_far_1: tar_at_far(&curve, 0.1),
        },
        curve,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(vals: &[f32], w: usize, h: usize) -> ImageBuf {
        ImageBuf::from_planes(w, h, 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let a = img(&[0.5; 64], 8, 8);
        assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn psnr_unit_mse_at_8bit_range() {
        // MSE = 1 with max 255: 10*log10(255^2) = 48.1308 dB
        let a = img(&[0.0; 4], 2, 2);
        let b = img(&[1.0; 4], 2, 2);
        // used as raw sample values: difference 1 per pixel
        let v = psnr(&a, &b, 255.0).unwrap();
        assert!((v - 48.13080361).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn halving_mse_adds_three_db() {
        let a = img(&[0.0; 4], 2, 2);
        let b = img(&[0.2; 4], 2, 2);
        let c = img(&[0.2, 0.2, 0.0, 0.0], 2, 2); // half the MSE of b
        let p1 = psnr(&a, &b, 1.0).unwrap();
        let p2 = psnr(&a, &c, 1.0).unwrap();
        assert!((p2 - p1 - 10.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_is_one_and_symmetric() {
        let mut a = ImageBuf::new(16, 16, 1);
        for (i, v) in a.data.iter_mut().enumerate() {
            *v = ((i * 31) % 97) as f32 / 97.0;
        }
        let mut b = a.clone();
        for v in &mut b.data {
            *v = (*v * 0.7 + 0.1).min(1.0);
        }
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let ab = ssim(&a, &b, 1.0).unwrap();
        let ba = ssim(&b, &a, 1.0).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_flat_black_vs_flat_max() {
        // mu_x=0, mu_y=R, all variances zero: SSIM = C1/(R^2 + C1)
        let r = 255.0f64;
        let black = img(&[0.0; 64], 8, 8);
        let max = img(&[r as f32; 64], 8, 8);
        let expected = (0.01 * r) * (0.01 * r) / (r * r + (0.01 * r) * (0.01 * r));
        let v = ssim(&black, &max, r).unwrap();
        assert!((v - expected).abs() < 1e-9, "got {v}, want {expected}");
        assert!((expected - 9.999e-5).abs() < 1e-8);
    }

    #[test]
    fn ssim_rejects_tiny_images() {
        let a = img(&[0.0; 16], 4, 4);
        assert!(ssim(&a, &a, 1.0).is_err());
    }

    #[test]
    fn roc_perfect_separation() {
        let s = ScoreSet {
            genuine: vec![0.9, 0.8],
            impostor: vec![0.1, 0.2],
        };
        let (m, curve) = rank_metrics(&s).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)));
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.eer, 0.0);
        assert_eq!(m.tar_far_001, 1.0);
        assert_eq!(m.tar_far_01, 1.0);
        assert_eq!(m.tar_far_1, 1.0);
    }

    #[test]
    fn roc_hand_swept_example() {
        // thresholds desc: 0.8 -> (FAR 0, TAR .5); 0.6 -> (.5, .5);
        // 0.4 -> (.5, 1); 0.2 -> (1, 1). AUC = 0.75, EER = 0.5.
        let s = ScoreSet {
            genuine: vec![0.8, 0.4],
            impostor: vec![0.6, 0.2],
        };
        let (m, _) = rank_metrics(&s).unwrap();
        assert!((m.auc - 0.75).abs() < 1e-12);
        assert!((m.eer - 0.5).abs() < 1e-12);
        // FAR <= 0.1 only holds at threshold > 0.6 where TAR = 0.5
        assert!((m.tar_far_1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_rejects_empty_sets() {
        let s = ScoreSet {
            genuine: vec![],
            impostor: vec![0.5],
        };
        assert!(roc(&s).is_err());
    }

    #[test]
    fn curve_is_monotone_with_endpoints() {
        let s = ScoreSet {
            genuine: vec![0.9, 0.7, 0.7, 0.3, 0.5],
            impostor: vec![0.8, 0.4, 0.4, 0.2, 0.1, 0.6],
        };
        let curve = roc(&s).unwrap();
        assert_eq!(*curve.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
        for pair in curve.points.windows(2) {
            assert!(pair[1].0 >= pair[0].0);
            assert!(pair[1].1 >= pair[0].1);
        }
    }

    #[test]
    fn tar_at_far_is_monotone_in_target() {
        let s = ScoreSet {
            genuine: vec![0.9, 0.7, 0.5, 0.3],
            impostor: vec![0.6, 0.4, 0.2, 0.1],
        };
        let curve = roc(&s).unwrap();
        let mut prev = 0.0;
        for t in [0.001, 0.01, 0.1, 0.5, 1.0] {
            let v = tar_at_far(&curve, t);
            assert!(v >= prev);
            prev = v;
        }
    }
}
