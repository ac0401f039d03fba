//! Attention complexity benchmark: measured score MACs, score storage and
//! wall time per registered score strategy across token counts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::Tensor;

use crate::attention::{score_kernels, ScoreKernel, SPATIAL_REFERENCE_MAX_TOKENS};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub hw: usize,
    pub channel_macs: u64,
    pub channel_score_bytes: usize,
    pub channel_wall_ns: u64,
    /// None when the spatial reference refuses the token count.
    pub spatial_macs: Option<u64>,
    pub spatial_score_bytes: Option<usize>,
    pub spatial_wall_ns: Option<u64>,
}

pub struct BenchReport {
    pub channels: usize,
    pub rows: Vec<BenchRow>,
    /// R^2 of a least-squares line fit of channel wall time against HW.
    pub channel_time_r2: f64,
    /// True when the channel score storage is identical across all sizes.
    pub channel_bytes_constant: bool,
}

fn tokens(rng: &mut ChaCha8Rng, hw: usize, c: usize) -> Tensor<f32> {
    Tensor::from_vec((0..hw * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect(), &[hw, c])
        .expect("token matrix")
}

fn median_wall_ns(mut samples: Vec<u64>) -> u64 {
    samples.sort_unstable();
    samples[samples.len() / 2]
}

fn run_kernel(
    kernel: &dyn ScoreKernel,
    rng: &mut ChaCha8Rng,
    hw: usize,
    c: usize,
    reps: usize,
) -> Result<(u64, usize, u64)> {
    let q = tokens(rng, hw, c);
    let k = tokens(rng, hw, c);
    let v = tokens(rng, hw, c);
    let (_, stats) = kernel.run(&q, &k, &v, 1.0)?;
    let mut walls = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let _ = kernel.run(&q, &k, &v, 1.0)?;
        walls.push(t0.elapsed().as_nanos() as u64);
    }
    Ok((
        stats.score_macs,
        stats.score_elems * std::mem::size_of::<f32>(),
        median_wall_ns(walls),
    ))
}

/// Least-squares R^2 of y against x.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Benchmark all registered strategies at the given spatial sizes
/// (side lengths; the token count is side^2).
pub fn bench_attention(channels: usize, sides: &[usize], reps: usize) -> Result<BenchReport> {
    let kernels = score_kernels();
    let channel = kernels
        .iter()
        .find(|k| k.name() == "channel")
        .expect("registered");
    let spatial = kernels
        .iter()
        .find(|k| k.name() == "spatial")
        .expect("registered");

    let mut rng = ChaCha8Rng::seed_from_u64(0xbe9c);
    let mut rows = Vec::with_capacity(sides.len());
    for &side in sides {
        let hw = side * side;
        let (channel_macs, channel_score_bytes, channel_wall_ns) =
            run_kernel(channel.as_ref(), &mut rng, hw, channels, reps)?;
        let (spatial_macs, spatial_score_bytes, spatial_wall_ns) =
            if hw <= SPATIAL_REFERENCE_MAX_TOKENS {
                let (m, b, w) = run_kernel(spatial.as_ref(), &mut rng, hw, channels, reps)?;
                (Some(m), Some(b), Some(w))
            } else {
                (None, None, None)
            };
        rows.push(BenchRow {
            hw,
            channel_macs,
            channel_score_bytes,
            channel_wall_ns,
            spatial_macs,
            spatial_score_bytes,
            spatial_wall_ns,
        });
    }

    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.hw as f64, r.channel_wall_ns as f64))
        .collect();
    let channel_time_r2 = linear_fit_r2(&points);
    let channel_bytes_constant = rows
        .windows(2)
        .all(|w| w[0].channel_score_bytes == w[1].channel_score_bytes);

    Ok(BenchReport {
        channels,
        rows,
        channel_time_r2,
        channel_bytes_constant,
    })
}

impl BenchReport {
    /// CSV rows: hw, channel MACs/bytes, spatial MACs/bytes (or empty).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "hw,channel_score_macs,channel_score_bytes,channel_wall_ns,spatial_score_macs,spatial_score_bytes,spatial_wall_ns\n",
        );
        for r in &self.rows {
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            let optu = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.hw,
                r.channel_macs,
                r.channel_score_bytes,
                r.channel_wall_ns,
                opt(r.spatial_macs),
                optu(r.spatial_score_bytes),
                opt(r.spatial_wall_ns),
            ));
        }
        out
    }
}
