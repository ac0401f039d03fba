//! Dataset synthesis and the manifest CSV format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tensor_core::{Scalar, Tensor};

use crate::degrade::{degrade, sample_params_for_resolution};
use crate::error::{GformerError, Result};
use crate::image::{read_image, write_image, ImageBuf};
use crate::synth::synth_iris;

pub const MANIFEST_HEADER: &str =
    "id,identity_seed,sample_seed,delta,gamma,angle,tau,lq_path,hq_path";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub identity_seed: u64,
    pub sample_seed: u64,
    pub delta: usize,
    pub gamma: usize,
    pub angle: f64,
    pub tau: usize,
    pub lq_path: String,
    pub hq_path: String,
}

impl ManifestRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.id,
            self.identity_seed,
            self.sample_seed,
            self.delta,
            self.gamma,
            self.angle,
            self.tau,
            self.lq_path,
            self.hq_path
        )
    }

    fn from_csv(line: &str, lineno: usize) -> Result<ManifestRow> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(GformerError::Manifest(format!(
                "line {lineno}: expected 9 fields, got {}",
                fields.len()
            )));
        }
        let bad = |what: &str| GformerError::Manifest(format!("line {lineno}: bad {what}"));
        Ok(ManifestRow {
            id: fields[0].to_string(),
            identity_seed: fields[1].parse().map_err(|_| bad("identity_seed"))?,
            sample_seed: fields[2].parse().map_err(|_| bad("sample_seed"))?,
            delta: fields[3].parse().map_err(|_| bad("delta"))?,
            gamma: fields[4].parse().map_err(|_| bad("gamma"))?,
            angle: fields[5].parse().map_err(|_| bad("angle"))?,
            tau: fields[6].parse().map_err(|_| bad("tau"))?,
            lq_path: fields[7].to_string(),
            hq_path: fields[8].to_string(),
        })
    }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == MANIFEST_HEADER => {}
        _ => {
            return Err(GformerError::Manifest(format!(
                "{}: missing or wrong header",
                path.display()
            )))
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ManifestRow::from_csv(l, i + 1))
        .collect()
}

pub fn mix_seed(master: u64, tag: u64, index: u64) -> u64 {
    // splitmix-style mixing keeps the per-purpose streams independent
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub struct SynthesisRequest {
    pub out_dir: PathBuf,
    pub identities: usize,
    pub samples_per: usize,
    pub resolution: usize,
    pub seed: u64,
    /// Fraction of identities routed to the training split; when set,
    /// manifest_train.csv and manifest_test.csv are written as well.
    pub split: Option<f64>,
}

pub struct SynthesisSummary {
    pub manifest: PathBuf,
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub rows: Vec<ManifestRow>,
}

/// Generate identities x samples HQ/LQ pairs plus manifests. Sample
/// synthesis runs on a worker pool; every sample derives its own seeds so
/// the output is independent of scheduling.
pub fn synthesize_dataset(req: &SynthesisRequest) -> Result<SynthesisSummary> {
    if req.identities == 0 || req.samples_per == 0 {
        return Err(GformerError::Manifest(
            "identities and samples-per must be at least 1".into(),
        ));
    }
    if let Some(split) = req.split {
        if !(0.0..=1.0).contains(&split) {
            return Err(GformerError::Manifest(format!(
                "split {split} outside [0,1]"
            )));
        }
    }
    fs::create_dir_all(&req.out_dir)?;

    let jobs: Vec<(usize, usize)> = (0..req.identities)
        .flat_map(|i| (0..req.samples_per).map(move |k| (i, k)))
        .collect();

    let rows: Result<Vec<ManifestRow>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let identity_seed = mix_seed(req.seed, 0x1d, i as u64);
            let sample_seed = mix_seed(req.seed, 0x5a, (i * req.samples_per + k) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let p = sample_params_for_resolution(&mut rng, req.resolution);
            let hq = synth_iris(identity_seed, sample_seed, req.resolution);
            let lq = degrade(&hq, &p)?;
            let hq_path = format!("id{i:04}_s{k:02}_hq.ppm");
            let lq_path = format!("id{i:04}_s{k:02}_lq.ppm");
            write_image(&req.out_dir.join(&hq_path), &hq)?;
            write_image(&req.out_dir.join(&lq_path), &lq)?;
            Ok(ManifestRow {
                id: format!("id{i:04}_s{k:02}"),
                identity_seed,
                sample_seed,
                delta: p.delta,
                gamma: p.gamma,
                angle: p.angle,
                tau: p.tau,
                lq_path,
                hq_path,
            })
        })
        .collect();
    let rows = rows?;

    let manifest = req.out_dir.join("manifest.csv");
    write_manifest(&manifest, &rows)?;

    let (train_manifest, test_manifest) = if let Some(split) = req.split {
        let n_train = ((req.identities as f64) * split).round() as usize;
        let train_rows: Vec<ManifestRow> = rows
            .iter()
            .filter(|r| identity_index(&r.id) < n_train)
            .cloned()
            .collect();
        let test_rows: Vec<ManifestRow> = rows
            .iter()
            .filter(|r| identity_index(&r.id) >= n_train)
            .cloned()
            .collect();
        let train = req.out_dir.join("manifest_train.csv");
        let test = req.out_dir.join("manifest_test.csv");
        write_manifest(&train, &train_rows)?;
        write_manifest(&test, &test_rows)?;
        (Some(train), Some(test))
    } else {
        (None, None)
    };

    Ok(SynthesisSummary {
        manifest,
        train_manifest,
        test_manifest,
        rows,
    })
}

fn identity_index(id: &str) -> usize {
    id.trim_start_matches("id")
        .split('_')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(usize::MAX)
}

/// One training/evaluation sample held in memory.
pub struct Sample {
    pub row: ManifestRow,
    pub hq: ImageBuf,
    /// LQ nearest-upsampled back to the HQ resolution.
    pub lq_up: ImageBuf,
}

pub struct Dataset {
    pub samples: Vec<Sample>,
    pub resolution: usize,
}

impl Dataset {
    /// Load every manifest row; LQ images are upsampled to the HQ size.
    pub fn load(manifest_path: &Path) -> Result<Dataset> {
        let rows = read_manifest(manifest_path)?;
        if rows.is_empty() {
            return Err(GformerError::Manifest(format!(
                "{}: no samples",
                manifest_path.display()
            )));
        }
        let dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let mut samples = Vec::with_capacity(rows.len());
        let mut resolution = None;
        for row in rows {
            let hq = read_image(&dir.join(&row.hq_path))?;
            let lq = read_image(&dir.join(&row.lq_path))?;
            if hq.width != hq.height {
                return Err(GformerError::Manifest(format!(
                    "{}: HQ images must be square",
                    row.hq_path
                )));
            }
            if hq.width % lq.width != 0 {
                return Err(GformerError::Manifest(format!(
                    "{}: LQ extent {} does not divide HQ extent {}",
                    row.lq_path, lq.width, hq.width
                )));
            }
            let factor = hq.width / lq.width;
            let lq_up = lq.upsample_nearest(factor);
            match resolution {
                None => resolution = Some(hq.width),
                Some(r) if r == hq.width => {}
                Some(r) => {
                    return Err(GformerError::Manifest(format!(
                        "mixed resolutions {r} and {}",
                        hq.width
                    )))
                }
            }
            samples.push(Sample { row, hq, lq_up });
        }
        Ok(Dataset {
            samples,
            resolution: resolution.expect("non-empty"),
        })
    }
}

/// Stack single images into one (B,3,R,R) tensor.
pub fn batch_tensor<T: Scalar>(images: &[&ImageBuf]) -> Tensor<T> {
    let (w, h) = (images[0].width, images[0].height);
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        let rgb = img.to_rgb();
        data.extend(rgb.data.iter().map(|&v| T::from_f64_c(v as f64)));
    }
    Tensor::from_vec(data, &[images.len(), 3, h, w]).expect("batch shape")
}

