//! Evaluation protocol: restore every low-quality image of a manifest,
//! score image quality against the ground truth, and build genuine/impostor
//! match-score sets for both the restored images and the raw inputs.
//!
//! Pairing: every (probe, HQ) pair scores once, same-identity pairs are
//! genuine and cross-identity pairs impostor; probe-vs-probe pairs (i < j)
//! are added the same way.

use std::fs;
use std::path::Path;

use tensor_core::Tensor;

use crate::checkpoint::Checkpoint;
use crate::dataset::Dataset;
use crate::error::{GformerError, Result};
use crate::image::ImageBuf;
use crate::iris::{iris_code, match_score, IrisCode};
use crate::metrics::{psnr, rank_metrics, ssim, RankMetrics, RocCurve, ScoreSet};
use crate::model::Gformer;

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub rank: RankMetrics,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
}

pub struct EvalReport {
    pub input: MethodReport,
    pub restored: MethodReport,
}

pub const METRICS_COLUMNS: &str = "method,auc,eer,tar_far_001,tar_far_01,tar_far_1,psnr_mean,ssim_mean";

struct MethodBatch {
    name: &'static str,
    images: Vec<ImageBuf>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Restore one image tensor through a bound model.
fn restore_one(
    model: &Gformer,
    bound: &crate::params::Bound<f32>,
    lq_up: &ImageBuf,
) -> Result<ImageBuf> {
    let x: Tensor<f32> = lq_up.to_tensor();
    let out = model.forward(bound, &x)?;
    ImageBuf::from_tensor(&out.restored)
}

fn score_method(
    method: &MethodBatch,
    data: &Dataset,
    hq_codes: &[IrisCode],
) -> Result<(MethodReport, RocCurve, ScoreSet)> {
    let n = data.samples.len();
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    let mut codes = Vec::with_capacity(n);
    for (img, sample) in method.images.iter().zip(&data.samples) {
        psnr_sum += psnr(img, &sample.hq, 1.0)?;
        ssim_sum += ssim(img, &sample.hq, 1.0)?;
        codes.push(iris_code(img)?);
    }

    let mut scores = ScoreSet::default();
    let same_identity =
        |a: usize, b: usize| data.samples[a].row.identity_seed == data.samples[b].row.identity_seed;
    for i in 0..n {
        for j in 0..n {
            let s = match_score(&codes[i], &hq_codes[j])?;
            if same_identity(i, j) {
                scores.genuine.push(s);
            } else {
                scores.impostor.push(s);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = match_score(&codes[i], &codes[j])?;
            if same_identity(i, j) {
                scores.genuine.push(s);
            } else {
                scores.impostor.push(s);
            }
        }
    }

    let (rank, curve) = rank_metrics(&scores)?;
    Ok((
        MethodReport {
            method: method.name.to_string(),
            rank,
            psnr_mean: psnr_sum / n as f64,
            ssim_mean: ssim_sum / n as f64,
        },
        curve,
        scores,
    ))
}

fn write_scores_csv(path: &Path, scores: &ScoreSet) -> Result<()> {
    let mut text = String::from("pair_id,label,score\n");
    for (i, s) in scores.genuine.iter().enumerate() {
        text.push_str(&format!("g{i},genuine,{s}\n"));
    }
    for (i, s) in scores.impostor.iter().enumerate() {
        text.push_str(&format!("i{i},impostor,{s}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut text = String::from("far,tar\n");
    for (far, tar) in &curve.points {
        text.push_str(&format!("{far},{tar}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Run the full protocol and write metrics.csv (input + restored rows),
/// per-method score CSVs and ROC point CSVs into `out_dir`.
pub fn evaluate(manifest: &Path, ckpt: &Checkpoint, out_dir: &Path) -> Result<EvalReport> {
    let data = Dataset::load(manifest)?;
    if data.resolution != ckpt.config.input_resolution {
        return Err(GformerError::Eval(format!(
            "dataset resolution {} does not match checkpoint resolution {}",
            data.resolution, ckpt.config.input_resolution
        )));
    }
    fs::create_dir_all(out_dir)?;

    let model = Gformer::new(ckpt.config.clone())?;
    let fresh = model.init_params::<f32>(0);
    if !fresh.layout_matches(&ckpt.model) {
        return Err(GformerError::Checkpoint(
            "checkpoint parameter table does not match the model layout".into(),
        ));
    }
    let bound = ckpt.model.bind();

    let mut restored = Vec::with_capacity(data.samples.len());
    for sample in &data.samples {
        restored.push(restore_one(&model, &bound, &sample.lq_up)?);
    }
    let inputs: Vec<ImageBuf> = data.samples.iter().map(|s| s.lq_up.clone()).collect();
    let hq_codes: Vec<IrisCode> = data
        .samples
        .iter()
        .map(|s| iris_code(&s.hq))
        .collect::<Result<_>>()?;

    let methods = [
        MethodBatch {
            name: "input",
            images: inputs,
        },
        MethodBatch {
            name: "restored",
            images: restored,
        },
    ];

    let mut reports = Vec::new();
    let mut metrics_csv = String::from(METRICS_COLUMNS);
    metrics_csv.push('\n');
    for method in &methods {
        let (report, curve, scores) = score_method(method, &data, &hq_codes)?;
        write_scores_csv(&out_dir.join(format!("scores_{}.csv", method.name)), &scores)?;
        write_roc_csv(&out_dir.join(format!("roc_{}.csv", method.name)), &curve)?;
        metrics_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            report.method,
            fmt_f64(report.rank.auc),
            fmt_f64(report.rank.eer),
            fmt_f64(report.rank.tar_far_001),
            fmt_f64(report.rank.tar_far_01),
            fmt_f64(report.rank.tar_far_1),
            fmt_f64(report.psnr_mean),
            fmt_f64(report.ssim_mean),
        ));
        reports.push(report);
    }
    fs::write(out_dir.join("metrics.csv"), metrics_csv)?;

    let restored_report = reports.pop().expect("two methods");
    let input_report = reports.pop().expect("two methods");
    Ok(EvalReport {
        input: input_report,
        restored: restored_report,
    })
}
