//! Batch command-line interface. Every command is reproducible from its
//! flags and seed; all outputs are files, stdout carries progress and
//! summary lines only.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ModelConfig;
use crate::dataset::{synthesize_dataset, SynthesisRequest};
use crate::error::{GformerError, Result};
use crate::evalrun::evaluate;
use crate::image::{read_image, write_image, ImageBuf};
use crate::losses::LossWeights;
use crate::model::Gformer;
use crate::train::{PriorTrainer, TrainConfig, Trainer, DEFAULT_LR};

#[derive(Parser)]
#[command(
    name = "gformer",
    about = "Iris-like image restoration: dataset synthesis, prior and restorer training, inference, and biometric evaluation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct ModelArgs {
    /// Named preset: paper-256 or toy-64.
    #[arg(long, default_value = "toy-64")]
    pub preset: String,
    /// Optional key=value file overriding preset fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::preset(&self.preset)?;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    GformerError::Config(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                cfg.apply_kv(key.trim(), value.trim())?;
            }
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic iris-like dataset with degraded counterparts.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        identities: usize,
        #[arg(long = "samples-per")]
        samples_per: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of identities in the training split; also writes
        /// manifest_train.csv / manifest_test.csv.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Adversarially pretrain the generative prior on clean images.
    TrainPrior {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LR)]
        lr: f64,
        #[command(flatten)]
        model: ModelArgs,
        /// Per-step CSV log (step,g_loss,d_loss,d_acc).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train the restorer with the pretrained prior embedded.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Prior checkpoint to warm-start the decoder from.
        #[arg(long, required_unless_present = "resume")]
        prior: Option<PathBuf>,
        /// Resume a previous training checkpoint instead.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LR)]
        lr: f64,
        #[arg(long = "ckpt-every", default_value_t = 0)]
        ckpt_every: u64,
        #[arg(long = "freeze-prior", default_value_t = false)]
        freeze_prior: bool,
        #[command(flatten)]
        model: ModelArgs,
        /// Per-step CSV loss log (step,l1,per,adv,pyr,total,d_loss).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Restore one degraded image with a trained checkpoint.
    Restore {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for the per-level intermediate RGB images.
        #[arg(long)]
        pyramid: Option<PathBuf>,
    },
    /// Restore a manifest's LQ images and compute quality plus recognition
    /// metrics against the ground truth.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        /// op | block | model
        #[arg(long)]
        scope: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the channel and spatial attention-score strategies.
    BenchAttention {
        #[arg(long, default_value_t = 32)]
        channels: usize,
        /// Comma-separated image side lengths (token count is side^2).
        #[arg(long, default_value = "8,16,32,64")]
        sizes: String,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData {
            out,
            identities,
            samples_per,
            resolution,
            seed,
            split,
        } => {
            let summary = synthesize_dataset(&SynthesisRequest {
                out_dir: out,
                identities,
                samples_per,
                resolution,
                seed,
                split,
            })?;
            println!(
                "wrote {} samples to {}",
                summary.rows.len(),
                summary.manifest.display()
            );
            if let (Some(train), Some(test)) = (&summary.train_manifest, &summary.test_manifest) {
                println!("split manifests: {} / {}", train.display(), test.display());
            }
            Ok(())
        }
        Command::TrainPrior {
            manifest,
            out,
            steps,
            batch,
            seed,
            lr,
            model,
            log,
        } => {
            let cfg = TrainConfig {
                model: model.resolve()?,
                batch,
                steps,
                lr,
                seed,
                weights: LossWeights::default(),
                manifest,
                ckpt_every: 0,
                freeze_prior: false,
                log_path: None,
            };
            let mut trainer = PriorTrainer::new(cfg)?;
            while trainer.step < trainer.cfg.steps {
                trainer.train_step()?;
                if trainer.step % 100 == 0 || trainer.step == trainer.cfg.steps {
                    let (g, d, a) = *trainer.history.last().expect("stepped");
                    println!(
                        "step {} g_loss {g:.4} d_loss {d:.4} d_acc {a:.2}",
                        trainer.step
                    );
                }
            }
            save_checkpoint(&out, &trainer.checkpoint())?;
            if let Some(log_path) = log {
                let mut text = String::from("step,g_loss,d_loss,d_acc\n");
                for (i, (g, d, a)) in trainer.history.iter().enumerate() {
                    text.push_str(&format!("{},{g},{d},{a}\n", i + 1));
                }
                fs::write(log_path, text)?;
            }
            println!(
                "prior checkpoint written to {} (d_acc over last 50 steps: {:.3})",
                out.display(),
                trainer.recent_d_accuracy(50)
            );
            Ok(())
        }
        Command::Train {
            manifest,
            prior,
            resume,
            out,
            steps,
            batch,
            seed,
            lr,
            ckpt_every,
            freeze_prior,
            model,
            log,
        } => {
            let cfg = TrainConfig {
                model: model.resolve()?,
                batch,
                steps,
                lr,
                seed,
                weights: LossWeights::default(),
                manifest,
                ckpt_every,
                freeze_prior,
                log_path: log,
            };
            let mut trainer = match (resume, prior) {
                (Some(resume), _) => Trainer::from_checkpoint(cfg, load_checkpoint(&resume)?)?,
                (None, Some(prior)) => Trainer::new(cfg, &load_checkpoint(&prior)?)?,
                (None, None) => unreachable!("clap enforces prior or resume"),
            };
            while trainer.step < trainer.cfg.steps {
                let parts = match trainer.train_step() {
                    Ok(parts) => parts,
                    Err(e) => {
                        save_checkpoint(&out, &trainer.checkpoint())?;
                        return Err(e);
                    }
                };
                if trainer.cfg.ckpt_every > 0 && trainer.step % trainer.cfg.ckpt_every == 0 {
                    save_checkpoint(&out, &trainer.checkpoint())?;
                }
                if trainer.step % 50 == 0 || trainer.step == trainer.cfg.steps {
                    println!("step {} total {:.4}", trainer.step, parts.total);
                }
            }
            save_checkpoint(&out, &trainer.checkpoint())?;
            if let Some(log_path) = &trainer.cfg.log_path {
                trainer.log.write(log_path)?;
            }
            println!("checkpoint written to {}", out.display());
            Ok(())
        }
        Command::Restore {
            ckpt,
            input,
            out,
            pyramid,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let model = Gformer::new(ckpt.config.clone())?;
            let img = read_image(&input)?;
            let r = ckpt.config.input_resolution;
            if img.width != img.height || r % img.width != 0 {
                return Err(GformerError::Image(format!(
                    "input {}x{} must be square with an extent dividing {r}",
                    img.width, img.height
                )));
            }
            let up = img.upsample_nearest(r / img.width);
            let bound = ckpt.model.bind();
            let x: tensor_core::Tensor<f32> = up.to_tensor();
            let fwd = model.forward(&bound, &x)?;
            write_image(&out, &ImageBuf::from_tensor(&fwd.restored)?)?;
            if let Some(dir) = pyramid {
                fs::create_dir_all(&dir)?;
                for (i, level) in fwd.pyramid.iter().enumerate() {
                    write_image(
                        &dir.join(format!("pyr_{i}.ppm")),
                        &ImageBuf::from_tensor(level)?,
                    )?;
                }
            }
            println!("restored image written to {}", out.display());
            Ok(())
        }
        Command::Evaluate {
            manifest,
            ckpt,
            out,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let report = evaluate(&manifest, &ckpt, &out)?;
            println!(
                "input:    psnr {:.3} ssim {:.4} auc {:.4} eer {:.4}",
                report.input.psnr_mean,
                report.input.ssim_mean,
                report.input.rank.auc,
                report.input.rank.eer
            );
            println!(
                "restored: psnr {:.3} ssim {:.4} auc {:.4} eer {:.4}",
                report.restored.psnr_mean,
                report.restored.ssim_mean,
                report.restored.rank.auc,
                report.restored.rank.eer
            );
            println!("metrics written to {}", out.join("metrics.csv").display());
            Ok(())
        }
        Command::Gradcheck { scope, seed } => {
            let reports = crate::verify::run_scope(&scope, seed)?;
            let mut failed = false;
            for r in &reports {
                println!(
                    "{}: max relative error {:.3e} (tolerance {:.0e}) {}",
                    r.name,
                    r.max_rel_error,
                    r.tolerance,
                    if r.passed() { "PASS" } else { "FAIL" }
                );
                failed |= !r.passed();
            }
            if failed {
                return Err(GformerError::Eval(
                    "gradient check exceeded tolerance".into(),
                ));
            }
            Ok(())
        }
        Command::BenchAttention {
            channels,
            sizes,
            reps,
        } => {
            let sides: Vec<usize> = sizes
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| GformerError::Config(format!("bad size '{s}'")))
                })
                .collect::<Result<_>>()?;
            let report = crate::bench::bench_attention(channels, &sides, reps)?;
            print!("{}", report.to_csv());
            println!(
                "channel wall-time linearity in HW: R^2 = {:.4}",
                report.channel_time_r2
            );
            if !report.channel_bytes_constant {
                return Err(GformerError::Eval(
                    "channel-attention score storage varied with HW".into(),
                ));
            }
            println!("channel score bytes constant across sizes: ok");
            Ok(())
        }
    }
}

/// Exit code contract: 0 success, 1 usage error, 2 runtime error.
pub fn main_with_exit_codes() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            if e.use_stderr() {
                eprintln!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
