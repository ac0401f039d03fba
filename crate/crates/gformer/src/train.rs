//! Training procedures: adversarial pretraining of the generative prior,
//! and restoration training with the prior embedded. Both alternate one
//! discriminator update with one generator update per step, derive every
//! random draw from (seed, step), and abort on non-finite losses with the
//! last good state preserved.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tensor_core::{adam_step, AdamState, Scalar, Tensor};

use crate::checkpoint::{Checkpoint, OptimizerSnapshot};
use crate::config::ModelConfig;
use crate::dataset::{batch_tensor, mix_seed, Dataset};
use crate::discriminator::Discriminator;
use crate::error::{GformerError, Result};
use crate::losses::{adversarial_loss_g, discriminator_loss, total_loss, LossParts, LossWeights};
use crate::model::Gformer;
use crate::params::{ParamLayout, ParamSet};
use crate::perceptual::PerceptualExtractor;

pub const DEFAULT_LR: f64 = 2e-4;
pub const TOY_BATCH: usize = 4;
pub const PAPER_BATCH: usize = 16;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch: usize,
    pub steps: u64,
    pub lr: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub manifest: PathBuf,
    /// Save a checkpoint every n steps (0 = only at the end).
    pub ckpt_every: u64,
    pub freeze_prior: bool,
    pub log_path: Option<PathBuf>,
}

impl TrainConfig {
    pub fn toy(manifest: PathBuf, steps: u64, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            model: ModelConfig::preset("toy-64")?,
            batch: TOY_BATCH,
            steps,
            lr: DEFAULT_LR,
            seed,
            weights: LossWeights::default(),
            manifest,
            ckpt_every: 0,
            freeze_prior: false,
            log_path: None,
        })
    }
}

/// Per-step CSV log: step, l1, per, adv, pyr, total, d_loss.
pub struct LossLog {
    pub lines: Vec<String>,
}

impl LossLog {
    pub fn new() -> LossLog {
        LossLog {
            lines: vec!["step,l1,per,adv,pyr,total,d_loss".to_string()],
        }
    }

    fn push(&mut self, step: u64, parts: &LossParts, d_loss: f64) {
        self.lines.push(format!(
            "{},{},{},{},{},{},{}",
            step, parts.l1, parts.perceptual, parts.adversarial, parts.pyramid, parts.total, d_loss
        ));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.lines.join("\n") + "\n")?;
        Ok(())
    }
}

impl Default for LossLog {
    fn default() -> Self {
        Self::new()
    }
}

fn finite_or_abort(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(GformerError::Train(format!(
            "{what} became non-finite ({value}); training aborted"
        )))
    }
}

fn sample_batch(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<usize> {
    (0..batch).map(|_| rng.gen_range(0..n)).collect()
}

/// One optimizer-ready gradient list, with frozen prefixes zeroed.
fn grads_for<T: Scalar>(
    params: &ParamSet<T>,
    bound: &crate::params::Bound<T>,
    grads: &tensor_core::Gradients<T>,
    freeze_prefix: Option<&str>,
) -> Vec<Vec<T>> {
    let mut g = params.collect_grads(bound, grads);
    if let Some(prefix) = freeze_prefix {
        for (entry, slot) in params.entries().iter().zip(g.iter_mut()) {
            if entry.name.starts_with(prefix) {
                slot.iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }
    g
}

fn adam_apply<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    let mut data: Vec<Vec<T>> = params
        .entries_mut()
        .iter_mut()
        .map(|e| std::mem::take(&mut e.data))
        .collect();
    let result = adam_step(&mut data, grads, state);
    for (e, d) in params.entries_mut().iter_mut().zip(data) {
        e.data = d;
    }
    result?;
    Ok(())
}

/// Prior pretraining state: generator blocks driven by random latents
/// against the discriminator.
pub struct PriorTrainer {
    pub cfg: TrainConfig,
    gen: crate::generator::GeneratorBlocks,
    gen_layout: ParamLayout,
    disc: Discriminator,
    pub params: ParamSet<f32>,
    pub disc_params: ParamSet<f32>,
    adam_gen: AdamState<f32>,
    adam_disc: AdamState<f32>,
    pub step: u64,
    data: Dataset,
    /// (g_loss, d_loss, d_accuracy) per executed step.
    pub history: Vec<(f64, f64, f64)>,
}

impl PriorTrainer {
    pub fn new(cfg: TrainConfig) -> Result<PriorTrainer> {
        cfg.model.validate()?;
        let data = Dataset::load(&cfg.manifest)?;
        if data.resolution != cfg.model.input_resolution {
            return Err(GformerError::Train(format!(
                "dataset resolution {} does not match model resolution {}",
                data.resolution, cfg.model.input_resolution
            )));
        }
        let mut gen_layout = ParamLayout::default();
        let gen = crate::generator::GeneratorBlocks::new(&mut gen_layout, &cfg.model);
        let params: ParamSet<f32> = gen_layout.init_params(mix_seed(cfg.seed, 0x6e, 0));
        let mut disc_layout = ParamLayout::default();
        let disc = Discriminator::new(&mut disc_layout, cfg.model.input_resolution);
        let disc_params: ParamSet<f32> = disc_layout.init_params(mix_seed(cfg.seed, 0xd1, 0));
        let adam_gen = AdamState::new(cfg.lr as f32, &params.param_lens());
        let adam_disc = AdamState::new(cfg.lr as f32, &disc_params.param_lens());
        Ok(PriorTrainer {
            cfg,
            gen,
            gen_layout,
            disc,
            params,
            disc_params,
            adam_gen,
            adam_disc,
            step: 0,
            data,
            history: Vec::new(),
        })
    }

    fn latents(&self, rng: &mut ChaCha8Rng) -> Tensor<f32> {
        let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
        let n = self.cfg.batch * self.cfg.model.latent_dim;
        let data: Vec<f32> = (0..n).map(|_| normal.sample(rng) as f32).collect();
        Tensor::from_vec(data, &[self.cfg.batch, self.cfg.model.latent_dim]).expect("latents")
    }

    /// One alternating discriminator + generator update.
    pub fn train_step(&mut self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, 0x57e9, self.step));
        let idx = sample_batch(&mut rng, self.data.samples.len(), self.cfg.batch);
        let real_imgs: Vec<&crate::image::ImageBuf> =
            idx.iter().map(|&i| &self.data.samples[i].hq).collect();
        let real = batch_tensor::<f32>(&real_imgs);
        let z = self.latents(&mut rng);

        // generator forward once; the discriminator step sees it detached
        let bound = self.params.bind();
        let fake = self.gen.prior_forward(&bound, &z)?;

        let dbound = self.disc_params.bind();
        let d_real = self.disc.forward(&dbound, &real)?;
        let d_fake_detached = self.disc.forward(&dbound, &fake.detach())?;
        let d_loss = discriminator_loss(&d_real, &d_fake_detached)?;
        let d_loss_val = d_loss.item() as f64;
        finite_or_abort(d_loss_val, "discriminator loss")?;
        let d_grads = d_loss.backward()?;
        let g = grads_for(&self.disc_params, &dbound, &d_grads, None);
        adam_apply(&mut self.disc_params, &g, &mut self.adam_disc)?;

        // generator step against the updated discriminator
        let dbound2 = self.disc_params.bind();
        let d_fake = self.disc.forward(&dbound2, &fake)?;
        let g_loss = adversarial_loss_g(&d_fake);
        let g_loss_val = g_loss.item() as f64;
        finite_or_abort(g_loss_val, "generator loss")?;
        let g_grads = g_loss.backward()?;
        let g = grads_for(&self.params, &bound, &g_grads, None);
        adam_apply(&mut self.params, &g, &mut self.adam_gen)?;

        // discriminator accuracy on this batch, post-update logits
        let correct_real = d_real
            .data()
            .iter()
            .filter(|&&v| v > 0.0)
            .count();
        let correct_fake = d_fake_detached
            .data()
            .iter()
            .filter(|&&v| v < 0.0)
            .count();
        let d_acc = (correct_real + correct_fake) as f64 / (2 * self.cfg.batch) as f64;

        self.step += 1;
        self.history.push((g_loss_val, d_loss_val, d_acc));
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        while self.step < self.cfg.steps {
            self.train_step()?;
        }
        Ok(())
    }

    /// Mean discriminator accuracy over the trailing window.
    pub fn recent_d_accuracy(&self, window: usize) -> f64 {
        if self.history.is_empty() {
            return 0.5;
        }
        let tail = &self.history[self.history.len().saturating_sub(window)..];
        tail.iter().map(|(_, _, a)| a).sum::<f64>() / tail.len() as f64
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.model.clone(),
            step: self.step,
            model: self.params.clone(),
            disc: self.disc_params.clone(),
            opt_model: Some(OptimizerSnapshot::of(&self.adam_gen)),
            opt_disc: Some(OptimizerSnapshot::of(&self.adam_disc)),
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.gen_layout
    }
}

/// Restoration trainer: the full network against degraded/clean pairs plus
/// the adversarial signal.
pub struct Trainer {
    pub cfg: TrainConfig,
    model: Gformer,
    disc: Discriminator,
    pub params: ParamSet<f32>,
    pub disc_params: ParamSet<f32>,
    adam_model: AdamState<f32>,
    adam_disc: AdamState<f32>,
    pub step: u64,
    data: Dataset,
    phi: PerceptualExtractor<f32>,
    pub log: LossLog,
    last_good: Option<(ParamSet<f32>, ParamSet<f32>)>,
}

impl Trainer {
    /// Fresh training run warm-started from a pretrained prior.
    pub fn new(cfg: TrainConfig, prior: &Checkpoint) -> Result<Trainer> {
        if prior.config != cfg.model {
            return Err(GformerError::Checkpoint(format!(
                "prior checkpoint was built for a different config\nprior:\n{}\nrequested:\n{}",
                prior.config.to_kv(),
                cfg.model.to_kv()
            )));
        }
        let mut t = Trainer::init(cfg)?;
        let adopted = t.params.adopt_prefix(&prior.model, "gen.")?;
        if adopted == 0 {
            return Err(GformerError::Checkpoint(
                "prior checkpoint carries no generator parameters".into(),
            ));
        }
        Ok(t)
    }

    fn init(cfg: TrainConfig) -> Result<Trainer> {
        cfg.model.validate()?;
        let data = Dataset::load(&cfg.manifest)?;
        if data.resolution != cfg.model.input_resolution {
            return Err(GformerError::Train(format!(
                "dataset resolution {} does not match model resolution {}",
                data.resolution, cfg.model.input_resolution
            )));
        }
        let model = Gformer::new(cfg.model.clone())?;
        let params: ParamSet<f32> = model.init_params(mix_seed(cfg.seed, 0x90de1, 0));
        let mut disc_layout = ParamLayout::default();
        let disc = Discriminator::new(&mut disc_layout, cfg.model.input_resolution);
        let disc_params: ParamSet<f32> = disc_layout.init_params(mix_seed(cfg.seed, 0xd15c, 0));
        let adam_model = AdamState::new(cfg.lr as f32, &params.param_lens());
        let adam_disc = AdamState::new(cfg.lr as f32, &disc_params.param_lens());
        Ok(Trainer {
            cfg,
            model,
            disc,
            params,
            disc_params,
            adam_model,
            adam_disc,
            step: 0,
            data,
            phi: PerceptualExtractor::new(),
            log: LossLog::new(),
            last_good: None,
        })
    }

    /// Resume from a checkpoint produced by this trainer.
    pub fn from_checkpoint(cfg: TrainConfig, ckpt: Checkpoint) -> Result<Trainer> {
        if ckpt.config != cfg.model {
            return Err(GformerError::Checkpoint(
                "checkpoint config does not match the requested model config".into(),
            ));
        }
        let mut t = Trainer::init(cfg)?;
        if !t.params.layout_matches(&ckpt.model) || !t.disc_params.layout_matches(&ckpt.disc) {
            return Err(GformerError::Checkpoint(
                "checkpoint parameter table does not match the model layout".into(),
            ));
        }
        t.params = ckpt.model;
        t.disc_params = ckpt.disc;
        t.step = ckpt.step;
        if let Some(o) = &ckpt.opt_model {
            t.adam_model = o.restore();
        }
        if let Some(o) = &ckpt.opt_disc {
            t.adam_disc = o.restore();
        }
        Ok(t)
    }

    /// One alternating discriminator + generator update.
    pub fn train_step(&mut self) -> Result<LossParts> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, 0x6f, self.step));
        let idx = sample_batch(&mut rng, self.data.samples.len(), self.cfg.batch);
        let lq_imgs: Vec<&crate::image::ImageBuf> =
            idx.iter().map(|&i| &self.data.samples[i].lq_up).collect();
        let hq_imgs: Vec<&crate::image::ImageBuf> =
            idx.iter().map(|&i| &self.data.samples[i].hq).collect();
        let x = batch_tensor::<f32>(&lq_imgs);
        let y = batch_tensor::<f32>(&hq_imgs);

        let bound = self.params.bind();
        let out = self.model.forward(&bound, &x)?;

        // discriminator update on detached restorations
        let dbound = self.disc_params.bind();
        let d_real = self.disc.forward(&dbound, &y)?;
        let d_fake_detached = self.disc.forward(&dbound, &out.restored.detach())?;
        let d_loss = discriminator_loss(&d_real, &d_fake_detached)?;
        let d_loss_val = d_loss.item() as f64;
        finite_or_abort(d_loss_val, "discriminator loss")?;
        let d_grads = d_loss.backward()?;
        let g = grads_for(&self.disc_params, &dbound, &d_grads, None);
        adam_apply(&mut self.disc_params, &g, &mut self.adam_disc)?;

        // generator update against the refreshed discriminator
        let dbound2 = self.disc_params.bind();
        let d_fake = self.disc.forward(&dbound2, &out.restored)?;
        let (loss, parts) = total_loss(
            &self.phi,
            &y,
            &out.restored,
            &out.pyramid,
            &d_fake,
            &self.cfg.weights,
        )?;
        finite_or_abort(parts.total, "total loss")?;
        let grads = loss.backward()?;
        let freeze = self.cfg.freeze_prior.then_some("gen.");
        let g = grads_for(&self.params, &bound, &grads, freeze);
        adam_apply(&mut self.params, &g, &mut self.adam_model)?;

        self.step += 1;
        self.log.push(self.step, &parts, d_loss_val);
        self.last_good = Some((self.params.clone(), self.disc_params.clone()));
        Ok(parts)
    }

    /// Run to the configured step count, checkpointing on the configured
    /// cadence. On a non-finite loss the last good parameters are written
    /// to `out` before the error is returned.
    pub fn run(&mut self, out: &Path) -> Result<()> {
        while self.step < self.cfg.steps {
            if let Err(e) = self.train_step() {
                if let Some((p, d)) = self.last_good.take() {
                    self.params = p;
                    self.disc_params = d;
                }
                crate::checkpoint::save_checkpoint(out, &self.checkpoint())?;
                if let Some(log) = &self.cfg.log_path {
                    self.log.write(log)?;
                }
                return Err(e);
            }
            if self.cfg.ckpt_every > 0 && self.step % self.cfg.ckpt_every == 0 {
                crate::checkpoint::save_checkpoint(out, &self.checkpoint())?;
            }
        }
        crate::checkpoint::save_checkpoint(out, &self.checkpoint())?;
        if let Some(log) = &self.cfg.log_path {
            self.log.write(log)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.model.clone(),
            step: self.step,
            model: self.params.clone(),
            disc: self.disc_params.clone(),
            opt_model: Some(OptimizerSnapshot::of(&self.adam_model)),
            opt_disc: Some(OptimizerSnapshot::of(&self.adam_disc)),
        }
    }

    pub fn model(&self) -> &Gformer {
        &self.model
    }
}
