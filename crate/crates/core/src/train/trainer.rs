use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::log::{EpochRecord, StepRecord, TrainLog};
use super::losses::{d_loss, g_adv_loss, variety_loss};
use super::{Result, TrainConfig, TrainError, TrainMode};
use crate::data::SceneWindow;
use crate::eval::eval_min_of_k;
use crate::model::{Batch, Checkpoint, Discriminator, Generator, ModelConfig};
use crate::tensor::{Adam, AdamConfig, ParamSet, Tape};

const RESUME_VERSION: u32 = 1;

/// Networks, optimizers and the random stream of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    adam_g: Adam,
    adam_d: Adam,
    rng: ChaCha8Rng,
    step: u64,
    epoch: usize,
    pub log: TrainLog,
    best: Option<(f64, Checkpoint)>,
}

/// Everything needed to continue a run bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResumeState {
    pub format_version: u32,
    pub config: TrainConfig,
    pub checkpoint: Checkpoint,
    pub adam_g: Adam,
    pub adam_d: Adam,
    pub rng: ChaCha8Rng,
    pub step: u64,
    pub epoch: usize,
    pub log: TrainLog,
    pub best: Option<(f64, Checkpoint)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest validation ADE seen, or the final state without validation data.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: TrainLog,
}

fn top_norms(ps: &ParamSet) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = ps
        .iter()
        .map(|(n, t)| (n.to_string(), t.grad().map_or(0.0, |g| g.iter().map(|x| x * x).sum::<f64>().sqrt())))
        .collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1));
    v.truncate(5);
    v
}

impl Trainer {
    pub fn new(model: ModelConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = Generator::new(model.clone(), rng.random())?;
        let discriminator = Discriminator::new(model, rng.random())?;
        let adam = AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        };
        Ok(Trainer {
            adam_g: Adam::new(adam, &generator.params),
            adam_d: Adam::new(adam, &discriminator.params),
            config,
            generator,
            discriminator,
            rng,
            step: 0,
            epoch: 0,
            log: TrainLog::default(),
            best: None,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn non_finite(&self, what: &'static str, gen: bool) -> TrainError {
        let ps = if gen { &self.generator.params } else { &self.discriminator.params };
        TrainError::NonFinite {
            step: self.step,
            what,
            grad_norm_g: self.generator.params.grad_norm(),
            grad_norm_d: self.discriminator.params.grad_norm(),
            norms: top_norms(ps),
        }
    }

    fn clip(ps: &mut ParamSet, clip: Option<f64>) -> f64 {
        match clip {
            Some(c) => ps.clip_grad_norm(c),
            None => ps.grad_norm(),
        }
    }

    /// One discriminator update on real futures and one generated sample per
    /// agent. The generator is bound as constants. Returns (loss, grad norm).
    pub fn d_step(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let noise = self.generator.sample_noise(batch.n_agents(), 1, &mut self.rng);
        let mut tape = Tape::new();
        let gp = self.generator.params.bind(&mut tape, false);
        let dp = self.discriminator.params.bind(&mut tape, true);
        let out = self.generator.forward(&mut tape, &gp, batch, &noise, 1)?;
        let fake_in = self.discriminator.fake_input(&mut tape, batch, &out, 0)?;
        let real_in = self.discriminator.real_input(&mut tape, batch)?;
        let real = self.discriminator.forward(&mut tape, &dp, real_in, &batch.classes)?;
        let fake = self.discriminator.forward(&mut tape, &dp, fake_in, &batch.classes)?;
        let loss = d_loss(&mut tape, real.scores, fake.scores)?;
        let value = tape.scalar(loss);
        let grads = tape.backward(loss)?;
        self.discriminator.params.accumulate(&dp, &grads)?;
        let norm = Self::clip(&mut self.discriminator.params, self.config.clip_norm);
        if !value.is_finite() || !norm.is_finite() {
            return Err(self.non_finite("discriminator loss", false));
        }
        self.adam_d.step(&mut self.discriminator.params)?;
        Ok((value, norm))
    }

    /// One generator update with `k` samples: variety loss plus, when
    /// `adversarial`, the weighted adversarial loss on sample 0. The
    /// discriminator is bound as constants. Returns (adv, variety, grad norm).
    pub fn g_step(&mut self, batch: &Batch, adversarial: bool) -> Result<(Option<f64>, f64, f64)> {
        let k = self.config.k;
        let noise = self.generator.sample_noise(batch.n_agents(), k, &mut self.rng);
        let mut tape = Tape::new();
        let gp = self.generator.params.bind(&mut tape, true);
        let out = self.generator.forward(&mut tape, &gp, batch, &noise, k)?;
        let (variety, _) = variety_loss(&mut tape, out.trajectory, &batch.future_flat(), k)?;
        let mut total = variety;
        let mut adv_value = None;
        if adversarial {
            let dp = self.discriminator.params.bind(&mut tape, false);
            let fake_in = self.discriminator.fake_input(&mut tape, batch, &out, 0)?;
            let fake = self.discriminator.forward(&mut tape, &dp, fake_in, &batch.classes)?;
            let adv = g_adv_loss(&mut tape, fake.scores)?;
            adv_value = Some(tape.scalar(adv));
            let weighted = tape.scale(adv, self.config.adv_weight)?;
            total = tape.add(total, weighted)?;
        }
        let value = tape.scalar(total);
        let variety_value = tape.scalar(variety);
        let grads = tape.backward(total)?;
        self.generator.params.accumulate(&gp, &grads)?;
        let norm = Self::clip(&mut self.generator.params, self.config.clip_norm);
        if !value.is_finite() || !norm.is_finite() {
            return Err(self.non_finite("generator loss", true));
        }
        self.adam_g.step(&mut self.generator.params)?;
        Ok((adv_value, variety_value, norm))
    }

    /// One iteration in the configured mode.
    pub fn train_step(&mut self, batch: &Batch) -> Result<StepRecord> {
        let start = Instant::now();
        let (mut d, mut gd) = (None, None);
        let (mut adv, mut variety, mut gg) = (None, 0.0, 0.0);
        match self.config.mode {
            TrainMode::Gan => {
                for _ in 0..self.config.d_steps {
                    let (l, n) = self.d_step(batch)?;
                    (d, gd) = (Some(l), Some(n));
                }
                for _ in 0..self.config.g_steps {
                    (adv, variety, gg) = self.g_step(batch, true)?;
                }
            }
            TrainMode::Nogan => {
                for _ in 0..self.config.g_steps {
                    (adv, variety, gg) = self.g_step(batch, false)?;
                }
            }
        }
        self.step += 1;
        let rec = StepRecord {
            step: self.step,
            epoch: self.epoch,
            d_loss: d,
            g_adv: adv,
            variety,
            grad_norm_g: gg,
            grad_norm_d: gd,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.log.steps.push(rec.clone());
        Ok(rec)
    }

    /// Fraction of nonzero gradient entries reaching the discriminator's
    /// classifier hidden pre-activations under the discriminator loss.
    pub fn discriminator_hidden_activity(&mut self, batch: &Batch) -> Result<f64> {
        let noise = self.generator.sample_noise(batch.n_agents(), 1, &mut self.rng);
        let mut tape = Tape::new();
        let gp = self.generator.params.bind(&mut tape, false);
        let dp = self.discriminator.params.bind(&mut tape, true);
        let out = self.generator.forward(&mut tape, &gp, batch, &noise, 1)?;
        let fake_in = self.discriminator.fake_input(&mut tape, batch, &out, 0)?;
        let real_in = self.discriminator.real_input(&mut tape, batch)?;
        let real = self.discriminator.forward(&mut tape, &dp, real_in, &batch.classes)?;
        let fake = self.discriminator.forward(&mut tape, &dp, fake_in, &batch.classes)?;
        let loss = d_loss(&mut tape, real.scores, fake.scores)?;
        let grads = tape.backward(loss)?;
        let (mut nonzero, mut total) = (0usize, 0usize);
        for v in real.hidden.iter().chain(&fake.hidden) {
            let len = tape.value(*v).len();
            total += len;
            if let Some(g) = grads.get(*v) {
                nonzero += g.iter().filter(|x| **x != 0.0).count();
            }
        }
        Ok(if total == 0 { 0.0 } else { nonzero as f64 / total as f64 })
    }

    /// A shuffled pass over `train`, then min-of-k validation on `val`.
    pub fn run_epoch(&mut self, train: &[SceneWindow], val: &[SceneWindow]) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(TrainError::Config("training set is empty".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let before = self.step;
        for chunk in order.chunks(self.config.batch_size) {
            let windows: Vec<SceneWindow> = chunk.iter().map(|&i| train[i].clone()).collect();
            let batch = Batch::new(&windows)?;
            self.train_step(&batch)?;
        }
        let (val_ade, val_fde) = if val.is_empty() {
            (None, None)
        } else {
            let seed = self.config.seed ^ 0x5EED_0000_0000 ^ self.epoch as u64;
            let r = eval_min_of_k(&self.generator, val, self.config.k, seed, self.config.batch_size)?;
            if self.best.as_ref().is_none_or(|(b, _)| r.ade < *b) {
                self.best = Some((r.ade, Checkpoint::capture(&self.generator, &self.discriminator)));
            }
            (Some(r.ade), Some(r.fde))
        };
        let rec = EpochRecord {
            epoch: self.epoch,
            steps: self.step - before,
            val_ade,
            val_fde,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {} steps {} val ADE {} FDE {}",
            rec.epoch,
            rec.steps,
            val_ade.map_or("-".into(), |v| format!("{v:.3}")),
            val_fde.map_or("-".into(), |v| format!("{v:.3}"))
        );
        self.log.epochs.push(rec.clone());
        self.epoch += 1;
        Ok(rec)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.generator, &self.discriminator)
    }

    pub fn best_checkpoint(&self) -> Option<&(f64, Checkpoint)> {
        self.best.as_ref()
    }

    pub fn snapshot(&self) -> ResumeState {
        ResumeState {
            format_version: RESUME_VERSION,
            config: self.config.clone(),
            checkpoint: self.checkpoint(),
            adam_g: self.adam_g.clone(),
            adam_d: self.adam_d.clone(),
            rng: self.rng.clone(),
            step: self.step,
            epoch: self.epoch,
            log: self.log.clone(),
            best: self.best.clone(),
        }
    }

    pub fn from_snapshot(state: ResumeState) -> Result<Self> {
        if state.format_version != RESUME_VERSION {
            return Err(TrainError::Resume(format!(
                "format version {} is not supported (expected {RESUME_VERSION})",
                state.format_version
            )));
        }
        state.config.validate()?;
        let (generator, discriminator) = state.checkpoint.restore()?;
        if state.adam_g.states().len() != generator.params.len()
            || state.adam_d.states().len() != discriminator.params.len()
        {
            return Err(TrainError::Resume("optimizer state does not match the model".into()));
        }
        Ok(Trainer {
            config: state.config,
            generator,
            discriminator,
            adam_g: state.adam_g,
            adam_d: state.adam_d,
            rng: state.rng,
            step: state.step,
            epoch: state.epoch,
            log: state.log,
            best: state.best,
        })
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.snapshot()).map_err(|e| TrainError::Resume(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| TrainError::Resume(format!("{}: {e}", path.display())))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| TrainError::Resume(format!("{}: {e}", path.display())))?;
        let state: ResumeState =
            serde_json::from_str(&text).map_err(|e| TrainError::Resume(format!("{}: {e}", path.display())))?;
        Self::from_snapshot(state)
    }

    pub fn finish(self) -> TrainOutcome {
        let last = self.checkpoint();
        TrainOutcome {
            best: self.best.map(|(_, c)| c).unwrap_or_else(|| last.clone()),
            last,
            log: self.log,
        }
    }
}

/// Trains for `config.epochs` epochs from a fresh initialization.
pub fn run_training(
    train: &[SceneWindow],
    val: &[SceneWindow],
    model: ModelConfig,
    config: TrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let mut trainer = Trainer::new(model, config)?;
    for _ in 0..trainer.config.epochs {
        trainer.run_epoch(train, val)?;
    }
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_scene, ClassLabel, SynthKind, SynthSpec};
    use crate::model::EncoderKind;

    fn model_cfg() -> ModelConfig {
        ModelConfig {
            encoder: EncoderKind::Lstm,
            embed_dim: 8,
            class_embed_dim: 4,
            hidden_dim: 16,
            noise_dim: 4,
            mlp_dim: 16,
            pool_dim: 8,
            ..ModelConfig::default()
        }
    }

    fn train_cfg(mode: TrainMode) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            k: 3,
            epochs: 1,
            mode,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    fn windows(kind: SynthKind, n: usize, seed: u64) -> Vec<SceneWindow> {
        synth_scene(&SynthSpec {
            kind,
            windows: n,
            n_agents: 2,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn changed(a: &ParamSet, b: &ParamSet) -> bool {
        a.tensors().iter().zip(b.tensors()).any(|(x, y)| x.values() != y.values())
    }

    #[test]
    fn steps_update_only_their_own_network() {
        let w = windows(SynthKind::Turn, 4, 1);
        let batch = Batch::new(&w).unwrap();
        let mut t = Trainer::new(model_cfg(), train_cfg(TrainMode::Gan)).unwrap();
        let (g0, d0) = (t.generator.params.clone(), t.discriminator.params.clone());
        t.d_step(&batch).unwrap();
        assert!(!changed(&g0, &t.generator.params));
        assert!(changed(&d0, &t.discriminator.params));
        let d1 = t.discriminator.params.clone();
        t.g_step(&batch, true).unwrap();
        assert!(changed(&g0, &t.generator.params));
        assert!(!changed(&d1, &t.discriminator.params));
    }

    #[test]
    fn gradients_stay_isolated_between_networks() {
        let w = windows(SynthKind::Turn, 2, 2);
        let batch = Batch::new(&w).unwrap();
        let t = Trainer::new(model_cfg(), train_cfg(TrainMode::Gan)).unwrap();
        let noise = t.generator.sample_noise(batch.n_agents(), 3, &mut ChaCha8Rng::seed_from_u64(0));
        let mut tape = Tape::new();
        let gp = t.generator.params.bind(&mut tape, true);
        let dp = t.discriminator.params.bind(&mut tape, false);
        let out = t.generator.forward(&mut tape, &gp, &batch, &noise, 3).unwrap();
        let fake_in = t.discriminator.fake_input(&mut tape, &batch, &out, 0).unwrap();
        let fake = t.discriminator.forward(&mut tape, &dp, fake_in, &batch.classes).unwrap();
        let loss = g_adv_loss(&mut tape, fake.scores).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(dp.vars().iter().all(|v| grads.get(*v).is_none()));
        assert!(gp.vars().iter().any(|v| grads.get(*v).is_some()));
    }

    #[test]
    fn variety_gradient_reaches_every_generator_parameter() {
        let w = windows(SynthKind::Turn, 3, 3);
        let batch = Batch::new(&w).unwrap();
        for kind in [EncoderKind::Lstm, EncoderKind::Transformer] {
            let g = Generator::new(ModelConfig { encoder: kind, ..model_cfg() }, 1).unwrap();
            let mut ps = g.params.clone();
            let noise = g.sample_noise(batch.n_agents(), 2, &mut ChaCha8Rng::seed_from_u64(1));
            let mut tape = Tape::new();
            let p = ps.bind(&mut tape, true);
            let out = g.forward(&mut tape, &p, &batch, &noise, 2).unwrap();
            let (loss, _) = variety_loss(&mut tape, out.trajectory, &batch.future_flat(), 2).unwrap();
            let grads = tape.backward(loss).unwrap();
            ps.accumulate(&p, &grads).unwrap();
            for (name, t) in ps.iter() {
                let n: f64 = t.grad().unwrap().iter().map(|x| x * x).sum();
                assert!(n > 0.0, "{kind:?}: {name} has zero gradient");
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_log() {
        let w = windows(SynthKind::Turn, 8, 4);
        let run = || {
            let mut t = Trainer::new(model_cfg(), train_cfg(TrainMode::Gan)).unwrap();
            t.run_epoch(&w[..6], &w[6..]).unwrap();
            t.run_epoch(&w[..6], &w[6..]).unwrap();
            (t.log.clone(), t.checkpoint())
        };
        let (a, ca) = run();
        let (b, cb) = run();
        assert!(a.same_losses(&b));
        assert_eq!(ca, cb);
        assert_eq!(a.steps.len(), 4);
        assert!(a.steps.windows(2).all(|p| p[1].step == p[0].step + 1));
    }

    #[test]
    fn nogan_step_equals_zero_weight_generator_step() {
        let w = windows(SynthKind::Linear, 3, 5);
        let batch = Batch::new(&w).unwrap();
        let mut a = Trainer::new(model_cfg(), train_cfg(TrainMode::Nogan)).unwrap();
        let mut b = Trainer::new(
            model_cfg(),
            TrainConfig {
                adv_weight: 0.0,
                ..train_cfg(TrainMode::Gan)
            },
        )
        .unwrap();
        let ra = a.train_step(&batch).unwrap();
        let (adv, variety, _) = b.g_step(&batch, true).unwrap();
        assert_eq!(ra.variety, variety);
        assert!(ra.d_loss.is_none() && ra.g_adv.is_none() && ra.grad_norm_d.is_none());
        assert!(adv.is_some());
        assert_eq!(a.generator.params.tensors(), b.generator.params.tensors());
    }

    #[test]
    fn discriminator_learns_separable_data() {
        // Real paths are fast straight lines; an untrained generator stays near
        // the last observed point, so real and fake are easy to tell apart.
        let w = synth_scene(&SynthSpec {
            kind: SynthKind::Linear,
            windows: 4,
            n_agents: 2,
            classes: vec![ClassLabel::GolfCart],
            seed: 6,
            ..SynthSpec::default()
        })
        .unwrap();
        let batch = Batch::new(&w).unwrap();
        let mut t = Trainer::new(model_cfg(), train_cfg(TrainMode::Gan)).unwrap();
        let first = t.d_step(&batch).unwrap().0;
        let mut last = first;
        for _ in 0..99 {
            last = t.d_step(&batch).unwrap().0;
        }
        assert!(last < first, "{first} -> {last}");
        let real: Vec<[f64; 2]> = w[0].agents[0].full_path().copied().collect();
        let cls = w[0].agents[0].class;
        let pred = t.generator.predict(&Batch::new(&w[..1]).unwrap(), 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut fake = w[0].agents[0].observed.clone();
        fake.extend_from_slice(pred.trajectory(0, 0));
        let (sr, sf) = (
            t.discriminator.score_trajectory(&real, cls).unwrap(),
            t.discriminator.score_trajectory(&fake, cls).unwrap(),
        );
        assert!(sr > sf, "real {sr} fake {sf}");
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let w = windows(SynthKind::Linear, 4, 1);
        let cfg = TrainConfig {
            epochs: 0,
            ..train_cfg(TrainMode::Gan)
        };
        let out = run_training(&w, &[], model_cfg(), cfg.clone()).unwrap();
        let fresh = Trainer::new(model_cfg(), cfg.clone()).unwrap();
        assert_eq!(out.last, fresh.checkpoint());
        assert_eq!(out.best, out.last);
        assert!(out.log.steps.is_empty() && out.log.epochs.is_empty());
        assert!(matches!(run_training(&[], &[], model_cfg(), cfg), Err(TrainError::Config(_))));
    }

    #[test]
    fn best_checkpoint_tracks_lowest_validation_ade() {
        let w = windows(SynthKind::Linear, 10, 2);
        let cfg = TrainConfig {
            epochs: 3,
            ..train_cfg(TrainMode::Nogan)
        };
        let out = run_training(&w[..8], &w[8..], model_cfg(), cfg).unwrap();
        let ades: Vec<f64> = out.log.epochs.iter().map(|e| e.val_ade.unwrap()).collect();
        assert_eq!(ades.len(), 3);
        let best_epoch = (0..3).min_by(|&a, &b| ades[a].total_cmp(&ades[b])).unwrap();
        let (g, _) = out.best.restore().unwrap();
        let seed = 7 ^ 0x5EED_0000_0000 ^ best_epoch as u64;
        let r = eval_min_of_k(&g, &w[8..], 3, seed, 4).unwrap();
        assert_eq!(r.ade, ades[best_epoch]);
    }

    #[test]
    fn resume_reproduces_subsequent_losses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resume.json");
        let w = windows(SynthKind::Turn, 10, 8);
        let (train, val) = (&w[..8], &w[8..]);
        let mut straight = Trainer::new(model_cfg(), train_cfg(TrainMode::Gan)).unwrap();
        straight.run_epoch(train, val).unwrap();
        straight.save_snapshot(&path).unwrap();
        straight.run_epoch(train, val).unwrap();

        let mut resumed = Trainer::load_snapshot(&path).unwrap();
        resumed.run_epoch(train, val).unwrap();
        assert!(straight.log.same_losses(&resumed.log));
        assert_eq!(straight.checkpoint(), resumed.checkpoint());
    }

    #[test]
    fn non_finite_loss_aborts_with_grad_norms() {
        let w = windows(SynthKind::Linear, 2, 1);
        let mut batch = Batch::new(&w).unwrap();
        batch.future[0] = [f64::NAN, 0.0];
        let mut t = Trainer::new(model_cfg(), train_cfg(TrainMode::Nogan)).unwrap();
        let err = t.train_step(&batch).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, TrainError::NonFinite { .. }), "{msg}");
        assert!(msg.contains("grad norm"));
    }

    #[test]
    fn invalid_config_is_rejected() {
        for cfg in [
            TrainConfig { k: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { lr: -1.0, ..TrainConfig::default() },
            TrainConfig { clip_norm: Some(0.0), ..TrainConfig::default() },
        ] {
            assert!(matches!(Trainer::new(model_cfg(), cfg), Err(TrainError::Config(_))));
        }
    }
}
