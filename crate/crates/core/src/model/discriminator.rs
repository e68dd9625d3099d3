use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::Batch;
use super::generator::GeneratorOutput;
use super::layers::{Mlp, SeqEncoder, StepEmbedding};
use super::{ModelConfig, ModelError, Result};
use crate::data::ClassLabel;
use crate::tensor::{Axis, Bound, ParamSet, Tape, Var};

/// Separate sequence encoder over the full observed + future path, followed
/// by a real/fake classifier.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub config: ModelConfig,
    pub params: ParamSet,
    embed: StepEmbedding,
    encoder: SeqEncoder,
    classifier: Mlp,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorOutput {
    /// `[n × 1]` probabilities of being real.
    pub scores: Var,
    /// Classifier hidden pre-activations.
    pub hidden: Vec<Var>,
}

impl Discriminator {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let cfg = &config;
        let mut ps = ParamSet::new();
        let embed = StepEmbedding::new(&mut ps, "discriminator.embed", cfg, rng);
        let encoder = SeqEncoder::new(&mut ps, "discriminator.encoder", cfg.step_embed_dim(), cfg, rng);
        let classifier = Mlp::new(
            &mut ps,
            "discriminator.classifier",
            &[cfg.hidden_dim, cfg.mlp_dim, 1],
            cfg.activation(),
            false,
            rng,
        );
        Ok(Discriminator {
            config,
            params: ps,
            embed,
            encoder,
            classifier,
        })
    }

    pub fn seq_len(&self) -> usize {
        self.config.t_obs + self.config.t_pred
    }

    /// Scores agent-major displacement rows `[n·seq_len × 2]` (network units).
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        displacements: Var,
        classes: &[ClassLabel],
    ) -> Result<DiscriminatorOutput> {
        let t = self.seq_len();
        let n = classes.len();
        if tape.dims(displacements) != (n * t, 2) {
            return Err(ModelError::Data(format!(
                "discriminator expects {}x2 displacement rows for {n} paths of length {t}, got {:?}",
                n * t,
                tape.shape(displacements)
            )));
        }
        let one_hot = if self.config.use_labels {
            let rows: Vec<f64> = classes
                .iter()
                .flat_map(|c| std::iter::repeat_n(c.one_hot(), t).flatten())
                .collect();
            Some(tape.constant(n * t, 6, rows)?)
        } else {
            None
        };
        let e = self.embed.forward(tape, p, displacements, one_hot)?;
        let h = self.encoder.encode(tape, p, e, t)?;
        let (logit, trace) = self.classifier.forward_traced(tape, p, h)?;
        let scores = tape.sigmoid(logit)?;
        Ok(DiscriminatorOutput {
            scores,
            hidden: trace.pre_activations,
        })
    }

    /// Displacement rows of the observed + true future paths.
    pub fn real_input(&self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        let n = batch.n_agents();
        Ok(tape.constant(n * batch.seq_len(), 2, batch.full_displacements(self.config.coord_scale))?)
    }

    /// Displacement rows of the observed path followed by generated sample
    /// `sample`. Gradients flow back into the generator's outputs.
    pub fn fake_input(&self, tape: &mut Tape, batch: &Batch, gen: &GeneratorOutput, sample: usize) -> Result<Var> {
        let n = batch.n_agents();
        let (t_obs, t_pred) = (batch.t_obs, batch.t_pred);
        if sample >= gen.k {
            return Err(ModelError::Data(format!("sample {sample} >= k = {}", gen.k)));
        }
        let obs = tape.constant(n * t_obs, 2, batch.observed_displacements(self.config.coord_scale))?;
        let rows: Vec<usize> = (sample * n..(sample + 1) * n).collect();
        let mut parts = vec![obs];
        for &d in &gen.displacements {
            parts.push(tape.gather_rows(d, &rows)?);
        }
        let stacked = tape.concat(&parts, Axis::Rows)?;
        let order: Vec<usize> = (0..n)
            .flat_map(|a| {
                (0..t_obs + t_pred).map(move |t| {
                    if t < t_obs {
                        a * t_obs + t
                    } else {
                        n * t_obs + (t - t_obs) * n + a
                    }
                })
            })
            .collect();
        Ok(tape.gather_rows(stacked, &order)?)
    }

    /// Probability that one absolute path of `t_obs + t_pred` points is real.
    pub fn score_trajectory(&self, path: &[[f64; 2]], class: ClassLabel) -> Result<f64> {
        let t = self.seq_len();
        if path.len() != t {
            return Err(ModelError::Data(format!(
                "trajectory has {} points, discriminator expects {t}",
                path.len()
            )));
        }
        let s = self.config.coord_scale;
        let mut rel = Vec::with_capacity(2 * t);
        let mut prev = path[0];
        for q in path {
            rel.push((q[0] - prev[0]) / s);
            rel.push((q[1] - prev[1]) / s);
            prev = *q;
        }
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(t, 2, rel)?;
        let out = self.forward(&mut tape, &p, x, &[class])?;
        Ok(tape.scalar(out.scores))
    }

    pub fn classifier(&self) -> &Mlp {
        &self.classifier
    }
}
