use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::batch::Batch;
use super::layers::{Linear, LstmCell, Mlp, SeqEncoder, StepEmbedding};
use super::{ModelConfig, ModelError, Result};
use crate::data::ClassLabel;
use crate::tensor::{Axis, Bound, ParamSet, Tape, Var};

/// Class-conditioned encoder, social pooling and autoregressive decoder.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: ModelConfig,
    pub params: ParamSet,
    embed: StepEmbedding,
    encoder: SeqEncoder,
    pool_embed: Linear,
    pool_mlp: Mlp,
    context: Mlp,
    dec_embed: Linear,
    dec_cell: LstmCell,
    hidden_to_pos: Linear,
}

/// Tape handles of one generator pass over `k` noise samples. Sample rows
/// are stacked sample-major: row `s·n + agent`.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    pub k: usize,
    pub n_agents: usize,
    pub encoded: Var,
    pub pooled: Var,
    /// Per predicted step, `[k·n × 2]` displacements in network units.
    pub displacements: Vec<Var>,
    /// `[k·n × 2·t_pred]` absolute positions, interleaved x, y.
    pub trajectory: Var,
}

/// `k` sampled futures per agent with the noise that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub k: usize,
    pub n_agents: usize,
    pub t_pred: usize,
    pub noise_dim: usize,
    /// Sample-major `[k][n][t_pred]` positions.
    pub points: Vec<[f64; 2]>,
    /// Sample-major `[k][n][noise_dim]`.
    pub noise: Vec<f64>,
}

impl PredictionSet {
    pub fn trajectory(&self, agent: usize, sample: usize) -> &[[f64; 2]] {
        let start = (sample * self.n_agents + agent) * self.t_pred;
        &self.points[start..start + self.t_pred]
    }

    pub fn noise_of(&self, agent: usize, sample: usize) -> &[f64] {
        let start = (sample * self.n_agents + agent) * self.noise_dim;
        &self.noise[start..start + self.noise_dim]
    }
}

impl Generator {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let cfg = &config;
        let act = cfg.activation();
        let mut ps = ParamSet::new();
        let embed = StepEmbedding::new(&mut ps, "generator.embed", cfg, rng);
        let encoder = SeqEncoder::new(&mut ps, "generator.encoder", cfg.step_embed_dim(), cfg, rng);
        let pool_embed = Linear::new(&mut ps, "generator.pool.embed", 2, cfg.embed_dim, rng);
        let pool_mlp = Mlp::new(
            &mut ps,
            "generator.pool.mlp",
            &[cfg.embed_dim + cfg.hidden_dim, cfg.mlp_dim, cfg.pool_dim],
            act,
            true,
            rng,
        );
        let context = Mlp::new(
            &mut ps,
            "generator.decoder.context",
            &[cfg.hidden_dim + cfg.pool_dim + cfg.noise_dim, cfg.mlp_dim, cfg.hidden_dim],
            act,
            false,
            rng,
        );
        let dec_embed = Linear::new(&mut ps, "generator.decoder.embed", 2, cfg.embed_dim, rng);
        let dec_cell = LstmCell::new(&mut ps, "generator.decoder.lstm", cfg.embed_dim, cfg.hidden_dim, rng);
        let hidden_to_pos = Linear::new(&mut ps, "generator.decoder.hidden_to_pos", cfg.hidden_dim, 2, rng);
        Ok(Generator {
            config,
            params: ps,
            embed,
            encoder,
            pool_embed,
            pool_mlp,
            context,
            dec_embed,
            dec_cell,
            hidden_to_pos,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.t_obs != self.config.t_obs || batch.t_pred != self.config.t_pred {
            return Err(ModelError::Data(format!(
                "batch horizon {}+{} does not match model {}+{}",
                batch.t_obs, batch.t_pred, self.config.t_obs, self.config.t_pred
            )));
        }
        Ok(())
    }

    /// Final encoder state `[n × hidden]` for every agent.
    pub fn encode(&self, tape: &mut Tape, p: &Bound, batch: &Batch) -> Result<Var> {
        self.check_batch(batch)?;
        let n = batch.n_agents();
        let t = batch.t_obs;
        let rel = tape.constant(n * t, 2, batch.observed_displacements(self.config.coord_scale))?;
        let one_hot = if self.config.use_labels {
            Some(tape.constant(n * t, 6, batch.one_hot_rows(t))?)
        } else {
            None
        };
        let e = self.embed.forward(tape, p, rel, one_hot)?;
        self.encoder.encode(tape, p, e, t)
    }

    /// Per-agent max over neighbors of `MLP(embed(x_j − x_i), H_j)`; zero for
    /// agents alone in their window.
    pub fn pool(&self, tape: &mut Tape, p: &Bound, batch: &Batch, encoded: Var) -> Result<Var> {
        let n = batch.n_agents();
        let pairs = batch.neighbor_pairs();
        if pairs.is_empty() {
            return Ok(tape.constant(n, self.config.pool_dim, vec![0.0; n * self.config.pool_dim])?);
        }
        let scale = self.config.coord_scale;
        let rel: Vec<f64> = pairs
            .iter()
            .flat_map(|&(i, j)| {
                let (pi, pj) = (batch.last_observed(i), batch.last_observed(j));
                [(pj[0] - pi[0]) / scale, (pj[1] - pi[1]) / scale]
            })
            .collect();
        let rel = tape.constant(pairs.len(), 2, rel)?;
        let r = self.pool_embed.forward(tape, p, rel)?;
        let js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        let hj = tape.gather_rows(encoded, &js)?;
        let x = tape.concat(&[r, hj], Axis::Cols)?;
        let m = self.pool_mlp.forward(tape, p, x)?;
        let mut segments = vec![Vec::new(); n];
        for (row, &(i, _)) in pairs.iter().enumerate() {
            segments[i].push(row);
        }
        Ok(tape.segment_max(m, &segments)?)
    }

    /// Decodes `k` futures per agent; `noise` is sample-major `[k][n][noise_dim]`.
    #[allow(clippy::too_many_arguments)]
    pub fn decode(
        &self,
        tape: &mut Tape,
        p: &Bound,
        batch: &Batch,
        encoded: Var,
        pooled: Var,
        noise: &[f64],
        k: usize,
    ) -> Result<(Vec<Var>, Var)> {
        let cfg = &self.config;
        let n = batch.n_agents();
        let m = k * n;
        if noise.len() != m * cfg.noise_dim {
            return Err(ModelError::Config(format!(
                "noise has {} values, expected {}",
                noise.len(),
                m * cfg.noise_dim
            )));
        }
        let rep: Vec<usize> = (0..k).flat_map(|_| 0..n).collect();
        let hr = tape.gather_rows(encoded, &rep)?;
        let pr = tape.gather_rows(pooled, &rep)?;
        let mut ctx_parts = vec![hr, pr];
        if cfg.noise_dim > 0 {
            ctx_parts.push(tape.constant(m, cfg.noise_dim, noise.to_vec())?);
        }
        let ctx = tape.concat(&ctx_parts, Axis::Cols)?;
        let mut h = self.context.forward(tape, p, ctx)?;
        let mut c = tape.constant(m, cfg.hidden_dim, vec![0.0; m * cfg.hidden_dim])?;
        let last_rel = batch.last_displacements(cfg.coord_scale);
        let last_pos = batch.last_positions();
        let repeat = |v: &[f64]| -> Vec<f64> { (0..k).flat_map(|_| v.iter().copied()).collect() };
        let mut rel = tape.constant(m, 2, repeat(&last_rel))?;
        let mut pos = tape.constant(m, 2, repeat(&last_pos))?;
        let mut steps = Vec::with_capacity(cfg.t_pred);
        let mut positions = Vec::with_capacity(cfg.t_pred);
        for _ in 0..cfg.t_pred {
            let e = self.dec_embed.forward(tape, p, rel)?;
            (h, c) = self.dec_cell.step(tape, p, e, h, c)?;
            rel = self.hidden_to_pos.forward(tape, p, h)?;
            let delta = tape.scale(rel, cfg.coord_scale)?;
            pos = tape.add(pos, delta)?;
            steps.push(rel);
            positions.push(pos);
        }
        let traj = tape.concat(&positions, Axis::Cols)?;
        Ok((steps, traj))
    }

    /// Encode every agent, pool once, decode `k` times.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, batch: &Batch, noise: &[f64], k: usize) -> Result<GeneratorOutput> {
        let encoded = self.encode(tape, p, batch)?;
        let pooled = self.pool(tape, p, batch, encoded)?;
        let (displacements, trajectory) = self.decode(tape, p, batch, encoded, pooled, noise, k)?;
        Ok(GeneratorOutput {
            k,
            n_agents: batch.n_agents(),
            encoded,
            pooled,
            displacements,
            trajectory,
        })
    }

    /// Standard-normal noise, sample-major, so the first `k'` samples of a
    /// draw are the draw for `k'`.
    pub fn sample_noise(&self, n_agents: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..k * n_agents * self.config.noise_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect()
    }

    pub fn predict_with_noise(&self, batch: &Batch, noise: &[f64], k: usize) -> Result<PredictionSet> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, batch, noise, k)?;
        let points = tape
            .value(out.trajectory)
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        Ok(PredictionSet {
            k,
            n_agents: batch.n_agents(),
            t_pred: self.config.t_pred,
            noise_dim: self.config.noise_dim,
            points,
            noise: noise.to_vec(),
        })
    }

    pub fn predict(&self, batch: &Batch, k: usize, rng: &mut impl Rng) -> Result<PredictionSet> {
        let noise = self.sample_noise(batch.n_agents(), k, rng);
        self.predict_with_noise(batch, &noise, k)
    }

    /// Embedding row of each class, `W_ce` applied to its one-hot plus bias.
    pub fn class_embedding_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let class = self.embed.class.as_ref().ok_or_else(|| {
            ModelError::Unavailable("model trained without class embeddings".into())
        })?;
        let w = self.params.get(class.weight).values();
        let b = self.params.get(class.bias).values();
        let d = class.out_dim;
        Ok(ClassLabel::ALL
            .iter()
            .map(|c| {
                let row = &w[c.index() * d..(c.index() + 1) * d];
                row.iter().zip(b).map(|(x, y)| x + y).collect()
            })
            .collect())
    }

    pub fn step_embedding(&self) -> &StepEmbedding {
        &self.embed
    }

    pub fn encoder(&self) -> &SeqEncoder {
        &self.encoder
    }
}
