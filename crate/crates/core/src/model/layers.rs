use rand::Rng;

use super::config::{ModelConfig, Readout};
use super::Result;
use crate::tensor::{Activation, Axis, Bound, ParamId, ParamSet, Tape, Var};

/// Affine map `x·W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: ps.push_uniform(format!("{name}.weight"), in_dim, out_dim, rng),
            bias: ps.push_filled(format!("{name}.bias"), out_dim, 0.0),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, p.get(self.weight))?;
        Ok(tape.add_row(y, p.get(self.bias))?)
    }
}

/// Stack of [`Linear`] layers with an activation between them.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
    /// Apply the activation after the last layer too.
    pub activate_output: bool,
}

/// Pre-activation values of each hidden layer from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    pub pre_activations: Vec<Var>,
}

impl Mlp {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        dims: &[usize],
        activation: Activation,
        activate_output: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Linear::new(ps, &format!("{name}.{i}"), d[0], d[1], rng))
            .collect();
        Mlp {
            layers,
            activation,
            activate_output,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        Ok(self.forward_traced(tape, p, x)?.0)
    }

    pub fn forward_traced(&self, tape: &mut Tape, p: &Bound, mut x: Var) -> Result<(Var, MlpTrace)> {
        let mut trace = MlpTrace::default();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, p, x)?;
            if i < last || self.activate_output {
                trace.pre_activations.push(x);
                x = tape.activation(x, self.activation)?;
            }
        }
        Ok((x, trace))
    }
}

/// LSTM cell with gates ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w_input = ps.push_uniform(format!("{name}.w_input"), in_dim, 4 * hidden, rng);
        let w_hidden = ps.push_uniform(format!("{name}.w_hidden"), hidden, 4 * hidden, rng);
        let bias = ps.push_filled(format!("{name}.bias"), 4 * hidden, 0.0);
        ps.get_mut(bias).values_mut()[hidden..2 * hidden].fill(1.0);
        LstmCell {
            w_input,
            w_hidden,
            bias,
            hidden,
        }
    }

    pub fn step(&self, tape: &mut Tape, p: &Bound, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hd = self.hidden;
        let gx = tape.matmul(x, p.get(self.w_input))?;
        let gh = tape.matmul(h, p.get(self.w_hidden))?;
        let gates = tape.add(gx, gh)?;
        let gates = tape.add_row(gates, p.get(self.bias))?;
        let i = tape.slice_cols(gates, 0, hd)?;
        let f = tape.slice_cols(gates, hd, 2 * hd)?;
        let g = tape.slice_cols(gates, 2 * hd, 3 * hd)?;
        let o = tape.slice_cols(gates, 3 * hd, 4 * hd)?;
        let i = tape.sigmoid(i)?;
        let f = tape.sigmoid(f)?;
        let g = tape.tanh(g)?;
        let o = tape.sigmoid(o)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next)?;
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Runs the recurrence over agent-major rows `[n·t × in]` from zero
    /// states and returns the final hidden state `[n × hidden]`.
    pub fn encode(&self, tape: &mut Tape, p: &Bound, x: Var, seq_len: usize) -> Result<Var> {
        let n = tape.dims(x).0 / seq_len;
        let mut h = tape.constant(n, self.hidden, vec![0.0; n * self.hidden])?;
        let mut c = tape.constant(n, self.hidden, vec![0.0; n * self.hidden])?;
        for t in 0..seq_len {
            let idx: Vec<usize> = (0..n).map(|a| a * seq_len + t).collect();
            let xt = tape.gather_rows(x, &idx)?;
            (h, c) = self.step(tape, p, xt, h, c)?;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
struct TransformerLayer {
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    norm1: (ParamId, ParamId),
    ff: Mlp,
    norm2: (ParamId, ParamId),
}

/// Intermediate values exposed for inspection.
#[derive(Debug, Clone, Default)]
pub struct TransformerTrace {
    pub attention: Vec<Var>,
    pub values: Vec<Var>,
}

/// Input projection, sinusoidal positions, then post-norm encoder layers.
#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    input: Linear,
    layers: Vec<TransformerLayer>,
    heads: usize,
    hidden: usize,
    readout: Readout,
}

const LN_EPS: f64 = 1e-5;

impl TransformerEncoder {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let h = cfg.hidden_dim;
        let input = Linear::new(ps, &format!("{name}.input"), in_dim, h, rng);
        let layers = (0..cfg.transformer_layers)
            .map(|l| {
                let n = format!("{name}.layer{l}");
                TransformerLayer {
                    query: Linear::new(ps, &format!("{n}.query"), h, h, rng),
                    key: Linear::new(ps, &format!("{n}.key"), h, h, rng),
                    value: Linear::new(ps, &format!("{n}.value"), h, h, rng),
                    out: Linear::new(ps, &format!("{n}.out"), h, h, rng),
                    norm1: (
                        ps.push_filled(format!("{n}.norm1.gamma"), h, 1.0),
                        ps.push_filled(format!("{n}.norm1.beta"), h, 0.0),
                    ),
                    ff: Mlp::new(
                        ps,
                        &format!("{n}.ff"),
                        &[h, cfg.transformer_ff_dim, h],
                        cfg.activation(),
                        false,
                        rng,
                    ),
                    norm2: (
                        ps.push_filled(format!("{n}.norm2.gamma"), h, 1.0),
                        ps.push_filled(format!("{n}.norm2.beta"), h, 0.0),
                    ),
                }
            })
            .collect();
        TransformerEncoder {
            input,
            layers,
            heads: cfg.transformer_heads,
            hidden: h,
            readout: cfg.transformer_readout,
        }
    }

    pub fn encode(&self, tape: &mut Tape, p: &Bound, x: Var, seq_len: usize) -> Result<Var> {
        Ok(self.encode_traced(tape, p, x, seq_len)?.0)
    }

    pub fn encode_traced(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        seq_len: usize,
    ) -> Result<(Var, TransformerTrace)> {
        let rows = tape.dims(x).0;
        let n = rows / seq_len;
        let mut trace = TransformerTrace::default();
        let proj = self.input.forward(tape, p, x)?;
        let pe = positional_encoding(seq_len, self.hidden);
        let tiled: Vec<f64> = (0..n).flat_map(|_| pe.iter().copied()).collect();
        let pe = tape.constant(rows, self.hidden, tiled)?;
        let mut h = tape.add(proj, pe)?;
        for layer in &self.layers {
            let q = layer.query.forward(tape, p, h)?;
            let k = layer.key.forward(tape, p, h)?;
            let v = layer.value.forward(tape, p, h)?;
            let a = tape.attention(q, k, v, seq_len, self.heads)?;
            trace.attention.push(a);
            trace.values.push(v);
            let o = layer.out.forward(tape, p, a)?;
            let r = tape.add(h, o)?;
            h = tape.layer_norm(r, p.get(layer.norm1.0), p.get(layer.norm1.1), LN_EPS)?;
            let f = layer.ff.forward(tape, p, h)?;
            let r = tape.add(h, f)?;
            h = tape.layer_norm(r, p.get(layer.norm2.0), p.get(layer.norm2.1), LN_EPS)?;
        }
        let out = match self.readout {
            Readout::Last => {
                let idx: Vec<usize> = (0..n).map(|a| a * seq_len + seq_len - 1).collect();
                tape.gather_rows(h, &idx)?
            }
            Readout::Mean => {
                let mut acc: Option<Var> = None;
                for t in 0..seq_len {
                    let idx: Vec<usize> = (0..n).map(|a| a * seq_len + t).collect();
                    let ht = tape.gather_rows(h, &idx)?;
                    acc = Some(match acc {
                        Some(s) => tape.add(s, ht)?,
                        None => ht,
                    });
                }
                tape.scale(acc.expect("seq_len >= 1"), 1.0 / seq_len as f64)?
            }
        };
        Ok((out, trace))
    }
}

/// Fixed sinusoidal position table `[t × d]`.
pub fn positional_encoding(t: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; t * d];
    for pos in 0..t {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            pe[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// Either sequence encoder behind one contract: agent-major rows in,
/// `[n × hidden]` out.
#[derive(Debug, Clone)]
pub enum SeqEncoder {
    Lstm(LstmCell),
    Transformer(TransformerEncoder),
}

impl SeqEncoder {
    pub fn new(ps: &mut ParamSet, name: &str, in_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        match cfg.encoder {
            super::EncoderKind::Lstm => {
                SeqEncoder::Lstm(LstmCell::new(ps, &format!("{name}.lstm"), in_dim, cfg.hidden_dim, rng))
            }
            super::EncoderKind::Transformer => SeqEncoder::Transformer(TransformerEncoder::new(
                ps,
                &format!("{name}.transformer"),
                in_dim,
                cfg,
                rng,
            )),
        }
    }

    pub fn encode(&self, tape: &mut Tape, p: &Bound, x: Var, seq_len: usize) -> Result<Var> {
        match self {
            SeqEncoder::Lstm(cell) => cell.encode(tape, p, x, seq_len),
            SeqEncoder::Transformer(t) => t.encode(tape, p, x, seq_len),
        }
    }
}

/// Per-step input embedding: `s = φ(x, y[, c]; W_se)`, optionally
/// concatenated with `φ(c; W_ce)`.
#[derive(Debug, Clone)]
pub struct StepEmbedding {
    pub spatial: Linear,
    pub class: Option<Linear>,
    pub class_in_spatial: bool,
}

impl StepEmbedding {
    pub fn new(ps: &mut ParamSet, name: &str, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let with_c = cfg.use_labels && cfg.class_in_spatial;
        let spatial_in = if with_c { 2 + 6 } else { 2 };
        StepEmbedding {
            spatial: Linear::new(ps, &format!("{name}.spatial"), spatial_in, cfg.embed_dim, rng),
            class: cfg
                .use_labels
                .then(|| Linear::new(ps, &format!("{name}.class"), 6, cfg.class_embed_dim, rng)),
            class_in_spatial: with_c,
        }
    }

    /// `coords` is `[r × 2]`; `one_hot` is `[r × 6]` and required when the
    /// embedding is class-conditioned.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, coords: Var, one_hot: Option<Var>) -> Result<Var> {
        if tape.dims(coords).1 != 2 {
            return Err(super::ModelError::Config(format!(
                "coordinate input must have 2 columns, got {:?}",
                tape.shape(coords)
            )));
        }
        let Some(class) = &self.class else {
            return self.spatial.forward(tape, p, coords);
        };
        let c = one_hot.ok_or_else(|| {
            super::ModelError::Config("class-conditioned embedding needs one-hot input".into())
        })?;
        if tape.dims(c) != (tape.dims(coords).0, 6) {
            return Err(super::ModelError::Config(format!(
                "one-hot input must be {}x6, got {:?}",
                tape.dims(coords).0,
                tape.shape(c)
            )));
        }
        let spatial_in = if self.class_in_spatial {
            tape.concat(&[coords, c], Axis::Cols)?
        } else {
            coords
        };
        let s = self.spatial.forward(tape, p, spatial_in)?;
        let cv = class.forward(tape, p, c)?;
        Ok(tape.concat(&[s, cv], Axis::Cols)?)
    }
}
