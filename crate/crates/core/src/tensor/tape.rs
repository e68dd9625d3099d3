use super::kernels::{matmul_into, matmul_nt, matmul_tn};
use super::{Activation, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

const EMPTY: usize = usize::MAX;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Act(Var, Activation),
    Concat(Vec<Var>, Axis),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    /// Source row of each output element; `EMPTY` for empty segments.
    SegmentMax(Var, Vec<usize>),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        seq_len: usize,
        heads: usize,
        probs: Vec<f64>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    LogClamped(Var, f64),
    RowNorm(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Act(..) => "activation",
            Op::Concat(..) => "concat",
            Op::SliceCols(..) => "slice_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::SegmentMax(..) => "segment_max",
            Op::Attention { .. } => "attention",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::LogClamped(..) => "log",
            Op::RowNorm(..) => "row_norm",
        }
    }
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Linear record of a forward computation. Nodes are appended in evaluation
/// order, so every node's inputs precede it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    validate: bool,
}

/// Gradients of a scalar with respect to every node that required them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that checks every produced value for NaN/Inf.
    pub fn with_validation() -> Self {
        Tape {
            nodes: Vec::new(),
            validate: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Result<Var> {
        debug_assert_eq!(rows * cols, value.len());
        if self.validate && value.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: op.name() });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Concat(inputs, _) => inputs.iter().any(|&v| self.rg(v)),
            Op::Attention { q, k, v, .. } => self.rg(*q) || self.rg(*k) || self.rg(*v),
            Op::LayerNorm { x, gamma, beta, .. } => {
                self.rg(*x) || self.rg(*gamma) || self.rg(*beta)
            }
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                self.rg(*a) || self.rg(*b)
            }
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Act(a, _)
            | Op::SliceCols(a, _)
            | Op::GatherRows(a, _)
            | Op::SoftmaxRows(a)
            | Op::SegmentMax(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::LogClamped(a, _)
            | Op::RowNorm(a) => self.rg(*a),
        };
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::Shape {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    // ── leaves ──────────────────────────────────────────────────────────

    /// Records a tensor; gradients are tracked when `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        let (rows, cols) = tensor.dims2();
        self.leaf_raw(rows, cols, tensor.values().to_vec(), tensor.requires_grad())
    }

    /// A tracked leaf regardless of the tensor's own flag.
    pub fn variable(&mut self, tensor: &Tensor) -> Var {
        let (rows, cols) = tensor.dims2();
        self.leaf_raw(rows, cols, tensor.values().to_vec(), true)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Result<Var> {
        if rows * cols != values.len() || rows == 0 || cols == 0 {
            return Err(TensorError::Shape {
                op: "constant",
                left: vec![rows, cols],
                right: vec![values.len()],
            });
        }
        Ok(self.leaf_raw(rows, cols, values, false))
    }

    fn leaf_raw(&mut self, rows: usize, cols: usize, value: Vec<f64>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    // ── accessors ───────────────────────────────────────────────────────

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        let n = self.node(v);
        [n.rows, n.cols]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::matrix(n.rows, n.cols, n.value.clone()).expect("tape shapes are valid")
    }

    /// Attention probabilities `[seq × head × T × T]` saved by [`Tape::attention`].
    pub fn attention_probs(&self, v: Var) -> Option<&[f64]> {
        match &self.node(v).op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    // ── ops ─────────────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(self.shape_err("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(m, n, out, Op::MatMul(a, b))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(self.shape_err(op.name(), a, b));
        }
        let (r, c) = self.dims(a);
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(r, c, out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// `x[m×n] + row[1×n]` broadcast over rows.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(row) != (1, n) {
            return Err(self.shape_err("add_row", x, row));
        }
        let b = self.value(row);
        let mut out = self.value(x).to_vec();
        for r in out.chunks_exact_mut(n) {
            r.iter_mut().zip(b).for_each(|(o, &bv)| *o += bv);
        }
        self.push(m, n, out, Op::AddRow(x, row))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let (m, n) = self.dims(x);
        let out = self.value(x).iter().map(|v| v * s).collect();
        self.push(m, n, out, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Result<Var> {
        let (m, n) = self.dims(x);
        let out = self.value(x).iter().map(|v| v + s).collect();
        self.push(m, n, out, Op::AddScalar(x))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        kind.validate()?;
        let (m, n) = self.dims(x);
        let out = self.value(x).iter().map(|&v| kind.apply(v)).collect();
        self.push(m, n, out, Op::Act(x, kind))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Sigmoid)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: Axis) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| TensorError::Contract("concat of zero tensors".into()))?;
        let (r0, c0) = self.dims(first);
        for &v in &inputs[1..] {
            let (r, c) = self.dims(v);
            let ok = match axis {
                Axis::Rows => c == c0,
                Axis::Cols => r == r0,
            };
            if !ok {
                return Err(self.shape_err("concat", first, v));
            }
        }
        let (rows, cols, out) = match axis {
            Axis::Rows => {
                let rows = inputs.iter().map(|&v| self.dims(v).0).sum();
                let mut out = Vec::with_capacity(rows * c0);
                for &v in inputs {
                    out.extend_from_slice(self.value(v));
                }
                (rows, c0, out)
            }
            Axis::Cols => {
                let cols: usize = inputs.iter().map(|&v| self.dims(v).1).sum();
                let mut out = Vec::with_capacity(r0 * cols);
                for r in 0..r0 {
                    for &v in inputs {
                        let c = self.dims(v).1;
                        out.extend_from_slice(&self.value(v)[r * c..(r + 1) * c]);
                    }
                }
                (r0, cols, out)
            }
        };
        self.push(rows, cols, out, Op::Concat(inputs.to_vec(), axis))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if start >= end || end > n {
            return Err(TensorError::Contract(format!(
                "slice_cols {start}..{end} out of range for {m}x{n}"
            )));
        }
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for r in self.value(x).chunks_exact(n) {
            out.extend_from_slice(&r[start..end]);
        }
        self.push(m, w, out, Op::SliceCols(x, start))
    }

    /// Rows of `x` in the order given; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = self.dims(x);
        if idx.is_empty() {
            return Err(TensorError::Contract("gather_rows with no indices".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(TensorError::Contract(format!(
                "gather_rows index {bad} out of range for {m} rows"
            )));
        }
        let src = self.value(x);
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            out.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        self.push(idx.len(), n, out, Op::GatherRows(x, idx.to_vec()))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        let mut out = self.value(x).to_vec();
        out.chunks_exact_mut(n).for_each(softmax_in_place);
        self.push(m, n, out, Op::SoftmaxRows(x))
    }

    /// Elementwise max over the listed rows of `x`, one output row per
    /// segment. An empty segment yields a zero row.
    pub fn segment_max(&mut self, x: Var, segments: &[Vec<usize>]) -> Result<Var> {
        let (m, n) = self.dims(x);
        if segments.is_empty() {
            return Err(TensorError::Contract("segment_max with no segments".into()));
        }
        let src = self.value(x);
        let mut out = vec![0.0; segments.len() * n];
        let mut arg = vec![EMPTY; segments.len() * n];
        for (s, rows) in segments.iter().enumerate() {
            for &r in rows {
                if r >= m {
                    return Err(TensorError::Contract(format!(
                        "segment_max row {r} out of range for {m} rows"
                    )));
                }
                for c in 0..n {
                    let v = src[r * n + c];
                    let o = s * n + c;
                    if arg[o] == EMPTY || v > out[o] {
                        out[o] = v;
                        arg[o] = r;
                    }
                }
            }
        }
        self.push(segments.len(), n, out, Op::SegmentMax(x, arg))
    }

    /// Multi-head scaled dot-product self-attention over contiguous blocks
    /// of `seq_len` rows. `q`, `k`, `v` are `[S·seq_len × d]`; head `h` uses
    /// columns `h·d/heads..(h+1)·d/heads`.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        seq_len: usize,
        heads: usize,
    ) -> Result<Var> {
        let (rows, d) = self.dims(q);
        if self.dims(k) != (rows, d) {
            return Err(self.shape_err("attention", q, k));
        }
        if self.dims(v) != (rows, d) {
            return Err(self.shape_err("attention", q, v));
        }
        if seq_len == 0 || rows % seq_len != 0 || heads == 0 || d % heads != 0 {
            return Err(TensorError::Contract(format!(
                "attention: {rows}x{d} not divisible into sequences of {seq_len} with {heads} heads"
            )));
        }
        let dh = d / heads;
        let t = seq_len;
        let n_seq = rows / t;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut probs = vec![0.0; n_seq * heads * t * t];
        let mut out = vec![0.0; rows * d];
        for s in 0..n_seq {
            for h in 0..heads {
                let p = &mut probs[(s * heads + h) * t * t..(s * heads + h + 1) * t * t];
                for i in 0..t {
                    let qi = &qv[(s * t + i) * d + h * dh..(s * t + i) * d + (h + 1) * dh];
                    let row = &mut p[i * t..(i + 1) * t];
                    for (j, pj) in row.iter_mut().enumerate() {
                        let kj = &kv[(s * t + j) * d + h * dh..(s * t + j) * d + (h + 1) * dh];
                        *pj = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    }
                    softmax_in_place(row);
                    let o = &mut out[(s * t + i) * d + h * dh..(s * t + i) * d + (h + 1) * dh];
                    for (j, &pj) in row.iter().enumerate() {
                        let vj = &vv[(s * t + j) * d + h * dh..(s * t + j) * d + (h + 1) * dh];
                        o.iter_mut().zip(vj).for_each(|(o, &x)| *o += pj * x);
                    }
                }
            }
        }
        self.push(
            rows,
            d,
            out,
            Op::Attention {
                q,
                k,
                v,
                seq_len,
                heads,
                probs,
            },
        )
    }

    /// Row-wise layer normalization with learned `gamma`, `beta` of shape `[1×n]`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(gamma) != (1, n) {
            return Err(self.shape_err("layer_norm", x, gamma));
        }
        if self.dims(beta) != (1, n) {
            return Err(self.shape_err("layer_norm", x, beta));
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for (r, row) in self.value(x).chunks_exact(n).enumerate() {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..n {
                let xh = (row[c] - mean) * is;
                xhat[r * n + c] = xh;
                out[r * n + c] = xh * g[c] + b[c];
            }
        }
        self.push(
            m,
            n,
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        self.push(1, 1, vec![s], Op::Mean(x))
    }

    /// `ln(max(x, floor))`; no gradient flows where the floor is active.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Result<Var> {
        let (m, n) = self.dims(x);
        let out = self.value(x).iter().map(|&v| v.max(floor).ln()).collect();
        self.push(m, n, out, Op::LogClamped(x, floor))
    }

    /// Euclidean norm of each row, `[m×1]`.
    pub fn row_norm(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        let out = self
            .value(x)
            .chunks_exact(n)
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        self.push(m, 1, out, Op::RowNorm(x))
    }

    // ── reverse pass ────────────────────────────────────────────────────

    /// Differentiates the scalar `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.dims(loss) != (1, 1) {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.rg(loss) {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backprop(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        if !self.rg(v) {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn backprop(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = cols;
                if self.rg(*a) {
                    let da = matmul_nt(g, self.value(*b), m, n, k);
                    add_into(self.slot(grads, *a).unwrap(), &da);
                }
                if self.rg(*b) {
                    let db = matmul_tn(self.value(*a), g, m, k, n);
                    add_into(self.slot(grads, *b).unwrap(), &db);
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = self.slot(grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    add_into(gb, g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.slot(grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(o, &v)| *o -= v);
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let bv = self.value(*b).to_vec();
                    let ga = self.slot(grads, *a).unwrap();
                    for ((o, &gv), &y) in ga.iter_mut().zip(g).zip(&bv) {
                        *o += gv * y;
                    }
                }
                if self.rg(*b) {
                    let av = self.value(*a).to_vec();
                    let gb = self.slot(grads, *b).unwrap();
                    for ((o, &gv), &x) in gb.iter_mut().zip(g).zip(&av) {
                        *o += gv * x;
                    }
                }
            }
            Op::AddRow(x, row) => {
                if let Some(gx) = self.slot(grads, *x) {
                    add_into(gx, g);
                }
                if let Some(gr) = self.slot(grads, *row) {
                    for r in g.chunks_exact(cols) {
                        add_into(gr, r);
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.iter_mut().zip(g).for_each(|(o, &v)| *o += s * v);
                }
            }
            Op::AddScalar(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    add_into(gx, g);
                }
            }
            Op::Act(x, kind) => {
                if self.rg(*x) {
                    let xv = self.value(*x);
                    let d: Vec<f64> = xv
                        .iter()
                        .zip(&node.value)
                        .zip(g)
                        .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                        .collect();
                    add_into(self.slot(grads, *x).unwrap(), &d);
                }
            }
            Op::Concat(inputs, axis) => match axis {
                Axis::Rows => {
                    let mut offset = 0;
                    for &v in inputs {
                        let len = self.nodes[v.0].value.len();
                        if let Some(gv) = self.slot(grads, v) {
                            add_into(gv, &g[offset..offset + len]);
                        }
                        offset += len;
                    }
                }
                Axis::Cols => {
                    let mut col = 0;
                    for &v in inputs {
                        let c = self.dims(v).1;
                        if let Some(gv) = self.slot(grads, v) {
                            for r in 0..rows {
                                add_into(
                                    &mut gv[r * c..(r + 1) * c],
                                    &g[r * cols + col..r * cols + col + c],
                                );
                            }
                        }
                        col += c;
                    }
                }
            },
            Op::SliceCols(x, start) => {
                let n = self.dims(*x).1;
                if let Some(gx) = self.slot(grads, *x) {
                    for r in 0..rows {
                        add_into(
                            &mut gx[r * n + start..r * n + start + cols],
                            &g[r * cols..(r + 1) * cols],
                        );
                    }
                }
            }
            Op::GatherRows(x, idx) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (o, &i) in idx.iter().enumerate() {
                        add_into(&mut gx[i * cols..(i + 1) * cols], &g[o * cols..(o + 1) * cols]);
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for r in 0..rows {
                        let y = &node.value[r * cols..(r + 1) * cols];
                        let gy = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            gx[r * cols + c] += y[c] * (gy[c] - dot);
                        }
                    }
                }
            }
            Op::SegmentMax(x, arg) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (o, &src) in arg.iter().enumerate() {
                        if src != EMPTY {
                            gx[src * cols + o % cols] += g[o];
                        }
                    }
                }
            }
            Op::Attention {
                q,
                k,
                v,
                seq_len,
                heads,
                probs,
            } => self.attention_backward(g, grads, (*q, *k, *v), *seq_len, *heads, probs),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let n = cols;
                if self.rg(*x) {
                    let gam = self.value(*gamma);
                    let mut dx = vec![0.0; rows * n];
                    for r in 0..rows {
                        let xh = &xhat[r * n..(r + 1) * n];
                        let dxh: Vec<f64> =
                            (0..n).map(|c| g[r * n + c] * gam[c]).collect();
                        let s1: f64 = dxh.iter().sum();
                        let s2: f64 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            dx[r * n + c] =
                                inv_std[r] / n as f64 * (n as f64 * dxh[c] - s1 - xh[c] * s2);
                        }
                    }
                    add_into(self.slot(grads, *x).unwrap(), &dx);
                }
                if let Some(gg) = self.slot(grads, *gamma) {
                    for r in 0..rows {
                        for c in 0..n {
                            gg[c] += g[r * n + c] * xhat[r * n + c];
                        }
                    }
                }
                if let Some(gb) = self.slot(grads, *beta) {
                    for r in g.chunks_exact(n) {
                        add_into(gb, r);
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Mean(x) => {
                let n = self.nodes[x.0].value.len() as f64;
                if let Some(gx) = self.slot(grads, *x) {
                    gx.iter_mut().for_each(|o| *o += g[0] / n);
                }
            }
            Op::LogClamped(x, floor) => {
                if self.rg(*x) {
                    let d: Vec<f64> = self
                        .value(*x)
                        .iter()
                        .zip(g)
                        .map(|(&xv, &gv)| if xv > *floor { gv / xv } else { 0.0 })
                        .collect();
                    add_into(self.slot(grads, *x).unwrap(), &d);
                }
            }
            Op::RowNorm(x) => {
                let n = self.dims(*x).1;
                if self.rg(*x) {
                    let xv = self.value(*x);
                    let mut d = vec![0.0; xv.len()];
                    for r in 0..rows {
                        let norm = node.value[r];
                        if norm > 0.0 {
                            for c in 0..n {
                                d[r * n + c] = g[r] * xv[r * n + c] / norm;
                            }
                        }
                    }
                    add_into(self.slot(grads, *x).unwrap(), &d);
                }
            }
        }
    }

    fn attention_backward(
        &self,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        (q, k, v): (Var, Var, Var),
        t: usize,
        heads: usize,
        probs: &[f64],
    ) {
        let (rows, d) = self.dims(q);
        let dh = d / heads;
        let n_seq = rows / t;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut dq = vec![0.0; rows * d];
        let mut dk = vec![0.0; rows * d];
        let mut dv = vec![0.0; rows * d];
        let mut dp = vec![0.0; t];
        let at = |s: usize, i: usize, h: usize| (s * t + i) * d + h * dh;
        for s in 0..n_seq {
            for h in 0..heads {
                let p = &probs[(s * heads + h) * t * t..(s * heads + h + 1) * t * t];
                for i in 0..t {
                    let go = &g[at(s, i, h)..at(s, i, h) + dh];
                    let prow = &p[i * t..(i + 1) * t];
                    for j in 0..t {
                        let vj = &vv[at(s, j, h)..at(s, j, h) + dh];
                        dp[j] = go.iter().zip(vj).map(|(a, b)| a * b).sum();
                        let dvj = &mut dv[at(s, j, h)..at(s, j, h) + dh];
                        dvj.iter_mut().zip(go).for_each(|(o, &x)| *o += prow[j] * x);
                    }
                    let dot: f64 = prow.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    for j in 0..t {
                        let ds = prow[j] * (dp[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for c in 0..dh {
                            dq[at(s, i, h) + c] += ds * kv[at(s, j, h) + c];
                            dk[at(s, j, h) + c] += ds * qv[at(s, i, h) + c];
                        }
                    }
                }
            }
        }
        if let Some(gq) = self.slot(grads, q) {
            add_into(gq, &dq);
        }
        if let Some(gk) = self.slot(grads, k) {
            add_into(gk, &dk);
        }
        if let Some(gv) = self.slot(grads, v) {
            add_into(gv, &dv);
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}
