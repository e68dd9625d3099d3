use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use super::{Result, Tensor, TensorError};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered collection of named learnable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// The tape handles of a bound [`ParamSet`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
    trainable: bool,
}

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    /// Matrix initialized uniformly in `±1/sqrt(fan_in)`.
    pub fn push_uniform(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let values = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let t = Tensor::matrix(fan_in, fan_out, values).expect("positive dims");
        self.push(name, t)
    }

    pub fn push_filled(&mut self, name: impl Into<String>, cols: usize, fill: f64) -> ParamId {
        let t = Tensor::matrix(1, cols, vec![fill; cols]).expect("positive dims");
        self.push(name, t)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Records every parameter on `tape`. With `trainable == false` they are
    /// recorded as constants and receive no gradient.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.variable(t)
                } else {
                    let (r, c) = t.dims2();
                    tape.constant(r, c, t.values().to_vec())
                        .expect("parameter shapes are valid")
                }
            })
            .collect();
        Bound { vars, trainable }
    }

    /// Adds the gradients of a bound forward pass into each parameter.
    /// Parameters the loss did not reach receive an explicit zero gradient.
    pub fn accumulate(&mut self, bound: &Bound, grads: &Gradients) -> Result<()> {
        if !bound.trainable {
            return Err(TensorError::Contract(
                "accumulate on a constant binding".into(),
            ));
        }
        if bound.vars.len() != self.tensors.len() {
            return Err(TensorError::Contract(format!(
                "binding has {} params, set has {}",
                bound.vars.len(),
                self.tensors.len()
            )));
        }
        for (t, &v) in self.tensors.iter_mut().zip(&bound.vars) {
            match grads.get(v) {
                Some(g) => t.accumulate_grad(g)?,
                None => t.accumulate_grad(&vec![0.0; t.len()])?,
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// L2 norm over all accumulated gradients.
    pub fn grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter_map(|t| t.grad())
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales gradients so their global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in &mut self.tensors {
                if let Some(mut g) = t.take_grad() {
                    g.iter_mut().for_each(|v| *v *= s);
                    t.accumulate_grad(&g).expect("same length");
                }
            }
        }
        norm
    }

    /// Copies values from `other`, which must have identical names and shapes.
    pub fn load_values(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(TensorError::Contract("parameter names differ".into()));
        }
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            if dst.shape() != src.shape() {
                return Err(TensorError::Shape {
                    op: "load_values",
                    left: dst.shape().to_vec(),
                    right: src.shape().to_vec(),
                });
            }
            dst.values_mut().copy_from_slice(src.values());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unreached_params_get_zero_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let a = ps.push_uniform("a", 2, 2, &mut rng);
        ps.push_uniform("unused", 2, 2, &mut rng);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape, true);
        let s = tape.sum(bound.get(a)).unwrap();
        let grads = tape.backward(s).unwrap();
        ps.accumulate(&bound, &grads).unwrap();
        assert_eq!(ps.get(a).grad().unwrap(), &[1.0; 4]);
        assert_eq!(ps.get(ParamId(1)).grad().unwrap(), &[0.0; 4]);
    }

    #[test]
    fn constant_binding_yields_no_grad() {
        let mut ps = ParamSet::new();
        let a = ps.push_filled("a", 3, 1.0);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape, false);
        let s = tape.sum(bound.get(a)).unwrap();
        let grads = tape.backward(s).unwrap();
        assert!(grads.get(bound.get(a)).is_none());
        assert!(ps.accumulate(&bound, &grads).is_err());
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut ps = ParamSet::new();
        let a = ps.push_filled("a", 2, 0.0);
        ps.get_mut(a).accumulate_grad(&[3.0, 4.0]).unwrap();
        let before = ps.clip_grad_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((ps.grad_norm() - 1.0).abs() < 1e-12);
    }
}
