use rand::Rng as _;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{QppError, Result};
use crate::rng::Rng;

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a tensor, returning its index.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<usize> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(QppError::Contract(format!("duplicate parameter {name}")));
        }
        self.names.push(name);
        self.tensors.push(t);
        Ok(self.tensors.len() - 1)
    }

    /// Uniform(-1/√fan_in, 1/√fan_in) initialisation.
    pub fn insert_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut Rng,
    ) -> Result<usize> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Put every parameter on the tape as a trainable leaf, in order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }

    /// Put every parameter on the tape as a constant (inference).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.constant(t.clone())).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data().iter().all(|v| v.is_finite()))
    }
}
