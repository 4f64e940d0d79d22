//! Named parameter blocks and the gradient tape that mirrors them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;

/// An ordered set of named tensors. Models keep all trainable state here so
/// the optimiser, clipping and gradient checks can treat them uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Appends a block and returns its index.
    pub fn push(&mut self, name: impl Into<String>, tensor: Matrix) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn get(&self, idx: usize) -> &Matrix {
        &self.tensors[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.tensors[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(Matrix::shape).collect()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    /// Reads the `flat`-th scalar across all blocks in declaration order.
    pub fn flat_get(&self, mut flat: usize) -> f64 {
        for t in &self.tensors {
            let n = t.as_slice().len();
            if flat < n {
                return t.as_slice()[flat];
            }
            flat -= n;
        }
        panic!("flat parameter index out of range");
    }

    pub fn flat_set(&mut self, mut flat: usize, value: f64) {
        for t in &mut self.tensors {
            let n = t.as_slice().len();
            if flat < n {
                t.as_mut_slice()[flat] = value;
                return;
            }
            flat -= n;
        }
        panic!("flat parameter index out of range");
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient accumulators shape-matched to a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    names: Vec<String>,
    grads: Vec<Matrix>,
}

impl GradientTape {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Self {
            names: params.names.clone(),
            grads: params
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.as_mut_slice().fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn get(&self, idx: usize) -> &Matrix {
        &self.grads[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.grads[idx]
    }

    /// Adds `grad` into block `idx`.
    pub fn accumulate(&mut self, idx: usize, grad: &Matrix) -> Result<()> {
        self.grads[idx].add_assign(grad)
    }

    pub fn accumulate_bias(&mut self, idx: usize, grad: &[f64]) -> Result<()> {
        let dst = self.grads[idx].as_mut_slice();
        if dst.len() != grad.len() {
            return Err(Error::dim(
                format!("bias gradient `{}`", self.names[idx]),
                dst.len(),
                grad.len(),
            ));
        }
        for (d, g) in dst.iter_mut().zip(grad) {
            *d += g;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.grads)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.grads.iter_mut()
    }

    pub fn flat_get(&self, mut flat: usize) -> f64 {
        for g in &self.grads {
            let n = g.as_slice().len();
            if flat < n {
                return g.as_slice()[flat];
            }
            flat -= n;
        }
        panic!("flat gradient index out of range");
    }

    pub fn matches(&self, params: &ParamStore) -> bool {
        self.grads.len() == params.tensors.len()
            && self
                .grads
                .iter()
                .zip(&params.tensors)
                .all(|(g, p)| g.shape() == p.shape())
    }
}
