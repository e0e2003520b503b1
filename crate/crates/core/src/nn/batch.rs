use crate::{Error, Result};

/// Row-major inputs (`m x input_dim`) with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("batch input_dim must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::config("batch must contain at least one example"));
        }
        if inputs.len() != labels.len() * input_dim {
            return Err(Error::config(format!(
                "batch has {} input values for {} labels of dimension {}",
                inputs.len(),
                labels.len(),
                input_dim
            )));
        }
        Ok(Batch {
            inputs,
            labels,
            input_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Single-example batch.
    pub fn example(&self, i: usize) -> Batch {
        Batch {
            inputs: self.input(i).to_vec(),
            labels: vec![self.labels[i]],
            input_dim: self.input_dim,
        }
    }

    pub fn concat(&self, other: &Batch) -> Result<Batch> {
        if self.input_dim != other.input_dim {
            return Err(Error::config("cannot concatenate batches of different input_dim"));
        }
        let mut inputs = self.inputs.clone();
        inputs.extend_from_slice(&other.inputs);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Batch {
            inputs,
            labels,
            input_dim: self.input_dim,
        })
    }
}
