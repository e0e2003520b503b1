use crate::nn::Batch;
use crate::{Error, Result};

/// Examples with inputs in `[0, 1]` and integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    inputs: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    num_classes: usize,
    /// `(rows, cols)` when each input is a row-major image.
    image_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<f64>,
        labels: Vec<usize>,
        input_dim: usize,
        num_classes: usize,
        image_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("dataset input_dim must be at least 1"));
        }
        if inputs.len() != labels.len() * input_dim {
            return Err(Error::Consistency(format!(
                "{} input values for {} labels of dimension {input_dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some((r, c)) = image_shape {
            if r * c != input_dim {
                return Err(Error::Consistency(format!(
                    "image shape {r}x{c} does not match input_dim {input_dim}"
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Consistency(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset inputs".into(),
                index: i,
            });
        }
        Ok(Dataset {
            name: name.into(),
            inputs,
            labels,
            input_dim,
            num_classes,
            image_shape,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Raises the class count, e.g. when a subset misses some labels.
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        self.num_classes = num_classes;
        Ok(self)
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

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
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

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name.clone(),
            inputs,
            labels,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            image_shape: self.image_shape,
        }
    }

    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        let sub = self.select(indices);
        Batch::new(sub.inputs, sub.labels, self.input_dim)
    }

    /// The whole dataset as one batch.
    pub fn to_batch(&self) -> Result<Batch> {
        Batch::new(self.inputs.clone(), self.labels.clone(), self.input_dim)
    }

    /// Per-class example counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}
