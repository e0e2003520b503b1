use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// First derivative, expressed through the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    /// Second derivative; zero almost everywhere for relu.
    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }
}

/// Where one dense layer lives inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Start of the row-major `fan_out x fan_in` weight block.
    pub weight_offset: usize,
    /// Start of the `fan_out` biases (directly after the weights).
    pub bias_offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.fan_out
    }

    pub fn param_count(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(
        input_dim: usize,
        hidden_layers: Vec<usize>,
        output_classes: usize,
        activation: Activation,
    ) -> Result<Self> {
        let arch = MlpArchitecture {
            input_dim,
            hidden_layers,
            output_classes,
            activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1"));
        }
        if self.output_classes < 2 {
            return Err(Error::config(format!(
                "output_classes must be at least 2, got {}",
                self.output_classes
            )));
        }
        if let Some(pos) = self.hidden_layers.iter().position(|&h| h == 0) {
            return Err(Error::config(format!("hidden layer {pos} has width 0")));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_layers.len() + 1
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(self.output_classes);

        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let shape = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += shape.param_count();
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::param_count).sum()
    }

    /// Short label such as `1x64` or `2x128`; `0x0` for a linear model.
    pub fn label(&self) -> String {
        match self.hidden_layers.first() {
            None => "0x0".to_string(),
            Some(&w) if self.hidden_layers.iter().all(|&h| h == w) => {
                format!("{}x{}", self.hidden_layers.len(), w)
            }
            Some(_) => self
                .hidden_layers
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join("-"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_counts_weights_and_biases() {
        let arch = MlpArchitecture::new(64, vec![64], 10, Activation::Relu).unwrap();
        assert_eq!(arch.param_count(), 65 * 64 + 65 * 10);
        let arch = MlpArchitecture::new(3, vec![], 2, Activation::Tanh).unwrap();
        assert_eq!(arch.param_count(), 8);
    }

    #[test]
    fn layer_offsets_are_contiguous() {
        let arch = MlpArchitecture::new(5, vec![4, 3], 2, Activation::Relu).unwrap();
        let layers = arch.layers();
        assert_eq!(layers[0].weight_offset, 0);
        assert_eq!(layers[0].bias_offset, 20);
        assert_eq!(layers[1].weight_offset, 24);
        assert_eq!(layers[2].weight_offset, 24 + 15);
        assert_eq!(layers[2].bias_range().end, arch.param_count());
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(MlpArchitecture::new(0, vec![4], 2, Activation::Relu).is_err());
        assert!(MlpArchitecture::new(4, vec![4], 1, Activation::Relu).is_err());
        assert!(MlpArchitecture::new(4, vec![4, 0], 3, Activation::Relu).is_err());
    }

    #[test]
    fn labels() {
        let a = MlpArchitecture::new(4, vec![64], 10, Activation::Relu).unwrap();
        assert_eq!(a.label(), "1x64");
        let a = MlpArchitecture::new(4, vec![32, 16], 10, Activation::Relu).unwrap();
        assert_eq!(a.label(), "32-16");
    }
}
