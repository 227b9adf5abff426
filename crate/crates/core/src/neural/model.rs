use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_rows, NeuralError, OutputMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `h`.
    fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// One affine layer followed by a softmax per event row.
    Linear,
    /// Affine layers with `activation` between them; `hidden` lists the
    /// hidden widths.
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

impl Architecture {
    /// The shortest-path default: five affine layers, four hidden layers of 50.
    pub fn gridpath_default() -> Self {
        Architecture::Mlp {
            hidden: vec![50; 4],
            activation: Activation::Relu,
        }
    }
}

/// A classifier `m` producing an `events x values` row-stochastic matrix.
///
/// Parameters are stored flat, layer by layer, each layer as its weight matrix
/// (row-major, `out x in`) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub id: String,
    pub input_size: usize,
    pub events: usize,
    pub values: usize,
    pub architecture: Architecture,
    pub seed: u64,
    pub params: Vec<f64>,
    pub grad: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_id: String,
    pub architecture: Architecture,
    pub input_size: usize,
    pub events: usize,
    pub values: usize,
    pub seed: u64,
    pub parameters: Vec<f64>,
}

struct Trace {
    /// Input followed by each hidden layer's activation output.
    acts: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        id: impl Into<String>,
        input_size: usize,
        events: usize,
        values: usize,
        architecture: Architecture,
        seed: u64,
    ) -> Self {
        let mut m = Model::zeros(id, input_size, events, values, architecture, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for (fan_in, fan_out) in m.layer_dims() {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut m.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-s..s);
            }
            offset += fan_in * fan_out + fan_out;
        }
        m
    }

    /// All parameters zero; every output row is uniform.
    pub fn zeros(
        id: impl Into<String>,
        input_size: usize,
        events: usize,
        values: usize,
        architecture: Architecture,
        seed: u64,
    ) -> Self {
        let mut m = Model {
            id: id.into(),
            input_size,
            events,
            values,
            architecture,
            seed,
            params: Vec::new(),
            grad: Vec::new(),
        };
        let n: usize = m.layer_dims().iter().map(|(i, o)| i * o + o).sum();
        m.params = vec![0.0; n];
        m.grad = vec![0.0; n];
        m
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_size];
        if let Architecture::Mlp { hidden, .. } = &self.architecture {
            sizes.extend(hidden);
        }
        sizes.push(self.events * self.values);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    fn activation(&self) -> Option<Activation> {
        match &self.architecture {
            Architecture::Linear => None,
            Architecture::Mlp { activation, .. } => Some(*activation),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_size {
            return Err(NeuralError::InputLength {
                model: self.id.clone(),
                expected: self.input_size,
                got: x.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::NonFinite(self.id.clone()));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let dims = self.layer_dims();
        let act = self.activation();
        let mut acts = vec![x.to_vec()];
        let mut offset = 0;
        let mut logits = Vec::new();
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let h = acts.last().unwrap();
            let z: Vec<f64> = (0..fan_out)
                .map(|o| b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(h).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 == dims.len() {
                logits = z;
            } else {
                let a = act.expect("hidden layers only in an MLP");
                acts.push(z.into_iter().map(|v| a.apply(v)).collect());
            }
        }
        Trace {
            acts,
            probs: softmax_rows(&logits, self.values),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<OutputMatrix, NeuralError> {
        self.check_input(x)?;
        let t = self.trace(x);
        Ok(OutputMatrix {
            rows: self.events,
            cols: self.values,
            data: t.probs,
        })
    }

    /// Adds the gradient of `sum(upstream .* forward(x))` to `self.grad`.
    pub fn backward(&mut self, x: &[f64], upstream: &OutputMatrix) -> Result<(), NeuralError> {
        let mut grad = std::mem::take(&mut self.grad);
        let r = self.backward_into(x, upstream, &mut grad);
        self.grad = grad;
        r
    }

    /// As [`Model::backward`], accumulating into an external buffer so that
    /// several examples can be differentiated concurrently.
    pub fn backward_into(&self, x: &[f64], upstream: &OutputMatrix, grad: &mut [f64]) -> Result<(), NeuralError> {
        self.check_input(x)?;
        upstream.check_shape(self.events, self.values)?;
        assert_eq!(grad.len(), self.params.len(), "gradient buffer size");
        let t = self.trace(x);
        // Softmax Jacobian per row: dz = p * (u - <p, u>).
        let mut delta: Vec<f64> = Vec::with_capacity(t.probs.len());
        for (p, u) in t.probs.chunks(self.values).zip(upstream.data.chunks(self.values)) {
            let dot: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
            delta.extend(p.iter().zip(u).map(|(pi, ui)| pi * (ui - dot)));
        }
        let dims = self.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &(i, o) in &dims {
            offsets.push(off);
            off += i * o + o;
        }
        let act = self.activation();
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let off = offsets[l];
            let h = &t.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                for (g, hv) in row.iter_mut().zip(h) {
                    *g += d * hv;
                }
                grad[off + fan_in * fan_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let a = act.expect("hidden layers only in an MLP");
            delta = (0..fan_in)
                .map(|i| {
                    let s: f64 = (0..fan_out).map(|o| w[o * fan_in + i] * delta[o]).sum();
                    s * a.derivative(h[i])
                })
                .collect();
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model_id: self.id.clone(),
            architecture: self.architecture.clone(),
            input_size: self.input_size,
            events: self.events,
            values: self.values,
            seed: self.seed,
            parameters: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self, NeuralError> {
        let mut m = Model::zeros(c.model_id, c.input_size, c.events, c.values, c.architecture, c.seed);
        if c.parameters.len() != m.params.len() {
            return Err(NeuralError::Shape {
                rows: m.params.len(),
                cols: 1,
                got_rows: c.parameters.len(),
                got_cols: 1,
            });
        }
        m.params = c.parameters;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, serde_json::to_string(&self.checkpoint())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Model::from_checkpoint(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
