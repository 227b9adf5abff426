//! Built-in differentiable classifiers and the tensor map that binds pointer
//! terms to input vectors.

mod check;
mod model;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::gradient_check;
pub use model::{Activation, Architecture, Checkpoint, Model};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("model `{model}` expects input length {expected}, got {got}")]
    InputLength {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("model `{0}` has a non-finite parameter")]
    NonFinite(String),
    #[error("expected a {rows}x{cols} matrix, got {got_rows}x{got_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("no tensor bound to pointer `{0}`")]
    MissingTensor(String),
    #[error("no model named `{0}`")]
    UnknownModel(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// A dense row-major matrix; as a network output, row `i` is the distribution
/// of event `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl OutputMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OutputMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        OutputMatrix {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    /// Panics if the rows have different lengths.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        OutputMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| {
            let r = self.row(i);
            r.iter().all(|&p| p.is_finite() && p >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    pub(crate) fn check_shape(&self, rows: usize, cols: usize) -> Result<(), NeuralError> {
        if self.rows == rows && self.cols == cols {
            Ok(())
        } else {
            Err(NeuralError::Shape {
                rows,
                cols,
                got_rows: self.rows,
                got_cols: self.cols,
            })
        }
    }
}

/// Pointer key (see [`crate::ground::pointer_key`]) to input vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TensorMap {
    pub tensors: BTreeMap<String, Vec<f64>>,
}

impl TensorMap {
    pub fn get(&self, key: &str) -> Result<&[f64], NeuralError> {
        self.tensors
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| NeuralError::MissingTensor(key.to_string()))
    }

    pub fn insert(&mut self, key: impl Into<String>, v: Vec<f64>) {
        self.tensors.insert(key.into(), v);
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// Models by name.
pub type Registry = BTreeMap<String, Model>;

/// Softmax of each length-`n` chunk of `logits`, with max-subtraction.
pub fn softmax_rows(logits: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(n) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|x| x / s));
    }
    out
}
