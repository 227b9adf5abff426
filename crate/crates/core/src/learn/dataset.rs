use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lang::{parse_formula, Formula};
use crate::neural::TensorMap;

use super::LearnError;

/// An input vector given inline or as `"@key"` into a tensor map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorRef {
    Inline(Vec<f64>),
    Key(String),
}

/// One line of a dataset file.
///
/// `facts` is optional program text appended to the program for this example
/// only (instance data such as removed edges).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub tensors: BTreeMap<String, TensorRef>,
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facts: Option<String>,
    /// Expected values of neural groups, e.g. `"digit_1(d1)": "7"`. Only
    /// evaluation reads them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    /// Pointer key to input vector.
    pub tensors: BTreeMap<String, Vec<f64>>,
    pub observation: Formula,
    /// Observation as written, used as a cache key.
    pub observation_text: String,
    pub facts: Option<String>,
    pub labels: BTreeMap<String, String>,
}

impl TrainingExample {
    pub fn new(tensors: BTreeMap<String, Vec<f64>>, observation: &str, facts: Option<String>) -> Result<Self, LearnError> {
        Ok(TrainingExample {
            tensors,
            observation: parse_formula(observation)?,
            observation_text: observation.to_string(),
            facts,
            labels: BTreeMap::new(),
        })
    }

    pub fn with_labels(mut self, labels: BTreeMap<String, String>) -> Self {
        self.labels = labels;
        self
    }
}

pub fn parse_dataset(text: &str, tensors: Option<&TensorMap>) -> Result<Vec<TrainingExample>, LearnError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LearnError::Dataset { line: line_no, message };
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let mut bound = BTreeMap::new();
        for (pointer, t) in rec.tensors {
            let v = match t {
                TensorRef::Inline(v) => v,
                TensorRef::Key(k) => {
                    let key = k
                        .strip_prefix('@')
                        .ok_or_else(|| err(format!("tensor reference `{k}` must start with `@`")))?;
                    let map = tensors.ok_or_else(|| err(format!("`{k}` needs a tensor map")))?;
                    map.get(key).map_err(|e| err(e.to_string()))?.to_vec()
                }
            };
            bound.insert(pointer, v);
        }
        let ex = TrainingExample::new(bound, &rec.observation, rec.facts)
            .map_err(|e| err(format!("observation: {e}")))?
            .with_labels(rec.labels);
        out.push(ex);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path, tensors: Option<&TensorMap>) -> Result<Vec<TrainingExample>, LearnError> {
    parse_dataset(&std::fs::read_to_string(path)?, tensors)
}
