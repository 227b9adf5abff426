use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ground::{ground_with, pointer_key, GroundConfig, GroundProgram, Value};
use crate::lang::{parse_program, Program};
use crate::neural::{NeuralError, Registry};
use crate::semantics::Outputs;
use crate::stable::DEFAULT_MODEL_LIMIT;

use super::objective::{upstream_matrices, ObservationTerms, PreparedProgram};
use super::{LearnError, TrainingExample};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Probability floor inside the log.
    pub epsilon: f64,
    /// Threads used for a batch; 0 picks the rayon default.
    pub workers: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::Adam,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 1,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            workers: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(format!("epsilon must lie in (0, 1e-6], got {}", self.epsilon));
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_nll: f64,
    /// Examples with `P(O) = 0`.
    pub zero_probability: usize,
    pub seconds: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epochs: Vec<EpochReport>,
}

impl LossReport {
    /// The report with wall-clock times zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> LossReport {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.seconds = 0.0;
        }
        r
    }
}

/// Loss and parameter gradients of one example.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleGrad {
    pub loss: f64,
    pub probability: f64,
    /// Per model, the gradient of the loss w.r.t. its flat parameters. Empty
    /// when the gradient is skipped because `P(O)` is below the floor.
    pub grads: BTreeMap<String, Vec<f64>>,
}

type Prepared = Arc<PreparedProgram>;

/// A program together with caches of its ground forms (one per distinct
/// per-example `facts`) and of observation coefficients.
pub struct Learner {
    program: Program,
    config: GroundConfig,
    model_limit: usize,
    prepared: Mutex<HashMap<Option<String>, Prepared>>,
    terms: Mutex<HashMap<(Option<String>, String), Arc<ObservationTerms>>>,
}

impl Learner {
    pub fn new(program: Program) -> Self {
        Learner::with_limits(program, GroundConfig::default(), DEFAULT_MODEL_LIMIT)
    }

    pub fn with_limits(program: Program, config: GroundConfig, model_limit: usize) -> Self {
        Learner {
            program,
            config,
            model_limit,
            prepared: Mutex::new(HashMap::new()),
            terms: Mutex::new(HashMap::new()),
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// The ground program for an example with the given extra facts.
    pub fn ground(&self, facts: Option<&str>) -> Result<GroundProgram, LearnError> {
        let mut p = self.program.clone();
        if let Some(text) = facts {
            let extra = parse_program(text)?;
            p.asp_rules.extend(extra.asp_rules);
            p.neural_rules.extend(extra.neural_rules);
        }
        Ok(ground_with(&p, &self.config)?)
    }

    pub fn prepared(&self, facts: Option<&str>) -> Result<Prepared, LearnError> {
        let key = facts.map(str::to_string);
        if let Some(p) = self.prepared.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(PreparedProgram::new(&self.ground(facts)?, self.model_limit)?);
        Ok(self.prepared.lock().unwrap().entry(key).or_insert(p).clone())
    }

    pub(crate) fn terms(&self, prepared: &PreparedProgram, ex: &TrainingExample) -> Result<Arc<ObservationTerms>, LearnError> {
        let key = (ex.facts.clone(), ex.observation_text.clone());
        if let Some(t) = self.terms.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(prepared.observation_terms(&ex.observation)?);
        Ok(self.terms.lock().unwrap().entry(key).or_insert(t).clone())
    }

    /// Runs every network the program needs on the example's tensors.
    pub fn outputs(&self, gp: &GroundProgram, registry: &Registry, ex: &TrainingExample) -> Result<Outputs, LearnError> {
        let mut out = Outputs::default();
        for (model, pointer) in declarations(gp) {
            let m = registry
                .get(&model)
                .ok_or_else(|| LearnError::UnknownModel(model.clone()))?;
            let key = pointer_key(&pointer);
            let x = ex
                .tensors
                .get(&key)
                .ok_or(NeuralError::MissingTensor(key))?;
            out.insert(model, pointer, m.forward(x)?);
        }
        Ok(out)
    }

    /// `P(O)` of one example under the current networks.
    pub fn probability(&self, registry: &Registry, ex: &TrainingExample) -> Result<f64, LearnError> {
        let prepared = self.prepared(ex.facts.as_deref())?;
        let outputs = self.outputs(&prepared.program, registry, ex)?;
        Ok(self.terms(&prepared, ex)?.probability(&prepared.program, &outputs)?)
    }

    /// `-ln max(P(O), eps)` and its gradient w.r.t. every model's parameters.
    pub fn example_loss_and_grads(
        &self,
        registry: &Registry,
        ex: &TrainingExample,
        epsilon: f64,
    ) -> Result<ExampleGrad, LearnError> {
        let prepared = self.prepared(ex.facts.as_deref())?;
        let gp = &prepared.program;
        let outputs = self.outputs(gp, registry, ex)?;
        let (p, grad) = self.terms(&prepared, ex)?.gradient(gp, &outputs)?;
        let loss = -p.max(epsilon).ln();
        let mut grads = BTreeMap::new();
        if p < epsilon {
            // the floor is flat here
            return Ok(ExampleGrad { loss, probability: p, grads });
        }
        let shapes = outputs
            .iter()
            .map(|(k, m)| (k.clone(), (m.rows(), m.cols())))
            .collect();
        for ((model, pointer), up) in upstream_matrices(gp, &grad, -1.0 / p, &shapes) {
            let m = &registry[&model];
            let g = grads.entry(model).or_insert_with(|| vec![0.0; m.param_count()]);
            m.backward_into(&ex.tensors[&pointer_key(&pointer)], &up, g)?;
        }
        Ok(ExampleGrad { loss, probability: p, grads })
    }
}

fn declarations(gp: &GroundProgram) -> BTreeSet<(String, Vec<Value>)> {
    gp.groups
        .iter()
        .map(|g| (g.model.clone(), g.pointer.clone()))
        .collect()
}

/// First-order update rule with its per-model state.
pub struct Optimizer {
    algorithm: Algorithm,
    lr: f64,
    step: i32,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(algorithm: Algorithm, lr: f64) -> Self {
        Optimizer {
            algorithm,
            lr,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, registry: &mut Registry, grads: &BTreeMap<String, Vec<f64>>) {
        self.step += 1;
        for (name, g) in grads {
            let Some(model) = registry.get_mut(name) else { continue };
            match self.algorithm {
                Algorithm::Sgd => {
                    for (w, d) in model.params.iter_mut().zip(g) {
                        *w -= self.lr * d;
                    }
                }
                Algorithm::Adam => {
                    let (m, v) = self
                        .moments
                        .entry(name.clone())
                        .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
                    let c1 = 1.0 - BETA1.powi(self.step);
                    let c2 = 1.0 - BETA2.powi(self.step);
                    for i in 0..g.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        model.params[i] -= self.lr * mh / (vh.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Mini-batch training. Gradients of a batch are summed in example order
/// before one optimizer step. `eval` runs after every epoch and its result is
/// stored in that epoch's report.
pub fn train(
    learner: &Learner,
    registry: &mut Registry,
    dataset: &[TrainingExample],
    config: &OptimizerConfig,
    eval: &mut dyn FnMut(usize, &Registry) -> BTreeMap<String, f64>,
) -> Result<LossReport, LearnError> {
    config.validate().map_err(LearnError::Config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LearnError::Io(std::io::Error::other(e)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut opt = Optimizer::new(config.algorithm, config.learning_rate);
    let mut report = LossReport::default();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut zero = 0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<ExampleGrad, LearnError>> = {
                let reg: &Registry = registry;
                pool.install(|| {
                    batch
                        .par_iter()
                        .map(|&i| learner.example_loss_and_grads(reg, &dataset[i], config.epsilon))
                        .collect()
                })
            };
            let mut sum: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (&i, r) in batch.iter().zip(results) {
                let r = r?;
                let finite = r.loss.is_finite() && r.grads.values().all(|g| g.iter().all(|x| x.is_finite()));
                if !finite {
                    return Err(LearnError::Divergence { epoch, example: i });
                }
                total += r.loss;
                if r.probability == 0.0 {
                    zero += 1;
                }
                for (name, g) in r.grads {
                    match sum.get_mut(&name) {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => {
                            sum.insert(name, g);
                        }
                    }
                }
            }
            opt.step(registry, &sum);
            let blown = sum
                .keys()
                .filter_map(|name| registry.get(name))
                .any(|m| m.params.iter().any(|w| !w.is_finite()));
            if blown {
                return Err(LearnError::Divergence { epoch, example: batch[batch.len() - 1] });
            }
        }
        let seconds = start.elapsed().as_secs_f64();
        let metrics = eval(epoch, registry);
        report.epochs.push(EpochReport {
            epoch,
            mean_nll: if dataset.is_empty() { 0.0 } else { total / dataset.len() as f64 },
            zero_probability: zero,
            seconds,
            metrics,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        let mut c = OptimizerConfig::default();
        assert!(c.validate().is_ok());
        c.epsilon = 1e-3;
        assert!(c.validate().is_err());
        c.epsilon = 1e-12;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        use crate::neural::{Architecture, Model};
        let mut reg = Registry::new();
        reg.insert("m".into(), Model::zeros("m", 2, 1, 2, Architecture::Linear, 0));
        let n = reg["m"].param_count();
        let mut grads = BTreeMap::new();
        grads.insert("m".to_string(), vec![1.0; n]);
        let mut opt = Optimizer::new(Algorithm::Sgd, 0.5);
        opt.step(&mut reg, &grads);
        assert!(reg["m"].params.iter().all(|&w| w == -0.5));
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        use crate::neural::{Architecture, Model};
        let mut reg = Registry::new();
        reg.insert("m".into(), Model::zeros("m", 2, 1, 2, Architecture::Linear, 0));
        let n = reg["m"].param_count();
        let mut grads = BTreeMap::new();
        grads.insert("m".to_string(), (0..n).map(|i| i as f64 - 2.0).collect());
        let mut opt = Optimizer::new(Algorithm::Adam, 0.01);
        opt.step(&mut reg, &grads);
        for (w, g) in reg["m"].params.iter().zip(&grads["m"]) {
            if *g == 0.0 {
                assert_eq!(*w, 0.0);
            } else {
                assert!((w + 0.01 * g.signum()).abs() < 1e-6);
            }
        }
    }
}
