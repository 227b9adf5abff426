//! Probabilities of stable models, queries, marginals and MAP inference.
//!
//! Every neural group `m_i(t)` picks one value; a stable model `I` has
//! probability `prod p(c = v) / Num(I)` over the chosen atoms `c = v` of `I`,
//! where `Num(I)` counts the stable models making the same choices. When the
//! program has weak constraints only its optimal stable models count. Mass of
//! choices without any stable model is lost, not redistributed.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ground::{pointer_key, AtomId, GroundError, GroundProgram, UnknownAtom, Value};
use crate::lang::Formula;
use crate::neural::OutputMatrix;
use crate::stable::{
    expand_neural, ground_formula, solve, GroundFormula, Interpretation, Optimize, SolveError,
    SolveOptions, DEFAULT_MODEL_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("no output matrix for {0}")]
    MissingOutput(String),
    #[error("output matrix for {key} is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    Shape {
        key: String,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error(transparent)]
    UnknownAtom(#[from] UnknownAtom),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no stable model satisfies the evidence")]
    UnsatisfiableEvidence,
    #[error("atom {0} is not a neural output atom")]
    NotNeural(String),
}

/// Network outputs keyed by model name and pointer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    map: BTreeMap<(String, Vec<Value>), OutputMatrix>,
}

impl Outputs {
    pub fn insert(&mut self, model: impl Into<String>, pointer: Vec<Value>, m: OutputMatrix) {
        self.map.insert((model.into(), pointer), m);
    }

    pub fn get(&self, model: &str, pointer: &[Value]) -> Result<&OutputMatrix, SemanticsError> {
        self.map
            .get(&(model.to_string(), pointer.to_vec()))
            .ok_or_else(|| SemanticsError::MissingOutput(format!("{model}({})", pointer_key(pointer))))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, Vec<Value>), &OutputMatrix)> {
        self.map.iter()
    }

    /// Uniform rows for every neural declaration of `gp`.
    pub fn uniform(gp: &GroundProgram) -> Self {
        let mut out = Outputs::default();
        for key in declarations(gp) {
            let (e, n) = key.1;
            out.insert(key.0 .0.clone(), key.0 .1.clone(), OutputMatrix::uniform(e, n));
        }
        out
    }
}

type DeclKey<'a> = ((&'a String, &'a Vec<Value>), (usize, usize));

/// `(model, pointer)` of every neural declaration with its matrix shape.
fn declarations(gp: &GroundProgram) -> Vec<((String, Vec<Value>), (usize, usize))> {
    let mut shapes: BTreeMap<(&String, &Vec<Value>), (usize, usize)> = BTreeMap::new();
    for g in &gp.groups {
        let e = shapes.entry((&g.model, &g.pointer)).or_insert((0, g.values.len()));
        e.0 = e.0.max(g.event);
    }
    shapes
        .into_iter()
        .map(|(k, v): DeclKey| ((k.0.clone(), k.1.clone()), v))
        .collect()
}

/// Checks every declaration has a matrix of the right shape.
pub fn check_outputs(gp: &GroundProgram, outputs: &Outputs) -> Result<(), SemanticsError> {
    for ((model, pointer), (e, n)) in declarations(gp) {
        let m = outputs.get(&model, &pointer)?;
        if m.rows() != e || m.cols() != n {
            return Err(SemanticsError::Shape {
                key: format!("{model}({})", pointer_key(&pointer)),
                rows: e,
                cols: n,
                got_rows: m.rows(),
                got_cols: m.cols(),
            });
        }
    }
    Ok(())
}

/// `P(m_i(t) = v_j) = M(D(t))[i, j]`.
pub fn atom_probability(gp: &GroundProgram, outputs: &Outputs, atom: AtomId) -> Result<f64, SemanticsError> {
    let slot = gp
        .atoms
        .neural_slot(atom)
        .ok_or_else(|| SemanticsError::NotNeural(gp.atoms.name(atom)))?;
    let g = &gp.groups[slot.group as usize];
    let m = outputs.get(&g.model, &g.pointer)?;
    let (i, j) = (g.event - 1, slot.value as usize);
    if i >= m.rows() || j >= m.cols() {
        return Err(SemanticsError::Shape {
            key: format!("{}({})", g.model, pointer_key(&g.pointer)),
            rows: g.event,
            cols: g.values.len(),
            got_rows: m.rows(),
            got_cols: m.cols(),
        });
    }
    Ok(m.get(i, j))
}

/// Chosen value index for each neural group, in group order.
pub type SigmaAssignment = Vec<u32>;

pub fn sigma_of(gp: &GroundProgram, model: &Interpretation) -> SigmaAssignment {
    gp.groups
        .iter()
        .map(|g| {
            g.atoms
                .iter()
                .position(|&a| model.contains(a))
                .expect("stable model chooses one value per group") as u32
        })
        .collect()
}

/// Product of the probabilities of the chosen atoms; computed in log space
/// beyond 64 factors.
pub fn sigma_weight(gp: &GroundProgram, outputs: &Outputs, sigma: &[u32]) -> Result<f64, SemanticsError> {
    let mut ps = Vec::with_capacity(sigma.len());
    for (g, &j) in gp.groups.iter().zip(sigma) {
        ps.push(atom_probability(gp, outputs, g.atoms[j as usize])?);
    }
    Ok(product(&ps))
}

pub(crate) fn product(ps: &[f64]) -> f64 {
    if ps.len() <= 64 {
        return ps.iter().product();
    }
    if ps.iter().any(|&p| p == 0.0) {
        return 0.0;
    }
    ps.iter().map(|p| p.ln()).sum::<f64>().exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedModel {
    pub interpretation: Interpretation,
    pub sigma: SigmaAssignment,
    pub probability: f64,
    pub num_agreeing: usize,
    pub penalty: i64,
}

/// The stable models of a program (after aggregate filtering and, with weak
/// constraints, optimization) grouped by their neural choices. Computing it
/// does not depend on network outputs, so it can be reused across queries.
#[derive(Clone, Debug)]
pub struct ModelSet {
    pub program: GroundProgram,
    pub models: Vec<(Interpretation, i64)>,
    pub sigmas: Vec<SigmaAssignment>,
    pub num: Vec<usize>,
}

impl ModelSet {
    /// Expands neural declarations of `ground` (if any remain) and solves.
    pub fn compute(ground: &GroundProgram, limit: usize) -> Result<Self, SemanticsError> {
        let program = if ground.neural.is_empty() {
            ground.clone()
        } else {
            expand_neural(ground)
        };
        let opts = SolveOptions {
            model_limit: limit,
            optimize: Optimize::Minimize,
            ..Default::default()
        };
        let answers = solve(&program, &opts)?;
        let models: Vec<(Interpretation, i64)> = answers.into_iter().map(|a| (a.model, a.penalty)).collect();
        let sigmas: Vec<SigmaAssignment> = models.iter().map(|(m, _)| sigma_of(&program, m)).collect();
        let mut counts: HashMap<&SigmaAssignment, usize> = HashMap::new();
        for s in &sigmas {
            *counts.entry(s).or_default() += 1;
        }
        let num = sigmas.iter().map(|s| counts[s]).collect();
        Ok(ModelSet {
            program,
            models,
            sigmas,
            num,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn annotate(&self, outputs: &Outputs) -> Result<Vec<AnnotatedModel>, SemanticsError> {
        check_outputs(&self.program, outputs)?;
        let mut weights: HashMap<&SigmaAssignment, f64> = HashMap::new();
        let mut out = Vec::with_capacity(self.models.len());
        for (((m, penalty), sigma), &num) in self.models.iter().zip(&self.sigmas).zip(&self.num) {
            let w = match weights.get(sigma) {
                Some(&w) => w,
                None => {
                    let w = sigma_weight(&self.program, outputs, sigma)?;
                    weights.insert(sigma, w);
                    w
                }
            };
            out.push(AnnotatedModel {
                interpretation: m.clone(),
                sigma: sigma.clone(),
                probability: w / num as f64,
                num_agreeing: num,
                penalty: *penalty,
            });
        }
        Ok(out)
    }

    pub fn formula(&self, f: &Formula) -> Result<GroundFormula, SemanticsError> {
        Ok(ground_formula(&self.program, f)?)
    }

    pub fn query_probability(&self, outputs: &Outputs, query: &Formula) -> Result<f64, SemanticsError> {
        let q = self.formula(query)?;
        Ok(self
            .annotate(outputs)?
            .iter()
            .filter(|m| q.holds(&|a| m.interpretation.contains(a)))
            .fold(0.0, |acc, m| acc + m.probability))
    }

    /// `P(query | evidence)`, or `None` when the evidence has probability 0.
    pub fn conditional_probability(
        &self,
        outputs: &Outputs,
        query: &Formula,
        evidence: &Formula,
    ) -> Result<Option<f64>, SemanticsError> {
        let joint = Formula::And(vec![query.clone(), evidence.clone()]);
        let pe = self.query_probability(outputs, evidence)?;
        if pe == 0.0 {
            return Ok(None);
        }
        Ok(Some(self.query_probability(outputs, &joint)? / pe))
    }

    /// Sum of all model probabilities.
    pub fn total_mass(&self, outputs: &Outputs) -> Result<f64, SemanticsError> {
        Ok(self.annotate(outputs)?.iter().fold(0.0, |acc, m| acc + m.probability))
    }

    /// Most probable model satisfying `evidence`; ties go to the model whose
    /// sorted atom names are lexicographically smallest.
    pub fn map_inference(
        &self,
        outputs: &Outputs,
        evidence: Option<&Formula>,
    ) -> Result<AnnotatedModel, SemanticsError> {
        let e = evidence.map(|f| self.formula(f)).transpose()?;
        let mut best: Option<(AnnotatedModel, Vec<String>)> = None;
        for m in self.annotate(outputs)? {
            if let Some(e) = &e {
                if !e.holds(&|a| m.interpretation.contains(a)) {
                    continue;
                }
            }
            let better = match &best {
                None => true,
                Some((b, _)) if m.probability > b.probability => true,
                Some((b, names)) if m.probability == b.probability => {
                    m.interpretation.names(&self.program.atoms) < *names
                }
                _ => false,
            };
            if better {
                let names = m.interpretation.names(&self.program.atoms);
                best = Some((m, names));
            }
        }
        best.map(|(m, _)| m).ok_or(SemanticsError::UnsatisfiableEvidence)
    }

    /// Marginal probability of every atom, keyed by atom name.
    pub fn marginals(&self, outputs: &Outputs) -> Result<BTreeMap<String, f64>, SemanticsError> {
        let annotated = self.annotate(outputs)?;
        let mut acc = vec![0.0; self.program.atoms.len()];
        for m in &annotated {
            for &a in m.interpretation.atoms() {
                acc[a as usize] += m.probability;
            }
        }
        Ok(self
            .program
            .atoms
            .iter()
            .map(|(id, _)| (self.program.atoms.name(id), acc[id as usize]))
            .collect())
    }
}

pub fn annotate_models(ground: &GroundProgram, outputs: &Outputs) -> Result<Vec<AnnotatedModel>, SemanticsError> {
    ModelSet::compute(ground, DEFAULT_MODEL_LIMIT)?.annotate(outputs)
}

pub fn query_probability(ground: &GroundProgram, outputs: &Outputs, query: &Formula) -> Result<f64, SemanticsError> {
    ModelSet::compute(ground, DEFAULT_MODEL_LIMIT)?.query_probability(outputs, query)
}

pub fn map_inference(
    ground: &GroundProgram,
    outputs: &Outputs,
    evidence: Option<&Formula>,
) -> Result<AnnotatedModel, SemanticsError> {
    ModelSet::compute(ground, DEFAULT_MODEL_LIMIT)?.map_inference(outputs, evidence)
}

pub fn marginals(ground: &GroundProgram, outputs: &Outputs) -> Result<BTreeMap<String, f64>, SemanticsError> {
    ModelSet::compute(ground, DEFAULT_MODEL_LIMIT)?.marginals(outputs)
}
