//! `P(O)` as a polynomial in the network outputs, and its gradient.
//!
//! For a fixed program and observation, `P(O) = sum_s c_s * prod_g p(g = s_g)`
//! where `s` ranges over the neural choices that have a stable model
//! satisfying `O`, and `c_s = N_O(s) / N(s)` is the fraction of the stable
//! models with those choices that satisfy `O`. The coefficients do not depend
//! on the networks, so they are computed once per (program, observation).

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use crate::ground::{pointer_key, AtomId, GroundProgram, Value};
use crate::lang::Formula;
use crate::neural::OutputMatrix;
use crate::semantics::{atom_probability, check_outputs, product, sigma_of, Outputs, SemanticsError, SigmaAssignment};
use crate::stable::{expand_neural, ground_formula, solve, Optimize, SolveOptions};

/// An expanded ground program with what is needed to evaluate observations.
#[derive(Debug)]
pub struct PreparedProgram {
    pub program: GroundProgram,
    /// Minimal penalty when the program has weak constraints; `None` when it
    /// has none, or has no stable model at all.
    pub optimum: Option<i64>,
    pub model_limit: usize,
    num_cache: Mutex<HashMap<SigmaAssignment, usize>>,
}

impl PreparedProgram {
    pub fn new(ground: &GroundProgram, model_limit: usize) -> Result<Self, SemanticsError> {
        let program = expand_neural(ground);
        let optimum = if program.weak.is_empty() {
            None
        } else {
            let opts = SolveOptions {
                model_limit,
                optimize: Optimize::Minimize,
                ..Default::default()
            };
            solve(&program, &opts)?.first().map(|a| a.penalty)
        };
        Ok(PreparedProgram {
            program,
            optimum,
            model_limit,
            num_cache: Mutex::new(HashMap::new()),
        })
    }

    fn optimize(&self) -> Optimize {
        match self.optimum {
            Some(c) => Optimize::AtMost(c),
            None => Optimize::None,
        }
    }

    /// True if weak constraints exist but no stable model does.
    fn empty_with_weak(&self) -> bool {
        !self.program.weak.is_empty() && self.optimum.is_none()
    }

    /// `N(s)`: stable models whose neural choices are `s`.
    pub fn num(&self, sigma: &SigmaAssignment) -> Result<usize, SemanticsError> {
        if let Some(&n) = self.num_cache.lock().unwrap().get(sigma) {
            return Ok(n);
        }
        let assumptions = self
            .program
            .groups
            .iter()
            .zip(sigma)
            .map(|(g, &j)| (g.atoms[j as usize], true))
            .collect();
        let opts = SolveOptions {
            model_limit: self.model_limit,
            optimize: self.optimize(),
            assumptions,
            ..Default::default()
        };
        let n = solve(&self.program, &opts)?.len();
        self.num_cache.lock().unwrap().insert(sigma.clone(), n);
        Ok(n)
    }

    /// The coefficients `c_s` of `P(O)`.
    pub fn observation_terms(&self, observation: &Formula) -> Result<ObservationTerms, SemanticsError> {
        let o = ground_formula(&self.program, observation)?;
        if self.empty_with_weak() {
            return Ok(ObservationTerms { terms: Vec::new() });
        }
        let opts = SolveOptions {
            model_limit: self.model_limit,
            optimize: self.optimize(),
            observation: Some(o),
            ..Default::default()
        };
        let mut counts: BTreeMap<SigmaAssignment, usize> = BTreeMap::new();
        for a in solve(&self.program, &opts)? {
            *counts.entry(sigma_of(&self.program, &a.model)).or_default() += 1;
        }
        let mut terms = Vec::with_capacity(counts.len());
        for (sigma, n_obs) in counts {
            let n = self.num(&sigma)?;
            terms.push((sigma, n_obs as f64 / n as f64));
        }
        Ok(ObservationTerms { terms })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationTerms {
    pub terms: Vec<(SigmaAssignment, f64)>,
}

impl ObservationTerms {
    /// True if some stable model with choices `sigma` satisfies `O`.
    pub fn contains(&self, sigma: &[u32]) -> bool {
        self.terms.iter().any(|(s, _)| s == sigma)
    }

    fn probabilities(&self, gp: &GroundProgram, outputs: &Outputs) -> Result<Vec<Vec<f64>>, SemanticsError> {
        check_outputs(gp, outputs)?;
        gp.groups
            .iter()
            .map(|g| g.atoms.iter().map(|&a| atom_probability(gp, outputs, a)).collect())
            .collect()
    }

    pub fn probability(&self, gp: &GroundProgram, outputs: &Outputs) -> Result<f64, SemanticsError> {
        let p = self.probabilities(gp, outputs)?;
        Ok(self.eval(&p))
    }

    fn eval(&self, p: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |acc, (s, c)| {
                let f: Vec<f64> = s.iter().enumerate().map(|(g, &j)| p[g][j as usize]).collect();
                acc + c * product(&f)
            })
    }

    /// `P(O)` and `dP(O)/dp(g = j)` for every group `g` and value `j`.
    pub fn gradient(&self, gp: &GroundProgram, outputs: &Outputs) -> Result<(f64, Vec<Vec<f64>>), SemanticsError> {
        let p = self.probabilities(gp, outputs)?;
        let mut grad: Vec<Vec<f64>> = p.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut factors = Vec::with_capacity(p.len());
        for (s, c) in &self.terms {
            for g in 0..s.len() {
                factors.clear();
                factors.extend(s.iter().enumerate().filter(|&(h, _)| h != g).map(|(h, &j)| p[h][j as usize]));
                grad[g][s[g] as usize] += c * product(&factors);
            }
        }
        Ok((self.eval(&p), grad))
    }
}

/// `P(O)`: the summed probability of the stable models satisfying `O`.
pub fn observation_probability(
    ground: &GroundProgram,
    outputs: &Outputs,
    observation: &Formula,
    model_limit: usize,
) -> Result<f64, SemanticsError> {
    let prepared = PreparedProgram::new(ground, model_limit)?;
    prepared
        .observation_terms(observation)?
        .probability(&prepared.program, outputs)
}

/// `dP(O)/dp(c = v)` for every neural output atom, treating each matrix entry
/// as an independent variable.
pub fn output_gradient(
    ground: &GroundProgram,
    outputs: &Outputs,
    observation: &Formula,
    model_limit: usize,
) -> Result<BTreeMap<AtomId, f64>, SemanticsError> {
    let prepared = PreparedProgram::new(ground, model_limit)?;
    let (_, grad) = prepared
        .observation_terms(observation)?
        .gradient(&prepared.program, outputs)?;
    let mut out = BTreeMap::new();
    for (g, row) in prepared.program.groups.iter().zip(grad) {
        for (&a, d) in g.atoms.iter().zip(row) {
            out.insert(a, d);
        }
    }
    Ok(out)
}

/// Scatters per-group derivatives into one upstream matrix per
/// `(model, pointer)`, scaled by `scale`.
pub(crate) fn upstream_matrices(
    gp: &GroundProgram,
    grad: &[Vec<f64>],
    scale: f64,
    shapes: &BTreeMap<(String, Vec<Value>), (usize, usize)>,
) -> BTreeMap<(String, Vec<Value>), OutputMatrix> {
    let mut out: BTreeMap<(String, Vec<Value>), OutputMatrix> = shapes
        .iter()
        .map(|(k, &(e, n))| (k.clone(), OutputMatrix::zeros(e, n)))
        .collect();
    for (g, row) in gp.groups.iter().zip(grad) {
        let m = out
            .get_mut(&(g.model.clone(), g.pointer.clone()))
            .unwrap_or_else(|| panic!("no shape for {}({})", g.model, pointer_key(&g.pointer)));
        for (j, d) in row.iter().enumerate() {
            m.add(g.event - 1, j, scale * d);
        }
    }
    out
}
