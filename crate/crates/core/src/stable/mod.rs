//! Stable models of ground programs.
//!
//! [`expand_neural`] replaces every neural declaration by its exclusive-choice
//! rules. [`enumerate_stable_models`], [`filter_constraints`] and
//! [`optimal_models`] compose into the reference pipeline; [`solve`] computes
//! the same set in one pruned search and is what the probability layer uses.
//! [`check_stable`] is a direct reduct/least-model check that does not share
//! code with the search.

mod formula;
mod solver;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ground::{
    AggregateConstraint, AtomId, AtomTable, GroundProgram, GroundRule, WeakConstraint,
};

pub use formula::{ground_formula, GroundFormula, Truth};
pub use solver::{solve, Answer, Optimize, SolveOptions};

pub const DEFAULT_MODEL_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("more than {0} stable models")]
    ModelLimit(usize),
    #[error("program still contains {0} unexpanded neural declaration(s)")]
    Unexpanded(usize),
}

/// A set of true atoms, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interpretation {
    atoms: Vec<AtomId>,
}

impl Interpretation {
    pub fn new(mut atoms: Vec<AtomId>) -> Self {
        atoms.sort_unstable();
        atoms.dedup();
        Interpretation { atoms }
    }

    pub fn contains(&self, a: AtomId) -> bool {
        self.atoms.binary_search(&a).is_ok()
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom names, sorted lexicographically.
    pub fn names(&self, table: &AtomTable) -> Vec<String> {
        let mut v: Vec<String> = self.atoms.iter().map(|&a| table.name(a)).collect();
        v.sort();
        v
    }
}

/// Adds, for every ground neural declaration and each of its events, the
/// rules `a_j :- not a_1, ..., not a_{j-1}, not a_{j+1}, ..., not a_n`.
pub fn expand_neural(ground: &GroundProgram) -> GroundProgram {
    let mut out = ground.clone();
    for n in std::mem::take(&mut out.neural) {
        for &g in &n.groups {
            let atoms = &out.groups[g].atoms;
            for (j, &a) in atoms.iter().enumerate() {
                let neg = atoms
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &b)| b)
                    .collect();
                out.rules.push(GroundRule {
                    head: Some(a),
                    pos: vec![],
                    neg,
                });
            }
        }
    }
    out
}

/// All stable models of the normal rules and plain integrity constraints;
/// aggregate constraints and weak constraints are ignored.
pub fn enumerate_stable_models(
    ground: &GroundProgram,
    limit: usize,
) -> Result<Vec<Interpretation>, SolveError> {
    let options = SolveOptions {
        model_limit: limit,
        aggregates: false,
        optimize: Optimize::None,
        ..Default::default()
    };
    Ok(solve(ground, &options)?
        .into_iter()
        .map(|a| a.model)
        .collect())
}

/// True iff `candidate` is the least model of the reduct of the rules with
/// respect to `candidate`, and falsifies every plain integrity constraint.
pub fn check_stable(ground: &GroundProgram, candidate: &Interpretation) -> bool {
    let n = ground.atoms.len();
    if candidate.atoms().iter().any(|&a| a as usize >= n) {
        return false;
    }
    let holds = |a: AtomId| candidate.contains(a);
    let reduct: Vec<&GroundRule> = ground
        .rules
        .iter()
        .filter(|r| r.neg.iter().all(|&a| !holds(a)))
        .collect();
    let mut least = vec![false; n];
    loop {
        let mut changed = false;
        for r in &reduct {
            if let Some(h) = r.head {
                if !least[h as usize] && r.pos.iter().all(|&a| least[a as usize]) {
                    least[h as usize] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let same = (0..n as AtomId).all(|a| least[a as usize] == holds(a));
    let constraints_ok = reduct
        .iter()
        .filter(|r| r.head.is_none())
        .all(|r| !r.pos.iter().all(|&a| holds(a)));
    same && constraints_ok
}

fn body_holds(pos: &[AtomId], neg: &[AtomId], m: &Interpretation) -> bool {
    pos.iter().all(|&a| m.contains(a)) && neg.iter().all(|&a| !m.contains(a))
}

/// True if no aggregate constraint body holds in `m`.
pub fn satisfies_constraints(m: &Interpretation, constraints: &[AggregateConstraint]) -> bool {
    constraints.iter().all(|c| {
        !(body_holds(&c.pos, &c.neg, m) && c.aggregates.iter().all(|g| g.holds(|a| m.contains(a))))
    })
}

pub fn filter_constraints(
    models: Vec<Interpretation>,
    constraints: &[AggregateConstraint],
) -> Vec<Interpretation> {
    models
        .into_iter()
        .filter(|m| satisfies_constraints(m, constraints))
        .collect()
}

/// Total weight of the distinct `(weight, terms)` tuples whose body holds.
pub fn penalty(m: &Interpretation, weak: &[WeakConstraint]) -> i64 {
    let tuples: BTreeSet<(i64, &[crate::ground::Value])> = weak
        .iter()
        .filter(|w| body_holds(&w.pos, &w.neg, m))
        .map(|w| (w.weight, w.terms.as_slice()))
        .collect();
    tuples.iter().map(|(w, _)| w).sum()
}

/// The models of minimal penalty, in input order.
pub fn optimal_models(models: Vec<Interpretation>, weak: &[WeakConstraint]) -> Vec<Interpretation> {
    if weak.is_empty() {
        return models;
    }
    let scores: Vec<i64> = models.iter().map(|m| penalty(m, weak)).collect();
    let Some(&best) = scores.iter().min() else {
        return models;
    };
    models
        .into_iter()
        .zip(scores)
        .filter(|&(_, s)| s == best)
        .map(|(m, _)| m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::ground;
    use crate::lang::parse_program;

    fn program(src: &str) -> GroundProgram {
        expand_neural(&ground(&parse_program(src).unwrap()).unwrap())
    }

    fn models(src: &str) -> Vec<Vec<String>> {
        let gp = program(src);
        enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT)
            .unwrap()
            .iter()
            .map(|m| m.names(&gp.atoms))
            .collect()
    }

    fn interp(gp: &GroundProgram, names: &[&str]) -> Interpretation {
        Interpretation::new(
            gp.atoms
                .iter()
                .filter(|(id, _)| names.contains(&gp.atoms.name(*id).as_str()))
                .map(|(id, _)| id)
                .collect(),
        )
    }

    #[test]
    fn even_loop() {
        let mut m = models("a :- not b. b :- not a.");
        m.sort();
        assert_eq!(m, vec![vec!["a"], vec!["b"]]);
    }

    #[test]
    fn self_support_is_unfounded() {
        assert_eq!(models("p :- p."), vec![Vec::<String>::new()]);
    }

    #[test]
    fn one_digit_group_has_ten_models() {
        let m = models("img(d). nn(digit(1, X), [0,1,2,3,4,5,6,7,8,9]) :- img(X).");
        assert_eq!(m.len(), 10);
        for model in &m {
            assert_eq!(model.iter().filter(|a| a.starts_with("digit_1")).count(), 1);
        }
    }

    #[test]
    fn check_stable_examples() {
        let gp = program("a :- not b. b :- not a.");
        assert!(check_stable(&gp, &interp(&gp, &["a"])));
        assert!(!check_stable(&gp, &interp(&gp, &["a", "b"])));
        // The grounder drops `p :- p.` entirely, so build the rule by hand.
        let mut gp = GroundProgram::default();
        let mut table = AtomTable::with_limit(10);
        let (p, _) = table.insert(crate::ground::GroundAtom::new("p", vec![])).unwrap();
        gp.atoms = table;
        gp.rules.push(GroundRule { head: Some(p), pos: vec![p], neg: vec![] });
        assert!(!check_stable(&gp, &Interpretation::new(vec![p])));
        assert!(check_stable(&gp, &Interpretation::default()));
        assert_eq!(enumerate_stable_models(&gp, 10).unwrap(), vec![Interpretation::default()]);
    }

    #[test]
    fn unexpanded_neural_is_rejected() {
        let gp = ground(&parse_program("img(d). nn(m(1, X), [a, b]) :- img(X).").unwrap()).unwrap();
        assert_eq!(
            enumerate_stable_models(&gp, 10).unwrap_err(),
            SolveError::Unexpanded(1)
        );
    }

    #[test]
    fn model_limit() {
        let err = enumerate_stable_models(&program("{a; b; c; d} = 1."), 3).unwrap_err();
        assert_eq!(err, SolveError::ModelLimit(3));
    }

    #[test]
    fn penalty_counts_distinct_tuples() {
        let gp = program("a. b. :~ a. [2, x] :~ b. [2, x] :~ b. [1, y]");
        let m = interp(&gp, &["a", "b"]);
        assert_eq!(penalty(&m, &gp.weak), 3);
    }
}
