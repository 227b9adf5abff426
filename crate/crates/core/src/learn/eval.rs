use std::collections::BTreeMap;

use crate::ground::{pointer_key, GroundProgram, Value};
use crate::neural::Registry;
use crate::semantics::{Outputs, SigmaAssignment};

use super::{LearnError, Learner, TrainingExample};

/// Display name of a neural group, e.g. `digit_1(d1)`.
pub fn group_name(model: &str, event: usize, pointer: &[Value]) -> String {
    format!("{model}_{event}({})", pointer_key(pointer))
}

/// Index of the most probable value of every group, lowest index on ties.
pub fn argmax_sigma(gp: &GroundProgram, outputs: &Outputs) -> Result<SigmaAssignment, LearnError> {
    gp.groups
        .iter()
        .map(|g| {
            let row = outputs.get(&g.model, &g.pointer)?.row(g.event - 1);
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            Ok(best as u32)
        })
        .collect()
}

/// Choices keyed by group name, with the chosen value.
fn named_choices(gp: &GroundProgram, sigma: &[u32]) -> BTreeMap<String, Value> {
    gp.groups
        .iter()
        .zip(sigma)
        .map(|(g, &j)| (group_name(&g.model, g.event, &g.pointer), g.values[j as usize].clone()))
        .collect()
}

/// Maps named choices onto the groups of another program over the same
/// networks. `None` if a group or value is missing there.
fn transfer(gp: &GroundProgram, choices: &BTreeMap<String, Value>) -> Option<SigmaAssignment> {
    gp.groups
        .iter()
        .map(|g| {
            let v = choices.get(&group_name(&g.model, g.event, &g.pointer))?;
            g.values.iter().position(|w| w == v).map(|j| j as u32)
        })
        .collect()
}

/// Accuracy of the networks' own predictions on labelled examples.
///
/// Each network predicts its most probable value per group. Metrics:
/// - `observation`: fraction of examples where some stable model with the
///   predicted choices satisfies the example's observation;
/// - `label_atoms`, `label_records`: per-group and per-example agreement with
///   the `labels` of the examples that have any;
/// - one entry per named check program: fraction of examples whose predicted
///   choices admit a (optimal) stable model of that program.
pub fn evaluate(
    learner: &Learner,
    registry: &Registry,
    data: &[TrainingExample],
    checks: &[(String, Learner)],
) -> Result<BTreeMap<String, f64>, LearnError> {
    let mut observed = 0usize;
    let (mut atoms_hit, mut atoms_total, mut rec_hit, mut rec_total) = (0usize, 0usize, 0usize, 0usize);
    let mut check_hits = vec![0usize; checks.len()];
    for ex in data {
        let prepared = learner.prepared(ex.facts.as_deref())?;
        let gp = &prepared.program;
        let outputs = learner.outputs(gp, registry, ex)?;
        let sigma = argmax_sigma(gp, &outputs)?;
        if learner.terms(&prepared, ex)?.contains(&sigma) {
            observed += 1;
        }
        let choices = named_choices(gp, &sigma);
        if !ex.labels.is_empty() {
            rec_total += 1;
            let mut all = true;
            for (name, want) in &ex.labels {
                atoms_total += 1;
                if choices.get(name).is_some_and(|v| v.to_string() == *want) {
                    atoms_hit += 1;
                } else {
                    all = false;
                }
            }
            if all {
                rec_hit += 1;
            }
        }
        for ((_, check), hits) in checks.iter().zip(&mut check_hits) {
            let cp = check.prepared(ex.facts.as_deref())?;
            if let Some(s) = transfer(&cp.program, &choices) {
                if cp.num(&s)? > 0 {
                    *hits += 1;
                }
            }
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut out = BTreeMap::new();
    out.insert("observation".to_string(), frac(observed, data.len()));
    if rec_total > 0 {
        out.insert("label_atoms".to_string(), frac(atoms_hit, atoms_total));
        out.insert("label_records".to_string(), frac(rec_hit, rec_total));
    }
    for ((name, _), hits) in checks.iter().zip(check_hits) {
        out.insert(format!("check_{name}"), frac(hits, data.len()));
    }
    Ok(out)
}
