use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{CmpOp, Literal, Term};

use super::GroundError;

/// A ground term. Integers order before symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Sym(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

/// Joins pointer terms the way they are keyed in tensor maps: `d1`, `i1,b2`.
pub fn pointer_key(pointer: &[Value]) -> String {
    let mut s = String::new();
    for (i, v) in pointer.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

pub type AtomId = u32;

/// A ground atom. Neural output atoms `m_i(t)=v` are stored in the canonical
/// form `m(i, t..., v)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Value>,
    pub strong: bool,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Value>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
            strong: false,
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.strong {
            f.write_str("-")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", pointer_key(&self.args))?;
        }
        Ok(())
    }
}

/// Position of a neural output atom: its group and value index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NeuralSlot {
    pub group: u32,
    pub value: u32,
}

#[derive(Clone, Debug, Default)]
pub struct AtomTable {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
    neural: Vec<Option<NeuralSlot>>,
    sig_ids: HashMap<(String, usize, bool), usize>,
    by_sig: Vec<Vec<AtomId>>,
    limit: usize,
}

impl AtomTable {
    pub(crate) fn with_limit(limit: usize) -> Self {
        AtomTable {
            limit,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id as usize]
    }

    pub fn lookup(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, &GroundAtom)> {
        self.atoms.iter().enumerate().map(|(i, a)| (i as AtomId, a))
    }

    pub fn neural_slot(&self, id: AtomId) -> Option<NeuralSlot> {
        self.neural[id as usize]
    }

    pub fn is_neural(&self, id: AtomId) -> bool {
        self.neural[id as usize].is_some()
    }

    pub(crate) fn set_neural(&mut self, id: AtomId, slot: NeuralSlot) {
        self.neural[id as usize] = Some(slot);
    }

    pub(crate) fn signature(&mut self, predicate: &str, arity: usize, strong: bool) -> usize {
        if let Some(&s) = self.sig_ids.get(&(predicate.to_string(), arity, strong)) {
            return s;
        }
        let s = self.by_sig.len();
        self.sig_ids.insert((predicate.to_string(), arity, strong), s);
        self.by_sig.push(Vec::new());
        s
    }

    pub(crate) fn atoms_with_signature(&self, sig: usize) -> &[AtomId] {
        &self.by_sig[sig]
    }

    /// True if the program mentions this predicate/arity (either polarity),
    /// whether or not any of its atoms was derived.
    pub fn has_signature(&self, predicate: &str, arity: usize) -> bool {
        [false, true]
            .iter()
            .any(|&s| self.sig_ids.contains_key(&(predicate.to_string(), arity, s)))
    }

    /// Interns an atom, returning its id and whether it was new.
    pub(crate) fn insert(&mut self, atom: GroundAtom) -> Result<(AtomId, bool), GroundError> {
        if let Some(&id) = self.index.get(&atom) {
            return Ok((id, false));
        }
        if self.atoms.len() >= self.limit {
            return Err(GroundError::AtomLimit(self.limit));
        }
        let id = self.atoms.len() as AtomId;
        let sig = self.signature(&atom.predicate, atom.args.len(), atom.strong);
        self.by_sig[sig].push(id);
        self.index.insert(atom.clone(), id);
        self.atoms.push(atom);
        self.neural.push(None);
        Ok((id, true))
    }

    /// Display name; neural atoms are shown as `m_i(t)=v`.
    pub fn name(&self, id: AtomId) -> String {
        let atom = self.get(id);
        if self.is_neural(id) {
            let n = atom.args.len();
            format!(
                "{}_{}({})={}",
                atom.predicate,
                atom.args[0],
                pointer_key(&atom.args[1..n - 1]),
                atom.args[n - 1]
            )
        } else {
            atom.to_string()
        }
    }
}

/// Ground normal rule, or integrity constraint when `head` is `None`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: Option<AtomId>,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateElement {
    pub tuple: Vec<Value>,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundAggregate {
    pub elements: Vec<AggregateElement>,
    pub relation: CmpOp,
    pub bound: i64,
}

impl GroundAggregate {
    /// Evaluates the count over a total interpretation.
    pub fn holds(&self, truth: impl Fn(AtomId) -> bool) -> bool {
        let tuples: BTreeSet<&Vec<Value>> = self
            .elements
            .iter()
            .filter(|e| e.pos.iter().all(|&a| truth(a)) && e.neg.iter().all(|&a| !truth(a)))
            .map(|e| &e.tuple)
            .collect();
        self.relation.holds(&(tuples.len() as i64), &self.bound)
    }
}

/// Integrity constraint whose body contains count aggregates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateConstraint {
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
    pub aggregates: Vec<GroundAggregate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakConstraint {
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
    pub weight: i64,
    pub terms: Vec<Value>,
}

/// One random event `m_i(t)` with its exclusive value atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeuralGroup {
    pub model: String,
    /// 1-based event index `i`.
    pub event: usize,
    pub pointer: Vec<Value>,
    pub values: Vec<Value>,
    pub atoms: Vec<AtomId>,
}

/// A ground neural declaration `nn(m(e, t), [v1..vn])` awaiting expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundNeural {
    pub model: String,
    pub events: usize,
    pub pointer: Vec<Value>,
    pub values: Vec<Value>,
    /// Indices into [`GroundProgram::groups`], one per event.
    pub groups: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct GroundProgram {
    pub atoms: AtomTable,
    pub rules: Vec<GroundRule>,
    pub aggregate_constraints: Vec<AggregateConstraint>,
    pub weak: Vec<WeakConstraint>,
    /// Neural declarations not yet replaced by their exclusive-choice rules.
    pub neural: Vec<GroundNeural>,
    /// Every neural group, expanded or not.
    pub groups: Vec<NeuralGroup>,
    /// Declared neural models and their pointer lengths.
    pub models: BTreeMap<String, usize>,
}

impl GroundProgram {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Resolves a ground literal (as written in a query) to an atom.
    ///
    /// Returns `Ok(None)` when the atom is well-formed but cannot be true in
    /// any model, and an error naming the atom when its predicate does not
    /// occur in the program at all.
    pub fn resolve_literal(&self, lit: &Literal) -> Result<Option<AtomId>, UnknownAtom> {
        let unknown = || UnknownAtom(lit.to_string());
        let eval = |t: &Term| crate::ground::instantiate::eval_ground(t).map_err(|_| unknown());
        let atom = if let Some((model, event)) = lit.atom.neural_parts() {
            let k = *self.models.get(model).ok_or_else(unknown)?;
            if k != lit.atom.args.len() {
                return Err(unknown());
            }
            let mut args = vec![Value::Int(event as i64)];
            for t in &lit.atom.args {
                args.push(eval(t)?);
            }
            args.push(eval(lit.atom.eq_value.as_ref().unwrap())?);
            GroundAtom {
                predicate: model.to_string(),
                args,
                strong: lit.strong_negated,
            }
        } else {
            GroundAtom {
                predicate: lit.atom.predicate.clone(),
                args: lit.atom.args.iter().map(eval).collect::<Result<_, _>>()?,
                strong: lit.strong_negated,
            }
        };
        if let Some(id) = self.atoms.lookup(&atom) {
            return Ok(Some(id));
        }
        let arity = atom.args.len();
        let neural_sig = self
            .models
            .get(&atom.predicate)
            .is_some_and(|k| k + 2 == arity);
        if self.atoms.has_signature(&atom.predicate, arity) || neural_sig {
            Ok(None)
        } else {
            Err(unknown())
        }
    }

    fn write_body(&self, out: &mut String, pos: &[AtomId], neg: &[AtomId]) {
        let mut first = true;
        for &a in pos {
            out.push_str(if first { "" } else { ", " });
            out.push_str(&self.atoms.name(a));
            first = false;
        }
        for &a in neg {
            out.push_str(if first { "" } else { ", " });
            write!(out, "not {}", self.atoms.name(a)).unwrap();
            first = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown atom `{0}`")]
pub struct UnknownAtom(pub String);

impl fmt::Display for GroundProgram {
    /// One ground statement per line in the surface syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for n in &self.neural {
            let vals: Vec<String> = n.values.iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "nn({}({}, {}), [{}]).",
                n.model,
                n.events,
                pointer_key(&n.pointer),
                vals.join(", ")
            )?;
        }
        for r in &self.rules {
            match r.head {
                Some(h) => {
                    out.push_str(&self.atoms.name(h));
                    if !r.pos.is_empty() || !r.neg.is_empty() {
                        out.push_str(" :- ");
                        self.write_body(&mut out, &r.pos, &r.neg);
                    }
                }
                None => {
                    out.push_str(":- ");
                    self.write_body(&mut out, &r.pos, &r.neg);
                }
            }
            out.push_str(".\n");
        }
        for c in &self.aggregate_constraints {
            out.push_str(":- ");
            self.write_body(&mut out, &c.pos, &c.neg);
            for (i, agg) in c.aggregates.iter().enumerate() {
                if i > 0 || !c.pos.is_empty() || !c.neg.is_empty() {
                    out.push_str(", ");
                }
                out.push_str("#count{");
                for (j, e) in agg.elements.iter().enumerate() {
                    if j > 0 {
                        out.push_str("; ");
                    }
                    write!(out, "{}: ", pointer_key(&e.tuple))?;
                    self.write_body(&mut out, &e.pos, &e.neg);
                }
                write!(out, "}} {} {}", agg.relation.symbol(), agg.bound)?;
            }
            out.push_str(".\n");
        }
        for w in &self.weak {
            out.push_str(":~ ");
            self.write_body(&mut out, &w.pos, &w.neg);
            write!(out, ". [{}", w.weight)?;
            for t in &w.terms {
                write!(out, ", {t}")?;
            }
            out.push_str("]\n");
        }
        f.write_str(&out)
    }
}
