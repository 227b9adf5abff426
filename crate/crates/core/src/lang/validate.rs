//! Static checks: rule safety, the head restriction on neural atoms, and
//! placement of aggregates.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UnsafeVariable,
    NeuralAtomInHead,
    AggregateOutsideConstraint,
    UnknownNeuralModel,
    InvalidNeuralDeclaration,
    DuplicateNeuralValue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub loc: Loc,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.message)
    }
}

struct Checker<'p> {
    program: &'p Program,
    out: Vec<Diagnostic>,
}

/// Returns every problem found in `program`; an empty result means the
/// program may be grounded.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut c = Checker {
        program,
        out: Vec::new(),
    };
    c.neural_declarations();
    for r in &program.asp_rules {
        c.rule(&r.node, r.loc);
    }
    c.out
}

fn push_unique<'a>(out: &mut Vec<&'a str>, v: &'a str) {
    if !out.contains(&v) {
        out.push(v);
    }
}

/// Variables bound by the positive literals and assignments of `body`.
fn bound_vars<'a>(body: &'a [BodyElem], extra_lits: &'a [Literal], seed: &BTreeSet<&'a str>) -> BTreeSet<&'a str> {
    let mut bound = seed.clone();
    let positive = body
        .iter()
        .filter_map(|e| match e {
            BodyElem::Literal(l) => Some(l),
            _ => None,
        })
        .chain(extra_lits.iter())
        .filter(|l| !l.default_negated);
    for lit in positive {
        for t in lit.atom.args.iter().chain(lit.atom.eq_value.iter()) {
            if let Term::Var(v) = t {
                bound.insert(v.as_str());
            }
        }
    }
    loop {
        let before = bound.len();
        for e in body {
            if let BodyElem::Comparison(c) = e {
                if c.op != CmpOp::Eq {
                    continue;
                }
                for (target, source) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
                    if let Term::Var(v) = target {
                        let mut vs = Vec::new();
                        source.collect_vars(&mut vs);
                        if vs.iter().all(|x| bound.contains(x)) {
                            bound.insert(v.as_str());
                        }
                    }
                }
            }
        }
        if bound.len() == before {
            return bound;
        }
    }
}

impl<'p> Checker<'p> {
    fn push(&mut self, kind: DiagnosticKind, loc: Loc, message: String) {
        self.out.push(Diagnostic { kind, loc, message });
    }

    fn neural_declarations(&mut self) {
        let mut arities: Vec<(&str, usize)> = Vec::new();
        for n in &self.program.neural_rules {
            let (decl, loc) = (&n.node, n.loc);
            if decl.events == 0 {
                self.push(
                    DiagnosticKind::InvalidNeuralDeclaration,
                    loc,
                    format!("neural atom `{}` declares zero events", decl.model),
                );
            }
            if decl.values.len() < 2 {
                self.push(
                    DiagnosticKind::InvalidNeuralDeclaration,
                    loc,
                    format!("neural atom `{}` needs at least two values", decl.model),
                );
            }
            for (i, v) in decl.values.iter().enumerate() {
                if !v.is_ground() || matches!(v, Term::Range(..) | Term::Binary(..)) {
                    self.push(
                        DiagnosticKind::InvalidNeuralDeclaration,
                        loc,
                        format!("value `{v}` of neural atom `{}` must be a constant", decl.model),
                    );
                } else if decl.values[..i].contains(v) {
                    self.push(
                        DiagnosticKind::DuplicateNeuralValue,
                        loc,
                        format!("value `{v}` appears twice in neural atom `{}`", decl.model),
                    );
                }
            }
            match arities.iter().find(|(m, _)| *m == decl.model) {
                Some((_, k)) if *k != decl.pointer.len() => self.push(
                    DiagnosticKind::InvalidNeuralDeclaration,
                    loc,
                    format!("neural model `{}` is declared with different pointer lengths", decl.model),
                ),
                Some(_) => {}
                None => arities.push((&decl.model, decl.pointer.len())),
            }
            self.body_atoms(&decl.body, loc);
            for e in &decl.body {
                if let BodyElem::Aggregate(_) = e {
                    self.push(
                        DiagnosticKind::AggregateOutsideConstraint,
                        loc,
                        "aggregates are only allowed in integrity constraints".into(),
                    );
                }
            }
            let bound = bound_vars(&decl.body, &[], &BTreeSet::new());
            let mut vars = Vec::new();
            for t in &decl.pointer {
                t.collect_vars(&mut vars);
            }
            self.body_vars(&decl.body, &mut vars);
            self.report_unsafe(&vars, &bound, loc);
        }
    }

    fn body_vars<'a>(&self, body: &'a [BodyElem], vars: &mut Vec<&'a str>) {
        for e in body {
            match e {
                BodyElem::Literal(l) => l.atom.collect_vars(vars),
                BodyElem::Comparison(c) => {
                    c.lhs.collect_vars(vars);
                    c.rhs.collect_vars(vars);
                }
                BodyElem::Aggregate(_) => {}
            }
        }
    }

    fn report_unsafe(&mut self, vars: &[&str], bound: &BTreeSet<&str>, loc: Loc) {
        for v in vars {
            if !bound.contains(v) {
                self.push(
                    DiagnosticKind::UnsafeVariable,
                    loc,
                    format!("unsafe variable `{v}`"),
                );
            }
        }
    }

    /// Equality atoms must name a declared neural model with matching arity.
    fn check_eq_atom(&mut self, atom: &Atom, loc: Loc) {
        if atom.eq_value.is_none() {
            return;
        }
        if !self.program.is_neural_atom(atom) {
            self.push(
                DiagnosticKind::UnknownNeuralModel,
                loc,
                format!("`{atom}` does not refer to a declared neural atom"),
            );
        }
    }

    fn body_atoms(&mut self, body: &[BodyElem], loc: Loc) {
        for e in body {
            match e {
                BodyElem::Literal(l) => self.check_eq_atom(&l.atom, loc),
                BodyElem::Aggregate(a) => {
                    for l in &a.condition {
                        self.check_eq_atom(&l.atom, loc);
                    }
                }
                BodyElem::Comparison(_) => {}
            }
        }
    }

    fn check_head(&mut self, head: &Literal, loc: Loc) {
        if head.atom.eq_value.is_some() || self.program.is_neural_atom(&head.atom) {
            self.push(
                DiagnosticKind::NeuralAtomInHead,
                loc,
                format!("neural atom `{}` may not appear in a rule head", head.atom),
            );
        }
    }

    fn rule(&mut self, rule: &Rule, loc: Loc) {
        let body = rule.body();
        self.body_atoms(body, loc);
        if !matches!(rule, Rule::Constraint { .. })
            && body.iter().any(|e| matches!(e, BodyElem::Aggregate(_)))
        {
            self.push(
                DiagnosticKind::AggregateOutsideConstraint,
                loc,
                "aggregates are only allowed in integrity constraints".into(),
            );
        }

        let bound = bound_vars(body, &[], &BTreeSet::new());
        let mut vars: Vec<&str> = Vec::new();
        match rule {
            Rule::Normal { head, .. } => {
                self.check_head(head, loc);
                head.atom.collect_vars(&mut vars);
            }
            Rule::Choice { elements, .. } => {
                for el in elements {
                    self.check_head(&el.atom, loc);
                    for l in &el.condition {
                        self.check_eq_atom(&l.atom, loc);
                    }
                    let local = bound_vars(&[], &el.condition, &bound);
                    let mut el_vars = Vec::new();
                    el.atom.atom.collect_vars(&mut el_vars);
                    for l in &el.condition {
                        l.atom.collect_vars(&mut el_vars);
                    }
                    self.report_unsafe(&el_vars, &local, loc);
                }
            }
            Rule::Weak { terms, .. } => {
                for t in terms {
                    t.collect_vars(&mut vars);
                }
            }
            Rule::Constraint { .. } => {}
        }
        self.body_vars(body, &mut vars);
        self.report_unsafe(&vars, &bound, loc);

        for e in body {
            if let BodyElem::Aggregate(a) = e {
                let mut outer = Vec::new();
                a.bound.collect_vars(&mut outer);
                self.report_unsafe(&outer, &bound, loc);
                let local_bound = bound_vars(&[], &a.condition, &bound);
                let mut inner = Vec::new();
                for t in &a.tuple {
                    t.collect_vars(&mut inner);
                }
                for l in &a.condition {
                    l.atom.collect_vars(&mut inner);
                }
                // Variables not bound outside must be bound by the condition.
                let mut local_vars = Vec::new();
                for v in inner {
                    push_unique(&mut local_vars, v);
                }
                self.report_unsafe(&local_vars, &local_bound, loc);
            }
        }
    }
}
