//! Abstract syntax of the surface language.
//!
//! A program is split into its ASP part (ordinary rules, constraints, choice
//! rules, weak constraints) and its neural part (`nn(...)` declarations).
//! Every statement carries a [`Loc`] for diagnostics; locations never take
//! part in equality, so two parses of equivalent text compare equal.

use std::fmt;

/// Source position (1-based).
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct Loc {
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Loc {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Sym(String),
    Int(i64),
    Var(String),
    /// `lo..hi`, inclusive on both ends.
    Range(i64, i64),
    Binary(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn sym(s: impl Into<String>) -> Self {
        Term::Sym(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Var(s.into())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Binary(_, l, r) => l.is_ground() && r.is_ground(),
            _ => true,
        }
    }

    /// Appends the variables of this term, in order of first occurrence.
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Term::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// `p(t1, ..., tk)` or, for neural outputs, `m_i(t1, ..., tk) = v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
    pub eq_value: Option<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
            eq_value: None,
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        for a in &self.args {
            a.collect_vars(out);
        }
        if let Some(v) = &self.eq_value {
            v.collect_vars(out);
        }
    }

    /// For an equality atom `m_i(...)`, splits the predicate into `(m, i)`.
    pub fn neural_parts(&self) -> Option<(&str, usize)> {
        self.eq_value.as_ref()?;
        split_event_suffix(&self.predicate)
    }
}

/// Splits `digit_1` into `("digit", 1)`.
pub fn split_event_suffix(predicate: &str) -> Option<(&str, usize)> {
    let (model, idx) = predicate.rsplit_once('_')?;
    if model.is_empty() || idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = idx.parse().ok()?;
    (idx >= 1).then_some((model, idx))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    /// `not`
    pub default_negated: bool,
    /// `-` (classical negation)
    pub strong_negated: bool,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal {
            atom,
            default_negated: false,
            strong_negated: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub op: CmpOp,
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggregateFn {
    Count,
}

/// `#count{ T1, ..., Tk : L1, ..., Lm } rel bound`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Aggregate {
    pub function: AggregateFn,
    pub tuple: Vec<Term>,
    pub condition: Vec<Literal>,
    pub relation: CmpOp,
    pub bound: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BodyElem {
    Literal(Literal),
    Comparison(Comparison),
    Aggregate(Aggregate),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChoiceElement {
    pub atom: Literal,
    pub condition: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `head :- body.`; a fact when the body is empty.
    Normal { head: Literal, body: Vec<BodyElem> },
    /// `:- body.`
    Constraint { body: Vec<BodyElem> },
    /// `{ e1; ...; ek } = 1 :- body.`
    Choice {
        elements: Vec<ChoiceElement>,
        body: Vec<BodyElem>,
    },
    /// `:~ body. [weight, t1, ..., tk]`
    Weak {
        body: Vec<BodyElem>,
        weight: i64,
        terms: Vec<Term>,
    },
}

impl Rule {
    pub fn body(&self) -> &[BodyElem] {
        match self {
            Rule::Normal { body, .. }
            | Rule::Constraint { body }
            | Rule::Choice { body, .. }
            | Rule::Weak { body, .. } => body,
        }
    }

    pub fn is_fact(&self) -> bool {
        matches!(self, Rule::Normal { body, .. } if body.is_empty())
    }
}

/// `nn(m(e, t1, ..., tk), [v1, ..., vn]) :- body.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NeuralAtom {
    pub model: String,
    pub events: usize,
    pub pointer: Vec<Term>,
    pub values: Vec<Term>,
    pub body: Vec<BodyElem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Located<T> {
    pub node: T,
    pub loc: Loc,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub asp_rules: Vec<Located<Rule>>,
    pub neural_rules: Vec<Located<NeuralAtom>>,
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.asp_rules.is_empty() && self.neural_rules.is_empty()
    }

    /// Appends another program's statements.
    pub fn extend(&mut self, other: Program) {
        self.asp_rules.extend(other.asp_rules);
        self.neural_rules.extend(other.neural_rules);
    }

    /// Pointer arity of the neural model `name`, if it is declared.
    pub fn neural_arity(&self, name: &str) -> Option<usize> {
        self.neural_rules
            .iter()
            .find(|n| n.node.model == name)
            .map(|n| n.node.pointer.len())
    }

    /// True if `atom` denotes an atom induced by one of the neural declarations,
    /// in either the `m_i(t)=v` or the `m(i, t, v)` spelling.
    pub fn is_neural_atom(&self, atom: &Atom) -> bool {
        if let Some((model, _)) = atom.neural_parts() {
            return self.neural_arity(model) == Some(atom.args.len());
        }
        self.neural_arity(&atom.predicate)
            .is_some_and(|k| atom.args.len() == k + 2)
    }
}

/// Propositional formula over (ground) atoms, used for queries, evidence and
/// training observations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Literal),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}
