use std::fmt::{self, Display, Write};

use super::ast::*;

impl Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => f.write_str(s),
            Term::Int(i) => write!(f, "{i}"),
            Term::Var(v) => f.write_str(v),
            Term::Range(lo, hi) => write!(f, "{lo}..{hi}"),
            Term::Binary(op, l, r) => {
                write_operand(f, l)?;
                f.write_str(op.symbol())?;
                write_operand(f, r)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    if matches!(t, Term::Binary(..) | Term::Range(..)) {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

fn write_list<T: Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

impl Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            write_list(f, &self.args, ",")?;
            f.write_str(")")?;
        }
        if let Some(v) = &self.eq_value {
            write!(f, "={v}")?;
        }
        Ok(())
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.default_negated {
            f.write_str("not ")?;
        }
        if self.strong_negated {
            f.write_str("-")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.lhs, self.op.symbol(), self.rhs)
    }
}

impl Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("#count{")?;
        write_list(f, &self.tuple, ",")?;
        f.write_str(": ")?;
        write_list(f, &self.condition, ", ")?;
        write!(f, "}} {} {}", self.relation.symbol(), self.bound)
    }
}

impl Display for BodyElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyElem::Literal(l) => l.fmt(f),
            BodyElem::Comparison(c) => c.fmt(f),
            BodyElem::Aggregate(a) => a.fmt(f),
        }
    }
}

impl Display for ChoiceElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)?;
        if !self.condition.is_empty() {
            f.write_str(": ")?;
            write_list(f, &self.condition, ", ")?;
        }
        Ok(())
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[BodyElem]) -> fmt::Result {
    if !body.is_empty() {
        f.write_str(" :- ")?;
        write_list(f, body, ", ")?;
    }
    Ok(())
}

impl Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Normal { head, body } => {
                write!(f, "{head}")?;
                write_body(f, body)?;
                f.write_str(".")
            }
            Rule::Constraint { body } => {
                f.write_str(":-")?;
                if !body.is_empty() {
                    f.write_str(" ")?;
                    write_list(f, body, ", ")?;
                }
                f.write_str(".")
            }
            Rule::Choice { elements, body } => {
                f.write_str("{")?;
                write_list(f, elements, "; ")?;
                f.write_str("} = 1")?;
                write_body(f, body)?;
                f.write_str(".")
            }
            Rule::Weak {
                body,
                weight,
                terms,
            } => {
                f.write_str(":~")?;
                if !body.is_empty() {
                    f.write_str(" ")?;
                    write_list(f, body, ", ")?;
                }
                write!(f, ". [{weight}")?;
                for t in terms {
                    write!(f, ", {t}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl Display for NeuralAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nn({}({}", self.model, self.events)?;
        for t in &self.pointer {
            write!(f, ", {t}")?;
        }
        f.write_str("), [")?;
        write_list(f, &self.values, ", ")?;
        f.write_str("])")?;
        write_body(f, &self.body)?;
        f.write_str(".")
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(l) => l.fmt(f),
            Formula::Not(inner) => write!(f, "not ({inner})"),
            Formula::And(parts) => {
                f.write_str("(")?;
                write_list(f, parts, ", ")?;
                f.write_str(")")
            }
            Formula::Or(parts) => {
                f.write_str("(")?;
                write_list(f, parts, "; ")?;
                f.write_str(")")
            }
        }
    }
}

/// Renders a program in the surface syntax, one statement per line, neural
/// declarations first.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for n in &program.neural_rules {
        writeln!(out, "{}", n.node).unwrap();
    }
    for r in &program.asp_rules {
        writeln!(out, "{}", r.node).unwrap();
    }
    out
}
