//! The surface language: answer set programming rules extended with neural
//! atoms `nn(m(e, t), [v1, ..., vn])`.
//!
//! The concrete syntax follows clingo: `:-` for rules and constraints, `not`
//! for default negation, a leading `-` for classical negation,
//! `{a; b} = 1` for exactly-one choice, `#count{...}` aggregates in
//! constraints, `:~ body. [w, t]` weak constraints and `lo..hi` ranges.
//! Atoms produced by a neural declaration are written either `m_i(t)=v` or
//! `m(i, t, v)`; both spellings denote the same atom.

pub mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::*;
pub use printer::pretty_print;
pub use validate::{validate, Diagnostic, DiagnosticKind};

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    InvalidNeural,
    DuplicateValue,
    NeuralAtomInHead,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, loc: Loc, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            line: loc.line,
            column: loc.column,
            message: message.into(),
        }
    }

    pub(crate) fn syntax(loc: Loc, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Syntax, loc, message)
    }

    pub(crate) fn invalid_neural(loc: Loc, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::InvalidNeural, loc, message)
    }
}

/// Parses program text without any semantic checks.
pub fn parse_program_unchecked(text: &str) -> Result<Program, ParseError> {
    parser::Parser::new(text)?.program()
}

/// Parses program text, rejecting malformed neural declarations and rules
/// whose head is an atom produced by a neural declaration.
///
/// Safety and aggregate placement are reported by [`validate`] instead.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let program = parse_program_unchecked(text)?;
    for d in validate(&program) {
        let kind = match d.kind {
            DiagnosticKind::DuplicateNeuralValue => ParseErrorKind::DuplicateValue,
            DiagnosticKind::NeuralAtomInHead => ParseErrorKind::NeuralAtomInHead,
            DiagnosticKind::InvalidNeuralDeclaration => ParseErrorKind::InvalidNeural,
            _ => continue,
        };
        return Err(ParseError::new(kind, d.loc, d.message));
    }
    Ok(program)
}

/// Parses a propositional formula: atoms combined with `not`, `,`/`&`/`and`
/// (conjunction), `;`/`|`/`or` (disjunction) and parentheses. `true` and
/// `false` are constants. A trailing `.` is accepted.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parser::Parser::new(text)?.formula_top()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_facts() {
        let p = parse_program("img(d1). img(d2).").unwrap();
        assert_eq!(p.asp_rules.len(), 2);
        assert!(p.asp_rules.iter().all(|r| r.node.is_fact()));
        assert!(p.neural_rules.is_empty());
    }

    #[test]
    fn digit_neural_atom() {
        let p = parse_program("nn(digit(1,d),[0,1,2,3,4,5,6,7,8,9]).").unwrap();
        assert_eq!(p.neural_rules.len(), 1);
        let n = &p.neural_rules[0].node;
        assert_eq!(n.model, "digit");
        assert_eq!(n.events, 1);
        assert_eq!(n.pointer, vec![Term::sym("d")]);
        assert_eq!(n.values.len(), 10);
        assert!(p.asp_rules.is_empty());
    }

    #[test]
    fn weak_constraint() {
        let p = parse_program(":~ sp(X,g,true). [1, X]").unwrap();
        match &p.asp_rules[0].node {
            Rule::Weak { weight, terms, body } => {
                assert_eq!(*weight, 1);
                assert_eq!(terms, &vec![Term::var("X")]);
                assert_eq!(body.len(), 1);
            }
            other => panic!("expected weak constraint, got {other:?}"),
        }
    }

    #[test]
    fn empty_program() {
        let p = parse_program("").unwrap();
        assert!(p.is_empty());
        assert_eq!(pretty_print(&p), "");
        assert!(parse_program("  % only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn errors_carry_locations() {
        let e = parse_program("p :- q.\nr :- s(.").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!((e.line, e.column), (2, 8));
        let e = parse_program("p :- q").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn duplicate_values_rejected() {
        let e = parse_program("nn(c(1,x),[a,b,a]).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateValue);
        let e = parse_program("nn(c(0,x),[a,b]).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::InvalidNeural);
        let e = parse_program("nn(c(1,x),[a]).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::InvalidNeural);
    }

    #[test]
    fn neural_head_rejected_by_parser() {
        let e = parse_program("nn(digit(1,d),[0,1]). p. digit_1(d)=1 :- p.").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NeuralAtomInHead);
        assert_eq!(e.line, 1);
    }

    #[test]
    fn strong_negation_and_default() {
        let p = parse_program(
            "smaller(I,B1,B2) :- not -smaller(I,B1,B2), label_1(I,B1)=L1, label_1(I,B2)=L2, smaller(L1,L2).",
        )
        .unwrap();
        let Rule::Normal { body, .. } = &p.asp_rules[0].node else {
            panic!()
        };
        let BodyElem::Literal(l) = &body[0] else { panic!() };
        assert!(l.default_negated && l.strong_negated);
        let BodyElem::Literal(l) = &body[1] else { panic!() };
        assert_eq!(l.atom.neural_parts(), Some(("label", 1)));
        assert_eq!(l.atom.eq_value, Some(Term::var("L1")));
    }

    #[test]
    fn choice_rule() {
        let p = parse_program("{a(R,C,V): v(V)} = 1 :- cell(R,C).").unwrap();
        assert!(matches!(&p.asp_rules[0].node, Rule::Choice { elements, .. } if elements.len() == 1));
        let e = parse_program("{a; b} = 2.").unwrap_err();
        assert!(e.message.contains("= 1"));
    }

    #[test]
    fn formulas() {
        let f = parse_formula("addition(d1,d2,1)").unwrap();
        assert!(matches!(f, Formula::Atom(_)));
        let f = parse_formula("a, not b; -c").unwrap();
        assert!(matches!(f, Formula::Or(ref v) if v.len() == 2));
        assert_eq!(parse_formula("true.").unwrap(), Formula::True);
        assert!(parse_formula("a b").is_err());
    }

    #[test]
    fn arithmetic_round_trip() {
        let src = "p(N) :- q(A), r(B), N=A+B*2-(A-B).\nq(X) :- r(X), X!=-3, X>=0-X.\n";
        let p = parse_program(src).unwrap();
        let again = parse_program(&pretty_print(&p)).unwrap();
        assert_eq!(p, again);
    }
}
