use crate::ground::{AtomId, GroundProgram, UnknownAtom};
use crate::lang::Formula;

/// A propositional formula whose atoms are resolved against a ground program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundFormula {
    Const(bool),
    Atom(AtomId),
    Not(Box<GroundFormula>),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

/// Resolves every atom of `f`. Atoms that exist in the program's signature but
/// were never derived become `false`; atoms of unknown predicates are errors.
pub fn ground_formula(gp: &GroundProgram, f: &Formula) -> Result<GroundFormula, UnknownAtom> {
    Ok(match f {
        Formula::True => GroundFormula::Const(true),
        Formula::False => GroundFormula::Const(false),
        Formula::Atom(lit) => {
            let atom = match gp.resolve_literal(lit)? {
                Some(id) => GroundFormula::Atom(id),
                None => GroundFormula::Const(false),
            };
            if lit.default_negated {
                GroundFormula::Not(Box::new(atom))
            } else {
                atom
            }
        }
        Formula::Not(inner) => GroundFormula::Not(Box::new(ground_formula(gp, inner)?)),
        Formula::And(parts) => GroundFormula::And(
            parts
                .iter()
                .map(|p| ground_formula(gp, p))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(parts) => GroundFormula::Or(
            parts
                .iter()
                .map(|p| ground_formula(gp, p))
                .collect::<Result<_, _>>()?,
        ),
    })
}

impl GroundFormula {
    pub fn holds(&self, truth: &impl Fn(AtomId) -> bool) -> bool {
        match self {
            GroundFormula::Const(b) => *b,
            GroundFormula::Atom(a) => truth(*a),
            GroundFormula::Not(f) => !f.holds(truth),
            GroundFormula::And(fs) => fs.iter().all(|f| f.holds(truth)),
            GroundFormula::Or(fs) => fs.iter().any(|f| f.holds(truth)),
        }
    }

    /// Kleene evaluation over a partial assignment.
    pub fn eval3(&self, truth: &impl Fn(AtomId) -> Truth) -> Truth {
        match self {
            GroundFormula::Const(b) => (*b).into(),
            GroundFormula::Atom(a) => truth(*a),
            GroundFormula::Not(f) => match f.eval3(truth) {
                Truth::True => Truth::False,
                Truth::False => Truth::True,
                Truth::Unknown => Truth::Unknown,
            },
            GroundFormula::And(fs) => {
                let mut out = Truth::True;
                for f in fs {
                    match f.eval3(truth) {
                        Truth::False => return Truth::False,
                        Truth::Unknown => out = Truth::Unknown,
                        Truth::True => {}
                    }
                }
                out
            }
            GroundFormula::Or(fs) => {
                let mut out = Truth::False;
                for f in fs {
                    match f.eval3(truth) {
                        Truth::True => return Truth::True,
                        Truth::Unknown => out = Truth::Unknown,
                        Truth::False => {}
                    }
                }
                out
            }
        }
    }

    /// Atoms that occur in the formula.
    pub fn atoms(&self, out: &mut Vec<AtomId>) {
        match self {
            GroundFormula::Const(_) => {}
            GroundFormula::Atom(a) => out.push(*a),
            GroundFormula::Not(f) => f.atoms(out),
            GroundFormula::And(fs) | GroundFormula::Or(fs) => fs.iter().for_each(|f| f.atoms(out)),
        }
    }
}
