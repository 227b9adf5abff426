//! Bottom-up instantiation of a validated program over its finite Herbrand
//! domain.
//!
//! Grounding runs in four phases:
//!
//! 1. rules without body literals (facts, possibly with ranges) are
//!    instantiated;
//! 2. neural declarations are expanded once per substitution of their body
//!    over those facts, which creates the neural output atoms;
//! 3. the set of possibly-true atoms is computed by semi-naive evaluation of
//!    the rules with negation dropped;
//! 4. every rule is instantiated over that set. Comparisons are decided and
//!    removed, negative literals over impossible atoms are dropped, and choice
//!    rules are compiled into exclusive normal rules plus constraints.

mod instantiate;
mod program;

pub use program::*;

use thiserror::Error;

use crate::lang::Diagnostic;

pub const DEFAULT_ATOM_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("program has {} diagnostic(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
    #[error("arithmetic on non-integer term `{0}`")]
    NotInteger(String),
    #[error("integer overflow while evaluating `{0}`")]
    Overflow(String),
    #[error("range `{0}` used where a single value is required")]
    RangeNotAllowed(String),
    #[error("variable `{0}` is not bound when it is needed")]
    Unbound(String),
    #[error("ground atom limit of {0} exceeded")]
    AtomLimit(usize),
    #[error("aggregate bound `{0}` is not an integer")]
    NonIntegerBound(String),
}

#[derive(Clone, Copy, Debug)]
pub struct GroundConfig {
    pub atom_limit: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig {
            atom_limit: DEFAULT_ATOM_LIMIT,
        }
    }
}

pub use instantiate::{ground, ground_with, herbrand_domain};
