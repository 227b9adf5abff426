//! Answer set programs extended with neural atoms.

pub mod lang;
pub mod ground;
pub mod stable;
pub mod neural;
pub mod semantics;
pub mod learn;
