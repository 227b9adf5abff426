//! Seeded generators for the experiment domains.

pub mod digits;
pub mod gridpath;
pub mod sudoku;
