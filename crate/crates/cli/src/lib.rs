pub mod args;
pub mod commands;
pub mod gen;
pub mod programs;
