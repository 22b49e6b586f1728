//! Probabilistic planning toolkit: a typed STRIPS subset of PPDDL with
//! probabilistic effects, stochastic shortest-path solvers, and policy
//! generalization through abstract policy automata.

pub mod abstraction;
pub mod bench;
pub mod cli;
pub mod gpa;
pub mod heuristics;
pub mod ppddl;
pub mod sexpr;
pub mod solvers;
pub mod ssp;
pub mod util;
