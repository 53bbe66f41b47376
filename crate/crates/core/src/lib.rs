//! Exact finite-horizon competitive analysis for the k-server problem.
//!
//! Given a small metric, `k` and a request horizon `T`, this crate computes
//! the optimal strict deterministic competitive ratio (via a memoized
//! minimax game against an adaptive adversary) and the optimal strict
//! randomized ratio against an oblivious adversary (via an exact rational
//! linear program and bisection on the ratio), and extracts policies that
//! achieve them.

pub mod algorithms;
pub mod game;
pub mod metric;
pub mod offline;
pub mod par;
pub mod rational;
pub mod simplex;
pub mod lp;
pub mod report;
pub mod cli;
