//! Coflow scheduling on heterogeneous parallel network cores.
//!
//! Each core is a non-blocking switch with its own speed. The library solves a
//! linear relaxation of the chosen problem, groups cores by speed, rounds the
//! fractional solution with a load-aware list scheduler and replays the result in
//! a discrete-event simulator. See [`pipeline::run`] for the entry point.

pub mod engine;
pub mod error;
pub mod generate;
pub mod grouping;
pub mod lp;
pub mod model;
pub mod pipeline;
pub mod relaxations;
pub mod report;
pub mod schedulers;
pub mod twct;

// The guide's snippets run as doctests so they cannot drift from the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/relaxations.md")]
    mod relaxations {}
    #[doc = include_str!("../../../book/src/grouping.md")]
    mod grouping {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
