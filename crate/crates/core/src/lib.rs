//! Local past propositional dynamic logic over Mazurkiewicz traces.
//!
//! The crate covers traces over a distributed alphabet, the logic and its
//! evaluator, separated-deterministic paths, elimination of the constants
//! `Y`/`L` and of the global modality, asynchronous automata and their
//! cascade products, and a compiler from local formulas to local cascades.

pub mod compiler;
pub mod elim;
pub mod error;
pub mod formula;
pub mod machines;
pub mod sdpath;
pub mod semantics;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{DistributedAlphabet, EventId, LetterId, ProcId, Trace};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
mod book_intro {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/traces.md")]
mod book_traces {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/formulas.md")]
mod book_formulas {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sdpaths.md")]
mod book_sdpaths {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/elimination.md")]
mod book_elimination {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/machines.md")]
mod book_machines {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/compiler.md")]
mod book_compiler {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
