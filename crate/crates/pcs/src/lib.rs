//! Static analysis toolkit that summarizes the callback control flow of
//! framework API methods into *predicate callback summaries* (PCS) and applies
//! those summaries to application code.
//!
//! The pipeline works on the MiniFW IR, a small object-oriented three-address
//! language with an explicit framework/app split (see `docs/ir-grammar.md`):
//!
//! 1. [`ir`] parses and validates `.ir` sources.
//! 2. [`graphs`] builds per-method CFGs, postdominator-based control
//!    dependence, the CHA call graph, and per-API-method ICFGs.
//! 3. [`callbacks`] finds callback signatures, call chains, and links the
//!    `sendMessage`/`handleMessage` async idiom.
//! 4. [`receivers`] resolves callback receivers to `this`/`param`/`unknown`.
//! 5. [`predicates`] abstracts guarding branches into expressions over
//!    app-visible variables.
//! 6. [`updates`] finds statements that can change predicate variables.
//! 7. [`summary`] generates, stores, and serializes the PCS graphs.
//! 8. [`client`] splices summaries into app code, enumerates callback paths,
//!    and detects infeasible callback sequences.
//!
//! [`interp`] is a small reference interpreter for the IR used to sanity-check
//! analysis results against concrete executions.

pub mod callbacks;
pub mod client;
pub mod dot;
pub mod graphs;
pub mod interp;
pub mod ir;
pub mod predicates;
pub mod receivers;
pub mod summary;
pub mod updates;

pub use ir::{parse_program, parse_programs, Program};
// re-exports added as modules land

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Parsing or validation failed; the diagnostics carry positions.
    #[error("{} diagnostic(s) while parsing", .0.len())]
    Parse(Vec<ir::Diagnostic>),
    /// A summary store file could not be loaded.
    #[error("store: {0}")]
    Store(String),
    /// An operation was invoked outside its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
