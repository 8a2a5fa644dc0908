//! Compiler and analysis toolkit for a protocol process language with
//! process-local memory cells, targeting Tamarin-style multiset
//! rewriting theories.
//!
//! The pipeline is: [`syntax`] (lex/parse) -> [`binder`] (modules,
//! macros, types) -> [`cfg`] (control-flow graph IR) -> [`cellflow`]
//! (cell lifetime analysis and context inference) -> [`translate`]
//! (state-fact lowering and `.spthy` emission). [`interp`] hosts
//! reference interpreters for both the source and the target semantics
//! together with a bounded-exhaustive correspondence checker.

pub mod binder;
pub mod cellflow;
pub mod cfg;
pub mod synth;
pub mod translate;
pub mod diag;
pub mod interp;
pub mod syntax;

pub use diag::{Diagnostic, Severity, Span};
