//! Reference interpreters for the source process semantics and the
//! target multiset-rewriting semantics, plus the bounded-exhaustive
//! translation correspondence checker.

mod correspond;
mod engine;
mod ground;
#[cfg(test)]
mod tests;

pub use correspond::{
    check_correspondence, enumerate_source, enumerate_target, CheckResult, SourceTrace,
    TargetTrace,
};
pub use engine::{
    deref, ExecState, GroundRule, InterpError, SourceEngine, StepKind, TargetEngine, TargetState,
    TargetStep, Universe,
};
pub use ground::{Canonicalizer, FactSet, GFact, GTerm, Subst};
