//! Control-flow-graph intermediate representation. Each vertex is a
//! source-level MSR rule (cells, assignments and `cas` still present);
//! edges carry control flow. Every process is prefixed with an init
//! vertex `[Fr(~pid)] -[]-> ['pid := ~pid]` that allocates its process
//! id. Labels are dense nonnegative integers in construction order so
//! graphs diff cleanly in golden tests.

mod build;
#[cfg(test)]
mod tests;
mod dot;

pub use build::{build_cfg, system_cfg, CfgError, PID_CELL};
pub use dot::to_dot;

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::Diagnostic;
use crate::syntax::ast::TermExpr;
use crate::syntax::pretty;

/// Vertex label, unique across the whole system graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Source-side MSR rule attached to a CFG vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsrRuleSrc {
    pub premise: Vec<TermExpr>,
    pub actions: Vec<TermExpr>,
    pub conclusion: Vec<TermExpr>,
    pub annotation: Option<String>,
    /// owning process name
    pub process: String,
}

impl MsrRuleSrc {
    pub fn skip(process: &str) -> MsrRuleSrc {
        MsrRuleSrc {
            premise: Vec::new(),
            actions: Vec::new(),
            conclusion: Vec::new(),
            annotation: None,
            process: process.to_string(),
        }
    }

    pub fn is_skip(&self) -> bool {
        self.premise.is_empty()
            && self.actions.is_empty()
            && self.conclusion.is_empty()
            && self.annotation.is_none()
    }

    pub fn display(&self) -> String {
        let join = |items: &[TermExpr]| {
            items
                .iter()
                .map(pretty::term_to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        if self.actions.is_empty() {
            format!("[{}]->[{}]", join(&self.premise), join(&self.conclusion))
        } else {
            format!(
                "[{}]--[{}]->[{}]",
                join(&self.premise),
                join(&self.actions),
                join(&self.conclusion)
            )
        }
    }
}

/// Restriction generated for a non-ground `cas` else-branch.
#[derive(Debug, Clone)]
pub struct GenRestriction {
    pub fact_name: String,
    pub pattern: TermExpr,
}

#[derive(Debug, Clone, Default)]
pub struct ProcessGraph {
    pub vertices: BTreeMap<Label, MsrRuleSrc>,
    pub edges: BTreeSet<(Label, Label)>,
    /// init vertices, one per process
    pub entries: Vec<Label>,
    pub warnings: Vec<Diagnostic>,
    pub restrictions: Vec<GenRestriction>,
    /// a generated `Neq` action is in use somewhere
    pub neq_generated: bool,
}

impl ProcessGraph {
    pub fn rule(&self, k: Label) -> Option<&MsrRuleSrc> {
        self.vertices.get(&k)
    }

    /// Labels with no incoming edge.
    pub fn roots(&self) -> BTreeSet<Label> {
        let targets: BTreeSet<Label> = self.edges.iter().map(|(_, t)| *t).collect();
        self.vertices
            .keys()
            .filter(|k| !targets.contains(k))
            .copied()
            .collect()
    }

    /// Labels with no outgoing edge.
    pub fn leaves(&self) -> BTreeSet<Label> {
        let sources: BTreeSet<Label> = self.edges.iter().map(|(s, _)| *s).collect();
        self.vertices
            .keys()
            .filter(|k| !sources.contains(k))
            .copied()
            .collect()
    }

    pub fn succ(&self, k: Label) -> BTreeSet<Label> {
        self.edges
            .iter()
            .filter(|(s, _)| *s == k)
            .map(|(_, t)| *t)
            .collect()
    }

    pub fn pred(&self, k: Label) -> BTreeSet<Label> {
        self.edges
            .iter()
            .filter(|(_, t)| *t == k)
            .map(|(s, _)| *s)
            .collect()
    }

    /// Fuse interior skip vertices (`[]-[]->[]`): splice predecessors
    /// to successors, drop the vertex, and renumber labels densely in
    /// ascending order. Entry vertices and self-looping skips are kept.
    pub fn fuse_skips(&mut self) {
        loop {
            let candidate = self.vertices.iter().find_map(|(k, rule)| {
                if !rule.is_skip() || self.entries.contains(k) {
                    return None;
                }
                let preds = self.pred(*k);
                let succs = self.succ(*k);
                if preds.is_empty() || succs.is_empty() {
                    return None;
                }
                if preds.contains(k) || succs.contains(k) {
                    return None;
                }
                Some((*k, preds, succs))
            });
            match candidate {
                Some((k, preds, succs)) => {
                    self.vertices.remove(&k);
                    self.edges.retain(|(s, t)| *s != k && *t != k);
                    for p in &preds {
                        for s in &succs {
                            self.edges.insert((*p, *s));
                        }
                    }
                }
                None => break,
            }
        }
        self.renumber();
    }

    /// Renumber labels densely, preserving ascending order.
    fn renumber(&mut self) {
        let mapping: BTreeMap<Label, Label> = self
            .vertices
            .keys()
            .enumerate()
            .map(|(i, k)| (*k, Label(i as u32)))
            .collect();
        self.vertices = self
            .vertices
            .iter()
            .map(|(k, v)| (mapping[k], v.clone()))
            .collect();
        self.edges = self
            .edges
            .iter()
            .map(|(s, t)| (mapping[s], mapping[t]))
            .collect();
        for e in &mut self.entries {
            *e = mapping[e];
        }
    }

    /// Drop vertices not reachable from any entry, warning once per
    /// dropped vertex. Dead code only arises behind `loop` bodies that
    /// never break.
    pub fn prune_unreachable(&mut self) {
        let mut seen: BTreeSet<Label> = BTreeSet::new();
        let mut stack: Vec<Label> = self.entries.clone();
        while let Some(k) = stack.pop() {
            if !seen.insert(k) {
                continue;
            }
            for s in self.succ(k) {
                stack.push(s);
            }
        }
        let dead: Vec<Label> = self
            .vertices
            .keys()
            .filter(|k| !seen.contains(k))
            .copied()
            .collect();
        for k in dead {
            let rule = self.vertices.remove(&k).unwrap();
            self.edges.retain(|(s, t)| *s != k && *t != k);
            self.warnings.push(Diagnostic::warning(
                crate::diag::Span::synthetic(),
                format!(
                    "unreachable step removed from process `{}`: {}",
                    rule.process,
                    rule.display()
                ),
            ));
        }
        self.renumber();
    }
}
