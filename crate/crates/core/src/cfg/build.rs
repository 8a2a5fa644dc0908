//! CFG construction. `build` threads an attach set (the vertices whose
//! control falls into the current process fragment) and returns the
//! fragment's fall-through ends. Chains append one vertex; choice fans
//! out and joins branch ends on a skip vertex; if-then-else creates a
//! `cas` test vertex and a restriction vertex joined on a skip; while
//! wires body ends back to both test vertices with the false branch
//! exiting to the join; loop wires body ends back to the body head.
//! Break and continue edge to the matching loop skeleton, innermost
//! for the unlabeled forms, by table lookup for the labeled ones.

use std::collections::BTreeMap;

use crate::binder::FlatSystem;
use crate::diag::{Diagnostic, Span};
use crate::syntax::ast::*;

use super::{GenRestriction, Label, MsrRuleSrc, ProcessGraph};

#[derive(Debug, thiserror::Error)]
pub enum CfgError {
    #[error("{0}")]
    Diag(Diagnostic),
}

impl From<Diagnostic> for CfgError {
    fn from(d: Diagnostic) -> Self {
        CfgError::Diag(d)
    }
}

impl CfgError {
    pub fn diagnostic(&self) -> &Diagnostic {
        match self {
            CfgError::Diag(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LoopSkeleton {
    k_t: Label,
    k_f: Option<Label>,
    k_a: Label,
}

struct Builder {
    next: u32,
    next_phantom: u32,
    restrict_count: usize,
}

pub const PID_CELL: &str = "pid";

impl Builder {
    fn fresh(&mut self) -> Label {
        let l = Label(self.next);
        self.next += 1;
        l
    }

    /// Phantom labels act as splice points during loop construction and
    /// never receive vertices; they come from a disjoint range so real
    /// labels stay dense.
    fn fresh_phantom(&mut self) -> Label {
        self.next_phantom -= 1;
        Label(self.next_phantom)
    }

    fn init_rule(process: &str) -> MsrRuleSrc {
        let span = Span::synthetic();
        let pid = |sort| TermExpr::new(TermNode::Var {
            name: PID_CELL.to_string(),
            sort,
        }, span);
        MsrRuleSrc {
            premise: vec![TermExpr::new(
                TermNode::App {
                    path: Path::single("Fr", span),
                    args: vec![Arg {
                        label: None,
                        value: ArgValue::Term(pid(Some(Sort::Fresh))),
                        span,
                    }],
                    persistent: false,
                },
                span,
            )],
            actions: Vec::new(),
            conclusion: vec![TermExpr::new(
                TermNode::Assign {
                    cell: PID_CELL.to_string(),
                    value: Box::new(pid(Some(Sort::Fresh))),
                },
                span,
            )],
            annotation: None,
            process: process.to_string(),
        }
    }

    /// Rule for the matching branch of a condition test.
    fn cas_rule(process: &str, cell: &str, pattern: &TermExpr) -> MsrRuleSrc {
        MsrRuleSrc {
            premise: vec![TermExpr::new(
                TermNode::CellPattern {
                    cell: cell.to_string(),
                    term: Box::new(pattern.clone()),
                },
                pattern.span,
            )],
            actions: Vec::new(),
            conclusion: Vec::new(),
            annotation: None,
            process: process.to_string(),
        }
    }

    /// Rule for the non-matching branch: `Neq('c, t)` when the pattern
    /// is ground, otherwise a fresh restriction fact over `('c, t)`.
    fn restrict_rule(
        &mut self,
        g: &mut ProcessGraph,
        process: &str,
        cell: &str,
        pattern: &TermExpr,
    ) -> MsrRuleSrc {
        let span = pattern.span;
        let fact_name = if term_is_ground(pattern) {
            g.neq_generated = true;
            "Neq".to_string()
        } else {
            let name = format!("TgRestrict{}", self.restrict_count);
            self.restrict_count += 1;
            g.restrictions.push(GenRestriction {
                fact_name: name.clone(),
                pattern: pattern.clone(),
            });
            name
        };
        let action = TermExpr::new(
            TermNode::App {
                path: Path::single(fact_name, span),
                args: vec![
                    Arg {
                        label: None,
                        value: ArgValue::Term(TermExpr::new(
                            TermNode::Cell(cell.to_string()),
                            span,
                        )),
                        span,
                    },
                    Arg {
                        label: None,
                        value: ArgValue::Term(pattern.clone()),
                        span,
                    },
                ],
                persistent: false,
            },
            span,
        );
        MsrRuleSrc {
            premise: Vec::new(),
            actions: vec![action],
            conclusion: Vec::new(),
            annotation: None,
            process: process.to_string(),
        }
    }

    /// `(true-branch rule, false-branch rule)` for a condition; a
    /// negated condition swaps the two.
    fn cond_rules(
        &mut self,
        g: &mut ProcessGraph,
        process: &str,
        cond: &Cond,
    ) -> (MsrRuleSrc, MsrRuleSrc) {
        let cas = Self::cas_rule(process, &cond.cell, &cond.pattern);
        let restrict = self.restrict_rule(g, process, &cond.cell, &cond.pattern);
        if cond.negated {
            (restrict, cas)
        } else {
            (cas, restrict)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        g: &mut ProcessGraph,
        process: &str,
        p: &ProcessExpr,
        attach: &[Label],
        stack: &mut Vec<LoopSkeleton>,
        table: &mut BTreeMap<String, LoopSkeleton>,
    ) -> Result<Vec<Label>, Diagnostic> {
        match &p.node {
            ProcessNode::Null => Ok(attach.to_vec()),
            ProcessNode::Step { rule, rest } => {
                let k = self.fresh();
                g.vertices.insert(
                    k,
                    MsrRuleSrc {
                        premise: rule.premise.clone(),
                        actions: rule.actions.clone(),
                        conclusion: rule.conclusion.clone(),
                        annotation: rule.annotation.clone(),
                        process: process.to_string(),
                    },
                );
                for a in attach {
                    g.edges.insert((*a, k));
                }
                self.build(g, process, rest, &[k], stack, table)
            }
            ProcessNode::Scoped { body, rest } => {
                let ends = self.build(g, process, body, attach, stack, table)?;
                self.build(g, process, rest, &ends, stack, table)
            }
            ProcessNode::Choice { branches, rest } => {
                let mut ends = Vec::new();
                for b in branches {
                    ends.extend(self.build(g, process, b, attach, stack, table)?);
                }
                let join = self.fresh();
                g.vertices.insert(join, MsrRuleSrc::skip(process));
                for e in &ends {
                    g.edges.insert((*e, join));
                }
                self.build(g, process, rest, &[join], stack, table)
            }
            ProcessNode::IfThenElse {
                cond,
                then_branch,
                else_branch,
                rest,
            } => {
                let (t_rule, f_rule) = self.cond_rules(g, process, cond);
                let k_t = self.fresh();
                g.vertices.insert(k_t, t_rule);
                let k_f = self.fresh();
                g.vertices.insert(k_f, f_rule);
                for a in attach {
                    g.edges.insert((*a, k_t));
                    g.edges.insert((*a, k_f));
                }
                let mut ends = self.build(g, process, then_branch, &[k_t], stack, table)?;
                ends.extend(self.build(g, process, else_branch, &[k_f], stack, table)?);
                let join = self.fresh();
                g.vertices.insert(join, MsrRuleSrc::skip(process));
                for e in &ends {
                    g.edges.insert((*e, join));
                }
                self.build(g, process, rest, &[join], stack, table)
            }
            ProcessNode::While {
                cond,
                body,
                rest,
                label,
            } => {
                let (t_rule, f_rule) = self.cond_rules(g, process, cond);
                let k_t = self.fresh();
                g.vertices.insert(k_t, t_rule);
                let k_f = self.fresh();
                g.vertices.insert(k_f, f_rule);
                let k_a = self.fresh();
                g.vertices.insert(k_a, MsrRuleSrc::skip(process));
                for a in attach {
                    g.edges.insert((*a, k_t));
                    g.edges.insert((*a, k_f));
                }
                g.edges.insert((k_f, k_a));
                let skel = LoopSkeleton {
                    k_t,
                    k_f: Some(k_f),
                    k_a,
                };
                self.enter_loop(label, skel, p.span, table)?;
                stack.push(skel);
                let ends = self.build(g, process, body, &[k_t], stack, table);
                stack.pop();
                self.exit_loop(label, table);
                for e in ends? {
                    g.edges.insert((e, k_t));
                    g.edges.insert((e, k_f));
                }
                self.build(g, process, rest, &[k_a], stack, table)
            }
            ProcessNode::Loop { body, rest, label } => {
                let head = self.fresh_phantom();
                let k_a = self.fresh();
                g.vertices.insert(k_a, MsrRuleSrc::skip(process));
                let skel = LoopSkeleton {
                    k_t: head,
                    k_f: None,
                    k_a,
                };
                self.enter_loop(label, skel, p.span, table)?;
                stack.push(skel);
                let ends = self.build(g, process, body, &[head], stack, table);
                stack.pop();
                self.exit_loop(label, table);
                let ends = ends?;
                // splice out the phantom head: its successors are the
                // body entries; attach, body ends and continues all
                // edge to every entry
                g.edges.retain(|(s, t)| !(*s == head && *t == head));
                let entries: Vec<Label> = g
                    .edges
                    .iter()
                    .filter(|(s, _)| *s == head)
                    .map(|(_, t)| *t)
                    .collect();
                g.edges.retain(|(s, _)| *s != head);
                let into_head: Vec<Label> = g
                    .edges
                    .iter()
                    .filter(|(_, t)| *t == head)
                    .map(|(s, _)| *s)
                    .collect();
                g.edges.retain(|(_, t)| *t != head);
                for h in &entries {
                    for a in attach {
                        g.edges.insert((*a, *h));
                    }
                    for s in &into_head {
                        g.edges.insert((*s, *h));
                    }
                    for e in ends.iter().filter(|e| **e != head) {
                        g.edges.insert((*e, *h));
                    }
                }
                self.build(g, process, rest, &[k_a], stack, table)
            }
            ProcessNode::Break(label) => {
                let skel = self.find_loop(label.as_deref(), stack, table, p.span, "break")?;
                for a in attach {
                    g.edges.insert((*a, skel.k_a));
                }
                Ok(Vec::new())
            }
            ProcessNode::Continue(label) => {
                let skel = self.find_loop(label.as_deref(), stack, table, p.span, "continue")?;
                for a in attach {
                    g.edges.insert((*a, skel.k_t));
                    if let Some(k_f) = skel.k_f {
                        g.edges.insert((*a, k_f));
                    }
                }
                Ok(Vec::new())
            }
            ProcessNode::MacroCall { .. }
            | ProcessNode::LetIn { .. }
            | ProcessNode::MacroLetIn { .. } => Err(Diagnostic::error(
                p.span,
                "internal: macro node survived expansion",
            )),
        }
    }

    fn enter_loop(
        &mut self,
        label: &Option<String>,
        skel: LoopSkeleton,
        span: Span,
        table: &mut BTreeMap<String, LoopSkeleton>,
    ) -> Result<(), Diagnostic> {
        if let Some(name) = label {
            if table.contains_key(name) {
                return Err(Diagnostic::error(
                    span,
                    format!("loop label \"{}\" shadows an enclosing loop with the same label", name),
                ));
            }
            table.insert(name.clone(), skel);
        }
        Ok(())
    }

    fn exit_loop(&mut self, label: &Option<String>, table: &mut BTreeMap<String, LoopSkeleton>) {
        if let Some(name) = label {
            table.remove(name);
        }
    }

    fn find_loop(
        &self,
        label: Option<&str>,
        stack: &[LoopSkeleton],
        table: &BTreeMap<String, LoopSkeleton>,
        span: Span,
        what: &str,
    ) -> Result<LoopSkeleton, Diagnostic> {
        match label {
            Some(name) => table.get(name).copied().ok_or_else(|| {
                Diagnostic::error(span, format!("unknown loop label \"{}\"", name))
            }),
            None => stack.last().copied().ok_or_else(|| {
                Diagnostic::error(span, format!("`{}` outside of any loop", what))
            }),
        }
    }

    fn build_process(
        &mut self,
        g: &mut ProcessGraph,
        name: &str,
        body: &ProcessExpr,
    ) -> Result<(), Diagnostic> {
        let init = self.fresh();
        g.vertices.insert(init, Self::init_rule(name));
        g.entries.push(init);
        let mut stack = Vec::new();
        let mut table = BTreeMap::new();
        self.build(g, name, body, &[init], &mut stack, &mut table)?;
        Ok(())
    }
}

fn term_is_ground(t: &TermExpr) -> bool {
    match &t.node {
        TermNode::Var { .. } => false,
        TermNode::StrLit(_) | TermNode::Cell(_) => true,
        TermNode::App { args, .. } => args.iter().all(|a| match &a.value {
            ArgValue::Term(t) => term_is_ground(t),
            _ => false,
        }),
        TermNode::Tuple(items) => items.iter().all(term_is_ground),
        TermNode::NamedPattern { term, .. } => term_is_ground(term),
        _ => false,
    }
}

/// CFG for a single process.
pub fn build_cfg(name: &str, body: &ProcessExpr) -> Result<ProcessGraph, CfgError> {
    let mut b = Builder {
        next: 0,
        next_phantom: u32::MAX,
        restrict_count: 0,
    };
    let mut g = ProcessGraph::default();
    b.build_process(&mut g, name, body)?;
    g.prune_unreachable();
    Ok(g)
}

/// Disjoint union of the per-process CFGs over one label space.
pub fn system_cfg(flat: &FlatSystem) -> Result<ProcessGraph, CfgError> {
    let mut b = Builder {
        next: 0,
        next_phantom: u32::MAX,
        restrict_count: 0,
    };
    let mut g = ProcessGraph::default();
    for p in &flat.processes {
        b.build_process(&mut g, &p.name, &p.body)?;
    }
    g.prune_unreachable();
    Ok(g)
}
