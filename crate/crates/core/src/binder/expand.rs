//! Hygienic macro expansion. Takes the resolved AST and produces a
//! flat, macro-free system: named arguments are matched by label,
//! name-pruning shorthands are gone (handled during resolution), term
//! and process macros are substituted with capture-avoiding renaming
//! of macro-local variables, and `rw` cell parameters alias the
//! caller's cells so writes propagate.

use std::collections::{BTreeMap, BTreeSet};

use crate::binder::resolve::{Resolved, SymbolId, SymbolInfo, SymbolKind, SymbolTable, VerbatimBlock};
use crate::diag::{Diagnostic, Span};
use crate::syntax::ast::*;

#[derive(Debug, Clone)]
pub struct FlatProcess {
    pub name: String,
    pub body: ProcessExpr,
    pub span: Span,
}

/// Macro-free system of processes plus the surviving symbol table
/// (uninterpreted fun/pred/apred symbols only).
#[derive(Debug)]
pub struct FlatSystem {
    pub processes: Vec<FlatProcess>,
    pub symbols: SymbolTable,
    pub passthrough: Vec<VerbatimBlock>,
}

impl FlatSystem {
    pub fn symbol(&self, qname: &str) -> Option<&SymbolInfo> {
        self.symbols.lookup(qname)
    }
}

#[derive(Debug, Clone, Default)]
struct Subst {
    vars: BTreeMap<String, TermExpr>,
    /// cell parameter -> caller cell
    cells: BTreeMap<String, String>,
    /// cell parameters with write access
    rw: BTreeSet<String>,
    /// locally let-bound term macros, innermost last
    macros: Vec<(String, MacroSig, TermExpr)>,
}

pub struct Expander<'t> {
    table: &'t SymbolTable,
    stack: Vec<SymbolId>,
    rename_counter: usize,
}

type EResult<T> = Result<T, Diagnostic>;

pub fn expand_macros(resolved: Resolved) -> Result<FlatSystem, Vec<Diagnostic>> {
    let mut ex = Expander {
        table: &resolved.table,
        stack: Vec::new(),
        rename_counter: 0,
    };
    let mut processes = Vec::new();
    let mut diags = Vec::new();
    for (name, body, span) in &resolved.processes {
        match ex.expand_process(body, &Subst::default()) {
            Ok(body) => processes.push(FlatProcess {
                name: name.clone(),
                body,
                span: *span,
            }),
            Err(e) => diags.push(e),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut symbols = SymbolTable::default();
    for info in &resolved.table.entries {
        match info.kind {
            SymbolKind::Fun { .. } | SymbolKind::Pred { .. } | SymbolKind::Apred { .. } => {
                symbols.insert(info.clone());
            }
            _ => {}
        }
    }
    Ok(FlatSystem {
        processes,
        symbols,
        passthrough: resolved.passthrough,
    })
}

fn collect_vars(t: &TermExpr, out: &mut BTreeSet<String>) {
    match &t.node {
        TermNode::Var { name, .. } => {
            out.insert(name.clone());
        }
        TermNode::StrLit(_)
        | TermNode::Cell(_)
        | TermNode::PathRef(_)
        | TermNode::AssignPrune { .. }
        | TermNode::Undef { .. } => {}
        TermNode::LetIn { value, body, .. } => {
            collect_vars(value, out);
            collect_vars(body, out);
        }
        TermNode::MacroLetIn { value, body, .. } => {
            collect_vars(value, out);
            collect_vars(body, out);
        }
        TermNode::App { args, .. } => {
            for a in args {
                if let ArgValue::Term(t) = &a.value {
                    collect_vars(t, out);
                }
            }
        }
        TermNode::Tuple(items) => {
            for i in items {
                collect_vars(i, out);
            }
        }
        TermNode::Assign { value, .. } => collect_vars(value, out),
        TermNode::NamedPattern { term, name } => {
            out.insert(name.clone());
            collect_vars(term, out);
        }
        TermNode::CellPattern { term, .. } => collect_vars(term, out),
        TermNode::Quantified { body, .. } => collect_vars(body, out),
        TermNode::At { fact, time } => {
            collect_vars(fact, out);
            collect_vars(time, out);
        }
        TermNode::Binary { lhs, rhs, .. } => {
            collect_vars(lhs, out);
            collect_vars(rhs, out);
        }
        TermNode::Not(inner) => collect_vars(inner, out),
    }
}

fn collect_process_vars(p: &ProcessExpr, out: &mut BTreeSet<String>) {
    match &p.node {
        ProcessNode::Null | ProcessNode::Break(_) | ProcessNode::Continue(_) => {}
        ProcessNode::Step { rule, rest } => {
            for t in rule
                .premise
                .iter()
                .chain(rule.actions.iter())
                .chain(rule.conclusion.iter())
            {
                collect_vars(t, out);
            }
            for l in &rule.lets {
                match l {
                    RuleLet::Binding { name, value } => {
                        out.insert(name.clone());
                        collect_vars(value, out);
                    }
                    RuleLet::Macro { value, .. } => collect_vars(value, out),
                }
            }
            collect_process_vars(rest, out);
        }
        ProcessNode::Choice { branches, rest } => {
            for b in branches {
                collect_process_vars(b, out);
            }
            collect_process_vars(rest, out);
        }
        ProcessNode::Scoped { body, rest } => {
            collect_process_vars(body, out);
            collect_process_vars(rest, out);
        }
        ProcessNode::While {
            cond, body, rest, ..
        } => {
            collect_vars(&cond.pattern, out);
            collect_process_vars(body, out);
            collect_process_vars(rest, out);
        }
        ProcessNode::Loop { body, rest, .. } => {
            collect_process_vars(body, out);
            collect_process_vars(rest, out);
        }
        ProcessNode::IfThenElse {
            cond,
            then_branch,
            else_branch,
            rest,
        } => {
            collect_vars(&cond.pattern, out);
            collect_process_vars(then_branch, out);
            collect_process_vars(else_branch, out);
            collect_process_vars(rest, out);
        }
        ProcessNode::MacroCall { args, rest, .. } => {
            for a in args {
                if let ArgValue::Term(t) = &a.value {
                    collect_vars(t, out);
                }
            }
            collect_process_vars(rest, out);
        }
        ProcessNode::LetIn { value, rest, name } => {
            out.insert(name.clone());
            collect_vars(value, out);
            collect_process_vars(rest, out);
        }
        ProcessNode::MacroLetIn { value, rest, .. } => {
            collect_vars(value, out);
            collect_process_vars(rest, out);
        }
    }
}

/// Append `rest` to every fall-through end of `p`.
fn concat_process(p: ProcessExpr, rest: &ProcessExpr) -> ProcessExpr {
    let span = p.span;
    let node = match p.node {
        ProcessNode::Null => return rest.clone(),
        ProcessNode::Break(l) => ProcessNode::Break(l),
        ProcessNode::Continue(l) => ProcessNode::Continue(l),
        ProcessNode::Step { rule, rest: r } => ProcessNode::Step {
            rule,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::Choice { branches, rest: r } => ProcessNode::Choice {
            branches,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::Scoped { body, rest: r } => ProcessNode::Scoped {
            body,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::While {
            cond,
            body,
            rest: r,
            label,
        } => ProcessNode::While {
            cond,
            body,
            rest: Box::new(concat_process(*r, rest)),
            label,
        },
        ProcessNode::Loop {
            body,
            rest: r,
            label,
        } => ProcessNode::Loop {
            body,
            rest: Box::new(concat_process(*r, rest)),
            label,
        },
        ProcessNode::IfThenElse {
            cond,
            then_branch,
            else_branch,
            rest: r,
        } => ProcessNode::IfThenElse {
            cond,
            then_branch,
            else_branch,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::MacroCall { path, args, rest: r } => ProcessNode::MacroCall {
            path,
            args,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::LetIn { name, value, rest: r } => ProcessNode::LetIn {
            name,
            value,
            rest: Box::new(concat_process(*r, rest)),
        },
        ProcessNode::MacroLetIn { sig, value, rest: r } => ProcessNode::MacroLetIn {
            sig,
            value,
            rest: Box::new(concat_process(*r, rest)),
        },
    };
    ProcessExpr { node, span }
}

impl<'t> Expander<'t> {
    /// Match call arguments against a parameter list. Returns the
    /// argument values in declaration order.
    fn match_args(
        &mut self,
        what: &str,
        params: &[MacroParam],
        args: &[Arg],
        span: Span,
    ) -> EResult<Vec<TermExpr>> {
        let named = params.iter().any(|p| p.named);
        if named {
            let mut by_label: BTreeMap<&str, &Arg> = BTreeMap::new();
            for a in args {
                let label = a.label.as_deref().ok_or_else(|| {
                    Diagnostic::error(
                        a.span,
                        format!("`{}` takes named arguments; use `label is value`", what),
                    )
                })?;
                if by_label.insert(label, a).is_some() {
                    return Err(Diagnostic::error(
                        a.span,
                        format!("duplicate argument `{}` in call to `{}`", label, what),
                    ));
                }
            }
            let mut out = Vec::with_capacity(params.len());
            for p in params {
                let arg = by_label.remove(p.name.as_str()).ok_or_else(|| {
                    Diagnostic::error(
                        span,
                        format!("missing named argument `{}` in call to `{}`", p.name, what),
                    )
                })?;
                match &arg.value {
                    ArgValue::Term(t) => out.push(t.clone()),
                    _ => unreachable!("prunes are resolved before expansion"),
                }
            }
            if let Some((label, arg)) = by_label.into_iter().next() {
                return Err(Diagnostic::error(
                    arg.span,
                    format!("`{}` has no parameter named `{}`", what, label),
                ));
            }
            Ok(out)
        } else {
            if args.iter().any(|a| a.label.is_some()) {
                return Err(Diagnostic::error(
                    span,
                    format!("`{}` takes positional arguments only", what),
                ));
            }
            if args.len() != params.len() {
                return Err(Diagnostic::error(
                    span,
                    format!(
                        "`{}` expects {} argument(s), found {}",
                        what,
                        params.len(),
                        args.len()
                    ),
                ));
            }
            Ok(args
                .iter()
                .map(|a| match &a.value {
                    ArgValue::Term(t) => t.clone(),
                    _ => unreachable!("prunes are resolved before expansion"),
                })
                .collect())
        }
    }

    /// Reorder labelled arguments of a named uninterpreted symbol into
    /// declaration order.
    fn match_symbol_args(
        &mut self,
        what: &str,
        arity: usize,
        labels: &Option<Vec<String>>,
        args: &[Arg],
        span: Span,
    ) -> EResult<Vec<TermExpr>> {
        match labels {
            Some(labels) => {
                let params: Vec<MacroParam> = labels
                    .iter()
                    .map(|l| MacroParam {
                        name: l.clone(),
                        named: true,
                        rw: false,
                        cell: false,
                        span,
                    })
                    .collect();
                self.match_args(what, &params, args, span)
            }
            None => {
                if args.iter().any(|a| a.label.is_some()) {
                    return Err(Diagnostic::error(
                        span,
                        format!("`{}` is not declared with named parameters", what),
                    ));
                }
                if args.len() != arity {
                    return Err(Diagnostic::error(
                        span,
                        format!("`{}` expects {} argument(s), found {}", what, arity, args.len()),
                    ));
                }
                Ok(args
                    .iter()
                    .map(|a| match &a.value {
                        ArgValue::Term(t) => t.clone(),
                        _ => unreachable!(),
                    })
                    .collect())
            }
        }
    }

    /// Hygiene: rename macro-body locals that clash with variables of
    /// the substituted arguments.
    fn hygiene_renames(
        &mut self,
        body_vars: &BTreeSet<String>,
        params: &BTreeSet<String>,
        arg_vars: &BTreeSet<String>,
    ) -> BTreeMap<String, TermExpr> {
        let mut renames = BTreeMap::new();
        for local in body_vars {
            if params.contains(local) || !arg_vars.contains(local) {
                continue;
            }
            let fresh = loop {
                self.rename_counter += 1;
                let candidate = format!("{}_{}", local, self.rename_counter);
                if !body_vars.contains(&candidate) && !arg_vars.contains(&candidate) {
                    break candidate;
                }
            };
            renames.insert(
                local.clone(),
                TermExpr::new(
                    TermNode::Var {
                        name: fresh,
                        sort: None,
                    },
                    Span::synthetic(),
                ),
            );
        }
        renames
    }

    fn enter(&mut self, id: SymbolId, span: Span) -> EResult<()> {
        if self.stack.contains(&id) {
            return Err(Diagnostic::error(
                span,
                format!(
                    "recursive macro `{}` (macros must not be recursive)",
                    self.table.get(id).qname
                ),
            ));
        }
        self.stack.push(id);
        Ok(())
    }

    fn expand_term_macro(
        &mut self,
        id: SymbolId,
        sig: &MacroSig,
        body: &TermExpr,
        args: &[Arg],
        span: Span,
    ) -> EResult<TermExpr> {
        let qname = self.table.get(id).qname.clone();
        let values = self.match_args(&qname, &sig.params, args, span)?;
        let mut body_vars = BTreeSet::new();
        collect_vars(body, &mut body_vars);
        let params: BTreeSet<String> = sig.params.iter().map(|p| p.name.clone()).collect();
        let mut arg_vars = BTreeSet::new();
        for v in &values {
            collect_vars(v, &mut arg_vars);
        }
        let mut subst = Subst {
            vars: self.hygiene_renames(&body_vars, &params, &arg_vars),
            ..Subst::default()
        };
        for (p, v) in sig.params.iter().zip(values) {
            if p.cell {
                match &v.node {
                    TermNode::Cell(c) => {
                        subst.cells.insert(p.name.clone(), c.clone());
                        if p.rw {
                            subst.rw.insert(p.name.clone());
                        }
                    }
                    _ => {
                        return Err(Diagnostic::error(
                            v.span,
                            format!("cell parameter `'{}` requires a cell argument", p.name),
                        ))
                    }
                }
            } else {
                subst.vars.insert(p.name.clone(), v);
            }
        }
        self.enter(id, span)?;
        let out = self.expand_term(body, &subst);
        self.stack.pop();
        out
    }

    fn expand_term(&mut self, t: &TermExpr, subst: &Subst) -> EResult<TermExpr> {
        let span = t.span;
        let node = match &t.node {
            TermNode::Var { name, sort } => match subst.vars.get(name) {
                Some(replacement) => return Ok(replacement.clone()),
                None => TermNode::Var {
                    name: name.clone(),
                    sort: *sort,
                },
            },
            TermNode::StrLit(_) => t.node.clone(),
            TermNode::Cell(c) => TermNode::Cell(subst.cells.get(c).cloned().unwrap_or_else(|| c.clone())),
            TermNode::PathRef(path) => {
                let qname = &path.segments[0];
                match self.table.by_qname.get(qname) {
                    Some(id) => {
                        let info = self.table.get(*id);
                        match &info.kind {
                            SymbolKind::LetBinding { body } => {
                                let id = *id;
                                let body = body.clone();
                                self.enter(id, span)?;
                                let out = self.expand_term(&body, &Subst::default());
                                self.stack.pop();
                                return out;
                            }
                            _ => {
                                return Err(Diagnostic::error(
                                    span,
                                    format!("`{}` ({}) cannot be used as a term", qname, info.kind.describe()),
                                ))
                            }
                        }
                    }
                    None => {
                        return Err(Diagnostic::error(
                            span,
                            format!("unknown name `{}`", qname),
                        ))
                    }
                }
            }
            TermNode::LetIn { name, value, body } => {
                let value = self.expand_term(value, subst)?;
                let mut inner = subst.clone();
                inner.vars.insert(name.clone(), value);
                return self.expand_term(body, &inner);
            }
            TermNode::MacroLetIn { sig, value, body } => {
                let mut inner = subst.clone();
                inner
                    .macros
                    .push((sig.name.clone(), sig.clone(), (**value).clone()));
                return self.expand_term(body, &inner);
            }
            TermNode::App {
                path,
                args,
                persistent,
            } => {
                let name = &path.segments[0];
                // local `let f(..) = .. in` macros shadow globals
                if let Some((_, sig, body)) = subst
                    .macros
                    .iter()
                    .rev()
                    .find(|(n, _, _)| n == name)
                    .cloned()
                {
                    let args = self.expand_args(args, subst)?;
                    let values = self.match_args(name, &sig.params, &args, span)?;
                    let mut body_vars = BTreeSet::new();
                    collect_vars(&body, &mut body_vars);
                    let params: BTreeSet<String> =
                        sig.params.iter().map(|p| p.name.clone()).collect();
                    let mut arg_vars = BTreeSet::new();
                    for v in &values {
                        collect_vars(v, &mut arg_vars);
                    }
                    let mut inner = Subst {
                        vars: self.hygiene_renames(&body_vars, &params, &arg_vars),
                        cells: subst.cells.clone(),
                        rw: subst.rw.clone(),
                        macros: Vec::new(),
                    };
                    for (p, v) in sig.params.iter().zip(values) {
                        inner.vars.insert(p.name.clone(), v);
                    }
                    return self.expand_term(&body, &inner);
                }
                let id = self.table.by_qname.get(name).copied().ok_or_else(|| {
                    Diagnostic::error(span, format!("unknown symbol `{}`", name))
                })?;
                let info = self.table.get(id).clone();
                match &info.kind {
                    SymbolKind::Fun { arity } => {
                        let args = self.expand_args(args, subst)?;
                        let values =
                            self.match_symbol_args(&info.qname, *arity, &None, &args, span)?;
                        TermNode::App {
                            path: path.clone(),
                            args: values
                                .into_iter()
                                .map(|v| Arg {
                                    label: None,
                                    span: v.span,
                                    value: ArgValue::Term(v),
                                })
                                .collect(),
                            persistent: *persistent,
                        }
                    }
                    SymbolKind::Pred { arity, labels } | SymbolKind::Apred { arity, labels } => {
                        let args = self.expand_args(args, subst)?;
                        let values =
                            self.match_symbol_args(&info.qname, *arity, labels, &args, span)?;
                        TermNode::App {
                            path: path.clone(),
                            args: values
                                .into_iter()
                                .map(|v| Arg {
                                    label: None,
                                    span: v.span,
                                    value: ArgValue::Term(v),
                                })
                                .collect(),
                            persistent: *persistent,
                        }
                    }
                    SymbolKind::TermMacro { sig, body }
                    | SymbolKind::PredMacro { sig, body }
                    | SymbolKind::ApredMacro { sig, body } => {
                        let args = self.expand_args(args, subst)?;
                        let sig = sig.clone();
                        let body = body.clone();
                        return self.expand_term_macro(id, &sig, &body, &args, span);
                    }
                    other => {
                        return Err(Diagnostic::error(
                            span,
                            format!("`{}` ({}) cannot be applied here", info.qname, other.describe()),
                        ))
                    }
                }
            }
            TermNode::Tuple(items) => TermNode::Tuple(
                items
                    .iter()
                    .map(|i| self.expand_term(i, subst))
                    .collect::<EResult<Vec<_>>>()?,
            ),
            TermNode::Assign { cell, value } => {
                let cell = self.map_write_cell(cell, subst, span)?;
                TermNode::Assign {
                    cell,
                    value: Box::new(self.expand_term(value, subst)?),
                }
            }
            TermNode::AssignPrune { cell } => {
                // `'c := .` rewrites to `'c := c`
                let value = match subst.vars.get(cell) {
                    Some(replacement) => replacement.clone(),
                    None => TermExpr::new(
                        TermNode::Var {
                            name: cell.clone(),
                            sort: None,
                        },
                        span,
                    ),
                };
                let cell = self.map_write_cell(cell, subst, span)?;
                TermNode::Assign {
                    cell,
                    value: Box::new(value),
                }
            }
            TermNode::Undef { cell } => TermNode::Undef {
                cell: self.map_write_cell(cell, subst, span)?,
            },
            TermNode::NamedPattern { term, name } => {
                let name = match subst.vars.get(name) {
                    Some(TermExpr {
                        node: TermNode::Var { name: n, .. },
                        ..
                    }) => n.clone(),
                    Some(other) => {
                        return Err(Diagnostic::error(
                            other.span,
                            "`as` binder must remain a variable after expansion",
                        ))
                    }
                    None => name.clone(),
                };
                TermNode::NamedPattern {
                    term: Box::new(self.expand_term(term, subst)?),
                    name,
                }
            }
            TermNode::CellPattern { cell, term } => TermNode::CellPattern {
                cell: subst.cells.get(cell).cloned().unwrap_or_else(|| cell.clone()),
                term: Box::new(self.expand_term(term, subst)?),
            },
            TermNode::Quantified { quant, vars, body } => {
                let mut inner = subst.clone();
                for (n, _) in vars {
                    inner.vars.remove(n);
                }
                TermNode::Quantified {
                    quant: *quant,
                    vars: vars.clone(),
                    body: Box::new(self.expand_term(body, &inner)?),
                }
            }
            TermNode::At { fact, time } => TermNode::At {
                fact: Box::new(self.expand_term(fact, subst)?),
                time: Box::new(self.expand_term(time, subst)?),
            },
            TermNode::Binary { op, lhs, rhs } => TermNode::Binary {
                op: *op,
                lhs: Box::new(self.expand_term(lhs, subst)?),
                rhs: Box::new(self.expand_term(rhs, subst)?),
            },
            TermNode::Not(inner) => TermNode::Not(Box::new(self.expand_term(inner, subst)?)),
        };
        Ok(TermExpr::new(node, span))
    }

    fn map_write_cell(&self, cell: &str, subst: &Subst, span: Span) -> EResult<String> {
        match subst.cells.get(cell) {
            Some(mapped) => {
                if subst.rw.contains(cell) {
                    Ok(mapped.clone())
                } else {
                    Err(Diagnostic::error(
                        span,
                        format!(
                            "cell parameter `'{}` is read-only; mark it `rw` to allow writes",
                            cell
                        ),
                    ))
                }
            }
            None => Ok(cell.to_string()),
        }
    }

    fn expand_args(&mut self, args: &[Arg], subst: &Subst) -> EResult<Vec<Arg>> {
        args.iter()
            .map(|a| {
                Ok(Arg {
                    label: a.label.clone(),
                    span: a.span,
                    value: match &a.value {
                        ArgValue::Term(t) => ArgValue::Term(self.expand_term(t, subst)?),
                        other => other.clone(),
                    },
                })
            })
            .collect()
    }

    fn expand_rule(&mut self, rule: &RuleExpr, subst: &Subst) -> EResult<RuleExpr> {
        let premise = rule
            .premise
            .iter()
            .map(|t| self.expand_term(t, subst))
            .collect::<EResult<Vec<_>>>()?;
        // rule-level lets expand into the action/conclusion scope
        let mut inner = subst.clone();
        for l in &rule.lets {
            match l {
                RuleLet::Binding { name, value } => {
                    let value = self.expand_term(value, &inner)?;
                    inner.vars.insert(name.clone(), value);
                }
                RuleLet::Macro { sig, value } => {
                    inner
                        .macros
                        .push((sig.name.clone(), sig.clone(), value.clone()));
                }
            }
        }
        let actions = rule
            .actions
            .iter()
            .map(|t| self.expand_term(t, &inner))
            .collect::<EResult<Vec<_>>>()?;
        let conclusion = rule
            .conclusion
            .iter()
            .map(|t| self.expand_term(t, &inner))
            .collect::<EResult<Vec<_>>>()?;
        Ok(RuleExpr {
            premise,
            actions,
            conclusion,
            lets: Vec::new(),
            annotation: rule.annotation.clone(),
            span: rule.span,
        })
    }

    fn expand_process(&mut self, p: &ProcessExpr, subst: &Subst) -> EResult<ProcessExpr> {
        let span = p.span;
        let node = match &p.node {
            ProcessNode::Null => ProcessNode::Null,
            ProcessNode::Break(l) => ProcessNode::Break(l.clone()),
            ProcessNode::Continue(l) => ProcessNode::Continue(l.clone()),
            ProcessNode::Step { rule, rest } => ProcessNode::Step {
                rule: self.expand_rule(rule, subst)?,
                rest: Box::new(self.expand_process(rest, subst)?),
            },
            ProcessNode::Choice { branches, rest } => ProcessNode::Choice {
                branches: branches
                    .iter()
                    .map(|b| self.expand_process(b, subst))
                    .collect::<EResult<Vec<_>>>()?,
                rest: Box::new(self.expand_process(rest, subst)?),
            },
            ProcessNode::Scoped { body, rest } => ProcessNode::Scoped {
                body: Box::new(self.expand_process(body, subst)?),
                rest: Box::new(self.expand_process(rest, subst)?),
            },
            ProcessNode::While {
                cond,
                body,
                rest,
                label,
            } => ProcessNode::While {
                cond: self.expand_cond(cond, subst)?,
                body: Box::new(self.expand_process(body, subst)?),
                rest: Box::new(self.expand_process(rest, subst)?),
                label: label.clone(),
            },
            ProcessNode::Loop { body, rest, label } => ProcessNode::Loop {
                body: Box::new(self.expand_process(body, subst)?),
                rest: Box::new(self.expand_process(rest, subst)?),
                label: label.clone(),
            },
            ProcessNode::IfThenElse {
                cond,
                then_branch,
                else_branch,
                rest,
            } => ProcessNode::IfThenElse {
                cond: self.expand_cond(cond, subst)?,
                then_branch: Box::new(self.expand_process(then_branch, subst)?),
                else_branch: Box::new(self.expand_process(else_branch, subst)?),
                rest: Box::new(self.expand_process(rest, subst)?),
            },
            ProcessNode::LetIn { name, value, rest } => {
                let value = self.expand_term(value, subst)?;
                let mut inner = subst.clone();
                inner.vars.insert(name.clone(), value);
                return self.expand_process(rest, &inner);
            }
            ProcessNode::MacroLetIn { sig, value, rest } => {
                let mut inner = subst.clone();
                inner
                    .macros
                    .push((sig.name.clone(), sig.clone(), value.clone()));
                return self.expand_process(rest, &inner);
            }
            ProcessNode::MacroCall { path, args, rest } => {
                let qname = &path.segments[0];
                let id = self.table.by_qname.get(qname).copied().ok_or_else(|| {
                    Diagnostic::error(span, format!("unknown process macro `{}`", qname))
                })?;
                let info = self.table.get(id).clone();
                let (sig, body) = match &info.kind {
                    SymbolKind::ProcessMacro { sig, body } => (sig.clone(), body.clone()),
                    other => {
                        return Err(Diagnostic::error(
                            span,
                            format!(
                                "`{}` ({}) cannot be called as a process macro",
                                info.qname,
                                other.describe()
                            ),
                        ))
                    }
                };
                let args = self.expand_args(args, subst)?;
                let values = self.match_args(&info.qname, &sig.params, &args, span)?;
                let mut body_vars = BTreeSet::new();
                collect_process_vars(&body, &mut body_vars);
                let params: BTreeSet<String> =
                    sig.params.iter().map(|p| p.name.clone()).collect();
                let mut arg_vars = BTreeSet::new();
                for v in &values {
                    collect_vars(v, &mut arg_vars);
                }
                let mut inner = Subst {
                    vars: self.hygiene_renames(&body_vars, &params, &arg_vars),
                    ..Subst::default()
                };
                for (param, v) in sig.params.iter().zip(values) {
                    if param.cell {
                        match &v.node {
                            TermNode::Cell(c) => {
                                inner.cells.insert(param.name.clone(), c.clone());
                                if param.rw {
                                    inner.rw.insert(param.name.clone());
                                }
                            }
                            _ => {
                                return Err(Diagnostic::error(
                                    v.span,
                                    format!(
                                        "cell parameter `'{}` of `{}` requires a cell argument",
                                        param.name, info.qname
                                    ),
                                ))
                            }
                        }
                    } else {
                        inner.vars.insert(param.name.clone(), v);
                    }
                }
                self.enter(id, span)?;
                let expanded_body = self.expand_process(&body, &inner);
                self.stack.pop();
                let expanded_body = expanded_body?;
                let rest = self.expand_process(rest, subst)?;
                return Ok(concat_process(expanded_body, &rest));
            }
        };
        Ok(ProcessExpr { node, span })
    }

    fn expand_cond(&mut self, c: &Cond, subst: &Subst) -> EResult<Cond> {
        Ok(Cond {
            cell: subst.cells.get(&c.cell).cloned().unwrap_or_else(|| c.cell.clone()),
            pattern: self.expand_term(&c.pattern, subst)?,
            negated: c.negated,
            span: c.span,
        })
    }
}
