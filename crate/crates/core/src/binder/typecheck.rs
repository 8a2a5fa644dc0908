//! Type checking of the flat system. Implements the term and rule
//! judgments (string literals are `bits`, uninterpreted functions are
//! `bits x .. -> bits`, predicates yield facts, action predicates
//! yield afacts, assignments are statements, `cas` is a pattern match,
//! premises hold patmatch/fact items, actions hold afacts, conclusions
//! hold facts/statements) plus the schematic-variable restriction
//! `schevars(ruleL) >= schevars(ruleAR)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::binder::expand::FlatSystem;
use crate::binder::resolve::{SymbolKind, RESERVED_SYMBOLS};
use crate::diag::Diagnostic;
use crate::syntax::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemType {
    Bits,
    Temporal,
    Cell,
    Fact,
    Afact,
    Statement,
    Patmatch,
    Formula,
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SemType::Bits => "bits",
            SemType::Temporal => "temporal",
            SemType::Cell => "cell",
            SemType::Fact => "fact",
            SemType::Afact => "afact",
            SemType::Statement => "statement",
            SemType::Patmatch => "patmatch",
            SemType::Formula => "formula",
        };
        write!(f, "{}", s)
    }
}

struct Checker<'s> {
    system: &'s FlatSystem,
    diags: Vec<Diagnostic>,
    /// per-rule variable sorts, unified across occurrences
    var_sorts: BTreeMap<String, Sort>,
}

pub fn typecheck(system: &FlatSystem) -> Result<(), Vec<Diagnostic>> {
    let mut ck = Checker {
        system,
        diags: Vec::new(),
        var_sorts: BTreeMap::new(),
    };
    for p in &system.processes {
        ck.check_process(&p.body);
    }
    for v in &system.passthrough {
        if let Some(f) = &v.formula {
            let ty = ck.type_of(f, true);
            if let Some(ty) = ty {
                if ty != SemType::Formula && ty != SemType::Afact {
                    ck.diags.push(Diagnostic::error(
                        f.span,
                        format!("expected formula, found {}", ty),
                    ));
                }
            }
        }
    }
    if ck.diags.is_empty() {
        Ok(())
    } else {
        Err(ck.diags)
    }
}

impl<'s> Checker<'s> {
    fn error(&mut self, span: crate::diag::Span, msg: String) -> Option<SemType> {
        self.diags.push(Diagnostic::error(span, msg));
        None
    }

    fn check_process(&mut self, p: &ProcessExpr) {
        match &p.node {
            ProcessNode::Null | ProcessNode::Break(_) | ProcessNode::Continue(_) => {}
            ProcessNode::Step { rule, rest } => {
                self.check_rule(rule);
                self.check_process(rest);
            }
            ProcessNode::Choice { branches, rest } => {
                for b in branches {
                    self.check_process(b);
                }
                self.check_process(rest);
            }
            ProcessNode::Scoped { body, rest } => {
                self.check_process(body);
                self.check_process(rest);
            }
            ProcessNode::While {
                cond, body, rest, ..
            } => {
                self.check_cond(cond);
                self.check_process(body);
                self.check_process(rest);
            }
            ProcessNode::Loop { body, rest, .. } => {
                self.check_process(body);
                self.check_process(rest);
            }
            ProcessNode::IfThenElse {
                cond,
                then_branch,
                else_branch,
                rest,
            } => {
                self.check_cond(cond);
                self.check_process(then_branch);
                self.check_process(else_branch);
                self.check_process(rest);
            }
            ProcessNode::MacroCall { path, .. } => {
                // the expander removes these; reaching one is a pipeline bug
                self.diags.push(Diagnostic::error(
                    path.span,
                    "internal: macro call survived expansion",
                ));
            }
            ProcessNode::LetIn { rest, .. } | ProcessNode::MacroLetIn { rest, .. } => {
                self.diags.push(Diagnostic::error(
                    p.span,
                    "internal: let binding survived expansion",
                ));
                self.check_process(rest);
            }
        }
    }

    fn check_cond(&mut self, cond: &Cond) {
        self.var_sorts.clear();
        self.expect(&cond.pattern, SemType::Bits);
    }

    fn check_rule(&mut self, rule: &RuleExpr) {
        self.var_sorts.clear();
        let mut cas_cells: BTreeSet<&str> = BTreeSet::new();
        for item in &rule.premise {
            let inner = strip_named(item);
            match &inner.node {
                TermNode::CellPattern { cell, .. } => {
                    if !cas_cells.insert(cell) {
                        self.error(
                            item.span,
                            format!("cell `'{}` is pattern-matched twice in one premise", cell),
                        );
                    }
                    self.expect(item, SemType::Patmatch);
                }
                _ => {
                    self.expect_one_of(item, &[SemType::Patmatch, SemType::Fact], "fact or cell pattern");
                }
            }
        }
        for item in &rule.actions {
            self.expect(item, SemType::Afact);
        }
        for item in &rule.conclusion {
            self.expect_one_of(item, &[SemType::Fact, SemType::Statement], "fact or statement");
        }
        // schevars(ruleL) must cover schevars(ruleAR); public variables
        // and cells are exempt
        let mut bound = BTreeSet::new();
        for item in &rule.premise {
            schematic_vars(item, &mut bound);
        }
        let mut used = BTreeSet::new();
        for item in rule.actions.iter().chain(rule.conclusion.iter()) {
            schematic_vars(item, &mut used);
        }
        for (name, span) in used {
            let public = matches!(self.var_sorts.get(name), Some(Sort::Public));
            if !public && !bound.iter().any(|(n, _)| *n == name) {
                self.error(
                    span,
                    format!(
                        "schematic variable `{}` is used in actions/conclusion but not bound in the premise",
                        name
                    ),
                );
            }
        }
    }

    fn expect(&mut self, t: &TermExpr, want: SemType) -> Option<SemType> {
        let got = self.type_of(t, false)?;
        if got == want || (want == SemType::Bits && got == SemType::Cell) {
            Some(got)
        } else {
            self.error(t.span, format!("expected {}, found {}", want, got))
        }
    }

    fn expect_one_of(&mut self, t: &TermExpr, wants: &[SemType], desc: &str) -> Option<SemType> {
        let got = self.type_of(t, false)?;
        if wants.contains(&got) {
            Some(got)
        } else {
            self.error(t.span, format!("expected {}, found {}", desc, got))
        }
    }

    fn unify_sort(&mut self, t: &TermExpr, name: &str, sort: Option<Sort>) -> Option<SemType> {
        if name.starts_with(crate::binder::resolve::CELL_VAR_PREFIX) {
            return self.error(
                t.span,
                format!(
                    "variable `{}` uses the reserved prefix `{}`",
                    name,
                    crate::binder::resolve::CELL_VAR_PREFIX
                ),
            );
        }
        if RESERVED_SYMBOLS.contains(&name) {
            return self.error(t.span, format!("`{}` is a reserved symbol", name));
        }
        if let Some(s) = sort {
            match self.var_sorts.get(name) {
                Some(prev) if *prev != s => {
                    return self.error(
                        t.span,
                        format!("variable `{}` used with conflicting sorts in one rule", name),
                    );
                }
                _ => {
                    self.var_sorts.insert(name.to_string(), s);
                }
            }
        }
        match sort.or_else(|| self.var_sorts.get(name).copied()) {
            Some(Sort::Temporal) => Some(SemType::Temporal),
            _ => Some(SemType::Bits),
        }
    }

    fn type_of(&mut self, t: &TermExpr, formula_pos: bool) -> Option<SemType> {
        match &t.node {
            TermNode::Var { name, sort } => self.unify_sort(t, name, *sort),
            TermNode::StrLit(_) => Some(SemType::Bits),
            TermNode::Cell(_) => Some(SemType::Cell),
            TermNode::PathRef(p) => self.error(
                t.span,
                format!("internal: unexpanded reference `{}`", p.dotted()),
            ),
            TermNode::LetIn { .. } | TermNode::MacroLetIn { .. } => {
                self.error(t.span, "internal: let binding survived expansion".to_string())
            }
            TermNode::App {
                path,
                args,
                persistent,
            } => {
                let qname = &path.segments[0];
                let info = match self.system.symbols.lookup(qname) {
                    Some(i) => i.clone(),
                    None => {
                        return self.error(t.span, format!("unknown symbol `{}`", qname));
                    }
                };
                let (arity, out) = match &info.kind {
                    SymbolKind::Fun { arity } => (*arity, SemType::Bits),
                    SymbolKind::Pred { arity, .. } => (*arity, SemType::Fact),
                    SymbolKind::Apred { arity, .. } => (*arity, SemType::Afact),
                    other => {
                        return self.error(
                            t.span,
                            format!("`{}` ({}) cannot be applied", info.qname, other.describe()),
                        )
                    }
                };
                if *persistent && out != SemType::Fact {
                    self.error(
                        t.span,
                        format!("persistence marker `!` requires a fact, found {}", out),
                    );
                }
                if args.len() != arity {
                    return self.error(
                        t.span,
                        format!(
                            "`{}` expects {} argument(s), found {}",
                            info.qname,
                            arity,
                            args.len()
                        ),
                    );
                }
                for a in args {
                    match &a.value {
                        ArgValue::Term(arg) => {
                            // Fr requires a fresh-sorted variable argument
                            if qname == "Fr" {
                                match &arg.node {
                                    TermNode::Var { .. } => {
                                        let got = self.type_of(arg, false)?;
                                        if got != SemType::Bits {
                                            self.error(
                                                arg.span,
                                                format!("expected fresh variable, found {}", got),
                                            );
                                        }
                                    }
                                    _ => {
                                        self.error(
                                            arg.span,
                                            "Fr takes a fresh variable argument".to_string(),
                                        );
                                    }
                                }
                            } else {
                                self.expect(arg, SemType::Bits)?;
                            }
                        }
                        _ => {
                            self.error(a.span, "internal: unexpanded argument prune".to_string());
                        }
                    }
                }
                Some(out)
            }
            TermNode::Tuple(items) => {
                for i in items {
                    self.expect(i, SemType::Bits)?;
                }
                Some(SemType::Bits)
            }
            TermNode::Assign { value, .. } => {
                self.expect(value, SemType::Bits)?;
                Some(SemType::Statement)
            }
            TermNode::AssignPrune { .. } => {
                self.error(t.span, "internal: unexpanded assignment prune".to_string())
            }
            TermNode::Undef { .. } => Some(SemType::Statement),
            TermNode::NamedPattern { term, name } => {
                let ty = self.type_of(term, false)?;
                self.unify_sort(t, name, None)?;
                Some(ty)
            }
            TermNode::CellPattern { term, .. } => {
                self.expect(term, SemType::Bits)?;
                Some(SemType::Patmatch)
            }
            TermNode::Quantified { vars, body, .. } => {
                let saved = self.var_sorts.clone();
                for (n, s) in vars {
                    self.var_sorts.insert(n.clone(), *s);
                }
                let ty = self.type_of(body, true);
                self.var_sorts = saved;
                match ty? {
                    SemType::Formula | SemType::Afact => Some(SemType::Formula),
                    other => self.error(body.span, format!("expected formula, found {}", other)),
                }
            }
            TermNode::At { fact, time } => {
                let fty = self.type_of(fact, false)?;
                if fty != SemType::Afact {
                    self.error(fact.span, format!("expected afact, found {}", fty));
                }
                let tty = self.type_of(time, true)?;
                if tty != SemType::Temporal {
                    self.error(time.span, format!("expected temporal, found {}", tty));
                }
                Some(SemType::Formula)
            }
            TermNode::Binary { op, lhs, rhs } => match op {
                BinOp::Eq => {
                    self.expect(lhs, SemType::Bits)?;
                    self.expect(rhs, SemType::Bits)?;
                    Some(SemType::Formula)
                }
                _ => {
                    if !formula_pos {
                        return self.error(
                            t.span,
                            "logical connectives are only valid in formulas".to_string(),
                        );
                    }
                    for side in [lhs, rhs] {
                        match self.type_of(side, true)? {
                            SemType::Formula | SemType::Afact => {}
                            other => {
                                self.error(
                                    side.span,
                                    format!("expected formula, found {}", other),
                                );
                            }
                        }
                    }
                    Some(SemType::Formula)
                }
            },
            TermNode::Not(inner) => {
                match self.type_of(inner, true)? {
                    SemType::Formula | SemType::Afact => {}
                    other => {
                        self.error(inner.span, format!("expected formula, found {}", other));
                    }
                }
                Some(SemType::Formula)
            }
        }
    }
}

fn strip_named(t: &TermExpr) -> &TermExpr {
    match &t.node {
        TermNode::NamedPattern { term, .. } => strip_named(term),
        _ => t,
    }
}

/// Variables occurring in a term, with the span of one occurrence.
fn schematic_vars<'a>(t: &'a TermExpr, out: &mut BTreeSet<(&'a str, crate::diag::Span)>) {
    match &t.node {
        TermNode::Var { name, .. } => {
            if !out.iter().any(|(n, _)| n == name) {
                out.insert((name, t.span));
            }
        }
        TermNode::StrLit(_)
        | TermNode::Cell(_)
        | TermNode::PathRef(_)
        | TermNode::AssignPrune { .. }
        | TermNode::Undef { .. } => {}
        TermNode::LetIn { value, body, .. } => {
            schematic_vars(value, out);
            schematic_vars(body, out);
        }
        TermNode::MacroLetIn { value, body, .. } => {
            schematic_vars(value, out);
            schematic_vars(body, out);
        }
        TermNode::App { args, .. } => {
            for a in args {
                if let ArgValue::Term(t) = &a.value {
                    schematic_vars(t, out);
                }
            }
        }
        TermNode::Tuple(items) => {
            for i in items {
                schematic_vars(i, out);
            }
        }
        TermNode::Assign { value, .. } => schematic_vars(value, out),
        TermNode::NamedPattern { term, name } => {
            if !out.iter().any(|(n, _)| n == name) {
                out.insert((name, t.span));
            }
            schematic_vars(term, out);
        }
        TermNode::CellPattern { term, .. } => schematic_vars(term, out),
        TermNode::Quantified { vars, body, .. } => {
            let mut inner = BTreeSet::new();
            schematic_vars(body, &mut inner);
            for (n, sp) in inner {
                if !vars.iter().any(|(v, _)| v == n) {
                    out.insert((n, sp));
                }
            }
        }
        TermNode::At { fact, time } => {
            schematic_vars(fact, out);
            schematic_vars(time, out);
        }
        TermNode::Binary { lhs, rhs, .. } => {
            schematic_vars(lhs, out);
            schematic_vars(rhs, out);
        }
        TermNode::Not(inner) => schematic_vars(inner, out),
    }
}
