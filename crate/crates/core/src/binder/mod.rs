//! Name resolution, macro expansion and type checking: turns a parsed
//! module tree into a flat, macro-free [`FlatSystem`].

pub mod expand;
pub mod resolve;
#[cfg(test)]
mod tests;
pub mod typecheck;

use std::collections::BTreeMap;

use crate::diag::Diagnostic;
use crate::syntax::ast::*;

pub use expand::{expand_macros, FlatProcess, FlatSystem};
pub use resolve::{
    resolve_modules, MapLoader, ModuleLoader, Resolved, SymbolId, SymbolInfo, SymbolKind,
    SymbolTable, VerbatimBlock, BUILTIN_FACTS, CELL_VAR_PREFIX, RESERVED_SYMBOLS,
};
pub use typecheck::{typecheck, SemType};

/// Full front half of the pipeline: resolve, expand, type-check, and
/// eliminate `as` patterns by substitution so downstream passes only
/// see plain terms.
pub fn bind(
    root: &SourceModule,
    loader: &mut dyn ModuleLoader,
) -> Result<FlatSystem, Vec<Diagnostic>> {
    let resolved = resolve_modules(root, loader)?;
    let mut flat = expand_macros(resolved)?;
    typecheck(&flat)?;
    desugar_patterns(&mut flat).map_err(|d| vec![d])?;
    Ok(flat)
}

/// Bind a standalone module with no imports.
pub fn bind_single(root: &SourceModule) -> Result<FlatSystem, Vec<Diagnostic>> {
    let mut loader = MapLoader {
        modules: BTreeMap::new(),
    };
    bind(root, &mut loader)
}

/// Replace every `t as x` by `t`, substituting `x := t` throughout the
/// enclosing rule.
pub fn desugar_patterns(flat: &mut FlatSystem) -> Result<(), Diagnostic> {
    for p in &mut flat.processes {
        desugar_process(&mut p.body)?;
    }
    Ok(())
}

fn desugar_process(p: &mut ProcessExpr) -> Result<(), Diagnostic> {
    match &mut p.node {
        ProcessNode::Null | ProcessNode::Break(_) | ProcessNode::Continue(_) => Ok(()),
        ProcessNode::Step { rule, rest } => {
            desugar_rule(rule)?;
            desugar_process(rest)
        }
        ProcessNode::Choice { branches, rest } => {
            for b in branches {
                desugar_process(b)?;
            }
            desugar_process(rest)
        }
        ProcessNode::Scoped { body, rest } => {
            desugar_process(body)?;
            desugar_process(rest)
        }
        ProcessNode::While {
            cond, body, rest, ..
        } => {
            desugar_cond(cond)?;
            desugar_process(body)?;
            desugar_process(rest)
        }
        ProcessNode::Loop { body, rest, .. } => {
            desugar_process(body)?;
            desugar_process(rest)
        }
        ProcessNode::IfThenElse {
            cond,
            then_branch,
            else_branch,
            rest,
        } => {
            desugar_cond(cond)?;
            desugar_process(then_branch)?;
            desugar_process(else_branch)?;
            desugar_process(rest)
        }
        ProcessNode::MacroCall { .. }
        | ProcessNode::LetIn { .. }
        | ProcessNode::MacroLetIn { .. } => Err(Diagnostic::error(
            p.span,
            "internal: macro node survived expansion",
        )),
    }
}

fn desugar_cond(cond: &mut Cond) -> Result<(), Diagnostic> {
    let mut bindings = BTreeMap::new();
    let stripped = strip_as(&cond.pattern, &mut bindings);
    let bindings = close_bindings(bindings, cond.span)?;
    cond.pattern = substitute_vars(&stripped, &bindings);
    Ok(())
}

fn desugar_rule(rule: &mut RuleExpr) -> Result<(), Diagnostic> {
    let mut bindings = BTreeMap::new();
    let premise: Vec<TermExpr> = rule.premise.iter().map(|t| strip_as(t, &mut bindings)).collect();
    let actions: Vec<TermExpr> = rule.actions.iter().map(|t| strip_as(t, &mut bindings)).collect();
    let conclusion: Vec<TermExpr> = rule
        .conclusion
        .iter()
        .map(|t| strip_as(t, &mut bindings))
        .collect();
    if bindings.is_empty() {
        return Ok(());
    }
    let bindings = close_bindings(bindings, rule.span)?;
    rule.premise = premise.iter().map(|t| substitute_vars(t, &bindings)).collect();
    rule.actions = actions.iter().map(|t| substitute_vars(t, &bindings)).collect();
    rule.conclusion = conclusion
        .iter()
        .map(|t| substitute_vars(t, &bindings))
        .collect();
    Ok(())
}

/// Iterate substitution over the binding map until values are free of
/// bound names (handles `F(x as m), G(<m, y> as n)` chains).
fn close_bindings(
    mut bindings: BTreeMap<String, TermExpr>,
    span: crate::diag::Span,
) -> Result<BTreeMap<String, TermExpr>, Diagnostic> {
    // drop trivial self-bindings `x as x`
    bindings.retain(|name, value| !matches!(&value.node, TermNode::Var { name: n, .. } if n == name));
    let rounds = bindings.len() + 1;
    for _ in 0..rounds {
        let snapshot = bindings.clone();
        let mut changed = false;
        for value in bindings.values_mut() {
            let new = substitute_vars(value, &snapshot);
            if new != *value {
                *value = new;
                changed = true;
            }
        }
        if !changed {
            return Ok(bindings);
        }
    }
    Err(Diagnostic::error(span, "cyclic `as` pattern bindings"))
}

fn strip_as(t: &TermExpr, bindings: &mut BTreeMap<String, TermExpr>) -> TermExpr {
    let node = match &t.node {
        TermNode::NamedPattern { term, name } => {
            let inner = strip_as(term, bindings);
            bindings.insert(name.clone(), inner.clone());
            return inner;
        }
        TermNode::Var { .. }
        | TermNode::StrLit(_)
        | TermNode::Cell(_)
        | TermNode::PathRef(_)
        | TermNode::AssignPrune { .. }
        | TermNode::Undef { .. } => t.node.clone(),
        TermNode::LetIn { name, value, body } => TermNode::LetIn {
            name: name.clone(),
            value: Box::new(strip_as(value, bindings)),
            body: Box::new(strip_as(body, bindings)),
        },
        TermNode::MacroLetIn { sig, value, body } => TermNode::MacroLetIn {
            sig: sig.clone(),
            value: Box::new(strip_as(value, bindings)),
            body: Box::new(strip_as(body, bindings)),
        },
        TermNode::App {
            path,
            args,
            persistent,
        } => TermNode::App {
            path: path.clone(),
            args: args
                .iter()
                .map(|a| Arg {
                    label: a.label.clone(),
                    span: a.span,
                    value: match &a.value {
                        ArgValue::Term(t) => ArgValue::Term(strip_as(t, bindings)),
                        other => other.clone(),
                    },
                })
                .collect(),
            persistent: *persistent,
        },
        TermNode::Tuple(items) => {
            TermNode::Tuple(items.iter().map(|i| strip_as(i, bindings)).collect())
        }
        TermNode::Assign { cell, value } => TermNode::Assign {
            cell: cell.clone(),
            value: Box::new(strip_as(value, bindings)),
        },
        TermNode::CellPattern { cell, term } => TermNode::CellPattern {
            cell: cell.clone(),
            term: Box::new(strip_as(term, bindings)),
        },
        TermNode::Quantified { quant, vars, body } => TermNode::Quantified {
            quant: *quant,
            vars: vars.clone(),
            body: Box::new(strip_as(body, bindings)),
        },
        TermNode::At { fact, time } => TermNode::At {
            fact: Box::new(strip_as(fact, bindings)),
            time: Box::new(strip_as(time, bindings)),
        },
        TermNode::Binary { op, lhs, rhs } => TermNode::Binary {
            op: *op,
            lhs: Box::new(strip_as(lhs, bindings)),
            rhs: Box::new(strip_as(rhs, bindings)),
        },
        TermNode::Not(inner) => TermNode::Not(Box::new(strip_as(inner, bindings))),
    };
    TermExpr::new(node, t.span)
}

/// Capture-free variable substitution (no binders remain at this stage
/// except quantifiers, whose bound names shadow).
pub fn substitute_vars(t: &TermExpr, map: &BTreeMap<String, TermExpr>) -> TermExpr {
    let node = match &t.node {
        TermNode::Var { name, .. } => match map.get(name) {
            Some(v) => return v.clone(),
            None => t.node.clone(),
        },
        TermNode::StrLit(_)
        | TermNode::Cell(_)
        | TermNode::PathRef(_)
        | TermNode::AssignPrune { .. }
        | TermNode::Undef { .. } => t.node.clone(),
        TermNode::LetIn { name, value, body } => TermNode::LetIn {
            name: name.clone(),
            value: Box::new(substitute_vars(value, map)),
            body: Box::new(substitute_vars(body, map)),
        },
        TermNode::MacroLetIn { sig, value, body } => TermNode::MacroLetIn {
            sig: sig.clone(),
            value: Box::new(substitute_vars(value, map)),
            body: Box::new(substitute_vars(body, map)),
        },
        TermNode::App {
            path,
            args,
            persistent,
        } => TermNode::App {
            path: path.clone(),
            args: args
                .iter()
                .map(|a| Arg {
                    label: a.label.clone(),
                    span: a.span,
                    value: match &a.value {
                        ArgValue::Term(t) => ArgValue::Term(substitute_vars(t, map)),
                        other => other.clone(),
                    },
                })
                .collect(),
            persistent: *persistent,
        },
        TermNode::Tuple(items) => {
            TermNode::Tuple(items.iter().map(|i| substitute_vars(i, map)).collect())
        }
        TermNode::Assign { cell, value } => TermNode::Assign {
            cell: cell.clone(),
            value: Box::new(substitute_vars(value, map)),
        },
        TermNode::NamedPattern { term, name } => TermNode::NamedPattern {
            term: Box::new(substitute_vars(term, map)),
            name: name.clone(),
        },
        TermNode::CellPattern { cell, term } => TermNode::CellPattern {
            cell: cell.clone(),
            term: Box::new(substitute_vars(term, map)),
        },
        TermNode::Quantified { quant, vars, body } => {
            let mut inner = map.clone();
            for (n, _) in vars {
                inner.remove(n);
            }
            TermNode::Quantified {
                quant: *quant,
                vars: vars.clone(),
                body: Box::new(substitute_vars(body, &inner)),
            }
        }
        TermNode::At { fact, time } => TermNode::At {
            fact: Box::new(substitute_vars(fact, map)),
            time: Box::new(substitute_vars(time, map)),
        },
        TermNode::Binary { op, lhs, rhs } => TermNode::Binary {
            op: *op,
            lhs: Box::new(substitute_vars(lhs, map)),
            rhs: Box::new(substitute_vars(rhs, map)),
        },
        TermNode::Not(inner) => TermNode::Not(Box::new(substitute_vars(inner, map))),
    };
    TermExpr::new(node, t.span)
}
