//! Deterministic `.spthy` text emission. Symbol names are rendered by
//! basename when unique, underscore-qualified otherwise; annotations
//! survive as comments above their rules; user restriction and lemma
//! blocks pass through verbatim, followed by the generated restriction
//! blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::binder::{FlatSystem, SymbolKind, VerbatimBlock};
use crate::cfg::ProcessGraph;
use crate::syntax::ast::{Sort, VerbatimKind};

use super::{cvar, MsrRule, TgFact, TgTerm};

#[derive(Debug, Clone, Default)]
pub struct EmitOptions {
    pub theory_name: String,
    pub builtins: Option<String>,
}

/// Map qualified symbol names to Tamarin identifiers: basename when
/// globally unique, dots replaced by underscores otherwise.
fn symbol_renames(flat: &FlatSystem) -> BTreeMap<String, String> {
    let mut by_base: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for info in &flat.symbols.entries {
        let base = info.qname.rsplit('.').next().unwrap();
        by_base.entry(base).or_default().push(&info.qname);
    }
    let mut out = BTreeMap::new();
    for (base, qnames) in by_base {
        if qnames.len() == 1 {
            out.insert(qnames[0].to_string(), base.to_string());
        } else {
            for q in qnames {
                out.insert(q.to_string(), q.replace('.', "_"));
            }
        }
    }
    out
}

fn render_term(t: &TgTerm, renames: &BTreeMap<String, String>, out: &mut String) {
    match t {
        TgTerm::Var { name, sort } => {
            match sort {
                Some(Sort::Fresh) => out.push('~'),
                Some(Sort::Public) => out.push('$'),
                Some(Sort::Temporal) => out.push('#'),
                _ => {}
            }
            out.push_str(name);
        }
        TgTerm::Str(s) => {
            out.push('\'');
            out.push_str(s);
            out.push('\'');
        }
        TgTerm::App(name, args) => {
            out.push_str(renames.get(name).map(String::as_str).unwrap_or(name));
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_term(a, renames, out);
            }
            out.push(')');
        }
        TgTerm::Tuple(items) => {
            out.push('<');
            for (i, a) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_term(a, renames, out);
            }
            out.push('>');
        }
    }
}

fn render_fact(f: &TgFact, renames: &BTreeMap<String, String>, out: &mut String) {
    if f.persistent {
        out.push('!');
    }
    out.push_str(renames.get(&f.name).map(String::as_str).unwrap_or(&f.name));
    out.push('(');
    for (i, a) in f.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        render_term(a, renames, out);
    }
    out.push(')');
}

fn render_fact_list(facts: &[TgFact], renames: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (i, f) in facts.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        render_fact(f, renames, &mut out);
    }
    out
}

/// Emit the full theory text. Output is a pure function of its inputs.
pub fn emit_spthy(
    rules: &[MsrRule],
    flat: &FlatSystem,
    g: &ProcessGraph,
    options: &EmitOptions,
) -> String {
    let renames = symbol_renames(flat);
    let mut out = String::new();
    let _ = writeln!(out, "theory {}", options.theory_name);
    out.push_str("begin\n\n");
    if let Some(b) = &options.builtins {
        let _ = writeln!(out, "builtins: {}\n", b);
    }

    let funs: Vec<String> = flat
        .symbols
        .entries
        .iter()
        .filter_map(|info| match info.kind {
            SymbolKind::Fun { arity } => Some(format!(
                "{}/{}",
                renames.get(&info.qname).unwrap_or(&info.qname),
                arity
            )),
            _ => None,
        })
        .collect();
    if !funs.is_empty() {
        let mut sorted = funs;
        sorted.sort();
        let _ = writeln!(out, "functions: {}\n", sorted.join(", "));
    }

    // user restrictions pass through verbatim, then generated ones
    for v in &flat.passthrough {
        if v.kind == VerbatimKind::Restriction {
            emit_verbatim(&mut out, v);
        }
    }
    let user_declares_neq = flat
        .symbols
        .entries
        .iter()
        .any(|i| i.qname.rsplit('.').next() == Some("Neq"));
    if g.neq_generated && !user_declares_neq {
        out.push_str("restriction Neq:\n    \"All x y #i . Neq(x, y) @ #i ==> not (x = y)\"\n\n");
    }
    for r in &g.restrictions {
        // restriction bodies are sort-erased so the formula unifies
        // with any action instance
        let pattern = match cvar(&r.pattern) {
            Ok(p) => erase_sorts(&p),
            Err(_) => continue,
        };
        let mut vars: BTreeSet<(String, Option<Sort>)> = BTreeSet::new();
        pattern.vars(&mut vars);
        let quantified: Vec<String> = std::iter::once("cell".to_string())
            .chain(vars.iter().map(|(n, _)| n.clone()))
            .collect();
        let mut pat_text = String::new();
        render_term(&pattern, &renames, &mut pat_text);
        let _ = writeln!(
            out,
            "restriction {}:\n    \"All {} #i . (({}(cell, {}) @ #i) ==> (not (cell = {})))\"\n",
            r.fact_name,
            quantified.join(" "),
            r.fact_name,
            pat_text,
            pat_text
        );
    }

    // rules, deduplicating generated names deterministically
    let mut used_names: BTreeMap<String, usize> = BTreeMap::new();
    for rule in rules {
        let count = used_names.entry(rule.name.clone()).or_insert(0);
        *count += 1;
        let name = if *count == 1 {
            rule.name.clone()
        } else {
            format!("{}__copy{}", rule.name, count)
        };
        if *count > 1 {
            let _ = writeln!(out, "// note: rule name collision resolved by suffix");
        }
        if let Some(anno) = &rule.annotation {
            let _ = writeln!(out, "// {}", anno);
        }
        let _ = writeln!(out, "rule {}:", name);
        let _ = writeln!(out, "    [ {} ]", render_fact_list(&rule.premise, &renames));
        if rule.actions.is_empty() {
            out.push_str("  -->\n");
        } else {
            let _ = writeln!(out, "  --[ {} ]->", render_fact_list(&rule.actions, &renames));
        }
        let _ = writeln!(out, "    [ {} ]\n", render_fact_list(&rule.conclusion, &renames));
    }

    for v in &flat.passthrough {
        if v.kind == VerbatimKind::Lemma {
            emit_verbatim(&mut out, v);
        }
    }

    out.push_str("end\n");
    out
}

fn erase_sorts(t: &TgTerm) -> TgTerm {
    match t {
        TgTerm::Var { name, .. } => TgTerm::var(name),
        TgTerm::Str(_) => t.clone(),
        TgTerm::App(n, args) => TgTerm::App(n.clone(), args.iter().map(erase_sorts).collect()),
        TgTerm::Tuple(items) => TgTerm::Tuple(items.iter().map(erase_sorts).collect()),
    }
}

fn emit_verbatim(out: &mut String, v: &VerbatimBlock) {
    let kw = match v.kind {
        VerbatimKind::Restriction => "restriction",
        VerbatimKind::Lemma => "lemma",
    };
    let body = v.text.trim();
    // Tamarin expects quoted formula bodies; preserve existing quotes
    if body.starts_with('"') {
        let _ = writeln!(out, "{} {}:\n    {}\n", kw, v.name, body);
    } else {
        let _ = writeln!(out, "{} {}:\n    \"{}\"\n", kw, v.name, body);
    }
}

/// Tamarin wellformedness pre-check: every non-public variable used in
/// actions or conclusions must occur in the premise.
pub fn wellformedness_violations(rules: &[MsrRule]) -> Vec<String> {
    let mut problems = Vec::new();
    for rule in rules {
        let mut bound: BTreeSet<(String, Option<Sort>)> = BTreeSet::new();
        for f in &rule.premise {
            for a in &f.args {
                a.vars(&mut bound);
            }
        }
        let bound_names: BTreeSet<&String> = bound.iter().map(|(n, _)| n).collect();
        let mut used: BTreeSet<(String, Option<Sort>)> = BTreeSet::new();
        for f in rule.actions.iter().chain(rule.conclusion.iter()) {
            for a in &f.args {
                a.vars(&mut used);
            }
        }
        for (name, sort) in used {
            if sort == Some(Sort::Public) {
                continue;
            }
            if !bound_names.contains(&name) {
                problems.push(format!(
                    "rule {}: variable {} is free in actions/conclusion",
                    rule.name, name
                ));
            }
        }
    }
    problems
}
