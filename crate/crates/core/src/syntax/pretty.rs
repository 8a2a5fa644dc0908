//! Pretty-printer producing parseable `.tg` text. Used by the DOT
//! emitter, diagnostics, and the parse/print round-trip tests.

use crate::syntax::ast::*;
use std::fmt::Write;

pub fn term_to_string(t: &TermExpr) -> String {
    let mut s = String::new();
    write_term(&mut s, t);
    s
}

fn write_term(out: &mut String, t: &TermExpr) {
    match &t.node {
        TermNode::Var { name, sort } => match sort {
            Some(Sort::Fresh) => {
                let _ = write!(out, "~{}", name);
            }
            Some(Sort::Public) => {
                let _ = write!(out, "${}", name);
            }
            Some(Sort::Temporal) => {
                let _ = write!(out, "#{}", name);
            }
            Some(Sort::Bits) => {
                let _ = write!(out, "{}: bits", name);
            }
            None => {
                let _ = write!(out, "{}", name);
            }
        },
        TermNode::StrLit(s) => {
            let _ = write!(out, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        }
        TermNode::Cell(c) => {
            let _ = write!(out, "'{}", c);
        }
        TermNode::PathRef(p) => {
            let _ = write!(out, "{}", p.dotted());
        }
        TermNode::LetIn { name, value, body } => {
            let _ = write!(out, "let {} = ", name);
            write_term(out, value);
            out.push_str(" in ");
            write_term(out, body);
        }
        TermNode::MacroLetIn { sig, value, body } => {
            let _ = write!(out, "let {}(", sig.name);
            write_params(out, &sig.params);
            out.push(')');
            if let Some(ret) = sig.ret {
                let _ = write!(out, ": {}", sort_name(ret));
            }
            out.push_str(" = ");
            write_term(out, value);
            out.push_str(" in ");
            write_term(out, body);
        }
        TermNode::App {
            path,
            args,
            persistent,
        } => {
            if *persistent {
                out.push('!');
            }
            let _ = write!(out, "{}(", path.dotted());
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_arg(out, a);
            }
            out.push(')');
        }
        TermNode::Tuple(items) => {
            out.push('<');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_term(out, item);
            }
            out.push('>');
        }
        TermNode::Assign { cell, value } => {
            let _ = write!(out, "'{} := ", cell);
            write_term(out, value);
        }
        TermNode::AssignPrune { cell } => {
            let _ = write!(out, "'{} := .", cell);
        }
        TermNode::Undef { cell } => {
            let _ = write!(out, "undef('{})", cell);
        }
        TermNode::NamedPattern { term, name } => {
            write_term(out, term);
            let _ = write!(out, " as {}", name);
        }
        TermNode::CellPattern { cell, term } => {
            let _ = write!(out, "'{} cas ", cell);
            write_term(out, term);
        }
        TermNode::Quantified { quant, vars, body } => {
            out.push_str(match quant {
                Quantifier::All => "All",
                Quantifier::Ex => "Ex",
            });
            for (name, sort) in vars {
                if *sort == Sort::Temporal {
                    let _ = write!(out, " #{}", name);
                } else {
                    let _ = write!(out, " {}", name);
                }
            }
            out.push_str(" . ");
            write_term(out, body);
        }
        TermNode::At { fact, time } => {
            out.push('(');
            write_term(out, fact);
            out.push_str(" @ ");
            write_term(out, time);
            out.push(')');
        }
        TermNode::Binary { op, lhs, rhs } => {
            out.push('(');
            write_term(out, lhs);
            out.push_str(match op {
                BinOp::And => " & ",
                BinOp::Or => " | ",
                BinOp::Imp => " ==> ",
                BinOp::Eq => " = ",
            });
            write_term(out, rhs);
            out.push(')');
        }
        TermNode::Not(inner) => {
            out.push_str("not (");
            write_term(out, inner);
            out.push(')');
        }
    }
}

fn write_arg(out: &mut String, a: &Arg) {
    if let Some(label) = &a.label {
        let _ = write!(out, "{} is ", label);
        match &a.value {
            ArgValue::Term(t) => write_term(out, t),
            ArgValue::NamePrune => out.push('.'),
            ArgValue::CellNamePrune => out.push_str("'."),
        }
    } else {
        match &a.value {
            ArgValue::Term(t) => write_term(out, t),
            // unlabeled prunes are rejected by the parser
            ArgValue::NamePrune => out.push('.'),
            ArgValue::CellNamePrune => out.push_str("'."),
        }
    }
}

fn write_params(out: &mut String, params: &[MacroParam]) {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if p.named {
            out.push_str("named ");
        }
        if p.rw {
            out.push_str("rw ");
        }
        if p.cell {
            out.push('\'');
        }
        out.push_str(&p.name);
    }
}

fn sort_name(s: Sort) -> &'static str {
    match s {
        Sort::Bits => "bits",
        Sort::Fresh => "fresh",
        Sort::Public => "public",
        Sort::Temporal => "temporal",
    }
}

pub fn rule_to_string(r: &RuleExpr) -> String {
    let mut out = String::new();
    if let Some(anno) = &r.annotation {
        let _ = write!(out, "\"{}\": ", anno);
    }
    out.push('[');
    for (i, t) in r.premise.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_term(&mut out, t);
    }
    out.push(']');
    let mut lets = String::new();
    for l in &r.lets {
        match l {
            RuleLet::Binding { name, value } => {
                let _ = write!(lets, "let {} = {} in ", name, term_to_string(value));
            }
            RuleLet::Macro { sig, value } => {
                let mut p = String::new();
                write_params(&mut p, &sig.params);
                let _ = write!(lets, "let {}({}) = {} in ", sig.name, p, term_to_string(value));
            }
        }
    }
    if r.actions.is_empty() && r.lets.is_empty() {
        out.push_str("->");
    } else {
        out.push_str("--");
        out.push_str(&lets);
        out.push('[');
        for (i, t) in r.actions.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_term(&mut out, t);
        }
        out.push_str("]->");
    }
    out.push('[');
    for (i, t) in r.conclusion.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_term(&mut out, t);
    }
    out.push(']');
    out
}

pub fn process_to_string(p: &ProcessExpr, indent: usize) -> String {
    let mut out = String::new();
    write_process(&mut out, p, indent);
    out
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_process(out: &mut String, p: &ProcessExpr, indent: usize) {
    match &p.node {
        ProcessNode::Null => {
            pad(out, indent);
            out.push('0');
        }
        ProcessNode::Step { rule, rest } => {
            pad(out, indent);
            out.push_str(&rule_to_string(rule));
            write_rest(out, rest, indent);
        }
        ProcessNode::Choice { branches, rest } => {
            pad(out, indent);
            out.push_str("choice {\n");
            for b in branches {
                write_process(out, b, indent + 1);
                out.push_str(";\n");
            }
            pad(out, indent);
            out.push('}');
            write_rest(out, rest, indent);
        }
        ProcessNode::Scoped { body, rest } => {
            pad(out, indent);
            out.push_str("{\n");
            write_process(out, body, indent + 1);
            out.push('\n');
            pad(out, indent);
            out.push('}');
            write_rest(out, rest, indent);
        }
        ProcessNode::While {
            cond,
            body,
            rest,
            label,
        } => {
            pad(out, indent);
            if let Some(l) = label {
                let _ = write!(out, "\"{}\": ", l);
            }
            let _ = write!(out, "while {} {{\n", cond_to_string(cond));
            write_process(out, body, indent + 1);
            out.push('\n');
            pad(out, indent);
            out.push('}');
            write_rest(out, rest, indent);
        }
        ProcessNode::Loop { body, rest, label } => {
            pad(out, indent);
            if let Some(l) = label {
                let _ = write!(out, "\"{}\": ", l);
            }
            out.push_str("loop {\n");
            write_process(out, body, indent + 1);
            out.push('\n');
            pad(out, indent);
            out.push('}');
            write_rest(out, rest, indent);
        }
        ProcessNode::IfThenElse {
            cond,
            then_branch,
            else_branch,
            rest,
        } => {
            pad(out, indent);
            let _ = write!(out, "if {} then {{\n", cond_to_string(cond));
            write_process(out, then_branch, indent + 1);
            out.push('\n');
            pad(out, indent);
            out.push_str("} else {\n");
            write_process(out, else_branch, indent + 1);
            out.push('\n');
            pad(out, indent);
            out.push('}');
            write_rest(out, rest, indent);
        }
        ProcessNode::Break(label) => {
            pad(out, indent);
            out.push_str("break");
            if let Some(l) = label {
                let _ = write!(out, " \"{}\"", l);
            }
        }
        ProcessNode::Continue(label) => {
            pad(out, indent);
            out.push_str("continue");
            if let Some(l) = label {
                let _ = write!(out, " \"{}\"", l);
            }
        }
        ProcessNode::MacroCall { path, args, rest } => {
            pad(out, indent);
            let _ = write!(out, "{}(", path.dotted());
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_arg(out, a);
            }
            out.push(')');
            write_rest(out, rest, indent);
        }
        ProcessNode::LetIn { name, value, rest } => {
            pad(out, indent);
            let _ = write!(out, "let {} = {} in\n", name, term_to_string(value));
            write_process(out, rest, indent);
        }
        ProcessNode::MacroLetIn { sig, value, rest } => {
            pad(out, indent);
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "let {}({}) = {} in\n", sig.name, p, term_to_string(value));
            write_process(out, rest, indent);
        }
    }
}

fn write_rest(out: &mut String, rest: &ProcessExpr, indent: usize) {
    if !matches!(rest.node, ProcessNode::Null) {
        out.push_str(";\n");
        write_process(out, rest, indent);
    }
}

pub fn cond_to_string(c: &Cond) -> String {
    let inner = format!("'{} cas {}", c.cell, term_to_string(&c.pattern));
    if c.negated {
        format!("not ({})", inner)
    } else {
        inner
    }
}

pub fn module_to_string(m: &SourceModule) -> String {
    let mut out = String::new();
    for d in &m.decls {
        write_decl(&mut out, d, 0);
        out.push('\n');
    }
    out
}

fn write_decl(out: &mut String, d: &Decl, indent: usize) {
    pad(out, indent);
    match d {
        Decl::LetBinding { name, value, .. } => {
            let _ = write!(out, "let {} = {}", name, term_to_string(value));
        }
        Decl::FunSymbol { name, arity, .. } => {
            let _ = write!(out, "fun {}/{}", name, arity);
        }
        Decl::PredSymbol {
            name,
            arity,
            labels,
            ..
        } => match labels {
            Some(ls) => {
                let _ = write!(
                    out,
                    "pred {}({})",
                    name,
                    ls.iter()
                        .map(|l| format!("named {}", l))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            None => {
                let _ = write!(out, "pred {}/{}", name, arity);
            }
        },
        Decl::ApredSymbol {
            name,
            arity,
            labels,
            ..
        } => match labels {
            Some(ls) => {
                let _ = write!(
                    out,
                    "apred {}({})",
                    name,
                    ls.iter()
                        .map(|l| format!("named {}", l))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            None => {
                let _ = write!(out, "apred {}/{}", name, arity);
            }
        },
        Decl::FunMacro { sig, body, .. } => {
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "fun {}({}) = {}", sig.name, p, term_to_string(body));
        }
        Decl::PredMacro { sig, body, .. } => {
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "pred {}({}) = {}", sig.name, p, term_to_string(body));
        }
        Decl::ApredMacro { sig, body, .. } => {
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "apred {}({}) = {}", sig.name, p, term_to_string(body));
        }
        Decl::TermMacro { sig, body, .. } => {
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "let {}({})", sig.name, p);
            if let Some(ret) = sig.ret {
                let _ = write!(out, ": {}", sort_name(ret));
            }
            let _ = write!(out, " = {}", term_to_string(body));
        }
        Decl::ProcessDecl { name, body, .. } => {
            let _ = write!(out, "process {} =\n", name);
            out.push_str(&process_to_string(body, indent + 1));
        }
        Decl::ProcessMacro { sig, body, .. } => {
            let mut p = String::new();
            write_params(&mut p, &sig.params);
            let _ = write!(out, "process {}({}) =\n", sig.name, p);
            out.push_str(&process_to_string(body, indent + 1));
        }
        Decl::Module { name, decls, .. } => {
            let _ = write!(out, "module {} = {{\n", name);
            for d in decls {
                write_decl(out, d, indent + 1);
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
        Decl::Import { name, .. } => {
            let _ = write!(out, "import {}", name);
        }
        Decl::Open { name, .. } => {
            let _ = write!(out, "open {}", name);
        }
        Decl::Include { name, .. } => {
            let _ = write!(out, "include {}", name);
        }
        Decl::ModuleAlias { name, target, .. } => {
            let _ = write!(out, "module {} = {}", name, target.dotted());
        }
        Decl::Verbatim {
            kind, name, text, ..
        } => {
            let kw = match kind {
                VerbatimKind::Restriction => "restriction",
                VerbatimKind::Lemma => "lemma",
            };
            let _ = write!(out, "{} {} = {}", kw, name, text);
        }
    }
}
