//! DOT rendering for `--emit-cfg`.

use super::ProcessGraph;
use std::fmt::Write;

pub fn to_dot(g: &ProcessGraph) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box fontname=\"monospace\"];\n");
    for (k, rule) in &g.vertices {
        let mut label = format!("{}: {}", k, rule.display());
        if let Some(anno) = &rule.annotation {
            label = format!("{} \"{}\"", label, anno);
        }
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\"];",
            k.0,
            label.replace('\\', "\\\\").replace('"', "\\\"")
        );
    }
    for (s, t) in &g.edges {
        let _ = writeln!(out, "  n{} -> n{};", s.0, t.0);
    }
    out.push_str("}\n");
    out
}
