//! Lowering of a validated CFG into Tamarin-style MSR rules. Control
//! flow is threaded through state facts of fixed arity three
//! (process id, site, context tuple); the context is the flatten-ed
//! (lexicographically sorted) tuple of the cells inferred by the
//! context analysis. Cells disappear: reads become variables with the
//! reserved `tgc_` prefix bound by the entry fact's context slot,
//! `cas` patterns substitute in place of that slot, assignments move
//! their term into the exit slot, and `undef` simply keeps the cell
//! out of the exit context.

mod emit;
#[cfg(test)]
mod tests;

pub use emit::{emit_spthy, wellformedness_violations, EmitOptions};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::binder::CELL_VAR_PREFIX;
use crate::cellflow::ContextTable;
use crate::cfg::{Label, MsrRuleSrc, ProcessGraph};
use crate::diag::Diagnostic;
use crate::syntax::ast::{ArgValue, Sort, TermExpr, TermNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationStyle {
    CellByCell,
    Forward,
    Backward,
    Hybrid,
}

impl FromStr for TranslationStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cell-by-cell" => TranslationStyle::CellByCell,
            "forward" => TranslationStyle::Forward,
            "backward" => TranslationStyle::Backward,
            "hybrid" => TranslationStyle::Hybrid,
            _ => {
                return Err(format!(
                    "unknown style `{}`; expected cell-by-cell, forward, backward or hybrid",
                    s
                ))
            }
        })
    }
}

impl fmt::Display for TranslationStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TranslationStyle::CellByCell => "cell-by-cell",
            TranslationStyle::Forward => "forward",
            TranslationStyle::Backward => "backward",
            TranslationStyle::Hybrid => "hybrid",
        };
        write!(f, "{}", s)
    }
}

/// Ground-schema term of the target language: no cells, no statements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TgTerm {
    Var { name: String, sort: Option<Sort> },
    Str(String),
    App(String, Vec<TgTerm>),
    Tuple(Vec<TgTerm>),
}

impl TgTerm {
    pub fn var(name: &str) -> TgTerm {
        TgTerm::Var {
            name: name.to_string(),
            sort: None,
        }
    }

    pub fn fresh_var(name: &str) -> TgTerm {
        TgTerm::Var {
            name: name.to_string(),
            sort: Some(Sort::Fresh),
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<(String, Option<Sort>)>) {
        match self {
            TgTerm::Var { name, sort } => {
                out.insert((name.clone(), *sort));
            }
            TgTerm::Str(_) => {}
            TgTerm::App(_, args) | TgTerm::Tuple(args) => {
                for a in args {
                    a.vars(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TgFact {
    pub name: String,
    pub args: Vec<TgTerm>,
    pub persistent: bool,
}

/// Target MSR rule; `source` is the CFG vertex it lowers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsrRule {
    pub name: String,
    pub premise: Vec<TgFact>,
    pub actions: Vec<TgFact>,
    pub conclusion: Vec<TgFact>,
    pub source: Label,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bias {
    Forward,
    Backward,
}

/// State-threading fact: family, owning site, and the ordered cell
/// context it carries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StateFact {
    pub family: Bias,
    pub site: Label,
    pub ctx: Vec<String>,
}

impl StateFact {
    pub fn fact_name(&self) -> &'static str {
        match self.family {
            Bias::Forward => "StF",
            Bias::Backward => "StB",
        }
    }
}

pub const ST_FORWARD: &str = "StF";
pub const ST_BACKWARD: &str = "StB";
pub const CELL_FACT: &str = "C";
pub const PC_FACT: &str = "PcSt";
/// Placeholder payload for an empty context tuple, keeping state facts
/// at fixed arity three.
pub const EMPTY_CTX: &str = "tgnil";

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("{0}")]
    Diag(Diagnostic),
    #[error("internal: context slot for cell '{cell} at rule {label} has no source")]
    SlotWithoutSource { cell: String, label: Label },
    #[error("cyclic `cas` patterns at rule {label}")]
    CyclicPatterns { label: Label },
    #[error(
        "cell-by-cell translation requires path-independent definedness; cell '{cell} at rule {label} is defined on some paths only"
    )]
    AmbiguousDefinedness { cell: String, label: Label },
}

/// `flatten(ctx)`: cells sorted lexicographically by name.
pub fn flatten(ctx: &BTreeSet<String>) -> Vec<String> {
    ctx.iter().cloned().collect()
}

/// Replace every cell by its reserved-prefix variable, homomorphically.
pub fn cvar(t: &TermExpr) -> Result<TgTerm, TranslateError> {
    lower_term(t, &BTreeMap::new(), Label(0))
}

pub fn cell_var(cell: &str) -> TgTerm {
    TgTerm::var(&format!("{}{}", CELL_VAR_PREFIX, cell))
}

/// Forward iff the rule has at most one successor.
pub fn exit_bias(g: &ProcessGraph, k: Label) -> Bias {
    if g.succ(k).len() <= 1 {
        Bias::Forward
    } else {
        Bias::Backward
    }
}

fn style_bias(style: TranslationStyle, g: &ProcessGraph, k: Label) -> Bias {
    match style {
        TranslationStyle::Forward => Bias::Forward,
        TranslationStyle::Backward => Bias::Backward,
        TranslationStyle::Hybrid => exit_bias(g, k),
        TranslationStyle::CellByCell => Bias::Forward,
    }
}

/// Possible exit facts of rule `k`: one forward fact per successor
/// when forward-biased, a single backward fact otherwise. Leaves have
/// no exit fact in any style (a finished process leaves no state
/// behind).
pub fn exit_facts(
    g: &ProcessGraph,
    table: &ContextTable,
    style: TranslationStyle,
    k: Label,
) -> Vec<StateFact> {
    let succs = g.succ(k);
    if succs.is_empty() {
        return Vec::new();
    }
    match style_bias(style, g, k) {
        Bias::Forward => succs
            .iter()
            .map(|k2| StateFact {
                family: Bias::Forward,
                site: *k2,
                ctx: flatten(table.max_r(*k2)),
            })
            .collect(),
        Bias::Backward => vec![StateFact {
            family: Bias::Backward,
            site: k,
            ctx: flatten(table.max_ra(k)),
        }],
    }
}

/// Possible entry facts of rule `k`, one per predecessor exit bias
/// (deduplicated: several forward predecessors share one fact).
pub fn entry_facts(
    g: &ProcessGraph,
    table: &ContextTable,
    style: TranslationStyle,
    k: Label,
) -> Vec<StateFact> {
    let mut out = BTreeSet::new();
    for p in g.pred(k) {
        let f = match style_bias(style, g, p) {
            Bias::Forward => StateFact {
                family: Bias::Forward,
                site: k,
                ctx: flatten(table.max_r(k)),
            },
            Bias::Backward => StateFact {
                family: Bias::Backward,
                site: p,
                ctx: flatten(table.max_ra(p)),
            },
        };
        out.insert(f);
    }
    out.into_iter().collect()
}

/// Lower a term, mapping cells through `cur` (the per-rule view of
/// each cell: its `cas` pattern if matched, the assigned slot variable
/// otherwise).
fn lower_term(
    t: &TermExpr,
    cur: &BTreeMap<String, TgTerm>,
    label: Label,
) -> Result<TgTerm, TranslateError> {
    Ok(match &t.node {
        TermNode::Var { name, sort } => TgTerm::Var {
            name: name.clone(),
            sort: *sort,
        },
        TermNode::StrLit(s) => TgTerm::Str(s.clone()),
        TermNode::Cell(c) => cur
            .get(c)
            .cloned()
            .unwrap_or_else(|| cell_var(c)),
        TermNode::App { path, args, persistent } => {
            let _ = persistent;
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                match &a.value {
                    ArgValue::Term(t) => out.push(lower_term(t, cur, label)?),
                    _ => {
                        return Err(TranslateError::Diag(Diagnostic::error(
                            a.span,
                            "internal: unexpanded argument",
                        )))
                    }
                }
            }
            TgTerm::App(path.segments[0].clone(), out)
        }
        TermNode::Tuple(items) => TgTerm::Tuple(
            items
                .iter()
                .map(|i| lower_term(i, cur, label))
                .collect::<Result<_, _>>()?,
        ),
        other => {
            let _ = other;
            return Err(TranslateError::Diag(Diagnostic::error(
                t.span,
                format!(
                    "internal: node not lowerable in rule {}: {:?}",
                    label, t.node
                ),
            )));
        }
    })
}

fn lower_fact(
    t: &TermExpr,
    cur: &BTreeMap<String, TgTerm>,
    label: Label,
) -> Result<TgFact, TranslateError> {
    match &t.node {
        TermNode::App { path, args, persistent } => {
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                match &a.value {
                    ArgValue::Term(t) => out.push(lower_term(t, cur, label)?),
                    _ => {
                        return Err(TranslateError::Diag(Diagnostic::error(
                            a.span,
                            "internal: unexpanded argument",
                        )))
                    }
                }
            }
            Ok(TgFact {
                name: path.segments[0].clone(),
                args: out,
                persistent: *persistent,
            })
        }
        _ => Err(TranslateError::Diag(Diagnostic::error(
            t.span,
            "internal: fact position holds a non-fact after typechecking",
        ))),
    }
}

/// Per-rule decomposition of the source rule: `cas` patterns, `:=`
/// assignments, `undef`s, and the plain fact items.
struct RuleParts<'a> {
    cas: BTreeMap<String, &'a TermExpr>,
    assigns: BTreeMap<String, &'a TermExpr>,
    premise_facts: Vec<&'a TermExpr>,
    conclusion_facts: Vec<&'a TermExpr>,
}

fn decompose(rule: &MsrRuleSrc) -> RuleParts<'_> {
    let mut parts = RuleParts {
        cas: BTreeMap::new(),
        assigns: BTreeMap::new(),
        premise_facts: Vec::new(),
        conclusion_facts: Vec::new(),
    };
    for item in &rule.premise {
        match &item.node {
            TermNode::CellPattern { cell, term } => {
                parts.cas.insert(cell.clone(), term);
            }
            _ => parts.premise_facts.push(item),
        }
    }
    for item in &rule.conclusion {
        match &item.node {
            TermNode::Assign { cell, value } => {
                parts.assigns.insert(cell.clone(), value);
            }
            TermNode::Undef { .. } => {}
            _ => parts.conclusion_facts.push(item),
        }
    }
    parts
}

/// Resolve the `cur` view for every cell mentioned by the rule:
/// matched cells map to their lowered pattern (patterns may reference
/// other matched cells, hence the small fixpoint with cycle check).
fn cur_map(
    label: Label,
    parts: &RuleParts<'_>,
) -> Result<BTreeMap<String, TgTerm>, TranslateError> {
    let mut cur: BTreeMap<String, TgTerm> = BTreeMap::new();
    let mut in_progress: BTreeSet<String> = BTreeSet::new();

    fn resolve(
        cell: &str,
        label: Label,
        parts: &RuleParts<'_>,
        cur: &mut BTreeMap<String, TgTerm>,
        in_progress: &mut BTreeSet<String>,
    ) -> Result<TgTerm, TranslateError> {
        if let Some(t) = cur.get(cell) {
            return Ok(t.clone());
        }
        match parts.cas.get(cell) {
            None => Ok(cell_var(cell)),
            Some(pattern) => {
                if !in_progress.insert(cell.to_string()) {
                    return Err(TranslateError::CyclicPatterns { label });
                }
                let lowered = lower_pattern(pattern, label, parts, cur, in_progress)?;
                in_progress.remove(cell);
                cur.insert(cell.to_string(), lowered.clone());
                Ok(lowered)
            }
        }
    }

    fn lower_pattern(
        t: &TermExpr,
        label: Label,
        parts: &RuleParts<'_>,
        cur: &mut BTreeMap<String, TgTerm>,
        in_progress: &mut BTreeSet<String>,
    ) -> Result<TgTerm, TranslateError> {
        Ok(match &t.node {
            TermNode::Cell(c) => resolve(c, label, parts, cur, in_progress)?,
            TermNode::Var { name, sort } => TgTerm::Var {
                name: name.clone(),
                sort: *sort,
            },
            TermNode::StrLit(s) => TgTerm::Str(s.clone()),
            TermNode::App { path, args, .. } => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    match &a.value {
                        ArgValue::Term(t) => {
                            out.push(lower_pattern(t, label, parts, cur, in_progress)?)
                        }
                        _ => {
                            return Err(TranslateError::Diag(Diagnostic::error(
                                a.span,
                                "internal: unexpanded argument",
                            )))
                        }
                    }
                }
                TgTerm::App(path.segments[0].clone(), out)
            }
            TermNode::Tuple(items) => TgTerm::Tuple(
                items
                    .iter()
                    .map(|i| lower_pattern(i, label, parts, cur, in_progress))
                    .collect::<Result<_, _>>()?,
            ),
            _ => {
                return Err(TranslateError::Diag(Diagnostic::error(
                    t.span,
                    "internal: unexpected pattern node",
                )))
            }
        })
    }

    let cas_cells: Vec<String> = parts.cas.keys().cloned().collect();
    for cell in cas_cells {
        resolve(&cell, label, parts, &mut cur, &mut in_progress)?;
    }
    Ok(cur)
}

fn pid_term() -> TgTerm {
    TgTerm::fresh_var("pid")
}

fn site_term(site: Label) -> TgTerm {
    TgTerm::Str(site.to_string())
}

fn ctx_payload(slots: Vec<TgTerm>) -> TgTerm {
    match slots.len() {
        0 => TgTerm::Str(EMPTY_CTX.to_string()),
        1 => slots.into_iter().next().unwrap(),
        _ => TgTerm::Tuple(slots),
    }
}

/// Render an entry state fact; context slots come from `cur` (the
/// `cas` pattern for matched cells, the slot variable otherwise).
fn entry_fact_term(
    sf: &StateFact,
    cur: &BTreeMap<String, TgTerm>,
) -> TgFact {
    let slots = sf
        .ctx
        .iter()
        .map(|cell| cur.get(cell).cloned().unwrap_or_else(|| cell_var(cell)))
        .collect();
    TgFact {
        name: sf.fact_name().to_string(),
        args: vec![pid_term(), site_term(sf.site), ctx_payload(slots)],
        persistent: false,
    }
}

/// Lower one vertex given a chosen entry and exit fact.
pub fn lower_rule(
    g: &ProcessGraph,
    k: Label,
    entry: Option<&StateFact>,
    exit: Option<&StateFact>,
) -> Result<MsrRule, TranslateError> {
    let rule = g.rule(k).expect("vertex exists");
    let parts = decompose(rule);
    let cur = cur_map(k, &parts)?;

    let mut premise = Vec::new();
    if let Some(e) = entry {
        premise.push(entry_fact_term(e, &cur));
    }
    for f in &parts.premise_facts {
        premise.push(lower_fact(f, &cur, k)?);
    }
    let mut actions = Vec::new();
    for a in &rule.actions {
        actions.push(lower_fact(a, &cur, k)?);
    }
    let mut conclusion = Vec::new();
    if let Some(x) = exit {
        let entry_ctx: BTreeSet<&String> = entry.map(|e| e.ctx.iter().collect()).unwrap_or_default();
        let mut slots = Vec::with_capacity(x.ctx.len());
        for cell in &x.ctx {
            let slot = if let Some(value) = parts.assigns.get(cell) {
                lower_term(value, &cur, k)?
            } else if cur.contains_key(cell) || entry_ctx.contains(cell) {
                cur.get(cell).cloned().unwrap_or_else(|| cell_var(cell))
            } else {
                return Err(TranslateError::SlotWithoutSource {
                    cell: cell.clone(),
                    label: k,
                });
            };
            slots.push(slot);
        }
        conclusion.push(TgFact {
            name: x.fact_name().to_string(),
            args: vec![pid_term(), site_term(x.site), ctx_payload(slots)],
            persistent: false,
        });
    }
    for f in &parts.conclusion_facts {
        conclusion.push(lower_fact(f, &cur, k)?);
    }

    Ok(MsrRule {
        name: String::new(),
        premise,
        actions,
        conclusion,
        source: k,
        annotation: rule.annotation.clone(),
    })
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn rule_base_name(g: &ProcessGraph, k: Label) -> String {
    let rule = g.rule(k).unwrap();
    match &rule.annotation {
        Some(anno) => format!("{}__{}", sanitize(&rule.process), sanitize(anno)),
        None => format!("{}__{}", sanitize(&rule.process), k),
    }
}

/// Translate the whole graph under one style.
pub fn translate(
    g: &ProcessGraph,
    table: &ContextTable,
    style: TranslationStyle,
) -> Result<Vec<MsrRule>, TranslateError> {
    if style == TranslationStyle::CellByCell {
        return cell_by_cell(g);
    }
    let mut out = Vec::new();
    for k in g.vertices.keys().copied() {
        let entries = entry_facts(g, table, style, k);
        let exits = exit_facts(g, table, style, k);
        let base = rule_base_name(g, k);
        let entry_opts: Vec<Option<&StateFact>> = if entries.is_empty() {
            vec![None]
        } else {
            entries.iter().map(Some).collect()
        };
        let exit_opts: Vec<Option<&StateFact>> = if exits.is_empty() {
            vec![None]
        } else {
            exits.iter().map(Some).collect()
        };
        for entry in &entry_opts {
            for exit in &exit_opts {
                let mut rule = lower_rule(g, k, *entry, *exit)?;
                let mut name = base.clone();
                if entries.len() > 1 {
                    name.push_str(&format!("__from{}", entry.unwrap().site));
                }
                if exits.len() > 1 {
                    name.push_str(&format!("__to{}", exit.unwrap().site));
                }
                rule.name = name;
                out.push(rule);
            }
        }
    }
    Ok(out)
}

/// Cells defined on entry along every path (intersection dataflow);
/// cell-by-cell needs definedness to be path-independent to know when
/// a defining rule must consume the previous cell fact.
fn must_defined(g: &ProcessGraph) -> Result<BTreeMap<Label, BTreeSet<String>>, TranslateError> {
    let usage = crate::cellflow::UsageMap::of_graph(g)
        .map_err(|e| TranslateError::Diag(Diagnostic::error(crate::diag::Span::synthetic(), e.to_string())))?;
    let all: BTreeSet<String> = usage
        .map
        .values()
        .flat_map(|cu| {
            cu.reads
                .iter()
                .chain(cu.defines.iter())
                .chain(cu.undefines.iter())
                .cloned()
        })
        .collect();
    let mut inn: BTreeMap<Label, BTreeSet<String>> = g
        .vertices
        .keys()
        .map(|k| (*k, all.clone()))
        .collect();
    for root in g.roots() {
        inn.insert(root, BTreeSet::new());
    }
    loop {
        let mut changed = false;
        for k in g.vertices.keys() {
            let preds = g.pred(*k);
            if preds.is_empty() {
                continue;
            }
            let mut meet: Option<BTreeSet<String>> = None;
            for p in preds {
                let out_p = crate::cellflow::next_state(&inn[&p], usage.get(p));
                meet = Some(match meet {
                    None => out_p,
                    Some(m) => m.intersection(&out_p).cloned().collect(),
                });
            }
            let meet = meet.unwrap();
            if meet != inn[k] {
                inn.insert(*k, meet);
                changed = true;
            }
        }
        if !changed {
            return Ok(inn);
        }
    }
}

/// May-defined analysis (union over paths), to detect ambiguity.
fn may_defined(g: &ProcessGraph) -> BTreeMap<Label, BTreeSet<String>> {
    let usage = crate::cellflow::UsageMap::of_graph(g).expect("validated earlier");
    let mut inn: BTreeMap<Label, BTreeSet<String>> = g
        .vertices
        .keys()
        .map(|k| (*k, BTreeSet::new()))
        .collect();
    loop {
        let mut changed = false;
        for k in g.vertices.keys() {
            let mut join = BTreeSet::new();
            for p in g.pred(*k) {
                join.extend(crate::cellflow::next_state(&inn[&p], usage.get(p)));
            }
            if join != inn[k] {
                inn.insert(*k, join);
                changed = true;
            }
        }
        if !changed {
            return inn;
        }
    }
}

/// The naive per-cell translation: a key-value fact per live cell plus
/// a program-counter fact threading control flow (the bare sketch has
/// no control carrier, so sequencing would be lost without it).
fn cell_by_cell(g: &ProcessGraph) -> Result<Vec<MsrRule>, TranslateError> {
    let usage = crate::cellflow::UsageMap::of_graph(g)
        .map_err(|e| TranslateError::Diag(Diagnostic::error(crate::diag::Span::synthetic(), e.to_string())))?;
    let must = must_defined(g)?;
    let may = may_defined(g);
    let mut out = Vec::new();
    for k in g.vertices.keys().copied() {
        let rule = g.rule(k).unwrap();
        let parts = decompose(rule);
        let cur = cur_map(k, &parts)?;
        let cu = usage.get(k);

        // every touched cell must have path-independent definedness
        for cell in cu.defines.iter().chain(cu.undefines.iter()) {
            let in_must = must[&k].contains(cell);
            let in_may = may[&k].contains(cell);
            if in_may != in_must {
                return Err(TranslateError::AmbiguousDefinedness {
                    cell: cell.clone(),
                    label: k,
                });
            }
        }

        let mut premise = Vec::new();
        let mut conclusion = Vec::new();
        let preds = g.pred(k);
        if !preds.is_empty() {
            premise.push(TgFact {
                name: PC_FACT.to_string(),
                args: vec![pid_term(), site_term(k)],
                persistent: false,
            });
        }
        // reads reproduce the cell fact on both sides unless the rule
        // undefines or overwrites the cell
        let cell_fact = |cell: &str, value: TgTerm| TgFact {
            name: CELL_FACT.to_string(),
            args: vec![pid_term(), TgTerm::Str(cell.to_string()), value],
            persistent: false,
        };
        let mut consumed: BTreeSet<&String> = BTreeSet::new();
        for cell in &cu.reads {
            premise.push(cell_fact(cell, cur.get(cell).cloned().unwrap_or_else(|| cell_var(cell))));
            consumed.insert(cell);
            if !cu.undefines.contains(cell) && !cu.defines.contains(cell) {
                conclusion.push(cell_fact(
                    cell,
                    cur.get(cell).cloned().unwrap_or_else(|| cell_var(cell)),
                ));
            }
        }
        for cell in &cu.undefines {
            if !consumed.contains(cell) {
                premise.push(cell_fact(cell, cell_var(cell)));
            }
        }
        for (cell, value) in &parts.assigns {
            if must[&k].contains(cell) && !consumed.contains(cell) {
                // overwrite: consume the old value with a throwaway slot
                premise.push(cell_fact(cell, TgTerm::var(&format!("{}old_{}", CELL_VAR_PREFIX, cell))));
            }
            conclusion.push(cell_fact(cell, lower_term(value, &cur, k)?));
        }
        for f in &parts.premise_facts {
            premise.push(lower_fact(f, &cur, k)?);
        }
        let mut actions = Vec::new();
        for a in &rule.actions {
            actions.push(lower_fact(a, &cur, k)?);
        }
        for f in &parts.conclusion_facts {
            conclusion.push(lower_fact(f, &cur, k)?);
        }
        let succs = g.succ(k);
        let base = rule_base_name(g, k);
        if succs.is_empty() {
            out.push(MsrRule {
                name: base,
                premise,
                actions,
                conclusion,
                source: k,
                annotation: rule.annotation.clone(),
            });
        } else {
            for s in &succs {
                let mut conclusion = conclusion.clone();
                conclusion.insert(
                    0,
                    TgFact {
                        name: PC_FACT.to_string(),
                        args: vec![pid_term(), site_term(*s)],
                        persistent: false,
                    },
                );
                let name = if succs.len() > 1 {
                    format!("{}__to{}", base, s)
                } else {
                    base.clone()
                };
                out.push(MsrRule {
                    name,
                    premise: premise.clone(),
                    actions: actions.clone(),
                    conclusion,
                    source: k,
                    annotation: rule.annotation.clone(),
                });
            }
        }
    }
    Ok(out)
}
