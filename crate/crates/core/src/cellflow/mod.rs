//! Cell lifetime analysis over the CFG: per-rule cell usage, validity
//! of all CFG traces via the 2-loop bound, and inference of the
//! maximal contexts carried by translated state facts.
//!
//! A CFG trace alternates between sets of defined cells and rule
//! labels; `next(S, k) = (S u defines(k)) \ undefines(k)`. A trace is
//! valid when every rule's reads are covered by the state it fires
//! from. Validity of all traces follows from validity of all traces
//! with at most 2 loops (no label occurring more than 3 times), which
//! is what `check_all_traces_valid` enumerates.

#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::cfg::{Label, MsrRuleSrc, ProcessGraph};
use crate::diag::Diagnostic;
use crate::syntax::ast::{ArgValue, TermExpr, TermNode};

/// Per-rule cell usage triple.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellUsage {
    pub reads: BTreeSet<String>,
    pub defines: BTreeSet<String>,
    pub undefines: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CellflowError {
    #[error("rule {label} both defines and undefines {cells:?}")]
    DefineUndefineOverlap { label: Label, cells: BTreeSet<String> },
    #[error("invalid trace: rule {} reads undefined cell(s)", .violation.label)]
    Invalid { violation: Violation },
    #[error("trace enumeration budget of {limit} exceeded; raise --budget or simplify the control flow")]
    BudgetExceeded { limit: usize },
    #[error("graphs with more than 64 distinct cells are not supported")]
    TooManyCells,
    #[error("{0}")]
    Diag(Diagnostic),
}

/// First point at which a trace reads an undefined cell.
#[derive(Debug, Clone)]
pub struct Violation {
    pub position: usize,
    pub label: Label,
    pub missing: BTreeSet<String>,
    pub trace: CfgTrace,
}

impl Violation {
    pub fn describe(&self, g: &ProcessGraph) -> String {
        let path: Vec<String> = self.trace.labels.iter().map(|l| l.to_string()).collect();
        let rule = g
            .rule(self.label)
            .map(|r| r.display())
            .unwrap_or_else(|| "?".to_string());
        format!(
            "cell(s) {} read before definition at rule {} ({}); witness path: {}",
            self.missing
                .iter()
                .map(|c| format!("'{}", c))
                .collect::<Vec<_>>()
                .join(", "),
            self.label,
            rule,
            path.join(" -> ")
        )
    }
}

/// Alternating sequence of cell sets and labels; `states[i]` is the
/// set in force before `labels[i]`, so `states` is one longer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgTrace {
    pub initial: BTreeSet<String>,
    pub labels: Vec<Label>,
    pub states: Vec<BTreeSet<String>>,
}

/// Collect cells referenced by a term in read position.
fn read_cells(t: &TermExpr, out: &mut BTreeSet<String>) {
    match &t.node {
        TermNode::Cell(c) => {
            out.insert(c.clone());
        }
        TermNode::Assign { value, .. } => read_cells(value, out),
        TermNode::Undef { .. } => {}
        TermNode::CellPattern { cell, term } => {
            out.insert(cell.clone());
            read_cells(term, out);
        }
        TermNode::App { args, .. } => {
            for a in args {
                if let ArgValue::Term(t) = &a.value {
                    read_cells(t, out);
                }
            }
        }
        TermNode::Tuple(items) => {
            for i in items {
                read_cells(i, out);
            }
        }
        TermNode::NamedPattern { term, .. } => read_cells(term, out),
        TermNode::Quantified { body, .. } => read_cells(body, out),
        TermNode::At { fact, time } => {
            read_cells(fact, out);
            read_cells(time, out);
        }
        TermNode::Binary { lhs, rhs, .. } => {
            read_cells(lhs, out);
            read_cells(rhs, out);
        }
        TermNode::Not(inner) => read_cells(inner, out),
        TermNode::Var { .. } | TermNode::StrLit(_) | TermNode::PathRef(_) => {}
        TermNode::LetIn { value, body, .. } => {
            read_cells(value, out);
            read_cells(body, out);
        }
        TermNode::MacroLetIn { value, body, .. } => {
            read_cells(value, out);
            read_cells(body, out);
        }
        TermNode::AssignPrune { .. } => {}
    }
}

/// Cell usage of one rule. Reads are cells occurring in the premise,
/// actions, or non-statement conclusion positions (including the right
/// hand sides of assignments and `cas` patterns); defines are `:=`
/// targets; undefines are `undef` arguments.
pub fn cell_usage(label: Label, rule: &MsrRuleSrc) -> Result<CellUsage, CellflowError> {
    let mut cu = CellUsage::default();
    for t in rule.premise.iter().chain(rule.actions.iter()) {
        read_cells(t, &mut cu.reads);
    }
    for t in &rule.conclusion {
        match &t.node {
            TermNode::Assign { cell, value } => {
                cu.defines.insert(cell.clone());
                read_cells(value, &mut cu.reads);
            }
            TermNode::Undef { cell } => {
                cu.undefines.insert(cell.clone());
            }
            other => {
                let _ = other;
                read_cells(t, &mut cu.reads);
            }
        }
    }
    let both: BTreeSet<String> = cu.defines.intersection(&cu.undefines).cloned().collect();
    if !both.is_empty() {
        return Err(CellflowError::DefineUndefineOverlap { label, cells: both });
    }
    Ok(cu)
}

/// Cell usage for every vertex of a graph.
#[derive(Debug, Clone)]
pub struct UsageMap {
    pub map: BTreeMap<Label, CellUsage>,
}

impl UsageMap {
    pub fn of_graph(g: &ProcessGraph) -> Result<UsageMap, CellflowError> {
        let mut map = BTreeMap::new();
        for (k, rule) in &g.vertices {
            map.insert(*k, cell_usage(*k, rule)?);
        }
        Ok(UsageMap { map })
    }

    pub fn get(&self, k: Label) -> &CellUsage {
        &self.map[&k]
    }
}

/// `next(S, k) = (S u defines) \ undefines`
pub fn next_state(s: &BTreeSet<String>, cu: &CellUsage) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = s.union(&cu.defines).cloned().collect();
    for u in &cu.undefines {
        out.remove(u);
    }
    out
}

/// Fold `next` over a label sequence; consecutive labels must be
/// connected in the graph.
pub fn make_trace(
    g: &ProcessGraph,
    usage: &UsageMap,
    initial: BTreeSet<String>,
    ids: &[Label],
) -> Result<CfgTrace, CellflowError> {
    for w in ids.windows(2) {
        if !g.edges.contains(&(w[0], w[1])) {
            return Err(CellflowError::Diag(Diagnostic::error(
                crate::diag::Span::synthetic(),
                format!("labels {} and {} are not connected", w[0], w[1]),
            )));
        }
    }
    let mut states = vec![initial.clone()];
    for k in ids {
        let prev = states.last().unwrap();
        states.push(next_state(prev, usage.get(*k)));
    }
    Ok(CfgTrace {
        initial,
        labels: ids.to_vec(),
        states,
    })
}

/// A trace is valid iff every rule's reads are covered by the state it
/// fires from; returns the first violation otherwise.
pub fn trace_valid(t: &CfgTrace, usage: &UsageMap) -> Result<(), Violation> {
    for (i, k) in t.labels.iter().enumerate() {
        let cu = usage.get(*k);
        if !cu.reads.is_subset(&t.states[i]) {
            return Err(Violation {
                position: i,
                label: *k,
                missing: cu.reads.difference(&t.states[i]).cloned().collect(),
                trace: t.clone(),
            });
        }
    }
    Ok(())
}

/// Recursive backward union: a cell is required by a trace when its
/// first rule reads it, or the tail requires it and the first rule
/// does not define it.
pub fn ctx_r(labels: &[Label], usage: &UsageMap) -> BTreeSet<String> {
    let mut acc: BTreeSet<String> = BTreeSet::new();
    for k in labels.iter().rev() {
        let cu = usage.get(*k);
        for d in &cu.defines {
            acc.remove(d);
        }
        acc.extend(cu.reads.iter().cloned());
    }
    acc
}

/// Interned cell names and bitset usage for enumeration.
struct Interner {
    names: Vec<String>,
    reads: BTreeMap<Label, u64>,
    defines: BTreeMap<Label, u64>,
    undefines: BTreeMap<Label, u64>,
}

impl Interner {
    fn new(usage: &UsageMap) -> Result<Interner, CellflowError> {
        let mut all: BTreeSet<&String> = BTreeSet::new();
        for cu in usage.map.values() {
            all.extend(&cu.reads);
            all.extend(&cu.defines);
            all.extend(&cu.undefines);
        }
        if all.len() > 64 {
            return Err(CellflowError::TooManyCells);
        }
        let names: Vec<String> = all.into_iter().cloned().collect();
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let bits_of = |set: &BTreeSet<String>| -> u64 {
            set.iter().fold(0u64, |acc, c| acc | 1 << index[c.as_str()])
        };
        let mut reads = BTreeMap::new();
        let mut defines = BTreeMap::new();
        let mut undefines = BTreeMap::new();
        for (k, cu) in &usage.map {
            reads.insert(*k, bits_of(&cu.reads));
            defines.insert(*k, bits_of(&cu.defines));
            undefines.insert(*k, bits_of(&cu.undefines));
        }
        Ok(Interner {
            names,
            reads,
            defines,
            undefines,
        })
    }

    fn set_of_bits(&self, bits: u64) -> BTreeSet<String> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| bits & (1 << i) != 0)
            .map(|(_, n)| n.clone())
            .collect()
    }
}

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Enumerate all well-formed CFG traces from each root with an empty
/// initial state, bounded at `max_loops` (no label occurring more than
/// `max_loops + 1` times), and report the shortest invalid trace if
/// any. Exploration deduplicates on (position, state, occurrence
/// vector) so the walk terminates on cyclic graphs; this is exact for
/// validity because the future of a trace depends only on that triple.
pub fn check_all_traces_valid_bounded(
    g: &ProcessGraph,
    usage: &UsageMap,
    max_loops: u32,
    budget: usize,
) -> Result<(), CellflowError> {
    let interner = Interner::new(usage)?;
    let cap = max_loops + 1;
    let labels: Vec<Label> = g.vertices.keys().copied().collect();
    let label_index: BTreeMap<Label, usize> = labels.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    type Config = (usize, u64, Vec<u32>);
    let mut seen: HashMap<Config, ()> = HashMap::new();
    let mut parents: HashMap<Config, Config> = HashMap::new();
    let mut queue: VecDeque<Config> = VecDeque::new();
    let mut spent = 0usize;

    let reconstruct = |parents: &HashMap<Config, Config>, last: &Config| -> Vec<Label> {
        let mut path = vec![labels[last.0]];
        let mut cur = last.clone();
        while let Some(prev) = parents.get(&cur) {
            path.push(labels[prev.0]);
            cur = prev.clone();
        }
        path.reverse();
        path
    };

    let report = |parents: &HashMap<Config, Config>,
                  prev: Option<&Config>,
                  k: Label,
                  state_bits: u64|
     -> CellflowError {
        let mut path = match prev {
            Some(p) => reconstruct(parents, p),
            None => Vec::new(),
        };
        path.push(k);
        let trace = make_trace(g, usage, BTreeSet::new(), &path).expect("witness path is connected");
        let missing_bits = interner.reads[&k] & !state_bits;
        CellflowError::Invalid {
            violation: Violation {
                position: path.len() - 1,
                label: k,
                missing: interner.set_of_bits(missing_bits),
                trace,
            },
        }
    };

    // seed with the roots; S0 is empty
    for root in g.roots() {
        if interner.reads[&root] != 0 {
            return Err(report(&parents, None, root, 0));
        }
        let mut occ = vec![0u32; labels.len()];
        occ[label_index[&root]] = 1;
        let next_bits = interner.defines[&root] & !interner.undefines[&root];
        let cfg = (label_index[&root], next_bits, occ);
        if seen.insert(cfg.clone(), ()).is_none() {
            queue.push_back(cfg);
        }
    }

    while let Some(cfg) = queue.pop_front() {
        spent += 1;
        if spent > budget {
            return Err(CellflowError::BudgetExceeded { limit: budget });
        }
        let (idx, state, ref occ) = cfg;
        for succ in g.succ(labels[idx]) {
            let sidx = label_index[&succ];
            if occ[sidx] >= cap {
                continue;
            }
            if interner.reads[&succ] & !state != 0 {
                return Err(report(&parents, Some(&cfg), succ, state));
            }
            let next_bits = (state | interner.defines[&succ]) & !interner.undefines[&succ];
            let mut occ2 = occ.clone();
            occ2[sidx] += 1;
            let next_cfg = (sidx, next_bits, occ2);
            if seen.insert(next_cfg.clone(), ()).is_none() {
                parents.insert(next_cfg.clone(), cfg.clone());
                queue.push_back(next_cfg);
            }
        }
    }
    Ok(())
}

/// The 2-loop-bounded check; by the bounding lemma, validity of all
/// traces with at most 2 loops implies validity of all traces.
pub fn check_all_traces_valid(
    g: &ProcessGraph,
    usage: &UsageMap,
    budget: usize,
) -> Result<(), CellflowError> {
    check_all_traces_valid_bounded(g, usage, 2, budget)
}

/// Maximal contexts per label: `maxR` is the union of `ctx_r` over all
/// loop-free traces starting at the label (enumerated exactly, with
/// shared prefixes factored); `maxRA` is the union of `maxR` over the
/// successors.
#[derive(Debug, Clone, Default)]
pub struct ContextTable {
    pub max_r: BTreeMap<Label, BTreeSet<String>>,
    pub max_ra: BTreeMap<Label, BTreeSet<String>>,
}

impl ContextTable {
    pub fn max_r(&self, k: Label) -> &BTreeSet<String> {
        &self.max_r[&k]
    }

    pub fn max_ra(&self, k: Label) -> &BTreeSet<String> {
        &self.max_ra[&k]
    }

    /// Deterministic text dump: labels ascending, cells lexicographic.
    pub fn render(&self) -> String {
        let fmt = |cells: &BTreeSet<String>| {
            if cells.is_empty() {
                "{}".to_string()
            } else {
                format!(
                    "{{{}}}",
                    cells
                        .iter()
                        .map(|c| format!("'{}", c))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            }
        };
        let mut out = String::new();
        for (k, r) in &self.max_r {
            out.push_str(&format!(
                "rule {}: maxR = {}, maxRA = {}\n",
                k,
                fmt(r),
                fmt(&self.max_ra[k])
            ));
        }
        out
    }
}

fn max_r_from(
    g: &ProcessGraph,
    interner: &Interner,
    k: Label,
    visited: u128,
    label_index: &BTreeMap<Label, usize>,
    spent: &mut usize,
    budget: usize,
) -> Result<u64, CellflowError> {
    let idx = label_index[&k];
    let visited = visited | (1u128 << idx);
    let mut tail_union = 0u64;
    let mut extended = false;
    for succ in g.succ(k) {
        if visited & (1u128 << label_index[&succ]) != 0 {
            continue;
        }
        extended = true;
        tail_union |= max_r_from(g, interner, succ, visited, label_index, spent, budget)?;
    }
    if !extended {
        *spent += 1;
        if *spent > budget {
            return Err(CellflowError::BudgetExceeded { limit: budget });
        }
    }
    Ok(interner.reads[&k] | (tail_union & !interner.defines[&k]))
}

pub fn context_table(
    g: &ProcessGraph,
    usage: &UsageMap,
    budget: usize,
) -> Result<ContextTable, CellflowError> {
    let interner = Interner::new(usage)?;
    let labels: Vec<Label> = g.vertices.keys().copied().collect();
    if labels.len() > 128 {
        return Err(CellflowError::Diag(Diagnostic::error(
            crate::diag::Span::synthetic(),
            "graphs with more than 128 vertices are not supported by context inference",
        )));
    }
    let label_index: BTreeMap<Label, usize> = labels.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut spent = 0usize;
    let mut table = ContextTable::default();
    let mut bits_r: BTreeMap<Label, u64> = BTreeMap::new();
    for k in &labels {
        let bits = max_r_from(g, &interner, *k, 0, &label_index, &mut spent, budget)?;
        bits_r.insert(*k, bits);
        table.max_r.insert(*k, interner.set_of_bits(bits));
    }
    for k in &labels {
        let mut bits = 0u64;
        for succ in g.succ(*k) {
            bits |= bits_r[&succ];
        }
        table.max_ra.insert(*k, interner.set_of_bits(bits));
    }
    Ok(table)
}
