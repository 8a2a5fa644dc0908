//! The two reference interpreters.
//!
//! Source side: configurations are (S, K, M) — a fact multiset, a
//! process counter per instance, and a per-instance memory store. The
//! transition relation has three rule shapes: Fresh (mint a fresh
//! name, adding its Fr fact), Start (consume an Fr fact at an init
//! vertex, allocating the instance), and Rule (fire the vertex the
//! instance points at, dereferencing cells through its memory and
//! moving the counter to a nondeterministically chosen successor;
//! instances at vertices without successors retire).
//!
//! Target side: plain multiset rewriting over the translated rules
//! plus FRESH, with the same input oracle: `In` premises match any
//! term of the bounded universe rather than facts in the state.

use std::collections::{BTreeMap, BTreeSet};

use crate::cellflow::UsageMap;
use crate::cfg::{Label, ProcessGraph};
use crate::syntax::ast::{ArgValue, Sort, TermExpr, TermNode};
use crate::translate::{MsrRule, TgFact, TgTerm};

use super::ground::{apply_subst, apply_subst_fact, match_term, FactSet, GFact, GTerm, Subst};

/// Finite ground-term domain for bounded-exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct Universe {
    /// public string constants the adversary may inject
    pub consts: Vec<String>,
    /// bound on the number of fresh names a trace may mint
    pub max_fresh: u32,
    /// composite-term depth for oracle instantiation (0 = atoms only)
    pub max_term_depth: u32,
    /// declared uninterpreted function symbols (qname, arity)
    pub funs: Vec<(String, usize)>,
}

impl Default for Universe {
    fn default() -> Self {
        Universe {
            consts: vec!["a".into(), "b".into()],
            max_fresh: 3,
            max_term_depth: 0,
            funs: Vec::new(),
        }
    }
}

impl Universe {
    /// Candidate terms for oracle-instantiated variables: atoms
    /// (constants and already-minted fresh names), then composites up
    /// to the configured depth.
    pub fn candidates(&self, fresh_used: u32, sort: Option<Sort>) -> Vec<GTerm> {
        let mut atoms: Vec<GTerm> = Vec::new();
        match sort {
            Some(Sort::Fresh) => {
                for n in 0..fresh_used {
                    atoms.push(GTerm::Fresh(n));
                }
            }
            Some(Sort::Public) => {
                for c in &self.consts {
                    atoms.push(GTerm::Str(c.clone()));
                }
            }
            _ => {
                for c in &self.consts {
                    atoms.push(GTerm::Str(c.clone()));
                }
                for n in 0..fresh_used {
                    atoms.push(GTerm::Fresh(n));
                }
            }
        }
        if sort.is_some() || self.max_term_depth == 0 {
            return atoms;
        }
        let mut layer = atoms.clone();
        let mut all = atoms;
        for _ in 0..self.max_term_depth {
            let mut next = Vec::new();
            for a in &layer {
                for b in &all {
                    next.push(GTerm::Tuple(vec![a.clone(), b.clone()]));
                }
            }
            for (f, arity) in &self.funs {
                if *arity == 1 {
                    for a in &layer {
                        next.push(GTerm::App(f.clone(), vec![a.clone()]));
                    }
                }
                if *arity == 0 {
                    next.push(GTerm::App(f.clone(), Vec::new()));
                }
            }
            all.extend(next.iter().cloned());
            layer = next;
        }
        all.sort();
        all.dedup();
        all
    }
}

/// Which semantic rule produced a step, with everything the
/// correspondence checker needs to reconstruct it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StepKind {
    Fresh,
    Start {
        vertex: Label,
        instance: u32,
        moved_to: Label,
    },
    Rule {
        vertex: Label,
        instance: u32,
        /// successor the counter moved to; None when the instance retired
        moved_to: Option<Label>,
    },
}

/// A fired ground rule. Facts are fully dereferenced; statements are
/// dropped (their effect lives in the successor state's memory).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundRule {
    pub premise: Vec<GFact>,
    pub actions: Vec<GFact>,
    pub conclusion: Vec<GFact>,
    pub kind: StepKind,
}

impl GroundRule {
    pub fn render(&self) -> String {
        let list = |fs: &[GFact]| {
            fs.iter().map(|f| f.render()).collect::<Vec<_>>().join(", ")
        };
        format!(
            "[{}] --[{}]-> [{}]",
            list(&self.premise),
            list(&self.actions),
            list(&self.conclusion)
        )
    }
}

/// Source configuration (S, K, M) plus the fresh-name counter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct ExecState {
    pub facts: FactSet,
    pub counters: BTreeMap<u32, Label>,
    pub memories: BTreeMap<u32, BTreeMap<String, GTerm>>,
    pub fresh_used: u32,
}

impl ExecState {
    pub fn render(&self) -> String {
        let counters = self
            .counters
            .iter()
            .map(|(id, k)| format!("~n{} -> {}", id, k))
            .collect::<Vec<_>>()
            .join(", ");
        let memories = self
            .memories
            .iter()
            .map(|(id, m)| {
                let cells = m
                    .iter()
                    .map(|(c, v)| format!("'{} -> {}", c, v))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("~n{} -> {{ {} }}", id, cells)
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "({}, {{ {} }}, {{ {} }})",
            self.facts.render(),
            counters,
            memories
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InterpError {
    #[error("undefined cell '{cell} dereferenced at rule {label}")]
    UndefinedCell { cell: String, label: Label },
    #[error("state budget of {limit} exceeded during enumeration")]
    BudgetExceeded { limit: usize },
    #[error("{0}")]
    Internal(String),
}

/// Homomorphic replacement of cells by the memory's bindings.
pub fn deref(
    memory: &BTreeMap<String, GTerm>,
    t: &TermExpr,
    subst: &Subst,
    label: Label,
) -> Result<GTerm, InterpError> {
    Ok(match &t.node {
        TermNode::Var { name, .. } => subst
            .get(name)
            .cloned()
            .ok_or_else(|| InterpError::Internal(format!("unbound variable {} at {}", name, label)))?,
        TermNode::StrLit(s) => GTerm::Str(s.clone()),
        TermNode::Cell(c) => memory
            .get(c)
            .cloned()
            .ok_or_else(|| InterpError::UndefinedCell {
                cell: c.clone(),
                label,
            })?,
        TermNode::App { path, args, .. } => GTerm::App(
            path.segments[0].clone(),
            args.iter()
                .map(|a| match &a.value {
                    ArgValue::Term(t) => deref(memory, t, subst, label),
                    _ => Err(InterpError::Internal("unexpanded argument".into())),
                })
                .collect::<Result<_, _>>()?,
        ),
        TermNode::Tuple(items) => GTerm::Tuple(
            items
                .iter()
                .map(|i| deref(memory, i, subst, label))
                .collect::<Result<_, _>>()?,
        ),
        other => {
            return Err(InterpError::Internal(format!(
                "non-term node in deref at {}: {:?}",
                label, other
            )))
        }
    })
}

fn deref_fact(
    memory: &BTreeMap<String, GTerm>,
    t: &TermExpr,
    subst: &Subst,
    label: Label,
) -> Result<GFact, InterpError> {
    match &t.node {
        TermNode::App { path, args, persistent } => Ok(GFact {
            name: path.segments[0].clone(),
            args: args
                .iter()
                .map(|a| match &a.value {
                    ArgValue::Term(t) => deref(memory, t, subst, label),
                    _ => Err(InterpError::Internal("unexpanded argument".into())),
                })
                .collect::<Result<_, _>>()?,
            persistent: *persistent,
        }),
        _ => Err(InterpError::Internal(
            "fact position holds non-fact".into(),
        )),
    }
}

/// Source-side pattern: match a term expression (cells dereferenced
/// eagerly) against a ground value, binding schematic variables.
fn match_src_term(
    memory: &BTreeMap<String, GTerm>,
    pattern: &TermExpr,
    value: &GTerm,
    subst: &mut Subst,
    label: Label,
) -> Result<bool, InterpError> {
    Ok(match &pattern.node {
        TermNode::Var { name, sort } => {
            let sort_ok = match sort {
                Some(Sort::Fresh) => matches!(value, GTerm::Fresh(_)),
                Some(Sort::Public) => matches!(value, GTerm::Pub(_) | GTerm::Str(_)),
                Some(Sort::Temporal) => false,
                _ => true,
            };
            if !sort_ok {
                false
            } else {
                match subst.get(name) {
                    Some(bound) => bound == value,
                    None => {
                        subst.insert(name.clone(), value.clone());
                        true
                    }
                }
            }
        }
        TermNode::StrLit(s) => matches!(value, GTerm::Str(v) if v == s),
        TermNode::Cell(c) => {
            let cell_value = memory.get(c).ok_or_else(|| InterpError::UndefinedCell {
                cell: c.clone(),
                label,
            })?;
            cell_value == value
        }
        TermNode::App { path, args, .. } => match value {
            GTerm::App(vname, vargs)
                if *vname == path.segments[0] && vargs.len() == args.len() =>
            {
                for (a, v) in args.iter().zip(vargs) {
                    match &a.value {
                        ArgValue::Term(t) => {
                            if !match_src_term(memory, t, v, subst, label)? {
                                return Ok(false);
                            }
                        }
                        _ => return Err(InterpError::Internal("unexpanded argument".into())),
                    }
                }
                true
            }
            _ => false,
        },
        TermNode::Tuple(items) => match value {
            GTerm::Tuple(vitems) if vitems.len() == items.len() => {
                for (p, v) in items.iter().zip(vitems) {
                    if !match_src_term(memory, p, v, subst, label)? {
                        return Ok(false);
                    }
                }
                true
            }
            _ => false,
        },
        other => {
            return Err(InterpError::Internal(format!(
                "unexpected pattern node {:?}",
                other
            )))
        }
    })
}

/// Schematic variables of a term, with their sorts.
fn term_vars(t: &TermExpr, out: &mut BTreeMap<String, Option<Sort>>) {
    match &t.node {
        TermNode::Var { name, sort } => {
            let entry = out.entry(name.clone()).or_insert(None);
            if entry.is_none() {
                *entry = *sort;
            }
        }
        TermNode::App { args, .. } => {
            for a in args {
                if let ArgValue::Term(t) = &a.value {
                    term_vars(t, out);
                }
            }
        }
        TermNode::Tuple(items) => {
            for i in items {
                term_vars(i, out);
            }
        }
        TermNode::Assign { value, .. } => term_vars(value, out),
        TermNode::CellPattern { term, .. } => term_vars(term, out),
        _ => {}
    }
}

/// Extend partial substitutions over the remaining free variables with
/// universe candidates.
fn saturate(
    substs: Vec<Subst>,
    vars: &BTreeMap<String, Option<Sort>>,
    u: &Universe,
    fresh_used: u32,
) -> Vec<Subst> {
    let mut out = substs;
    for (name, sort) in vars {
        let mut next = Vec::new();
        for s in &out {
            if s.contains_key(name) {
                next.push(s.clone());
            } else {
                for cand in u.candidates(fresh_used, *sort) {
                    let mut s2 = s.clone();
                    s2.insert(name.clone(), cand);
                    next.push(s2);
                }
            }
        }
        out = next;
    }
    out
}

// ---- source engine ----------------------------------------------------

pub struct SourceEngine<'a> {
    pub graph: &'a ProcessGraph,
    pub usage: &'a UsageMap,
    pub universe: &'a Universe,
    /// when set, assert `maxR(K(id)) <= dom(M(id))` at every step
    pub context_check: Option<&'a crate::cellflow::ContextTable>,
}

impl<'a> SourceEngine<'a> {
    /// All successor configurations with the ground rules that reach
    /// them.
    pub fn step(&self, st: &ExecState) -> Result<Vec<(GroundRule, ExecState)>, InterpError> {
        let mut out = Vec::new();
        self.fresh_steps(st, &mut out);
        self.start_steps(st, &mut out)?;
        self.rule_steps(st, &mut out)?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    fn fresh_steps(&self, st: &ExecState, out: &mut Vec<(GroundRule, ExecState)>) {
        if st.fresh_used >= self.universe.max_fresh {
            return;
        }
        let n = st.fresh_used;
        let mut next = st.clone();
        next.fresh_used += 1;
        next.facts.add(GFact::new("Fr", vec![GTerm::Fresh(n)]));
        out.push((
            GroundRule {
                premise: Vec::new(),
                actions: Vec::new(),
                conclusion: vec![GFact::new("Fr", vec![GTerm::Fresh(n)])],
                kind: StepKind::Fresh,
            },
            next,
        ));
    }

    fn start_steps(
        &self,
        st: &ExecState,
        out: &mut Vec<(GroundRule, ExecState)>,
    ) -> Result<(), InterpError> {
        for entry in &self.graph.entries {
            for fr in st.facts.linear.keys() {
                if fr.name != "Fr" || fr.args.len() != 1 {
                    continue;
                }
                let id = match &fr.args[0] {
                    GTerm::Fresh(n) => *n,
                    _ => continue,
                };
                if st.counters.contains_key(&id) {
                    continue;
                }
                for succ in self.graph.succ(*entry) {
                    let mut next = st.clone();
                    next.facts.consume(fr);
                    next.counters.insert(id, succ);
                    let mut memory = BTreeMap::new();
                    memory.insert(
                        crate::cfg::PID_CELL.to_string(),
                        GTerm::Fresh(id),
                    );
                    next.memories.insert(id, memory);
                    out.push((
                        GroundRule {
                            premise: vec![fr.clone()],
                            actions: Vec::new(),
                            conclusion: Vec::new(),
                            kind: StepKind::Start {
                                vertex: *entry,
                                instance: id,
                                moved_to: succ,
                            },
                        },
                        next,
                    ));
                }
            }
        }
        Ok(())
    }

    fn rule_steps(
        &self,
        st: &ExecState,
        out: &mut Vec<(GroundRule, ExecState)>,
    ) -> Result<(), InterpError> {
        for (id, k) in &st.counters {
            let memory = &st.memories[id];
            let rule = match self.graph.rule(*k) {
                Some(r) => r,
                None => continue,
            };
            let cu = self.usage.get(*k);
            // the (Rule) side condition: every read cell is in memory
            if !cu.reads.iter().all(|c| memory.contains_key(c)) {
                continue;
            }
            if let Some(table) = self.context_check {
                for cell in table.max_r(*k) {
                    if !memory.contains_key(cell) {
                        return Err(InterpError::Internal(format!(
                            "context/memory invariant broken: maxR({}) cell '{}' missing from memory of ~n{}",
                            k, cell, id
                        )));
                    }
                }
            }

            // match cas items first (no search: cell values are fixed)
            let mut cas_ok = true;
            let mut base = Subst::new();
            for item in &rule.premise {
                if let TermNode::CellPattern { cell, term } = &item.node {
                    let value = memory.get(cell).ok_or_else(|| InterpError::UndefinedCell {
                        cell: cell.clone(),
                        label: *k,
                    })?;
                    let value = value.clone();
                    if !match_src_term(memory, term, &value, &mut base, *k)? {
                        cas_ok = false;
                        break;
                    }
                }
            }
            if !cas_ok {
                continue;
            }

            // then the fact items, backtracking over the state and the
            // input oracle
            let fact_items: Vec<&TermExpr> = rule
                .premise
                .iter()
                .filter(|t| !matches!(t.node, TermNode::CellPattern { .. }))
                .collect();
            let matches = self.match_facts(st, memory, &fact_items, base, *k)?;

            for (subst, consumed) in matches {
                // instantiate any variables left free (action/conclusion
                // restriction patterns) over the universe
                let mut vars = BTreeMap::new();
                for t in rule.actions.iter().chain(rule.conclusion.iter()) {
                    term_vars(t, &mut vars);
                }
                for subst in saturate(vec![subst], &vars, self.universe, st.fresh_used) {
                    let premise: Vec<GFact> = consumed.clone();
                    let mut actions = Vec::new();
                    for a in &rule.actions {
                        actions.push(deref_fact(memory, a, &subst, *k)?);
                    }
                    let mut conclusion = Vec::new();
                    let mut defs: BTreeMap<String, GTerm> = BTreeMap::new();
                    let mut undefs: BTreeSet<String> = BTreeSet::new();
                    for c in &rule.conclusion {
                        match &c.node {
                            TermNode::Assign { cell, value } => {
                                defs.insert(cell.clone(), deref(memory, value, &subst, *k)?);
                            }
                            TermNode::Undef { cell } => {
                                undefs.insert(cell.clone());
                            }
                            _ => conclusion.push(deref_fact(memory, c, &subst, *k)?),
                        }
                    }
                    // memory: keep cells neither undefined nor overwritten
                    let mut new_memory = memory.clone();
                    for u in &undefs {
                        new_memory.remove(u);
                    }
                    for (c, v) in &defs {
                        new_memory.insert(c.clone(), v.clone());
                    }
                    let succs = self.graph.succ(*k);
                    let targets: Vec<Option<Label>> = if succs.is_empty() {
                        vec![None]
                    } else {
                        succs.iter().map(|s| Some(*s)).collect()
                    };
                    for target in targets {
                        let mut next = st.clone();
                        for f in &premise {
                            if f.name != "In" && !next.facts.consume(f) {
                                return Err(InterpError::Internal(format!(
                                    "matched fact {} missing from state",
                                    f.render()
                                )));
                            }
                        }
                        for f in &conclusion {
                            next.facts.add(f.clone());
                        }
                        match target {
                            Some(t) => {
                                next.counters.insert(*id, t);
                                next.memories.insert(*id, new_memory.clone());
                            }
                            None => {
                                next.counters.remove(id);
                                next.memories.remove(id);
                            }
                        }
                        out.push((
                            GroundRule {
                                premise: premise.clone(),
                                actions: actions.clone(),
                                conclusion: conclusion.clone(),
                                kind: StepKind::Rule {
                                    vertex: *k,
                                    instance: *id,
                                    moved_to: target,
                                },
                            },
                            next,
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Backtracking premise matcher. Returns complete substitutions
    /// together with the ground facts consumed (In instances included
    /// even though they never live in the state).
    fn match_facts(
        &self,
        st: &ExecState,
        memory: &BTreeMap<String, GTerm>,
        items: &[&TermExpr],
        base: Subst,
        label: Label,
    ) -> Result<Vec<(Subst, Vec<GFact>)>, InterpError> {
        let mut results = Vec::new();
        let mut stack = vec![(0usize, base, Vec::<GFact>::new())];
        while let Some((i, subst, consumed)) = stack.pop() {
            if i == items.len() {
                results.push((subst, consumed));
                continue;
            }
            let item = items[i];
            let (name, args, persistent) = match &item.node {
                TermNode::App {
                    path,
                    args,
                    persistent,
                } => (path.segments[0].as_str(), args, *persistent),
                other => {
                    return Err(InterpError::Internal(format!(
                        "premise item is not a fact: {:?}",
                        other
                    )))
                }
            };
            if name == "In" {
                // oracle: instantiate the pattern's free variables
                let mut vars = BTreeMap::new();
                for a in args.iter() {
                    if let ArgValue::Term(t) = &a.value {
                        term_vars(t, &mut vars);
                    }
                }
                for subst in saturate(vec![subst.clone()], &vars, self.universe, st.fresh_used) {
                    let mut gargs = Vec::new();
                    let mut ok = true;
                    for a in args.iter() {
                        match &a.value {
                            ArgValue::Term(t) => match deref(memory, t, &subst, label) {
                                Ok(g) => gargs.push(g),
                                Err(InterpError::UndefinedCell { cell, label }) => {
                                    return Err(InterpError::UndefinedCell { cell, label })
                                }
                                Err(_) => {
                                    ok = false;
                                    break;
                                }
                            },
                            _ => return Err(InterpError::Internal("unexpanded argument".into())),
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let mut consumed = consumed.clone();
                    consumed.push(GFact::new("In", gargs));
                    stack.push((i + 1, subst, consumed));
                }
                continue;
            }
            // count already-consumed copies so multiplicities hold
            for fact in st.facts.iter_all() {
                if fact.name != name || fact.persistent != persistent || fact.args.len() != args.len()
                {
                    continue;
                }
                if !persistent {
                    let used = consumed.iter().filter(|c| *c == fact).count() as u32;
                    if st.facts.count(fact) <= used {
                        continue;
                    }
                }
                let mut subst2 = subst.clone();
                let mut ok = true;
                for (a, v) in args.iter().zip(&fact.args) {
                    match &a.value {
                        ArgValue::Term(t) => {
                            if !match_src_term(memory, t, v, &mut subst2, label)? {
                                ok = false;
                                break;
                            }
                        }
                        _ => return Err(InterpError::Internal("unexpanded argument".into())),
                    }
                }
                if ok {
                    let mut consumed = consumed.clone();
                    consumed.push(fact.clone());
                    stack.push((i + 1, subst2, consumed));
                }
            }
        }
        Ok(results)
    }
}

// ---- target engine ----------------------------------------------------

/// Target configuration: a fact multiset plus the fresh counter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct TargetState {
    pub facts: FactSet,
    pub fresh_used: u32,
}

/// A fired target rule: index into the rule list (None for FRESH) and
/// the ground instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TargetStep {
    pub rule_index: Option<usize>,
    pub premise: Vec<GFact>,
    pub actions: Vec<GFact>,
    pub conclusion: Vec<GFact>,
}

pub struct TargetEngine<'a> {
    pub rules: &'a [MsrRule],
    pub universe: &'a Universe,
}

impl<'a> TargetEngine<'a> {
    pub fn step(&self, st: &TargetState) -> Result<Vec<(TargetStep, TargetState)>, InterpError> {
        let mut out = Vec::new();
        if st.fresh_used < self.universe.max_fresh {
            let n = st.fresh_used;
            let mut next = st.clone();
            next.fresh_used += 1;
            next.facts.add(GFact::new("Fr", vec![GTerm::Fresh(n)]));
            out.push((
                TargetStep {
                    rule_index: None,
                    premise: Vec::new(),
                    actions: Vec::new(),
                    conclusion: vec![GFact::new("Fr", vec![GTerm::Fresh(n)])],
                },
                next,
            ));
        }
        for (ri, rule) in self.rules.iter().enumerate() {
            for (subst, consumed) in self.match_facts(st, &rule.premise)? {
                let mut vars: BTreeSet<(String, Option<Sort>)> = BTreeSet::new();
                for f in rule.actions.iter().chain(rule.conclusion.iter()) {
                    for a in &f.args {
                        a.vars(&mut vars);
                    }
                }
                let var_map: BTreeMap<String, Option<Sort>> = vars.into_iter().collect();
                for subst in saturate(vec![subst], &var_map, self.universe, st.fresh_used) {
                    let instantiate = |facts: &[TgFact]| -> Result<Vec<GFact>, InterpError> {
                        facts
                            .iter()
                            .map(|f| {
                                apply_subst_fact(f, &subst).ok_or_else(|| {
                                    InterpError::Internal(format!(
                                        "rule {} has unbound variables",
                                        rule.name
                                    ))
                                })
                            })
                            .collect()
                    };
                    let actions = instantiate(&rule.actions)?;
                    let conclusion = instantiate(&rule.conclusion)?;
                    let mut next = st.clone();
                    for f in &consumed {
                        if f.name != "In" && !next.facts.consume(f) {
                            return Err(InterpError::Internal(format!(
                                "matched fact {} missing from state",
                                f.render()
                            )));
                        }
                    }
                    for f in &conclusion {
                        next.facts.add(f.clone());
                    }
                    out.push((
                        TargetStep {
                            rule_index: Some(ri),
                            premise: consumed.clone(),
                            actions,
                            conclusion,
                        },
                        next,
                    ));
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    fn match_facts(
        &self,
        st: &TargetState,
        items: &[TgFact],
    ) -> Result<Vec<(Subst, Vec<GFact>)>, InterpError> {
        let mut results = Vec::new();
        let mut stack = vec![(0usize, Subst::new(), Vec::<GFact>::new())];
        while let Some((i, subst, consumed)) = stack.pop() {
            if i == items.len() {
                results.push((subst, consumed));
                continue;
            }
            let item = &items[i];
            if item.name == "In" {
                let mut vars: BTreeSet<(String, Option<Sort>)> = BTreeSet::new();
                for a in &item.args {
                    a.vars(&mut vars);
                }
                let var_map: BTreeMap<String, Option<Sort>> = vars.into_iter().collect();
                for subst in saturate(vec![subst.clone()], &var_map, self.universe, st.fresh_used) {
                    let fact = apply_subst_fact(item, &subst).ok_or_else(|| {
                        InterpError::Internal("In pattern with unbindable variable".into())
                    })?;
                    let mut consumed = consumed.clone();
                    consumed.push(fact);
                    stack.push((i + 1, subst, consumed));
                }
                continue;
            }
            for fact in st.facts.iter_all() {
                if fact.name != item.name
                    || fact.persistent != item.persistent
                    || fact.args.len() != item.args.len()
                {
                    continue;
                }
                if !item.persistent {
                    let used = consumed.iter().filter(|c| *c == fact).count() as u32;
                    if st.facts.count(fact) <= used {
                        continue;
                    }
                }
                let mut subst2 = subst.clone();
                let ok = item
                    .args
                    .iter()
                    .zip(&fact.args)
                    .all(|(p, v)| match_term(p, v, &mut subst2));
                if ok {
                    let mut consumed = consumed.clone();
                    consumed.push(fact.clone());
                    stack.push((i + 1, subst2, consumed));
                }
            }
        }
        Ok(results)
    }
}
