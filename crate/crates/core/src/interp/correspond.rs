//! Bounded-exhaustive correspondence checking between the source
//! semantics and the translated rule set.
//!
//! Soundness direction: every source trace is replayed into a target
//! trace, constructing each translated step and verifying both state
//! consistency (the target state is exactly the source fact multiset
//! plus one state fact per live instance, with dereferenced context
//! payloads) and step consistency (premise/action/conclusion of the
//! target step equal the dereferenced source fields plus the entry and
//! exit state facts).
//!
//! Completeness direction: every target trace is mapped back onto a
//! source trace by replaying the source engine and matching ground
//! steps; deferred successor choices behind backward state facts are
//! resolved by looking ahead to the step that consumes them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::cellflow::ContextTable;
use crate::cfg::{Label, ProcessGraph};
use crate::translate::{MsrRule, TgFact, TranslationStyle, EMPTY_CTX, ST_BACKWARD, ST_FORWARD};

use super::engine::{
    ExecState, GroundRule, InterpError, SourceEngine, StepKind, TargetEngine, TargetState,
    TargetStep, Universe,
};
use super::ground::{match_term, Canonicalizer, FactSet, GFact, GTerm};

#[derive(Debug, Clone)]
pub struct SourceTrace {
    pub steps: Vec<(GroundRule, ExecState)>,
}

#[derive(Debug, Clone)]
pub struct TargetTrace {
    pub steps: Vec<(TargetStep, TargetState)>,
}

impl SourceTrace {
    /// Alternating-sequence rendering of the trace.
    pub fn render(&self) -> String {
        let mut out = String::from(ExecState::default().render());
        for (rule, state) in &self.steps {
            out.push_str(",\n  ");
            out.push_str(&rule.render());
            out.push_str(",\n");
            out.push_str(&state.render());
        }
        out
    }

    fn canon_key(&self) -> Vec<GroundRule> {
        let mut canon = Canonicalizer::default();
        self.steps
            .iter()
            .map(|(r, _)| {
                let mut r2 = r.clone();
                r2.premise = r.premise.iter().map(|f| canon.fact(f)).collect();
                r2.actions = r.actions.iter().map(|f| canon.fact(f)).collect();
                r2.conclusion = r.conclusion.iter().map(|f| canon.fact(f)).collect();
                r2.kind = match &r.kind {
                    StepKind::Fresh => StepKind::Fresh,
                    StepKind::Start {
                        vertex,
                        instance,
                        moved_to,
                    } => StepKind::Start {
                        vertex: *vertex,
                        instance: canon_id(&mut canon, *instance),
                        moved_to: *moved_to,
                    },
                    StepKind::Rule {
                        vertex,
                        instance,
                        moved_to,
                    } => StepKind::Rule {
                        vertex: *vertex,
                        instance: canon_id(&mut canon, *instance),
                        moved_to: *moved_to,
                    },
                };
                r2
            })
            .collect()
    }
}

fn canon_id(canon: &mut Canonicalizer, id: u32) -> u32 {
    match canon.term(&GTerm::Fresh(id)) {
        GTerm::Fresh(n) => n,
        _ => unreachable!(),
    }
}

impl TargetTrace {
    fn canon_key(&self) -> Vec<TargetStep> {
        let mut canon = Canonicalizer::default();
        self.steps
            .iter()
            .map(|(s, _)| TargetStep {
                rule_index: s.rule_index,
                premise: s.premise.iter().map(|f| canon.fact(f)).collect(),
                actions: s.actions.iter().map(|f| canon.fact(f)).collect(),
                conclusion: s.conclusion.iter().map(|f| canon.fact(f)).collect(),
            })
            .collect()
    }
}

/// All source traces up to `depth`, deduplicated up to fresh renaming.
pub fn enumerate_source(
    engine: &SourceEngine<'_>,
    depth: usize,
    budget: usize,
) -> Result<Vec<SourceTrace>, InterpError> {
    let mut out = vec![SourceTrace { steps: Vec::new() }];
    let mut seen: BTreeSet<Vec<GroundRule>> = BTreeSet::new();
    let mut queue: VecDeque<(ExecState, SourceTrace)> = VecDeque::new();
    queue.push_back((ExecState::default(), SourceTrace { steps: Vec::new() }));
    let mut spent = 0usize;
    while let Some((state, trace)) = queue.pop_front() {
        if trace.steps.len() >= depth {
            continue;
        }
        spent += 1;
        if spent > budget {
            return Err(InterpError::BudgetExceeded { limit: budget });
        }
        for (rule, next) in engine.step(&state)? {
            let mut t2 = trace.clone();
            t2.steps.push((rule, next.clone()));
            if seen.insert(t2.canon_key()) {
                out.push(t2.clone());
                queue.push_back((next, t2));
            }
        }
    }
    Ok(out)
}

/// All target traces up to `depth`, deduplicated up to fresh renaming.
pub fn enumerate_target(
    engine: &TargetEngine<'_>,
    depth: usize,
    budget: usize,
) -> Result<Vec<TargetTrace>, InterpError> {
    let mut out = vec![TargetTrace { steps: Vec::new() }];
    let mut seen: BTreeSet<Vec<TargetStep>> = BTreeSet::new();
    let mut queue: VecDeque<(TargetState, TargetTrace)> = VecDeque::new();
    queue.push_back((TargetState::default(), TargetTrace { steps: Vec::new() }));
    let mut spent = 0usize;
    while let Some((state, trace)) = queue.pop_front() {
        if trace.steps.len() >= depth {
            continue;
        }
        spent += 1;
        if spent > budget {
            return Err(InterpError::BudgetExceeded { limit: budget });
        }
        for (step, next) in engine.step(&state)? {
            let mut t2 = trace.clone();
            t2.steps.push((step, next.clone()));
            if seen.insert(t2.canon_key()) {
                out.push(t2.clone());
                queue.push_back((next, t2));
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub enum CheckResult {
    Ok {
        source_traces: usize,
        target_traces: usize,
    },
    CounterExample {
        direction: &'static str,
        clause: String,
        trace: String,
    },
}

impl CheckResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, CheckResult::Ok { .. })
    }
}

struct Checker<'a> {
    g: &'a ProcessGraph,
    table: &'a ContextTable,
    rules: &'a [MsrRule],
}

impl<'a> Checker<'a> {
    /// Context payload of a state fact under a memory.
    fn payload(&self, memory: &BTreeMap<String, GTerm>, ctx: &BTreeSet<String>) -> Option<GTerm> {
        let mut slots = Vec::new();
        for cell in ctx {
            slots.push(memory.get(cell)?.clone());
        }
        Some(match slots.len() {
            0 => GTerm::Str(EMPTY_CTX.to_string()),
            1 => slots.into_iter().next().unwrap(),
            _ => GTerm::Tuple(slots),
        })
    }

    fn st_fact(&self, family: &str, id: u32, site: Label, payload: GTerm) -> GFact {
        GFact::new(family, vec![GTerm::Fresh(id), GTerm::Str(site.to_string()), payload])
    }

    /// State consistency: the target state is the source fact multiset
    /// plus exactly one admissible state fact per live instance.
    fn check_state_consistency(
        &self,
        s_t: &FactSet,
        src: &ExecState,
    ) -> Result<(), String> {
        let mut residual = s_t.clone();
        let mut st_facts: Vec<GFact> = Vec::new();
        for f in s_t.linear.keys() {
            if f.name == ST_FORWARD || f.name == ST_BACKWARD {
                for _ in 0..s_t.count(f) {
                    st_facts.push(f.clone());
                }
            }
        }
        for f in &st_facts {
            residual.consume(f);
        }
        if residual != src.facts {
            return Err(format!(
                "state consistency: target residual {} differs from source facts {}",
                residual.render(),
                src.facts.render()
            ));
        }
        let mut by_id: BTreeMap<u32, Vec<&GFact>> = BTreeMap::new();
        for f in &st_facts {
            match f.args.first() {
                Some(GTerm::Fresh(id)) => by_id.entry(*id).or_default().push(f),
                _ => return Err(format!("state fact with non-fresh pid: {}", f.render())),
            }
        }
        for (id, facts) in &by_id {
            if !src.counters.contains_key(id) {
                return Err(format!(
                    "state consistency: state fact for retired or unknown instance ~n{}",
                    id
                ));
            }
            if facts.len() != 1 {
                return Err(format!(
                    "state consistency: instance ~n{} has {} state facts",
                    id,
                    facts.len()
                ));
            }
        }
        for (id, k) in &src.counters {
            let facts = match by_id.get(id) {
                Some(f) => f,
                None => {
                    return Err(format!(
                        "state consistency: no state fact for instance ~n{} at {}",
                        id, k
                    ))
                }
            };
            let fact = facts[0];
            let memory = &src.memories[id];
            let mut admissible: Vec<GFact> = Vec::new();
            if let Some(p) = self.payload(memory, self.table.max_r(*k)) {
                admissible.push(self.st_fact(ST_FORWARD, *id, *k, p));
            }
            for pred in self.g.pred(*k) {
                if let Some(p) = self.payload(memory, self.table.max_ra(pred)) {
                    admissible.push(self.st_fact(ST_BACKWARD, *id, pred, p));
                }
            }
            if !admissible.iter().any(|a| a == fact) {
                return Err(format!(
                    "state consistency: {} is not an admissible state fact for ~n{} at {}",
                    fact.render(),
                    id,
                    k
                ));
            }
        }
        Ok(())
    }

    /// Locate the state fact currently carried by an instance.
    fn current_st_fact(&self, s_t: &FactSet, id: u32) -> Option<GFact> {
        s_t.linear
            .keys()
            .find(|f| {
                (f.name == ST_FORWARD || f.name == ST_BACKWARD)
                    && matches!(f.args.first(), Some(GTerm::Fresh(n)) if *n == id)
            })
            .cloned()
    }

    /// Does `ground` instantiate `schema` positionally?
    fn is_instance(&self, schema: &MsrRule, ground: &TargetStep) -> bool {
        if schema.premise.len() != ground.premise.len()
            || schema.actions.len() != ground.actions.len()
            || schema.conclusion.len() != ground.conclusion.len()
        {
            return false;
        }
        let mut subst = BTreeMap::new();
        let pairs = schema
            .premise
            .iter()
            .zip(&ground.premise)
            .chain(schema.actions.iter().zip(&ground.actions))
            .chain(schema.conclusion.iter().zip(&ground.conclusion));
        for (pat, val) in pairs {
            if pat.name != val.name || pat.persistent != val.persistent {
                return false;
            }
            if pat.args.len() != val.args.len() {
                return false;
            }
            for (p, v) in pat.args.iter().zip(&val.args) {
                if !match_term(p, v, &mut subst) {
                    return false;
                }
            }
        }
        true
    }

    /// Build and apply the target step corresponding to one source
    /// step, verifying step consistency along the way.
    fn construct_target_step(
        &self,
        s_t: &mut TargetState,
        rule: &GroundRule,
        post: &ExecState,
    ) -> Result<TargetStep, String> {
        let step = match &rule.kind {
            StepKind::Fresh => TargetStep {
                rule_index: None,
                premise: Vec::new(),
                actions: Vec::new(),
                conclusion: rule.conclusion.clone(),
            },
            StepKind::Start {
                vertex,
                instance,
                moved_to,
            } => {
                let exit = self.exit_fact_for(*vertex, Some(*moved_to), *instance, post)?;
                let mut conclusion = vec![exit.clone().expect("init always has a successor")];
                conclusion.extend(rule.conclusion.iter().cloned());
                let step = TargetStep {
                    rule_index: self.find_rule(*vertex, None, exit.as_ref())?,
                    premise: rule.premise.clone(),
                    actions: rule.actions.clone(),
                    conclusion,
                };
                step
            }
            StepKind::Rule {
                vertex,
                instance,
                moved_to,
            } => {
                let entry = self
                    .current_st_fact(&s_t.facts, *instance)
                    .ok_or_else(|| {
                        format!(
                            "step consistency (1): no state fact for ~n{} before rule {}",
                            instance, vertex
                        )
                    })?;
                let exit = self.exit_fact_for(*vertex, *moved_to, *instance, post)?;
                let mut premise = vec![entry.clone()];
                premise.extend(rule.premise.iter().cloned());
                let mut conclusion = Vec::new();
                if let Some(x) = &exit {
                    conclusion.push(x.clone());
                }
                conclusion.extend(rule.conclusion.iter().cloned());
                TargetStep {
                    rule_index: self.find_rule(*vertex, Some(&entry), exit.as_ref())?,
                    premise,
                    actions: rule.actions.clone(),
                    conclusion,
                }
            }
        };
        // the constructed step must be a ground instance of its schema
        if let Some(ri) = step.rule_index {
            if !self.is_instance(&self.rules[ri], &step) {
                return Err(format!(
                    "constructed step is not an instance of rule {}",
                    self.rules[ri].name
                ));
            }
        }
        // fire it
        for f in &step.premise {
            if f.name == "In" {
                continue;
            }
            if !s_t.facts.consume(f) {
                return Err(format!(
                    "step consistency (2): premise fact {} not available in target state",
                    f.render()
                ));
            }
        }
        for f in &step.conclusion {
            s_t.facts.add(f.clone());
        }
        if matches!(rule.kind, StepKind::Fresh) {
            s_t.fresh_used += 1;
        }
        Ok(step)
    }

    /// The ground exit fact for leaving `vertex` towards `moved_to`
    /// under the style's bias, dereferenced through the post-state
    /// memory. None when the vertex has no successors.
    fn exit_fact_for(
        &self,
        vertex: Label,
        moved_to: Option<Label>,
        instance: u32,
        post: &ExecState,
    ) -> Result<Option<GFact>, String> {
        let succs = self.g.succ(vertex);
        if succs.is_empty() {
            return Ok(None);
        }
        let memory = post.memories.get(&instance).ok_or_else(|| {
            format!("instance ~n{} has no memory after stepping {}", instance, vertex)
        })?;
        // locate the schema exits for this vertex among translated rules
        let forward = self
            .rules
            .iter()
            .filter(|r| r.source == vertex)
            .any(|r| r.conclusion.iter().any(|f| f.name == ST_FORWARD));
        if forward {
            let to = moved_to.ok_or("forward exit without a successor choice")?;
            let payload = self
                .payload(memory, self.table.max_r(to))
                .ok_or_else(|| format!("memory misses maxR({}) cells", to))?;
            Ok(Some(self.st_fact(ST_FORWARD, instance, to, payload)))
        } else {
            let payload = self
                .payload(memory, self.table.max_ra(vertex))
                .ok_or_else(|| format!("memory misses maxRA({}) cells", vertex))?;
            Ok(Some(self.st_fact(ST_BACKWARD, instance, vertex, payload)))
        }
    }

    /// Find the translated copy of `vertex` whose entry/exit shape
    /// matches the given ground facts.
    fn find_rule(
        &self,
        vertex: Label,
        entry: Option<&GFact>,
        exit: Option<&GFact>,
    ) -> Result<Option<usize>, String> {
        for (ri, rule) in self.rules.iter().enumerate() {
            if rule.source != vertex {
                continue;
            }
            let schema_entry = rule
                .premise
                .iter()
                .find(|f| f.name == ST_FORWARD || f.name == ST_BACKWARD);
            let schema_exit = rule
                .conclusion
                .iter()
                .find(|f| f.name == ST_FORWARD || f.name == ST_BACKWARD);
            let entry_ok = match (schema_entry, entry) {
                (None, None) => true,
                (Some(s), Some(g)) => s.name == g.name && s.args[1] == site_term_of(g),
                _ => false,
            };
            let exit_ok = match (schema_exit, exit) {
                (None, None) => true,
                (Some(s), Some(g)) => s.name == g.name && s.args[1] == site_term_of(g),
                _ => false,
            };
            if entry_ok && exit_ok {
                return Ok(Some(ri));
            }
        }
        Err(format!(
            "no translated copy of vertex {} matches entry {:?} / exit {:?}",
            vertex,
            entry.map(|f| f.render()),
            exit.map(|f| f.render())
        ))
    }
}

/// Site argument of a ground state fact, as the schema term it must
/// have come from.
fn site_term_of(g: &GFact) -> crate::translate::TgTerm {
    match &g.args[1] {
        GTerm::Str(s) => crate::translate::TgTerm::Str(s.clone()),
        other => crate::translate::TgTerm::Str(other.to_string()),
    }
}

/// Check both directions of the translation correspondence at the
/// given depth (completeness explores one extra step on the target
/// side to absorb the init offset).
#[allow(clippy::too_many_arguments)]
pub fn check_correspondence(
    g: &ProcessGraph,
    usage: &crate::cellflow::UsageMap,
    table: &ContextTable,
    rules: &[MsrRule],
    style: TranslationStyle,
    depth: usize,
    universe: &Universe,
    budget: usize,
) -> Result<CheckResult, InterpError> {
    if style == TranslationStyle::CellByCell {
        return check_observational(g, usage, table, rules, depth, universe, budget);
    }
    let engine = SourceEngine {
        graph: g,
        usage,
        universe,
        context_check: Some(table),
    };
    let checker = Checker { g, table, rules };

    // soundness: construct a corresponding target trace per source trace
    let source_traces = enumerate_source(&engine, depth, budget)?;
    for trace in &source_traces {
        let mut s_t = TargetState::default();
        let mut src_state = ExecState::default();
        for (rule, post) in &trace.steps {
            match checker.construct_target_step(&mut s_t, rule, post) {
                Ok(_) => {}
                Err(clause) => {
                    return Ok(CheckResult::CounterExample {
                        direction: "soundness",
                        clause,
                        trace: trace.render(),
                    })
                }
            }
            src_state = post.clone();
            if let Err(clause) = checker.check_state_consistency(&s_t.facts, &src_state) {
                return Ok(CheckResult::CounterExample {
                    direction: "soundness",
                    clause,
                    trace: trace.render(),
                });
            }
        }
    }

    // completeness: replay each target trace through the source engine
    let tengine = TargetEngine { rules, universe };
    let target_traces = enumerate_target(&tengine, depth + 1, budget)?;
    for trace in &target_traces {
        if let Err(clause) = replay_target(&engine, &checker, trace) {
            return Ok(CheckResult::CounterExample {
                direction: "completeness",
                clause,
                trace: render_target(trace),
            });
        }
    }

    Ok(CheckResult::Ok {
        source_traces: source_traces.len(),
        target_traces: target_traces.len(),
    })
}

fn render_target(trace: &TargetTrace) -> String {
    let mut out = String::from("{}");
    for (step, state) in &trace.steps {
        out.push_str(",\n  [");
        out.push_str(
            &step
                .premise
                .iter()
                .map(|f| f.render())
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str("] --[");
        out.push_str(
            &step
                .actions
                .iter()
                .map(|f| f.render())
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str("]-> [");
        out.push_str(
            &step
                .conclusion
                .iter()
                .map(|f| f.render())
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str("],\n");
        out.push_str(&state.facts.render());
    }
    out
}

fn st_entry_of(step: &TargetStep) -> Option<&GFact> {
    step.premise
        .iter()
        .find(|f| f.name == ST_FORWARD || f.name == ST_BACKWARD)
}

fn pid_of(f: &GFact) -> Option<u32> {
    match f.args.first() {
        Some(GTerm::Fresh(n)) => Some(*n),
        _ => None,
    }
}

/// Map one target trace back onto the source semantics.
fn replay_target(
    engine: &SourceEngine<'_>,
    checker: &Checker<'_>,
    trace: &TargetTrace,
) -> Result<(), String> {
    let mut src = ExecState::default();
    for (i, (step, _)) in trace.steps.iter().enumerate() {
        let successors = engine
            .step(&src)
            .map_err(|e| format!("source engine failed during replay: {}", e))?;
        let wanted_kind: Option<StepKind> = match step.rule_index {
            None => Some(StepKind::Fresh),
            Some(ri) => {
                let schema = &checker.rules[ri];
                let vertex = schema.source;
                if checker.g.entries.contains(&vertex) {
                    // init rule: instance id from the consumed Fr fact
                    let id = step
                        .premise
                        .iter()
                        .find(|f| f.name == "Fr")
                        .and_then(pid_of)
                        .ok_or("init step without Fr premise")?;
                    let moved = resolve_successor(checker, trace, i, vertex, id)?;
                    Some(StepKind::Start {
                        vertex,
                        instance: id,
                        moved_to: moved.ok_or("init must move to a successor")?,
                    })
                } else {
                    let entry = st_entry_of(step).ok_or("non-init step without entry fact")?;
                    let id = pid_of(entry).ok_or("entry fact without pid")?;
                    let moved = resolve_successor(checker, trace, i, vertex, id)?;
                    Some(StepKind::Rule {
                        vertex,
                        instance: id,
                        moved_to: moved,
                    })
                }
            }
        };
        let wanted_kind = wanted_kind.unwrap();
        // among source successors, find the one producing this ground step
        let non_st = |fs: &[GFact]| -> Vec<GFact> {
            fs.iter()
                .filter(|f| f.name != ST_FORWARD && f.name != ST_BACKWARD)
                .cloned()
                .collect()
        };
        let found = successors.iter().find(|(rule, _)| {
            rule.kind == wanted_kind
                && rule.premise == non_st(&step.premise)
                && rule.actions == step.actions
                && rule.conclusion == non_st(&step.conclusion)
        });
        match found {
            Some((_, next)) => {
                src = next.clone();
            }
            None => {
                return Err(format!(
                    "no source step matches target step {} ({:?})",
                    i, wanted_kind
                ))
            }
        }
        // verify state consistency against the actual target state
        let (_, t_state) = &trace.steps[i];
        checker.check_state_consistency(&t_state.facts, &src)?;
    }
    Ok(())
}

/// The successor committed by a target step: forward exits name it in
/// the exit fact; backward exits are resolved by the later step that
/// consumes the fact, defaulting to the smallest successor.
fn resolve_successor(
    checker: &Checker<'_>,
    trace: &TargetTrace,
    index: usize,
    vertex: Label,
    id: u32,
) -> Result<Option<Label>, String> {
    let succs = checker.g.succ(vertex);
    if succs.is_empty() {
        return Ok(None);
    }
    let (step, _) = &trace.steps[index];
    let exit = step
        .conclusion
        .iter()
        .find(|f| f.name == ST_FORWARD || f.name == ST_BACKWARD)
        .ok_or_else(|| format!("vertex {} has successors but the step leaves no state fact", vertex))?;
    if exit.name == ST_FORWARD {
        match &exit.args[1] {
            GTerm::Str(s) => {
                let n: u32 = s.parse().map_err(|_| "bad site index".to_string())?;
                return Ok(Some(Label(n)));
            }
            _ => return Err("bad site argument".into()),
        }
    }
    // backward exit: look ahead for the consumer of this instance's fact
    for (later, _) in trace.steps.iter().skip(index + 1) {
        if let Some(entry) = st_entry_of(later) {
            if pid_of(entry) == Some(id) {
                if let Some(ri) = later.rule_index {
                    return Ok(Some(checker.rules[ri].source));
                }
            }
        }
    }
    Ok(succs.into_iter().next().map(Some).unwrap_or(None))
}

/// Weaker check used for the cell-by-cell style: the reachable
/// action-label multisets agree between the two semantics.
fn check_observational(
    g: &ProcessGraph,
    usage: &crate::cellflow::UsageMap,
    table: &ContextTable,
    rules: &[MsrRule],
    depth: usize,
    universe: &Universe,
    budget: usize,
) -> Result<CheckResult, InterpError> {
    let engine = SourceEngine {
        graph: g,
        usage,
        universe,
        context_check: Some(table),
    };
    let source_traces = enumerate_source(&engine, depth, budget)?;
    let tengine = TargetEngine { rules, universe };
    let target_traces = enumerate_target(&tengine, depth, budget)?;

    let canon_actions = |actions: Vec<GFact>| -> Vec<GFact> {
        let mut sorted = actions;
        sorted.sort();
        let mut canon = Canonicalizer::default();
        sorted.iter().map(|f| canon.fact(f)).collect()
    };
    let src_obs: BTreeSet<Vec<GFact>> = source_traces
        .iter()
        .map(|t| {
            canon_actions(
                t.steps
                    .iter()
                    .flat_map(|(r, _)| r.actions.iter().cloned())
                    .collect(),
            )
        })
        .collect();
    let tgt_obs: BTreeSet<Vec<GFact>> = target_traces
        .iter()
        .map(|t| {
            canon_actions(
                t.steps
                    .iter()
                    .flat_map(|(s, _)| s.actions.iter().cloned())
                    .collect(),
            )
        })
        .collect();
    if src_obs != tgt_obs {
        let missing: Vec<String> = src_obs
            .symmetric_difference(&tgt_obs)
            .take(3)
            .map(|obs| {
                format!(
                    "[{}]",
                    obs.iter().map(|f| f.render()).collect::<Vec<_>>().join(", ")
                )
            })
            .collect();
        return Ok(CheckResult::CounterExample {
            direction: "observational",
            clause: format!("action multiset sets differ, e.g. {}", missing.join("; ")),
            trace: String::new(),
        });
    }
    Ok(CheckResult::Ok {
        source_traces: source_traces.len(),
        target_traces: target_traces.len(),
    })
}
