//! Seeded random CFG generation for property testing and benchmarks.
//! Graphs are built directly at the IR level: each vertex gets a rule
//! realizing a random cell-usage triple, edges are a random sparse
//! relation over a guaranteed-rooted skeleton.

use std::collections::BTreeSet;

use crate::cfg::{Label, MsrRuleSrc, ProcessGraph};
use crate::cellflow::UsageMap;
use crate::diag::Span;
use crate::syntax::ast::{Arg, ArgValue, Path, TermExpr, TermNode};

/// xorshift64* generator; deterministic across platforms.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform value in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, num: u32, den: u32) -> bool {
        (self.next_u64() % den as u64) < num as u64
    }
}

fn fact(name: &str, args: Vec<TermExpr>) -> TermExpr {
    let span = Span::synthetic();
    TermExpr::new(
        TermNode::App {
            path: Path::single(name, span),
            args: args
                .into_iter()
                .map(|t| Arg {
                    label: None,
                    span,
                    value: ArgValue::Term(t),
                })
                .collect(),
            persistent: false,
        },
        span,
    )
}

fn cell(name: &str) -> TermExpr {
    TermExpr::new(TermNode::Cell(name.to_string()), Span::synthetic())
}

fn strlit(s: &str) -> TermExpr {
    TermExpr::new(TermNode::StrLit(s.to_string()), Span::synthetic())
}

/// Rule reading `reads`, assigning a constant to each of `defines`,
/// and undefining `undefines`.
pub fn rule_with_usage(
    process: &str,
    reads: &[&str],
    defines: &[&str],
    undefines: &[&str],
) -> MsrRuleSrc {
    let span = Span::synthetic();
    let mut actions = Vec::new();
    if !reads.is_empty() {
        actions.push(fact("Probe", reads.iter().map(|c| cell(c)).collect()));
    }
    let mut conclusion = Vec::new();
    for d in defines {
        conclusion.push(TermExpr::new(
            TermNode::Assign {
                cell: d.to_string(),
                value: Box::new(strlit("v")),
            },
            span,
        ));
    }
    for u in undefines {
        conclusion.push(TermExpr::new(
            TermNode::Undef {
                cell: u.to_string(),
            },
            span,
        ));
    }
    MsrRuleSrc {
        premise: Vec::new(),
        actions,
        conclusion,
        annotation: None,
        process: process.to_string(),
    }
}

/// Random CFG with at most `max_vertices` vertices and `max_cells`
/// distinct cells. Vertex 0 is always a root; every vertex is
/// reachable by construction (each vertex i > 0 gets one incoming edge
/// from an earlier vertex, then extra edges, including back edges, are
/// sprinkled on top).
pub fn random_graph(rng: &mut Rng, max_vertices: usize, max_cells: usize) -> ProcessGraph {
    let n = 2 + rng.below(max_vertices.saturating_sub(1));
    let cells: Vec<String> = (0..max_cells).map(|i| format!("c{}", i)).collect();
    let mut g = ProcessGraph::default();
    for i in 0..n {
        let pick = |rng: &mut Rng, exclude: &BTreeSet<usize>| -> Vec<usize> {
            let mut out = Vec::new();
            for c in 0..cells.len() {
                if !exclude.contains(&c) && rng.chance(1, 3) {
                    out.push(c);
                }
            }
            out
        };
        let defines = pick(rng, &BTreeSet::new());
        let def_set: BTreeSet<usize> = defines.iter().copied().collect();
        // defines and undefines must stay disjoint for well-formedness
        let undefines = pick(rng, &def_set);
        let reads = pick(rng, &BTreeSet::new());
        let name = |ix: &Vec<usize>| -> Vec<&str> { ix.iter().map(|c| cells[*c].as_str()).collect() };
        g.vertices.insert(
            Label(i as u32),
            rule_with_usage("Synth", &name(&reads), &name(&defines), &name(&undefines)),
        );
    }
    for i in 1..n {
        let from = rng.below(i);
        g.edges.insert((Label(from as u32), Label(i as u32)));
    }
    let extra = rng.below(n + 1);
    for _ in 0..extra {
        let a = rng.below(n);
        let b = rng.below(n);
        if b != 0 {
            g.edges.insert((Label(a as u32), Label(b as u32)));
        }
    }
    g.entries.push(Label(0));
    g
}

/// Random well-formed trace: a walk along edges from `start`, keeping
/// every label's occurrence count within `max_loops + 1`.
pub fn random_trace(
    rng: &mut Rng,
    g: &ProcessGraph,
    start: Label,
    max_loops: u32,
) -> Vec<Label> {
    let cap = max_loops + 1;
    let mut occ: std::collections::BTreeMap<Label, u32> = Default::default();
    let mut path = vec![start];
    *occ.entry(start).or_default() += 1;
    let mut cur = start;
    loop {
        let succs: Vec<Label> = g
            .succ(cur)
            .into_iter()
            .filter(|s| occ.get(s).copied().unwrap_or(0) < cap)
            .collect();
        if succs.is_empty() || rng.chance(1, 5) {
            return path;
        }
        cur = succs[rng.below(succs.len())];
        *occ.entry(cur).or_default() += 1;
        path.push(cur);
    }
}

/// Usage map for a synthetic graph (never fails: generated rules are
/// well-formed by construction).
pub fn usage_of(g: &ProcessGraph) -> UsageMap {
    UsageMap::of_graph(g).expect("synthetic rules are well-formed")
}
