use std::collections::BTreeSet;

use crate::binder::bind_single;
use crate::cellflow::*;
use crate::cfg::{system_cfg, Label, MsrRuleSrc, ProcessGraph};
use crate::synth;
use crate::syntax::parse_source;

fn graph_of(src: &str) -> ProcessGraph {
    let m = parse_source(src, "Main").unwrap();
    let flat = bind_single(&m).unwrap();
    let mut g = system_cfg(&flat).unwrap();
    g.fuse_skips();
    g
}

fn cells(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// The two-step example pair: rule 0 defines 'a, rule 1 defines 'b and
/// undefines 'a.
fn two_step_graph() -> ProcessGraph {
    graph_of(
        "pred F/1\nprocess P =\n [ In(x) ]->[ 'a := x, F(x) ];\n [ In(y) ]->[ 'b := y, undef('a) ]\n",
    )
}

const TWO_STEP_SRC_DECLS: &str = "pred F/1\n";

fn graph_of_with_f(body: &str) -> ProcessGraph {
    graph_of(&format!("{}process P =\n{}", TWO_STEP_SRC_DECLS, body))
}

#[test]
fn usage_of_define_with_fact() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x, F(x) ]");
    let cu = cell_usage(Label(1), g.rule(Label(1)).unwrap()).unwrap();
    assert_eq!(cu.reads, cells(&[]));
    assert_eq!(cu.defines, cells(&["a"]));
    assert_eq!(cu.undefines, cells(&[]));
}

#[test]
fn usage_of_define_and_undef() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x, F(x) ];\n [ In(y) ]->[ 'b := y, undef('a) ]");
    let cu = cell_usage(Label(2), g.rule(Label(2)).unwrap()).unwrap();
    assert_eq!(cu.reads, cells(&[]));
    assert_eq!(cu.defines, cells(&["b"]));
    assert_eq!(cu.undefines, cells(&["a"]));
}

#[test]
fn usage_of_cas_is_a_read() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas \"1\" ]->[ Out(\"2\") ]");
    let cu = cell_usage(Label(2), g.rule(Label(2)).unwrap()).unwrap();
    assert_eq!(cu.reads, cells(&["a"]));
    assert!(cu.defines.is_empty());
    assert!(cu.undefines.is_empty());
}

#[test]
fn define_undefine_overlap_is_rejected() {
    let rule = synth::rule_with_usage("P", &[], &["a"], &[]);
    let mut bad = rule.clone();
    bad.conclusion.push(
        synth::rule_with_usage("P", &[], &[], &["a"]).conclusion[0].clone(),
    );
    let err = cell_usage(Label(0), &bad).unwrap_err();
    assert!(matches!(err, CellflowError::DefineUndefineOverlap { .. }));
}

#[test]
fn next_state_values() {
    let def_a = CellUsage {
        defines: cells(&["a"]),
        ..Default::default()
    };
    assert_eq!(next_state(&cells(&[]), &def_a), cells(&["a"]));
    let def_b_undef_a = CellUsage {
        defines: cells(&["b"]),
        undefines: cells(&["a"]),
        ..Default::default()
    };
    assert_eq!(next_state(&cells(&["a"]), &def_b_undef_a), cells(&["b"]));
    let skip = CellUsage::default();
    assert_eq!(next_state(&cells(&["a", "b"]), &skip), cells(&["a", "b"]));
}

#[test]
fn make_trace_folds_next() {
    let g = two_step_graph();
    let usage = UsageMap::of_graph(&g).unwrap();
    // empty trace
    let t = make_trace(&g, &usage, cells(&[]), &[]).unwrap();
    assert!(t.labels.is_empty());
    assert_eq!(t.states, vec![cells(&[])]);
    // the worked trace: after init + step 1 the state is {'pid,'a},
    // after step 2 'a is replaced by 'b
    let t = make_trace(&g, &usage, cells(&[]), &[Label(0), Label(1), Label(2)]).unwrap();
    assert_eq!(t.states[1], cells(&["pid"]));
    assert_eq!(t.states[2], cells(&["pid", "a"]));
    assert_eq!(t.states[3], cells(&["pid", "b"]));
    // disconnected labels are rejected
    assert!(make_trace(&g, &usage, cells(&[]), &[Label(0), Label(2)]).is_err());
}

#[test]
fn reads_preserve_state() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    let t = make_trace(&g, &usage, cells(&["a"]), &[Label(2)]).unwrap();
    assert_eq!(t.states[1], cells(&["a"]));
    assert!(trace_valid(&t, &usage).is_ok());
}

#[test]
fn read_before_define_is_invalid() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    let t = make_trace(&g, &usage, cells(&[]), &[Label(2)]).unwrap();
    let v = trace_valid(&t, &usage).unwrap_err();
    assert_eq!(v.position, 0);
    assert_eq!(v.label, Label(2));
    assert_eq!(v.missing, cells(&["a"]));
}

#[test]
fn paper_trace_is_valid() {
    let g = two_step_graph();
    let usage = UsageMap::of_graph(&g).unwrap();
    let t = make_trace(&g, &usage, cells(&[]), &[Label(0), Label(1), Label(2)]).unwrap();
    assert!(trace_valid(&t, &usage).is_ok());
}

#[test]
fn undef_then_read_is_invalid() {
    // define 'a, then a rule that undefines it, then a read
    let g = graph_of_with_f(
        " [ In(x) ]->[ 'a := x ];\n [ ]->[ undef('a) ];\n [ 'a cas z ]->[ Out(z) ]",
    );
    let usage = UsageMap::of_graph(&g).unwrap();
    let t = make_trace(
        &g,
        &usage,
        cells(&[]),
        &[Label(0), Label(1), Label(2), Label(3)],
    )
    .unwrap();
    let v = trace_valid(&t, &usage).unwrap_err();
    assert_eq!(v.position, 3);
    assert_eq!(v.missing, cells(&["a"]));
}

const PROCESS_A: &str = r#"
process A =
  [ In(x) ]->[ 'a := x ];
  choice {
    { [ 'a cas "1" ]->[ Out("2") ] };
    { [ 'a cas "A" ]->[ Out("B") ] };
  };
  []->[ Out("End") ]
"#;

#[test]
fn process_a_traces_are_valid() {
    let g = graph_of(PROCESS_A);
    let usage = UsageMap::of_graph(&g).unwrap();
    check_all_traces_valid(&g, &usage, DEFAULT_BUDGET).unwrap();
}

#[test]
fn skip_mutant_is_caught_with_witness() {
    let mut g = graph_of(PROCESS_A);
    // replace the defining vertex by a skip; the branches now read 'a
    // before any definition
    g.vertices.insert(Label(1), MsrRuleSrc::skip("A"));
    let usage = UsageMap::of_graph(&g).unwrap();
    let err = check_all_traces_valid(&g, &usage, DEFAULT_BUDGET).unwrap_err();
    match err {
        CellflowError::Invalid { violation } => {
            assert_eq!(violation.label, Label(2));
            assert_eq!(violation.missing, cells(&["a"]));
            // shortest witness: init, skip, branch
            assert_eq!(violation.trace.labels, vec![Label(0), Label(1), Label(2)]);
        }
        other => panic!("expected violation, got {:?}", other),
    }
}

#[test]
fn straight_line_define_then_read_is_ok() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    check_all_traces_valid(&g, &usage, DEFAULT_BUDGET).unwrap();
}

#[test]
fn budget_exceeded_is_explicit() {
    let g = graph_of(PROCESS_A);
    let usage = UsageMap::of_graph(&g).unwrap();
    let err = check_all_traces_valid(&g, &usage, 1).unwrap_err();
    assert!(matches!(err, CellflowError::BudgetExceeded { limit: 1 }));
}

#[test]
fn ctx_r_base_case() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    assert_eq!(ctx_r(&[Label(2)], &usage), cells(&["a"]));
}

#[test]
fn ctx_r_define_shadows_downstream_read() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    assert_eq!(ctx_r(&[Label(1), Label(2)], &usage), cells(&[]));
}

#[test]
fn ctx_r_unfolded_by_hand() {
    // trace [read-'b, define-'a, read-'a, read-'c] requires {'b, 'c}
    let mut g = ProcessGraph::default();
    g.vertices.insert(Label(0), synth::rule_with_usage("P", &["b"], &[], &[]));
    g.vertices.insert(Label(1), synth::rule_with_usage("P", &[], &["a"], &[]));
    g.vertices.insert(Label(2), synth::rule_with_usage("P", &["a"], &[], &[]));
    g.vertices.insert(Label(3), synth::rule_with_usage("P", &["c"], &[], &[]));
    for e in [(0, 1), (1, 2), (2, 3)] {
        g.edges.insert((Label(e.0), Label(e.1)));
    }
    let usage = UsageMap::of_graph(&g).unwrap();
    assert_eq!(
        ctx_r(&[Label(0), Label(1), Label(2), Label(3)], &usage),
        cells(&["b", "c"])
    );
}

#[test]
fn context_table_on_process_a() {
    let g = graph_of(PROCESS_A);
    let usage = UsageMap::of_graph(&g).unwrap();
    check_all_traces_valid(&g, &usage, DEFAULT_BUDGET).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    assert_eq!(table.max_r(Label(2)), &cells(&["a"]));
    assert_eq!(table.max_r(Label(4)), &cells(&[]));
    assert_eq!(table.max_ra(Label(1)), &cells(&["a"]));
}

#[test]
fn leaf_contexts_are_trivial() {
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    let leaf = Label(2);
    assert_eq!(table.max_r(leaf), &usage.get(leaf).reads);
    assert_eq!(table.max_ra(leaf), &cells(&[]));
}

#[test]
fn define_without_read_stays_out_of_max_r() {
    // k defines 'a, its successor reads it: 'a in maxRA(k) \ maxR(k)
    let g = graph_of_with_f(" [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]");
    let usage = UsageMap::of_graph(&g).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    let k = Label(1);
    assert!(table.max_ra(k).contains("a"));
    assert!(!table.max_r(k).contains("a"));
}

#[test]
fn max_ra_is_union_of_successor_max_r() {
    let mut rng = synth::Rng::new(7);
    for _ in 0..50 {
        let g = synth::random_graph(&mut rng, 6, 3);
        let usage = synth::usage_of(&g);
        if let Ok(table) = context_table(&g, &usage, DEFAULT_BUDGET) {
            for k in g.vertices.keys() {
                let mut expect = BTreeSet::new();
                for s in g.succ(*k) {
                    expect.extend(table.max_r(s).iter().cloned());
                }
                assert_eq!(table.max_ra(*k), &expect, "maxRA mismatch at {}", k);
                assert!(usage.get(*k).reads.is_subset(table.max_r(*k)));
            }
        }
    }
}

#[test]
fn two_loop_bound_agrees_with_four_loops_smoke() {
    // the full 200-graph comparison lives in the acceptance suite
    let mut rng = synth::Rng::new(42);
    for _ in 0..40 {
        let g = synth::random_graph(&mut rng, 6, 3);
        let usage = synth::usage_of(&g);
        let two = check_all_traces_valid_bounded(&g, &usage, 2, DEFAULT_BUDGET);
        let four = check_all_traces_valid_bounded(&g, &usage, 4, DEFAULT_BUDGET);
        assert_eq!(two.is_ok(), four.is_ok());
    }
}

#[test]
fn maximality_smoke() {
    let mut rng = synth::Rng::new(11);
    for _ in 0..40 {
        let g = synth::random_graph(&mut rng, 6, 3);
        let usage = synth::usage_of(&g);
        let table = match context_table(&g, &usage, DEFAULT_BUDGET) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let labels: Vec<Label> = g.vertices.keys().copied().collect();
        for _ in 0..20 {
            let start = labels[rng.below(labels.len())];
            let walk = synth::random_trace(&mut rng, &g, start, 3);
            let req = ctx_r(&walk, &usage);
            assert!(
                req.is_subset(table.max_r(start)),
                "ctx_r {:?} exceeds maxR {:?} at {}",
                req,
                table.max_r(start),
                start
            );
        }
    }
}

#[test]
fn render_is_deterministic_and_sorted() {
    let g = graph_of(PROCESS_A);
    let usage = UsageMap::of_graph(&g).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    let text = table.render();
    assert_eq!(text, table.render());
    assert!(text.starts_with("rule 0:"));
    assert!(text.contains("rule 2: maxR = {'a}"));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_usage() -> impl Strategy<Value = CellUsage> {
        let cellnames = prop::collection::btree_set("[abc]", 0..3);
        (cellnames.clone(), cellnames.clone(), cellnames).prop_map(|(r, d, mut u)| {
            for x in &d {
                u.remove(x);
            }
            CellUsage {
                reads: r,
                defines: d,
                undefines: u,
            }
        })
    }

    proptest! {
        #[test]
        fn next_state_monotone_without_undefines(
            s in prop::collection::btree_set("[abc]", 0..3),
            mut cu in arb_usage(),
        ) {
            cu.undefines.clear();
            let next = next_state(&s, &cu);
            prop_assert!(s.is_subset(&next));
        }

        #[test]
        fn ctx_r_concat_bound(
            usages in prop::collection::vec(arb_usage(), 1..6),
            split in 0usize..6,
            ylen in 1usize..4,
        ) {
            // ctx_r(P . X . Y) <= ctx_r(P . X) u ctx_r(P . Y) when X and
            // Y start at the same label
            let mut g = ProcessGraph::default();
            for (i, _) in usages.iter().enumerate() {
                g.vertices.insert(Label(i as u32), synth::rule_with_usage("P", &[], &[], &[]));
            }
            let map: std::collections::BTreeMap<Label, CellUsage> = usages
                .iter()
                .enumerate()
                .map(|(i, u)| (Label(i as u32), u.clone()))
                .collect();
            let usage = UsageMap { map };
            let n = usages.len();
            let prefix: Vec<Label> = (0..split.min(n)).map(|i| Label((i % n) as u32)).collect();
            let head = Label((split % n) as u32);
            let x: Vec<Label> = std::iter::once(head)
                .chain((0..ylen).map(|i| Label(((split + i + 1) % n) as u32)))
                .collect();
            let y: Vec<Label> = std::iter::once(head)
                .chain((0..ylen).map(|i| Label(((split + 2 * i + 1) % n) as u32)))
                .collect();
            let mut pxy: Vec<Label> = prefix.clone();
            pxy.extend(&x);
            pxy.extend(&y);
            let mut px = prefix.clone();
            px.extend(&x);
            let mut py = prefix.clone();
            py.extend(&y);
            let lhs = ctx_r(&pxy, &usage);
            let mut rhs = ctx_r(&px, &usage);
            rhs.extend(ctx_r(&py, &usage));
            prop_assert!(lhs.is_subset(&rhs), "{:?} not within {:?}", lhs, rhs);
        }
    }
}
