use std::collections::BTreeSet;

use crate::binder::bind_single;
use crate::cfg::*;
use crate::syntax::parse_source;

fn graph_of(src: &str) -> ProcessGraph {
    let m = parse_source(src, "Main").unwrap();
    let flat = bind_single(&m).unwrap();
    system_cfg(&flat).unwrap()
}

fn edges(g: &ProcessGraph) -> BTreeSet<(u32, u32)> {
    g.edges.iter().map(|(a, b)| (a.0, b.0)).collect()
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
fn process_a_unfused_shape() {
    let g = graph_of(PROCESS_A);
    // init, step, two branches, choice join skip, end
    assert_eq!(g.vertices.len(), 6);
    assert!(g.vertices[&Label(4)].is_skip());
    assert_eq!(
        edges(&g),
        [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)].into_iter().collect()
    );
}

#[test]
fn process_a_fused_matches_toy_graph() {
    // after skip fusion the graph is the 5-vertex toy shape
    let mut g = graph_of(PROCESS_A);
    g.fuse_skips();
    assert_eq!(g.vertices.len(), 5);
    assert_eq!(
        edges(&g),
        [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)].into_iter().collect()
    );
    // rule 0 is the generated init rule
    assert_eq!(g.rule(Label(0)).unwrap().display(), "[Fr(~pid)]->['pid := ~pid]");
    assert_eq!(g.rule(Label(4)).unwrap().display(), "[]->[Out(\"End\")]");
}

#[test]
fn null_process_yields_only_the_init_vertex() {
    let g = graph_of("process P = 0");
    assert_eq!(g.vertices.len(), 1);
    assert!(g.edges.is_empty());
    assert_eq!(g.roots(), [Label(0)].into_iter().collect());
    assert_eq!(g.leaves(), [Label(0)].into_iter().collect());
}

#[test]
fn graph_queries_on_basic_shape() {
    let mut g = graph_of(
        r#"
process B =
  [ In(x) ]->[ 'a := x ];
  choice {
    { []->[ Out("p") ] };
    { []->[ Out("q") ] };
    { []->[ Out("r") ] };
  };
  []->[ Out("s") ];
  []->[ Out("t") ]
"#,
    );
    g.fuse_skips();
    // basic 7-vertex shape: succ(1) = {2,3,4}, pred(5) = {2,3,4}
    assert_eq!(g.vertices.len(), 7);
    assert_eq!(
        g.succ(Label(1)),
        [Label(2), Label(3), Label(4)].into_iter().collect()
    );
    assert_eq!(
        g.pred(Label(5)),
        [Label(2), Label(3), Label(4)].into_iter().collect()
    );
    assert_eq!(g.leaves(), [Label(6)].into_iter().collect());
    assert_eq!(g.roots(), [Label(0)].into_iter().collect());
}

#[test]
fn while_construction_by_hand() {
    // hand-applied construction for a single while loop
    let g = graph_of(
        r#"
process W =
  while ('c cas "T") {
    []->[ Out("x") ]
  };
  []->[ Out("y") ]
"#,
    );
    // 0 init, 1 k_T (cas), 2 k_F (restrict), 3 join skip, 4 body, 5 after
    assert_eq!(g.vertices.len(), 6);
    assert_eq!(g.rule(Label(1)).unwrap().display(), "['c cas \"T\"]->[]");
    assert_eq!(
        g.rule(Label(2)).unwrap().display(),
        "[]--[Neq('c, \"T\")]->[]"
    );
    assert!(g.rule(Label(3)).unwrap().is_skip());
    assert_eq!(
        edges(&g),
        [(0, 1), (0, 2), (1, 4), (2, 3), (3, 5), (4, 1), (4, 2)]
            .into_iter()
            .collect()
    );
    assert!(g.neq_generated);
    // k_T and k_F always share their predecessor sets
    assert_eq!(g.pred(Label(1)), g.pred(Label(2)));
}

#[test]
fn non_ground_condition_generates_a_restriction() {
    let g = graph_of(
        r#"
process W =
  []->[ 'c := "v" ];
  if ('c cas <x, y>) then { []->[ Out("m") ] } else { []->[ Out("n") ] }
"#,
    );
    assert_eq!(g.restrictions.len(), 1);
    assert_eq!(g.restrictions[0].fact_name, "TgRestrict0");
    assert!(!g.neq_generated);
}

#[test]
fn loop_wires_ends_back_to_body_head() {
    let g = graph_of(
        r#"
process L =
  loop {
    [ In(x) ]->[ Out(x) ];
    []->[ Out("tick") ]
  };
  []->[ Out("after") ]
"#,
    );
    // 0 init, 1 after-loop skip, 2 body head, 3 body second
    // ends wire back to the head; nothing reaches the skip, so it and
    // its continuation are pruned as unreachable
    assert_eq!(g.warnings.len(), 2);
    assert_eq!(g.vertices.len(), 3);
    assert_eq!(edges(&g), [(0, 1), (1, 2), (2, 1)].into_iter().collect());
}

#[test]
fn loop_with_break_reaches_the_join() {
    let g = graph_of(
        r#"
process L =
  loop {
    choice {
      { [ In(x) ]->[ Out(x) ] };
      { break };
    }
  };
  []->[ Out("after") ]
"#,
    );
    assert!(g.warnings.is_empty());
    // break edges the choice's attach (the loop entries) to the join
    let after = *g.vertices.keys().last().unwrap();
    assert_eq!(g.rule(after).unwrap().display(), "[]->[Out(\"after\")]");
    let join = g.pred(after);
    assert_eq!(join.len(), 1);
}

#[test]
fn labeled_break_and_continue() {
    let g = graph_of(
        r#"
process L =
  "outer": while ('c cas "go") {
    "inner": loop {
      choice {
        { break "outer" };
        { continue "inner" };
        { [ In(x) ]->[ 'c := x ] };
      }
    }
  };
  []->[ Out("done") ]
"#,
    );
    // the inner loop's own join is never broken to and gets pruned
    assert_eq!(g.warnings.len(), 1);
    assert!(g.vertices.len() >= 5);
    // `break "outer"` reaches the while's join and from there "done"
    let done = *g.vertices.keys().last().unwrap();
    assert_eq!(g.rule(done).unwrap().display(), "[]->[Out(\"done\")]");
    assert!(!g.pred(done).is_empty());
}

#[test]
fn break_outside_loop_is_an_error() {
    let m = parse_source("process P = break", "Main").unwrap();
    let flat = bind_single(&m).unwrap();
    let err = system_cfg(&flat).unwrap_err();
    assert!(err.diagnostic().message.contains("outside of any loop"));
}

#[test]
fn unknown_loop_label_is_an_error() {
    let m = parse_source(
        "process P = loop { choice { { break \"nope\" }; { [In(x)]->[Out(x)] }; } }",
        "Main",
    )
    .unwrap();
    let flat = bind_single(&m).unwrap();
    let err = system_cfg(&flat).unwrap_err();
    assert!(err.diagnostic().message.contains("unknown loop label"));
}

#[test]
fn system_union_is_disjoint() {
    let two = format!("{}\n{}", PROCESS_A, PROCESS_A.replace("process A", "process A2"));
    let g = graph_of(&two);
    assert_eq!(g.entries.len(), 2);
    assert_eq!(g.vertices.len(), 12);
    // labels of the two processes do not overlap
    assert_eq!(g.roots().len(), 2);
}

#[test]
fn empty_system_yields_empty_graph() {
    let g = graph_of("fun unused/0");
    assert!(g.vertices.is_empty());
    assert!(g.entries.is_empty());
}

#[test]
fn construction_is_deterministic() {
    let a = graph_of(PROCESS_A);
    let b = graph_of(PROCESS_A);
    assert_eq!(a.vertices, b.vertices);
    assert_eq!(a.edges, b.edges);
    assert_eq!(to_dot(&a), to_dot(&b));
}

#[test]
fn dot_output_mentions_every_vertex() {
    let g = graph_of(PROCESS_A);
    let dot = to_dot(&g);
    for k in g.vertices.keys() {
        assert!(dot.contains(&format!("n{} [", k.0)));
    }
    assert!(dot.contains("n0 -> n1"));
}
