use std::collections::BTreeSet;

use crate::binder::{bind_single, FlatSystem};
use crate::cellflow::{check_all_traces_valid, context_table, ContextTable, UsageMap, DEFAULT_BUDGET};
use crate::cfg::{system_cfg, Label, ProcessGraph};
use crate::syntax::parse_source;
use crate::translate::*;

fn pipeline(src: &str) -> (FlatSystem, ProcessGraph, ContextTable) {
    let m = parse_source(src, "Main").unwrap();
    let flat = bind_single(&m).unwrap();
    let mut g = system_cfg(&flat).unwrap();
    g.fuse_skips();
    let usage = UsageMap::of_graph(&g).unwrap();
    check_all_traces_valid(&g, &usage, DEFAULT_BUDGET).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    (flat, g, table)
}

/// The 7-vertex basic shape: a 3-way split at vertex 1, a join at 5.
const BASIC: &str = r#"
process Basic =
  [ In(x) ]->[ 'a := x ];
  choice {
    { [ 'a cas "p" ]->[ Out("1") ] };
    { [ 'a cas "q" ]->[ Out("2") ] };
    { [ 'a cas "r" ]->[ Out("3") ] };
  };
  []->[ Out('a) ];
  []->[ Out("end") ]
"#;

#[test]
fn basic_shape_is_seven_vertices() {
    let (_, g, _) = pipeline(BASIC);
    assert_eq!(g.vertices.len(), 7);
    assert_eq!(g.succ(Label(1)).len(), 3);
    assert_eq!(g.pred(Label(5)).len(), 3);
}

#[test]
fn exit_bias_of_basic_shape() {
    let (_, g, _) = pipeline(BASIC);
    // rule 1 is the only backward-biased rule
    assert_eq!(exit_bias(&g, Label(1)), Bias::Backward);
    for k in [0u32, 2, 3, 4, 5, 6] {
        assert_eq!(exit_bias(&g, Label(k)), Bias::Forward, "vertex {}", k);
    }
}

#[test]
fn entry_and_exit_facts_match_the_bias_table() {
    let (_, g, table) = pipeline(BASIC);
    let style = TranslationStyle::Hybrid;
    // rule 5: three forward predecessors collapse into one entry fact
    let entries = entry_facts(&g, &table, style, Label(5));
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].family, Bias::Forward);
    assert_eq!(entries[0].site, Label(5));
    let exits = exit_facts(&g, &table, style, Label(5));
    assert_eq!(exits.len(), 1);
    assert_eq!(exits[0].family, Bias::Forward);
    assert_eq!(exits[0].site, Label(6));
    // rule 2: backward entry from rule 1, forward exit to 5
    let entries = entry_facts(&g, &table, style, Label(2));
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].family, Bias::Backward);
    assert_eq!(entries[0].site, Label(1));
    let exits = exit_facts(&g, &table, style, Label(2));
    assert_eq!(exits.len(), 1);
    assert_eq!(exits[0].family, Bias::Forward);
    assert_eq!(exits[0].site, Label(5));
    // the root has no entry facts
    assert!(entry_facts(&g, &table, style, Label(0)).is_empty());
}

#[test]
fn forward_translation_duplicates_splits() {
    let (_, g, table) = pipeline(BASIC);
    let rules = translate(&g, &table, TranslationStyle::Forward).unwrap();
    assert_eq!(rules.len(), 9);
    let copies: Vec<&MsrRule> = rules.iter().filter(|r| r.source == Label(1)).collect();
    assert_eq!(copies.len(), 3);
    let names: BTreeSet<&str> = copies.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        ["Basic__1__to2", "Basic__1__to3", "Basic__1__to4"]
            .into_iter()
            .collect()
    );
}

#[test]
fn backward_translation_duplicates_joins() {
    let (_, g, table) = pipeline(BASIC);
    let rules = translate(&g, &table, TranslationStyle::Backward).unwrap();
    assert_eq!(rules.len(), 9);
    let copies: Vec<&MsrRule> = rules.iter().filter(|r| r.source == Label(5)).collect();
    assert_eq!(copies.len(), 3);
    let names: BTreeSet<&str> = copies.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        ["Basic__5__from2", "Basic__5__from3", "Basic__5__from4"]
            .into_iter()
            .collect()
    );
}

#[test]
fn hybrid_translation_needs_one_copy_per_vertex() {
    let (_, g, table) = pipeline(BASIC);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    assert_eq!(rules.len(), 7);
    for k in g.vertices.keys() {
        assert_eq!(rules.iter().filter(|r| r.source == *k).count(), 1);
    }
    // row-for-row fact families and sites
    let expect: &[(u32, Option<(&str, u32)>, Option<(&str, u32)>)] = &[
        (0, None, Some(("StF", 1))),
        (1, Some(("StF", 1)), Some(("StB", 1))),
        (2, Some(("StB", 1)), Some(("StF", 5))),
        (3, Some(("StB", 1)), Some(("StF", 5))),
        (4, Some(("StB", 1)), Some(("StF", 5))),
        (5, Some(("StF", 5)), Some(("StF", 6))),
        (6, Some(("StF", 6)), None),
    ];
    for (k, entry, exit) in expect {
        let rule = rules.iter().find(|r| r.source == Label(*k)).unwrap();
        let entry_fact = rule
            .premise
            .iter()
            .find(|f| f.name == "StF" || f.name == "StB");
        let exit_fact = rule
            .conclusion
            .iter()
            .find(|f| f.name == "StF" || f.name == "StB");
        match entry {
            None => assert!(entry_fact.is_none(), "vertex {} should have no entry", k),
            Some((fam, site)) => {
                let f = entry_fact.unwrap_or_else(|| panic!("vertex {} entry missing", k));
                assert_eq!(f.name, *fam, "vertex {} entry family", k);
                assert_eq!(f.args[1], TgTerm::Str(site.to_string()), "vertex {} entry site", k);
            }
        }
        match exit {
            None => assert!(exit_fact.is_none(), "vertex {} should have no exit", k),
            Some((fam, site)) => {
                let f = exit_fact.unwrap_or_else(|| panic!("vertex {} exit missing", k));
                assert_eq!(f.name, *fam, "vertex {} exit family", k);
                assert_eq!(f.args[1], TgTerm::Str(site.to_string()), "vertex {} exit site", k);
            }
        }
    }
}

#[test]
fn hybrid_rule_count_formula() {
    let (_, g, table) = pipeline(BASIC);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let expected: usize = g
        .vertices
        .keys()
        .map(|k| {
            entry_facts(&g, &table, TranslationStyle::Hybrid, *k).len().max(1)
                * exit_facts(&g, &table, TranslationStyle::Hybrid, *k).len().max(1)
        })
        .sum();
    assert_eq!(rules.len(), expected);
}

#[test]
fn cvar_replaces_cells_with_prefixed_variables() {
    let (_, g, _) = pipeline(BASIC);
    // vertex 5 emits Out('a); its lowering must carry tgc_a
    let rule = g.rule(Label(5)).unwrap();
    let lowered = cvar(&rule.conclusion[0]).unwrap();
    assert_eq!(
        lowered,
        TgTerm::App("Out".into(), vec![TgTerm::var("tgc_a")])
    );
}

#[test]
fn cvar_is_homomorphic_on_tuples() {
    let src = "process P = [ In(x) ]->[ 'a := x ];\n []->[ Out(<'a, \"k\">) ]";
    let (_, g, _) = pipeline(src);
    let rule = g.rule(Label(2)).unwrap();
    let lowered = cvar(&rule.conclusion[0]).unwrap();
    assert_eq!(
        lowered,
        TgTerm::App(
            "Out".into(),
            vec![TgTerm::Tuple(vec![
                TgTerm::var("tgc_a"),
                TgTerm::Str("k".into())
            ])]
        )
    );
}

#[test]
fn assigned_term_lands_in_the_exit_slot() {
    // one-rule chain: [In(x)] -> ['a := x] with a successor reading 'a
    let src = "process P = [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]";
    let (_, g, table) = pipeline(src);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let rule1 = rules.iter().find(|r| r.source == Label(1)).unwrap();
    let exit = rule1.conclusion.iter().find(|f| f.name == "StF").unwrap();
    // slot for 'a carries the assigned variable x
    assert_eq!(exit.args[2], TgTerm::var("x"));
}

#[test]
fn cas_pattern_substitutes_into_the_entry_slot() {
    let src = "process P = [ In(x) ]->[ 'a := x ];\n [ 'a cas <u, v> ]->[ Out(u) ]";
    let (_, g, table) = pipeline(src);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let rule2 = rules.iter().find(|r| r.source == Label(2)).unwrap();
    let entry = rule2.premise.iter().find(|f| f.name == "StF").unwrap();
    assert_eq!(
        entry.args[2],
        TgTerm::Tuple(vec![TgTerm::var("u"), TgTerm::var("v")])
    );
    // no `cas` survives into the premise fact list
    assert_eq!(rule2.premise.len(), 1);
}

#[test]
fn skip_vertex_lowers_to_pure_forwarding() {
    // keep the unfused graph so the choice join skip is present
    let m = parse_source(
        "process P = [In(x)]->['a := x]; choice { { [ 'a cas \"1\" ]->[ Out(\"1\") ] }; { [ 'a cas \"2\" ]->[ Out(\"2\") ] }; }",
        "Main",
    )
    .unwrap();
    let flat = bind_single(&m).unwrap();
    let g = system_cfg(&flat).unwrap();
    let usage = UsageMap::of_graph(&g).unwrap();
    let table = context_table(&g, &usage, DEFAULT_BUDGET).unwrap();
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let skip_label = *g
        .vertices
        .iter()
        .find(|(_, r)| r.is_skip())
        .map(|(k, _)| k)
        .unwrap();
    let skip_rules: Vec<&MsrRule> = rules.iter().filter(|r| r.source == skip_label).collect();
    for r in &skip_rules {
        assert!(r.actions.is_empty());
        assert!(r.premise.iter().all(|f| f.name == "StF" || f.name == "StB"));
        assert!(r.conclusion.iter().all(|f| f.name == "StF" || f.name == "StB"));
    }
}

#[test]
fn linear_graphs_agree_across_styles() {
    let src = "process P = [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ];\n []->[ Out(\"b\") ]";
    let (_, g, table) = pipeline(src);
    let f = translate(&g, &table, TranslationStyle::Forward).unwrap();
    let b = translate(&g, &table, TranslationStyle::Backward).unwrap();
    let h = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    assert_eq!(f.len(), b.len());
    assert_eq!(f.len(), h.len());
    // same payload once state facts are stripped of family and site
    let strip = |rules: &[MsrRule]| -> Vec<(Vec<TgFact>, Vec<TgFact>, Vec<TgFact>)> {
        rules
            .iter()
            .map(|r| {
                let scrub = |fs: &[TgFact]| {
                    fs.iter()
                        .map(|f| {
                            let mut f = f.clone();
                            if f.name == "StF" || f.name == "StB" {
                                f.name = "St".into();
                                f.args[1] = TgTerm::Str("_".into());
                            }
                            f
                        })
                        .collect::<Vec<_>>()
                };
                (scrub(&r.premise), scrub(&r.actions), scrub(&r.conclusion))
            })
            .collect()
    };
    assert_eq!(strip(&f), strip(&b));
    assert_eq!(strip(&f), strip(&h));
}

#[test]
fn cell_by_cell_reads_reproduce_and_pc_threads() {
    let src = "process P = [ In(x) ]->[ 'a := x ];\n [ 'a cas z ]->[ Out(z) ]";
    let (_, g, table) = pipeline(src);
    let rules = translate(&g, &table, TranslationStyle::CellByCell).unwrap();
    // the reading rule consumes and reproduces C('a, ..)
    let reader = rules.iter().find(|r| r.source == Label(2)).unwrap();
    let c_in: Vec<&TgFact> = reader.premise.iter().filter(|f| f.name == "C").collect();
    let c_out: Vec<&TgFact> = reader.conclusion.iter().filter(|f| f.name == "C").collect();
    assert_eq!(c_in.len(), 1);
    assert_eq!(c_out.len(), 1);
    assert_eq!(c_in[0].args, c_out[0].args);
    // control flow is carried by PcSt facts
    assert!(reader.premise.iter().any(|f| f.name == "PcSt"));
    let init = rules.iter().find(|r| r.source == Label(0)).unwrap();
    assert!(init.conclusion.iter().any(|f| f.name == "PcSt"));
}

#[test]
fn cell_by_cell_rejects_path_dependent_definedness() {
    let src = r#"
process P =
  [ In(x) ]->[ 'c := x ];
  choice {
    { [ ]->[ 'd := "1" ] };
    { [ ]->[ Out("skip") ] };
  };
  []->[ 'd := "2" ]
"#;
    let (_, g, table) = pipeline(src);
    let err = translate(&g, &table, TranslationStyle::CellByCell).unwrap_err();
    assert!(matches!(err, TranslateError::AmbiguousDefinedness { ref cell, .. } if cell == "d"));
}

#[test]
fn undefined_cell_never_reaches_the_exit_context() {
    let src = "pred F/1\nprocess P =\n [ In(x) ]->[ 'a := x ];\n [ In(y) ]->[ 'b := y, undef('a) ];\n [ 'b cas z ]->[ Out(z) ]";
    let (_, g, table) = pipeline(src);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let rule2 = rules.iter().find(|r| r.source == Label(2)).unwrap();
    let exit = rule2.conclusion.iter().find(|f| f.name == "StF").unwrap();
    // exit context is exactly {'b}; 'a is gone
    assert_eq!(exit.args[2], TgTerm::var("y"));
}

#[test]
fn emit_empty_system_skeleton() {
    let m = parse_source("", "Empty").unwrap();
    let flat = bind_single(&m).unwrap();
    let g = system_cfg(&flat).unwrap();
    let text = emit_spthy(
        &[],
        &flat,
        &g,
        &EmitOptions {
            theory_name: "X".into(),
            builtins: None,
        },
    );
    assert!(text.starts_with("theory X\nbegin\n"));
    assert!(text.trim_end().ends_with("end"));
}

#[test]
fn annotations_survive_as_comments_and_names() {
    let src = "process P = \"Terminal_Sends_GPO\": [ In(x) ]->[ Out(x) ]";
    let (flat, g, table) = pipeline(src);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let text = emit_spthy(
        &rules,
        &flat,
        &g,
        &EmitOptions {
            theory_name: "T".into(),
            builtins: None,
        },
    );
    assert!(text.contains("// Terminal_Sends_GPO"));
    assert!(text.contains("rule P__Terminal_Sends_GPO:"));
}

#[test]
fn emission_is_deterministic() {
    let (flat, g, table) = pipeline(BASIC);
    let rules = translate(&g, &table, TranslationStyle::Hybrid).unwrap();
    let opts = EmitOptions {
        theory_name: "B".into(),
        builtins: Some("hashing".into()),
    };
    let a = emit_spthy(&rules, &flat, &g, &opts);
    let b = emit_spthy(&rules, &flat, &g, &opts);
    assert_eq!(a, b);
    assert!(a.contains("builtins: hashing"));
}

#[test]
fn emitted_rules_pass_the_wellformedness_precheck() {
    for style in [
        TranslationStyle::Forward,
        TranslationStyle::Backward,
        TranslationStyle::Hybrid,
        TranslationStyle::CellByCell,
    ] {
        let (_, g, table) = pipeline(BASIC);
        let rules = translate(&g, &table, style).unwrap();
        let problems = wellformedness_violations(&rules);
        assert!(problems.is_empty(), "{}: {:?}", style, problems);
    }
}

#[test]
fn style_parsing() {
    assert_eq!(
        "hybrid".parse::<TranslationStyle>().unwrap(),
        TranslationStyle::Hybrid
    );
    assert_eq!(
        "cell-by-cell".parse::<TranslationStyle>().unwrap(),
        TranslationStyle::CellByCell
    );
    assert!("bogus".parse::<TranslationStyle>().is_err());
}
