use std::collections::BTreeMap;

use crate::binder::*;
use crate::syntax::ast::*;
use crate::syntax::parse_source;
use crate::syntax::pretty;

fn loader_of(files: &[(&str, &str)]) -> MapLoader {
    let mut modules = BTreeMap::new();
    for (name, src) in files {
        modules.insert(name.to_string(), parse_source(src, name).unwrap());
    }
    MapLoader { modules }
}

fn bind_with(root_src: &str, files: &[(&str, &str)]) -> Result<FlatSystem, Vec<crate::Diagnostic>> {
    let root = parse_source(root_src, "Main").unwrap();
    let mut loader = loader_of(files);
    bind(&root, &mut loader)
}

fn bind_one(src: &str) -> Result<FlatSystem, Vec<crate::Diagnostic>> {
    bind_with(src, &[])
}

fn first_rule(flat: &FlatSystem) -> &RuleExpr {
    match &flat.processes[0].body.node {
        ProcessNode::Step { rule, .. } => rule,
        other => panic!("expected step, got {:?}", other),
    }
}

#[test]
fn import_open_unqualified_resolution() {
    let flat = bind_with(
        "import Fun_symbols\nopen Fun_symbols\nprocess P = [ ]->[ Out(kNullPTK()) ]",
        &[(
            "Fun_symbols",
            "fun KDF/1\nfun NULL() = \"NULL\"\nfun kNullPTK() = KDF(NULL())",
        )],
    )
    .unwrap();
    let rule = first_rule(&flat);
    // kNullPTK() expands through the imported macros down to KDF("NULL")
    let printed = pretty::term_to_string(&rule.conclusion[0]);
    assert_eq!(printed, "Out(Fun_symbols.KDF(\"NULL\"))");
}

#[test]
fn module_alias_resolves_through() {
    let flat = bind_with(
        "import Encryption_layer\nmodule Enc = Encryption_layer\nprocess P = [ ]--[ Enc.Sent(x0) ]->[ ]",
        &[("Encryption_layer", "apred Sent/1")],
    );
    // schevars: x0 unbound in premise -> this must fail, proving the
    // alias resolved far enough to typecheck the application
    let errs = flat.unwrap_err();
    assert!(errs[0].message.contains("x0"));
    let flat = bind_with(
        "import Encryption_layer\nmodule Enc = Encryption_layer\nprocess P = [ In(x0) ]--[ Enc.Sent(x0) ]->[ ]",
        &[("Encryption_layer", "apred Sent/1")],
    )
    .unwrap();
    let rule = first_rule(&flat);
    assert_eq!(
        pretty::term_to_string(&rule.actions[0]),
        "Encryption_layer.Sent(x0)"
    );
}

#[test]
fn open_of_unknown_module_is_an_error() {
    let errs = bind_with("open M\nprocess P = []->[]", &[]).unwrap_err();
    assert!(errs[0].message.contains("unknown module"));
}

#[test]
fn cyclic_import_reported() {
    let errs = bind_with("import A\nprocess P = []->[]", &[("A", "import B"), ("B", "import A")])
        .unwrap_err();
    assert!(errs.iter().any(|e| e.message.contains("cyclic import")));
}

#[test]
fn ambiguous_name_after_two_opens() {
    let errs = bind_with(
        "import A\nimport B\nopen A\nopen B\nprocess P = [ ]->[ Out(k()) ]",
        &[("A", "fun k() = \"a\""), ("B", "fun k() = \"b\"")],
    )
    .unwrap_err();
    assert!(errs[0].message.contains("ambiguous name `k`"));
    assert!(errs[0].message.contains("A.k"));
    assert!(errs[0].message.contains("B.k"));
}

#[test]
fn named_arguments_bind_by_label_in_any_order() {
    let flat = bind_one(
        "pred Queued(named tid, named msg)\n\
         process P = [ In(x) ]->[ Queued(msg is x, tid is \"t\") ]",
    )
    .unwrap();
    let rule = first_rule(&flat);
    assert_eq!(
        pretty::term_to_string(&rule.conclusion[0]),
        "Main.Queued(\"t\", x)"
    );
}

#[test]
fn name_pruning_rewrites_to_same_name() {
    // `f(a is .)` rewrites to `f(a is a)`
    let flat = bind_one(
        "pred F(named a)\nprocess P = [ In(a) ]->[ F(a is .) ]",
    )
    .unwrap();
    let rule = first_rule(&flat);
    assert_eq!(pretty::term_to_string(&rule.conclusion[0]), "Main.F(a)");
    // `a is '.` rewrites to the cell 'a
    let flat = bind_one(
        "pred F(named a)\nprocess P = [ In(x) ]->[ 'a := x, F(a is '.) ]",
    )
    .unwrap();
    let rule = first_rule(&flat);
    assert_eq!(pretty::term_to_string(&rule.conclusion[1]), "Main.F('a)");
}

#[test]
fn missing_named_argument_is_reported() {
    let errs = bind_one(
        "pred F(named a, named b)\nprocess P = [ In(x) ]->[ F(a is x) ]",
    )
    .unwrap_err();
    assert!(errs[0].message.contains("missing named argument `b`"));
}

#[test]
fn arity_violation_on_positional_macro() {
    let errs = bind_one(
        "fun pair(a, b) = <a, b>\nprocess P = [ In(x) ]->[ Out(pair(x)) ]",
    )
    .unwrap_err();
    assert!(errs[0].message.contains("expects 2 argument(s), found 1"));
}

#[test]
fn process_macro_rw_cell_writes_propagate() {
    let flat = bind_one(
        "process Recv(named rw 'slot) =\n\
         \x20 [ In(x) ]->[ 'slot := x ]\n\
         process P =\n\
         \x20 Recv(slot is '.);\n\
         \x20 [ 'slot cas y ]->[ Out(y) ]",
    )
    .unwrap();
    // the macro body's assignment lands on the caller's cell `'slot`
    let rule = first_rule(&flat);
    assert_eq!(pretty::term_to_string(&rule.conclusion[0]), "'slot := x");
}

#[test]
fn write_to_non_rw_cell_parameter_is_an_error() {
    let errs = bind_one(
        "process Bad(named 'c) = [ In(x) ]->[ 'c := x ]\n\
         process P = Bad(c is '.)",
    )
    .unwrap_err();
    assert!(errs[0].message.contains("read-only"));
}

#[test]
fn undef_allowed_on_rw_parameter() {
    bind_one(
        "process Drop(named rw 'c) = [ ]->[ undef('c) ]\n\
         process P = [ In(x) ]->[ 'v := x ]; Drop(c is 'v)",
    )
    .unwrap();
}

#[test]
fn recursive_macro_is_rejected() {
    let errs = bind_one("fun f(a) = f(a)\nprocess P = [ In(x) ]->[ Out(f(x)) ]").unwrap_err();
    assert!(errs[0].message.contains("recursive macro"));
}

#[test]
fn hygiene_body_local_never_captures_caller_variable() {
    // the macro body's local `y` must not capture the `y` passed in
    let flat = bind_one(
        "pred Got/2\n\
         process Echo(named v) =\n\
         \x20 [ In(y) ]->[ Got(v, y) ]\n\
         process P =\n\
         \x20 [ In(y) ]->[ 'k := y ];\n\
         \x20 Echo(v is y)",
    );
    // `v is y`: y is the caller's variable; but the caller's y is not
    // bound in the macro rule's premise, so schevars must reject it --
    // hygiene means it is NOT silently captured by the body's In(y)
    let errs = flat.unwrap_err();
    assert!(
        errs[0].message.contains("not bound in the premise"),
        "expected schevars rejection, got {:?}",
        errs
    );
}

#[test]
fn hygiene_renames_keep_body_semantics() {
    let flat = bind_one(
        "pred Got/2\n\
         process Pair(named v) =\n\
         \x20 [ In(y) ]->[ Got(v, y) ]\n\
         process P =\n\
         \x20 Pair(v is \"const\")",
    )
    .unwrap();
    let rule = first_rule(&flat);
    assert_eq!(pretty::term_to_string(&rule.actions.first().unwrap_or(&rule.conclusion[0])),
        pretty::term_to_string(&rule.conclusion[0]));
    assert_eq!(
        pretty::term_to_string(&rule.conclusion[0]),
        "Main.Got(\"const\", y)"
    );
}

#[test]
fn expansion_is_idempotent_on_flat_systems() {
    let src = "process P =\n [ In(x) ]->[ 'a := x ];\n choice { { [ 'a cas \"1\" ]->[ Out(\"2\") ] }; { [ 'a cas \"A\" ]->[ Out(\"B\") ] }; };\n []->[ Out(\"End\") ]";
    let flat = bind_one(src).unwrap();
    let before: Vec<String> = flat
        .processes
        .iter()
        .map(|p| pretty::process_to_string(&p.body, 0))
        .collect();
    // re-running the expander over the already-flat bodies is identity
    let root = parse_source(src, "Main").unwrap();
    let mut loader = loader_of(&[]);
    let resolved = resolve_modules(&root, &mut loader).unwrap();
    let flat2 = expand_macros(resolved).unwrap();
    let after: Vec<String> = flat2
        .processes
        .iter()
        .map(|p| pretty::process_to_string(&p.body, 0))
        .collect();
    assert_eq!(before, after);
}

// ---- typing ----------------------------------------------------------

#[test]
fn basic_rule_typechecks() {
    // the one-step listing types as a rule
    bind_one("process P = [ In(x) ]->[ 'a := x ]").unwrap();
}

#[test]
fn pred_in_action_position_is_rejected() {
    let errs = bind_one("pred F/1\nprocess P = [ In(x) ]--[ F(x) ]->[ ]").unwrap_err();
    assert!(errs[0].message.contains("expected afact, found fact"));
}

#[test]
fn unbound_schematic_variable_in_conclusion() {
    let errs = bind_one("process P = [ ]->[ Out(y) ]").unwrap_err();
    assert!(errs[0].message.contains("not bound in the premise"));
}

#[test]
fn public_variables_are_exempt_from_schevars() {
    bind_one("process P = [ ]->[ Out($Terminal) ]").unwrap();
}

#[test]
fn reserved_symbols_are_rejected() {
    for sym in ["Cell", "St", "StF", "StB"] {
        let errs = bind_one(&format!("pred {}/1\nprocess P = []->[]", sym)).unwrap_err();
        assert!(
            errs[0].message.contains("reserved"),
            "expected reserved-symbol error for {}",
            sym
        );
        let errs = bind_one(&format!("process P = [ In({}) ]->[ ]", sym)).unwrap_err();
        assert!(errs[0].message.contains("reserved"));
    }
}

#[test]
fn reserved_variable_prefix_is_rejected() {
    let errs = bind_one("process P = [ In(tgc_a) ]->[ ]").unwrap_err();
    assert!(errs[0].message.contains("reserved prefix"));
}

#[test]
fn as_patterns_are_substituted_away() {
    let flat = bind_one("process P = [ In(<x, y> as m) ]->[ Out(m) ]").unwrap();
    let rule = first_rule(&flat);
    assert_eq!(pretty::term_to_string(&rule.premise[0]), "In(<x, y>)");
    assert_eq!(pretty::term_to_string(&rule.conclusion[0]), "Out(<x, y>)");
}

#[test]
fn duplicate_cas_on_one_cell_is_rejected() {
    let errs =
        bind_one("process P = [ 'a cas x, 'a cas y ]->[ Out(x) ]").unwrap_err();
    assert!(errs[0].message.contains("pattern-matched twice"));
}

#[test]
fn typed_variable_annotations() {
    bind_one("process P = [ In(x: bits) ]->[ Out(x) ]").unwrap();
    let errs = bind_one("process P = [ Fr(x: temporal) ]->[ ]").unwrap_err();
    assert!(!errs.is_empty());
}

#[test]
fn fresh_sort_unifies_with_tilde() {
    // ~x and x: fresh are the same variable
    bind_one("process P = [ Fr(~x) ]->[ Out(x: fresh) ]").unwrap();
    let errs = bind_one("process P = [ Fr(~x) ]->[ Out($x) ]").unwrap_err();
    assert!(errs[0].message.contains("conflicting sorts"));
}
