//! Lexing, parsing and printing of the `.tg` surface language.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod token;

pub use ast::{
    Arg, ArgValue, BinOp, Cond, Decl, MacroParam, MacroSig, Path, ProcessExpr, ProcessNode,
    Quantifier, RuleExpr, RuleLet, Sort, SourceModule, TermExpr, TermNode, VerbatimKind,
};
pub use lexer::tokenize;
pub use parser::{parse_module, parse_source};
pub use token::{Kw, Token, TokenKind};

#[cfg(test)]
mod tests {
    use super::*;

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
    fn process_a_shape() {
        let m = parse_source(PROCESS_A, "Main").unwrap();
        assert_eq!(m.decls.len(), 1);
        let body = match &m.decls[0] {
            Decl::ProcessDecl { name, body, .. } => {
                assert_eq!(name, "A");
                body
            }
            other => panic!("expected process decl, got {:?}", other),
        };
        // Step; Choice of two Scoped singletons; trailing Step
        let (rule, rest) = match &body.node {
            ProcessNode::Step { rule, rest } => (rule, rest),
            other => panic!("expected step, got {:?}", other),
        };
        assert_eq!(rule.premise.len(), 1);
        assert_eq!(rule.conclusion.len(), 1);
        assert!(matches!(
            rule.conclusion[0].node,
            TermNode::Assign { ref cell, .. } if cell == "a"
        ));
        let (branches, rest) = match &rest.node {
            ProcessNode::Choice { branches, rest } => (branches, rest),
            other => panic!("expected choice, got {:?}", other),
        };
        assert_eq!(branches.len(), 2);
        for b in branches {
            assert!(matches!(b.node, ProcessNode::Scoped { .. }));
        }
        match &rest.node {
            ProcessNode::Step { rule, rest } => {
                assert!(rule.premise.is_empty());
                assert!(matches!(rest.node, ProcessNode::Null));
            }
            other => panic!("expected trailing step, got {:?}", other),
        }
    }

    #[test]
    fn empty_source_is_empty_module() {
        let m = parse_source("", "Empty").unwrap();
        assert!(m.decls.is_empty());
    }

    #[test]
    fn arity_mismatch_is_not_a_parse_error() {
        // arity checking is deferred to the binder
        let m = parse_source("pred Foo/2\nprocess P = [ Foo(x) ]->[]", "Main").unwrap();
        assert_eq!(m.decls.len(), 2);
    }

    #[test]
    fn choice_accepts_comma_separators() {
        let src = r#"process P = choice { { []->[ Out("a") ] }, { []->[ Out("b") ] } }"#;
        let m = parse_source(src, "Main").unwrap();
        match &m.decls[0] {
            Decl::ProcessDecl { body, .. } => match &body.node {
                ProcessNode::Choice { branches, .. } => assert_eq!(branches.len(), 2),
                other => panic!("expected choice, got {:?}", other),
            },
            _ => panic!("expected process"),
        }
    }

    #[test]
    fn unclosed_brace_is_reported() {
        let errs = parse_source("module M { fun f/1", "Main").unwrap_err();
        assert!(!errs.is_empty());
    }

    #[test]
    fn error_recovery_reports_multiple_errors() {
        let src = "fun f/x\nfun g/y\nfun ok/2";
        let errs = parse_source(src, "Main").unwrap_err();
        assert!(errs.len() >= 2, "expected two diagnostics, got {:?}", errs);
    }

    #[test]
    fn named_arguments_and_pruning() {
        let src = r#"
apred Send(named tid, named msg)
process P =
  [ Fr(~x) ]--[ Send(tid is ., msg is '.) ]->[ 'msg := ~x ]
"#;
        let m = parse_source(src, "Main").unwrap();
        match &m.decls[1] {
            Decl::ProcessDecl { body, .. } => match &body.node {
                ProcessNode::Step { rule, .. } => {
                    match &rule.actions[0].node {
                        TermNode::App { args, .. } => {
                            assert_eq!(args[0].label.as_deref(), Some("tid"));
                            assert!(matches!(args[0].value, ArgValue::NamePrune));
                            assert!(matches!(args[1].value, ArgValue::CellNamePrune));
                        }
                        other => panic!("expected app, got {:?}", other),
                    }
                }
                other => panic!("expected step, got {:?}", other),
            },
            _ => panic!("expected process"),
        }
    }

    #[test]
    fn rule_with_let_binding_site() {
        let src = r#"process P = [ In(x) ]--let y = <x, x> in [ ]->[ Out(y) ]"#;
        let m = parse_source(src, "Main").unwrap();
        match &m.decls[0] {
            Decl::ProcessDecl { body, .. } => match &body.node {
                ProcessNode::Step { rule, .. } => {
                    assert_eq!(rule.lets.len(), 1);
                }
                other => panic!("expected step, got {:?}", other),
            },
            _ => panic!("expected process"),
        }
    }

    #[test]
    fn while_loop_break_continue() {
        let src = r#"
process P =
  []->[ 'c := "T" ];
  "outer": while ('c cas "T") {
    choice {
      { [ In(x) ]->[ 'c := x ] };
      { break "outer" };
      { continue };
    }
  };
  []->[ Out("done") ]
"#;
        let m = parse_source(src, "Main").unwrap();
        assert_eq!(m.decls.len(), 1);
    }

    #[test]
    fn restriction_parses_structured_formula() {
        let src = "restriction Neq = All x y #i . Neq(x, y) @ #i ==> not (x = y)\nfun ok/0";
        let m = parse_source(src, "Main").unwrap();
        match &m.decls[0] {
            Decl::Verbatim { formula, text, .. } => {
                assert!(formula.is_some(), "formula should parse: {}", text);
                assert!(text.contains("==>"));
            }
            other => panic!("expected verbatim, got {:?}", other),
        }
    }

    #[test]
    fn module_alias_and_block_forms() {
        let src = "module Enc = Encryption_layer\nmodule R = { apred Neq/2 }\nmodule S { fun f/1 }";
        let m = parse_source(src, "Main").unwrap();
        assert!(matches!(m.decls[0], Decl::ModuleAlias { .. }));
        assert!(matches!(m.decls[1], Decl::Module { .. }));
        assert!(matches!(m.decls[2], Decl::Module { .. }));
    }

    #[test]
    fn roundtrip_process_a() {
        let m = parse_source(PROCESS_A, "Main").unwrap();
        let printed = pretty::module_to_string(&m);
        let m2 = parse_source(&printed, "Main")
            .unwrap_or_else(|e| panic!("reparse failed: {:?}\n{}", e, printed));
        assert!(modules_structurally_equal(&m, &m2), "{}", printed);
    }

    /// Structural equality ignoring spans.
    pub(crate) fn modules_structurally_equal(a: &SourceModule, b: &SourceModule) -> bool {
        pretty::module_to_string(a) == pretty::module_to_string(b)
    }

    #[test]
    fn spans_are_monotone_in_rules() {
        let m = parse_source(PROCESS_A, "Main").unwrap();
        match &m.decls[0] {
            Decl::ProcessDecl { body, .. } => match &body.node {
                ProcessNode::Step { rule, .. } => {
                    let mut last = 0;
                    for item in rule.premise.iter().chain(rule.conclusion.iter()) {
                        assert!(item.span.start >= last);
                        last = item.span.start;
                    }
                }
                _ => panic!(),
            },
            _ => panic!(),
        }
    }
}
