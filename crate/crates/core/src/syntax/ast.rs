//! Abstract syntax for `.tg` sources. The tree is lossless with
//! respect to the grammar: spans cover every non-comment token and
//! nothing is desugared before the binder runs.

use crate::diag::Span;

/// Variable sorts. `fresh` unifies with the `~x` notation and
/// `temporal` with `#x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Bits,
    Fresh,
    Public,
    Temporal,
}

impl Sort {
    pub fn from_name(s: &str) -> Option<Sort> {
        Some(match s {
            "bits" | "bitstring" => Sort::Bits,
            "fresh" => Sort::Fresh,
            "public" | "pub" => Sort::Public,
            "temporal" => Sort::Temporal,
            _ => return None,
        })
    }
}

/// Dotted module path, e.g. `Enc.InEnc`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub segments: Vec<String>,
    pub span: Span,
}

impl Path {
    pub fn single(name: impl Into<String>, span: Span) -> Path {
        Path {
            segments: vec![name.into()],
            span,
        }
    }

    pub fn is_single(&self) -> bool {
        self.segments.len() == 1
    }

    pub fn dotted(&self) -> String {
        self.segments.join(".")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    All,
    Ex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Imp,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermExpr {
    pub node: TermNode,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermNode {
    /// Schematic variable, optionally sorted (`~x`, `$x`, `#x`, `x: bits`).
    Var { name: String, sort: Option<Sort> },
    /// `"literal"`
    StrLit(String),
    /// `'cell`
    Cell(String),
    /// Reference to a named binding through a (possibly dotted) path.
    PathRef(Path),
    /// `let x = t in body`
    LetIn {
        name: String,
        value: Box<TermExpr>,
        body: Box<TermExpr>,
    },
    /// `let f(a, b): ty = t in body`
    MacroLetIn {
        sig: MacroSig,
        value: Box<TermExpr>,
        body: Box<TermExpr>,
    },
    /// `path(args...)`; persistent facts carry the `!` marker.
    App {
        path: Path,
        args: Vec<Arg>,
        persistent: bool,
    },
    /// `<t0, t1, ...>` with arity >= 2
    Tuple(Vec<TermExpr>),
    /// `'c := t`
    Assign { cell: String, value: Box<TermExpr> },
    /// `'c := .` (rewrites to `'c := c`)
    AssignPrune { cell: String },
    /// `undef('c)`
    Undef { cell: String },
    /// `t as x`
    NamedPattern { term: Box<TermExpr>, name: String },
    /// `'c cas t`
    CellPattern { cell: String, term: Box<TermExpr> },
    /// `All x #i . f` / `Ex y . f`
    Quantified {
        quant: Quantifier,
        vars: Vec<(String, Sort)>,
        body: Box<TermExpr>,
    },
    /// `f @ i`, with `i` a temporal variable
    At {
        fact: Box<TermExpr>,
        time: Box<TermExpr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<TermExpr>,
        rhs: Box<TermExpr>,
    },
    /// `not f`
    Not(Box<TermExpr>),
}

impl TermExpr {
    pub fn new(node: TermNode, span: Span) -> TermExpr {
        TermExpr { node, span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    Term(TermExpr),
    /// `is .`
    NamePrune,
    /// `is '.`
    CellNamePrune,
}

/// Macro or predicate argument, optionally labelled (`label is value`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub label: Option<String>,
    pub value: ArgValue,
    pub span: Span,
}

/// Parameter of a macro. `cell` parameters were declared with a
/// leading apostrophe; `rw` grants the body write access to them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroParam {
    pub name: String,
    pub named: bool,
    pub rw: bool,
    pub cell: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroSig {
    pub name: String,
    pub params: Vec<MacroParam>,
    pub ret: Option<Sort>,
    pub span: Span,
}

/// Let bindings attached at the `ruleAR`/`ruleR` binding sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleLet {
    Binding {
        name: String,
        value: TermExpr,
    },
    Macro {
        sig: MacroSig,
        value: TermExpr,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleExpr {
    pub premise: Vec<TermExpr>,
    pub actions: Vec<TermExpr>,
    pub conclusion: Vec<TermExpr>,
    pub lets: Vec<RuleLet>,
    pub annotation: Option<String>,
    pub span: Span,
}

/// Loop conditions: `'c cas t`, optionally negated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub cell: String,
    pub pattern: TermExpr,
    pub negated: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessExpr {
    pub node: ProcessNode,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcessNode {
    Null,
    Step {
        rule: RuleExpr,
        rest: Box<ProcessExpr>,
    },
    Choice {
        branches: Vec<ProcessExpr>,
        rest: Box<ProcessExpr>,
    },
    Scoped {
        body: Box<ProcessExpr>,
        rest: Box<ProcessExpr>,
    },
    While {
        cond: Cond,
        body: Box<ProcessExpr>,
        rest: Box<ProcessExpr>,
        label: Option<String>,
    },
    Loop {
        body: Box<ProcessExpr>,
        rest: Box<ProcessExpr>,
        label: Option<String>,
    },
    IfThenElse {
        cond: Cond,
        then_branch: Box<ProcessExpr>,
        else_branch: Box<ProcessExpr>,
        rest: Box<ProcessExpr>,
    },
    Break(Option<String>),
    Continue(Option<String>),
    MacroCall {
        path: Path,
        args: Vec<Arg>,
        rest: Box<ProcessExpr>,
    },
    LetIn {
        name: String,
        value: TermExpr,
        rest: Box<ProcessExpr>,
    },
    MacroLetIn {
        sig: MacroSig,
        value: TermExpr,
        rest: Box<ProcessExpr>,
    },
}

impl ProcessExpr {
    pub fn null(span: Span) -> ProcessExpr {
        ProcessExpr {
            node: ProcessNode::Null,
            span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbatimKind {
    Restriction,
    Lemma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    /// `let x = t`
    LetBinding { name: String, value: TermExpr, span: Span },
    /// `fun f/2`
    FunSymbol { name: String, arity: usize, span: Span },
    /// `pred P/2` or `pred P(named a, named b)`
    PredSymbol {
        name: String,
        arity: usize,
        labels: Option<Vec<String>>,
        span: Span,
    },
    ApredSymbol {
        name: String,
        arity: usize,
        labels: Option<Vec<String>>,
        span: Span,
    },
    /// `fun f(a, b) = t`
    FunMacro { sig: MacroSig, body: TermExpr, span: Span },
    /// `pred P(a, b) = t`
    PredMacro { sig: MacroSig, body: TermExpr, span: Span },
    ApredMacro { sig: MacroSig, body: TermExpr, span: Span },
    /// `let f(a, b): ty = t`
    TermMacro { sig: MacroSig, body: TermExpr, span: Span },
    /// `process Name = P`
    ProcessDecl { name: String, body: ProcessExpr, span: Span },
    /// `process Name(params) = P`
    ProcessMacro {
        sig: MacroSig,
        body: ProcessExpr,
        span: Span,
    },
    Module { name: String, decls: Vec<Decl>, span: Span },
    Import { name: String, span: Span },
    Open { name: String, span: Span },
    Include { name: String, span: Span },
    ModuleAlias { name: String, target: Path, span: Span },
    /// `restriction Name = ...` / `lemma Name = ...`, kept verbatim for
    /// pass-through into the emitted theory. `formula` is the structured
    /// parse when one succeeded.
    Verbatim {
        kind: VerbatimKind,
        name: String,
        text: String,
        formula: Option<TermExpr>,
        span: Span,
    },
}

impl Decl {
    pub fn span(&self) -> Span {
        match self {
            Decl::LetBinding { span, .. }
            | Decl::FunSymbol { span, .. }
            | Decl::PredSymbol { span, .. }
            | Decl::ApredSymbol { span, .. }
            | Decl::FunMacro { span, .. }
            | Decl::PredMacro { span, .. }
            | Decl::ApredMacro { span, .. }
            | Decl::TermMacro { span, .. }
            | Decl::ProcessDecl { span, .. }
            | Decl::ProcessMacro { span, .. }
            | Decl::Module { span, .. }
            | Decl::Import { span, .. }
            | Decl::Open { span, .. }
            | Decl::Include { span, .. }
            | Decl::ModuleAlias { span, .. }
            | Decl::Verbatim { span, .. } => *span,
        }
    }
}

/// A parsed `.tg` file. The module name is the capitalized file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceModule {
    pub name: String,
    pub decls: Vec<Decl>,
}

/// Capitalize a file stem into its module name (`fun_symbols` is
/// exposed as `Fun_symbols`).
pub fn module_name_of_stem(stem: &str) -> String {
    let mut chars = stem.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}
