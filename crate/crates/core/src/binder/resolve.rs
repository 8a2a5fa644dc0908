//! Module-system resolution. Walks the declaration tree, assigns every
//! value a globally unique qualified name, and rewrites use sites to
//! single-segment paths holding that name. `import` makes a top-level
//! module nameable, `open` injects its bindings into the current
//! lexical scope, `include` additionally re-exports them, and
//! `module X = path` introduces an alias. Inner scopes shadow outer
//! ones; a clash between two `open`s is reported at use time.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::{Diagnostic, Span};
use crate::syntax::ast::*;

/// Names that may not be declared or referenced by user code.
pub const RESERVED_SYMBOLS: &[&str] = &["Cell", "St", "StF", "StB"];
/// Prefix used by the translator when turning cells into variables.
pub const CELL_VAR_PREFIX: &str = "tgc_";

pub const BUILTIN_FACTS: &[&str] = &["In", "Out", "Fr"];

pub type SymbolId = usize;

#[derive(Debug, Clone)]
pub enum SymbolKind {
    Fun {
        arity: usize,
    },
    Pred {
        arity: usize,
        labels: Option<Vec<String>>,
    },
    Apred {
        arity: usize,
        labels: Option<Vec<String>>,
    },
    LetBinding {
        body: TermExpr,
    },
    TermMacro {
        sig: MacroSig,
        body: TermExpr,
    },
    PredMacro {
        sig: MacroSig,
        body: TermExpr,
    },
    ApredMacro {
        sig: MacroSig,
        body: TermExpr,
    },
    Process {
        body: ProcessExpr,
    },
    ProcessMacro {
        sig: MacroSig,
        body: ProcessExpr,
    },
}

impl SymbolKind {
    pub fn describe(&self) -> &'static str {
        match self {
            SymbolKind::Fun { .. } => "function symbol",
            SymbolKind::Pred { .. } => "predicate symbol",
            SymbolKind::Apred { .. } => "action predicate symbol",
            SymbolKind::LetBinding { .. } => "let binding",
            SymbolKind::TermMacro { .. } => "term macro",
            SymbolKind::PredMacro { .. } => "predicate macro",
            SymbolKind::ApredMacro { .. } => "action predicate macro",
            SymbolKind::Process { .. } => "process",
            SymbolKind::ProcessMacro { .. } => "process macro",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymbolInfo {
    pub qname: String,
    pub kind: SymbolKind,
    pub span: Span,
}

#[derive(Debug, Default)]
pub struct SymbolTable {
    pub entries: Vec<SymbolInfo>,
    pub by_qname: BTreeMap<String, SymbolId>,
}

impl SymbolTable {
    pub fn insert(&mut self, info: SymbolInfo) -> SymbolId {
        let id = self.entries.len();
        self.by_qname.insert(info.qname.clone(), id);
        self.entries.push(info);
        id
    }

    pub fn get(&self, id: SymbolId) -> &SymbolInfo {
        &self.entries[id]
    }

    pub fn lookup(&self, qname: &str) -> Option<&SymbolInfo> {
        self.by_qname.get(qname).map(|id| &self.entries[*id])
    }
}

/// Supplies imported top-level modules by name.
pub trait ModuleLoader {
    fn load(&mut self, name: &str) -> Result<SourceModule, String>;
}

/// Loader over an in-memory map, used by tests and single-file builds.
pub struct MapLoader {
    pub modules: BTreeMap<String, SourceModule>,
}

impl ModuleLoader for MapLoader {
    fn load(&mut self, name: &str) -> Result<SourceModule, String> {
        self.modules
            .get(name)
            .cloned()
            .ok_or_else(|| format!("unknown module `{}`", name))
    }
}

#[derive(Debug, Clone, Default)]
struct ModuleEnv {
    values: BTreeMap<String, SymbolId>,
    modules: BTreeMap<String, usize>,
}

#[derive(Debug, Default)]
struct Frame {
    values: BTreeMap<String, SymbolId>,
    modules: BTreeMap<String, usize>,
    /// Local macro parameters shadow everything and stay unresolved.
    params: BTreeSet<String>,
    /// Locally let-bound macro names (from `let f(..) = .. in ..`).
    local_macros: BTreeSet<String>,
    opens: Vec<(String, usize)>,
    exported_values: BTreeMap<String, SymbolId>,
    exported_modules: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct VerbatimBlock {
    pub kind: VerbatimKind,
    pub name: String,
    pub text: String,
    pub formula: Option<TermExpr>,
    pub span: Span,
}

pub struct Resolved {
    pub table: SymbolTable,
    /// Processes of the compiled (root) module, resolved but unexpanded.
    pub processes: Vec<(String, ProcessExpr, Span)>,
    pub passthrough: Vec<VerbatimBlock>,
}

pub struct Resolver<'l> {
    loader: &'l mut dyn ModuleLoader,
    table: SymbolTable,
    module_envs: Vec<ModuleEnv>,
    top_modules: BTreeMap<String, usize>,
    loading: BTreeSet<String>,
    frames: Vec<Frame>,
    verbatims: Vec<VerbatimBlock>,
    processes: Vec<(String, ProcessExpr, Span)>,
    diags: Vec<Diagnostic>,
    /// name of the macro whose body is being resolved, for recursion reporting
    current_macro: Option<String>,
}

type RResult<T> = Result<T, Diagnostic>;

pub fn resolve_modules(
    root: &SourceModule,
    loader: &mut dyn ModuleLoader,
) -> Result<Resolved, Vec<Diagnostic>> {
    let mut r = Resolver {
        loader,
        table: SymbolTable::default(),
        module_envs: Vec::new(),
        top_modules: BTreeMap::new(),
        loading: BTreeSet::new(),
        frames: Vec::new(),
        verbatims: Vec::new(),
        processes: Vec::new(),
        diags: Vec::new(),
        current_macro: None,
    };
    // prelude with the built-in fact symbols
    let mut prelude = Frame::default();
    for name in BUILTIN_FACTS {
        let id = r.table.insert(SymbolInfo {
            qname: (*name).to_string(),
            kind: SymbolKind::Pred {
                arity: 1,
                labels: None,
            },
            span: Span::synthetic(),
        });
        prelude.values.insert((*name).to_string(), id);
    }
    r.frames.push(prelude);
    r.loading.insert(root.name.clone());
    let result = r.resolve_module_body(&root.name, &root.name, &root.decls, true);
    if let Err(e) = result {
        r.diags.push(e);
    }
    if r.diags.is_empty() {
        Ok(Resolved {
            table: r.table,
            processes: r.processes,
            passthrough: r.verbatims,
        })
    } else {
        Err(r.diags)
    }
}

impl<'l> Resolver<'l> {
    fn load_top_module(&mut self, name: &str, span: Span) -> RResult<usize> {
        if let Some(idx) = self.top_modules.get(name) {
            return Ok(*idx);
        }
        if self.loading.contains(name) {
            return Err(Diagnostic::error(
                span,
                format!("cyclic import of module `{}`", name),
            ));
        }
        let module = self
            .loader
            .load(name)
            .map_err(|e| Diagnostic::error(span, e))?;
        self.loading.insert(name.to_string());
        // imported modules resolve against the prelude only
        let saved_frames = std::mem::take(&mut self.frames);
        self.frames.push(Frame {
            values: saved_frames[0].values.clone(),
            ..Frame::default()
        });
        let result = self.resolve_module_body(name, name, &module.decls, false);
        self.frames = saved_frames;
        self.loading.remove(name);
        let idx = result?;
        self.top_modules.insert(name.to_string(), idx);
        Ok(idx)
    }

    /// Resolve one module's declarations; returns its environment index.
    fn resolve_module_body(
        &mut self,
        _name: &str,
        qprefix: &str,
        decls: &[Decl],
        is_root: bool,
    ) -> RResult<usize> {
        self.frames.push(Frame::default());
        for decl in decls {
            if let Err(e) = self.resolve_decl(qprefix, decl, is_root) {
                self.diags.push(e);
            }
        }
        let frame = self.frames.pop().unwrap();
        let env = ModuleEnv {
            values: frame.exported_values,
            modules: frame.exported_modules,
        };
        let idx = self.module_envs.len();
        self.module_envs.push(env);
        Ok(idx)
    }

    fn check_decl_name(&self, name: &str, span: Span) -> RResult<()> {
        if RESERVED_SYMBOLS.contains(&name) {
            return Err(Diagnostic::error(
                span,
                format!("`{}` is a reserved symbol and cannot be declared", name),
            ));
        }
        if BUILTIN_FACTS.contains(&name) {
            return Err(Diagnostic::error(
                span,
                format!("`{}` is a built-in fact symbol and cannot be redeclared", name),
            ));
        }
        Ok(())
    }

    fn define(&mut self, qprefix: &str, name: &str, kind: SymbolKind, span: Span) -> RResult<SymbolId> {
        self.check_decl_name(name, span)?;
        let frame = self.frames.last_mut().unwrap();
        if frame.values.contains_key(name) {
            return Err(Diagnostic::error(
                span,
                format!("duplicate definition of `{}` in this module scope", name),
            ));
        }
        let qname = format!("{}.{}", qprefix, name);
        let id = self.table.insert(SymbolInfo {
            qname,
            kind,
            span,
        });
        let frame = self.frames.last_mut().unwrap();
        frame.values.insert(name.to_string(), id);
        frame.exported_values.insert(name.to_string(), id);
        Ok(id)
    }

    fn resolve_decl(&mut self, qprefix: &str, decl: &Decl, is_root: bool) -> RResult<()> {
        match decl {
            Decl::Import { name, span } => {
                let idx = self.load_top_module(name, *span)?;
                let frame = self.frames.last_mut().unwrap();
                frame.modules.insert(name.clone(), idx);
                Ok(())
            }
            Decl::Open { name, span } => {
                let idx = self.lookup_module_name(name, *span)?;
                let frame = self.frames.last_mut().unwrap();
                frame.opens.push((name.clone(), idx));
                Ok(())
            }
            Decl::Include { name, span } => {
                let idx = self.lookup_module_name(name, *span)?;
                let env = self.module_envs[idx].clone();
                let frame = self.frames.last_mut().unwrap();
                for (n, id) in env.values {
                    if frame.values.contains_key(&n) {
                        return Err(Diagnostic::error(
                            *span,
                            format!("`include {}` clashes with existing definition of `{}`", name, n),
                        ));
                    }
                    frame.values.insert(n.clone(), id);
                    frame.exported_values.insert(n, id);
                }
                for (n, m) in env.modules {
                    frame.modules.insert(n.clone(), m);
                    frame.exported_modules.insert(n, m);
                }
                Ok(())
            }
            Decl::ModuleAlias { name, target, span } => {
                self.check_decl_name(name, *span)?;
                let idx = self.lookup_module_path(target)?;
                let frame = self.frames.last_mut().unwrap();
                frame.modules.insert(name.clone(), idx);
                frame.exported_modules.insert(name.clone(), idx);
                Ok(())
            }
            Decl::Module { name, decls, span } => {
                self.check_decl_name(name, *span)?;
                let idx =
                    self.resolve_module_body(name, &format!("{}.{}", qprefix, name), decls, is_root)?;
                let frame = self.frames.last_mut().unwrap();
                frame.modules.insert(name.clone(), idx);
                frame.exported_modules.insert(name.clone(), idx);
                Ok(())
            }
            Decl::LetBinding { name, value, span } => {
                let body = self.resolve_term(value)?;
                self.define(qprefix, name, SymbolKind::LetBinding { body }, *span)?;
                Ok(())
            }
            Decl::FunSymbol { name, arity, span } => {
                self.define(qprefix, name, SymbolKind::Fun { arity: *arity }, *span)?;
                Ok(())
            }
            Decl::PredSymbol {
                name,
                arity,
                labels,
                span,
            } => {
                self.define(
                    qprefix,
                    name,
                    SymbolKind::Pred {
                        arity: *arity,
                        labels: labels.clone(),
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::ApredSymbol {
                name,
                arity,
                labels,
                span,
            } => {
                self.define(
                    qprefix,
                    name,
                    SymbolKind::Apred {
                        arity: *arity,
                        labels: labels.clone(),
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::FunMacro { sig, body, span }
            | Decl::TermMacro { sig, body, span } => {
                let body = self.resolve_macro_body_term(sig, body)?;
                self.define(
                    qprefix,
                    &sig.name,
                    SymbolKind::TermMacro {
                        sig: sig.clone(),
                        body,
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::PredMacro { sig, body, span } => {
                let body = self.resolve_macro_body_term(sig, body)?;
                self.define(
                    qprefix,
                    &sig.name,
                    SymbolKind::PredMacro {
                        sig: sig.clone(),
                        body,
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::ApredMacro { sig, body, span } => {
                let body = self.resolve_macro_body_term(sig, body)?;
                self.define(
                    qprefix,
                    &sig.name,
                    SymbolKind::ApredMacro {
                        sig: sig.clone(),
                        body,
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::ProcessDecl { name, body, span } => {
                let body = self.resolve_process(body)?;
                self.define(
                    qprefix,
                    name,
                    SymbolKind::Process { body: body.clone() },
                    *span,
                )?;
                if is_root {
                    self.processes.push((name.clone(), body, *span));
                }
                Ok(())
            }
            Decl::ProcessMacro { sig, body, span } => {
                self.frames.push(Frame {
                    params: sig.params.iter().map(|p| p.name.clone()).collect(),
                    ..Frame::default()
                });
                let saved = self.current_macro.replace(sig.name.clone());
                let body = self.resolve_process(body);
                self.current_macro = saved;
                self.frames.pop();
                self.define(
                    qprefix,
                    &sig.name,
                    SymbolKind::ProcessMacro {
                        sig: sig.clone(),
                        body: body?,
                    },
                    *span,
                )?;
                Ok(())
            }
            Decl::Verbatim {
                kind,
                name,
                text,
                formula,
                span,
            } => {
                let formula = match formula {
                    Some(f) => Some(self.resolve_term(f)?),
                    None => None,
                };
                self.verbatims.push(VerbatimBlock {
                    kind: *kind,
                    name: name.clone(),
                    text: text.clone(),
                    formula,
                    span: *span,
                });
                Ok(())
            }
        }
    }

    fn resolve_macro_body_term(&mut self, sig: &MacroSig, body: &TermExpr) -> RResult<TermExpr> {
        self.frames.push(Frame {
            params: sig.params.iter().map(|p| p.name.clone()).collect(),
            ..Frame::default()
        });
        let saved = self.current_macro.replace(sig.name.clone());
        let out = self.resolve_term(body);
        self.current_macro = saved;
        self.frames.pop();
        out
    }

    fn unknown_symbol(&self, path: &Path) -> Diagnostic {
        if path.is_single() && self.current_macro.as_deref() == Some(path.segments[0].as_str()) {
            Diagnostic::error(
                path.span,
                format!(
                    "recursive macro `{}` (macros must not be recursive)",
                    path.segments[0]
                ),
            )
        } else {
            Diagnostic::error(path.span, format!("unknown symbol `{}`", path.dotted()))
        }
    }

    fn lookup_module_name(&self, name: &str, span: Span) -> RResult<usize> {
        for frame in self.frames.iter().rev() {
            if let Some(idx) = frame.modules.get(name) {
                return Ok(*idx);
            }
            for (_, open_idx) in &frame.opens {
                if let Some(idx) = self.module_envs[*open_idx].modules.get(name) {
                    return Ok(*idx);
                }
            }
        }
        Err(Diagnostic::error(
            span,
            format!("unknown module `{}` (missing `import`?)", name),
        ))
    }

    fn lookup_module_path(&self, path: &Path) -> RResult<usize> {
        let mut idx = self.lookup_module_name(&path.segments[0], path.span)?;
        for seg in &path.segments[1..] {
            idx = *self.module_envs[idx].modules.get(seg).ok_or_else(|| {
                Diagnostic::error(
                    path.span,
                    format!("module `{}` has no submodule `{}`", path.dotted(), seg),
                )
            })?;
        }
        Ok(idx)
    }

    /// Resolve a value path to a symbol id. `Ok(None)` means the name is
    /// a macro parameter or local macro and stays as written.
    fn lookup_value(&self, path: &Path) -> RResult<Option<SymbolId>> {
        if path.is_single() {
            let name = &path.segments[0];
            if RESERVED_SYMBOLS.contains(&name.as_str()) {
                return Err(Diagnostic::error(
                    path.span,
                    format!("`{}` is a reserved symbol", name),
                ));
            }
            for frame in self.frames.iter().rev() {
                if frame.params.contains(name) || frame.local_macros.contains(name) {
                    return Ok(None);
                }
                if let Some(id) = frame.values.get(name) {
                    return Ok(Some(*id));
                }
                let mut candidates: Vec<(String, SymbolId)> = Vec::new();
                for (mod_name, open_idx) in &frame.opens {
                    if let Some(id) = self.module_envs[*open_idx].values.get(name) {
                        if !candidates.iter().any(|(_, cid)| cid == id) {
                            candidates.push((mod_name.clone(), *id));
                        }
                    }
                }
                match candidates.len() {
                    0 => continue,
                    1 => return Ok(Some(candidates[0].1)),
                    _ => {
                        let names: Vec<String> = candidates
                            .iter()
                            .map(|(m, id)| format!("`{}` (via open {})", self.table.get(*id).qname, m))
                            .collect();
                        return Err(Diagnostic::error(
                            path.span,
                            format!(
                                "ambiguous name `{}` after multiple opens: {}",
                                name,
                                names.join(", ")
                            ),
                        ));
                    }
                }
            }
            Ok(None)
        } else {
            let (mods, last) = path.segments.split_at(path.segments.len() - 1);
            let mod_path = Path {
                segments: mods.to_vec(),
                span: path.span,
            };
            let idx = self.lookup_module_path(&mod_path)?;
            let id = self.module_envs[idx].values.get(&last[0]).ok_or_else(|| {
                Diagnostic::error(
                    path.span,
                    format!("module `{}` has no member `{}`", mod_path.dotted(), last[0]),
                )
            })?;
            Ok(Some(*id))
        }
    }

    fn qualify(&self, id: SymbolId, span: Span) -> Path {
        Path {
            segments: vec![self.table.get(id).qname.clone()],
            span,
        }
    }

    fn resolve_term(&mut self, t: &TermExpr) -> RResult<TermExpr> {
        let node = match &t.node {
            TermNode::Var { name, sort } => {
                if name.starts_with(CELL_VAR_PREFIX) {
                    return Err(Diagnostic::error(
                        t.span,
                        format!("variable `{}` uses the reserved prefix `{}`", name, CELL_VAR_PREFIX),
                    ));
                }
                if RESERVED_SYMBOLS.contains(&name.as_str()) {
                    return Err(Diagnostic::error(
                        t.span,
                        format!("`{}` is a reserved symbol", name),
                    ));
                }
                // a bare name referring to a value binding resolves to it;
                // anything else is a schematic variable
                let path = Path::single(name.clone(), t.span);
                match self.lookup_value(&path)? {
                    Some(id) if sort.is_none() => {
                        let info = self.table.get(id);
                        match info.kind {
                            SymbolKind::LetBinding { .. } => TermNode::PathRef(self.qualify(id, t.span)),
                            _ => TermNode::Var {
                                name: name.clone(),
                                sort: *sort,
                            },
                        }
                    }
                    _ => TermNode::Var {
                        name: name.clone(),
                        sort: *sort,
                    },
                }
            }
            TermNode::StrLit(_) | TermNode::Cell(_) | TermNode::AssignPrune { .. } | TermNode::Undef { .. } => {
                t.node.clone()
            }
            TermNode::PathRef(path) => {
                let id = self.lookup_value(path)?.ok_or_else(|| {
                    Diagnostic::error(path.span, format!("unknown name `{}`", path.dotted()))
                })?;
                TermNode::PathRef(self.qualify(id, t.span))
            }
            TermNode::LetIn { name, value, body } => {
                let value = self.resolve_term(value)?;
                self.frames.push(Frame {
                    params: [name.clone()].into_iter().collect(),
                    ..Frame::default()
                });
                let body = self.resolve_term(body);
                self.frames.pop();
                TermNode::LetIn {
                    name: name.clone(),
                    value: Box::new(value),
                    body: Box::new(body?),
                }
            }
            TermNode::MacroLetIn { sig, value, body } => {
                let value = self.resolve_macro_body_term(sig, value)?;
                self.frames.push(Frame {
                    local_macros: [sig.name.clone()].into_iter().collect(),
                    ..Frame::default()
                });
                let body = self.resolve_term(body);
                self.frames.pop();
                TermNode::MacroLetIn {
                    sig: sig.clone(),
                    value: Box::new(value),
                    body: Box::new(body?),
                }
            }
            TermNode::App {
                path,
                args,
                persistent,
            } => {
                let resolved = self.lookup_value(path)?;
                let path = match resolved {
                    Some(id) => self.qualify(id, path.span),
                    None => {
                        if path.is_single() && self.is_local_macro(&path.segments[0]) {
                            path.clone()
                        } else {
                            return Err(self.unknown_symbol(path));
                        }
                    }
                };
                let args = args
                    .iter()
                    .map(|a| self.resolve_arg(a))
                    .collect::<RResult<Vec<_>>>()?;
                TermNode::App {
                    path,
                    args,
                    persistent: *persistent,
                }
            }
            TermNode::Tuple(items) => TermNode::Tuple(
                items
                    .iter()
                    .map(|i| self.resolve_term(i))
                    .collect::<RResult<Vec<_>>>()?,
            ),
            TermNode::Assign { cell, value } => TermNode::Assign {
                cell: cell.clone(),
                value: Box::new(self.resolve_term(value)?),
            },
            TermNode::NamedPattern { term, name } => TermNode::NamedPattern {
                term: Box::new(self.resolve_term(term)?),
                name: name.clone(),
            },
            TermNode::CellPattern { cell, term } => TermNode::CellPattern {
                cell: cell.clone(),
                term: Box::new(self.resolve_term(term)?),
            },
            TermNode::Quantified { quant, vars, body } => {
                self.frames.push(Frame {
                    params: vars.iter().map(|(n, _)| n.clone()).collect(),
                    ..Frame::default()
                });
                let body = self.resolve_term(body);
                self.frames.pop();
                TermNode::Quantified {
                    quant: *quant,
                    vars: vars.clone(),
                    body: Box::new(body?),
                }
            }
            TermNode::At { fact, time } => TermNode::At {
                fact: Box::new(self.resolve_term(fact)?),
                time: Box::new(self.resolve_term(time)?),
            },
            TermNode::Binary { op, lhs, rhs } => TermNode::Binary {
                op: *op,
                lhs: Box::new(self.resolve_term(lhs)?),
                rhs: Box::new(self.resolve_term(rhs)?),
            },
            TermNode::Not(inner) => TermNode::Not(Box::new(self.resolve_term(inner)?)),
        };
        Ok(TermExpr::new(node, t.span))
    }

    fn is_local_macro(&self, name: &str) -> bool {
        self.frames
            .iter()
            .rev()
            .any(|f| f.local_macros.contains(name) || f.params.contains(name))
    }

    fn resolve_arg(&mut self, a: &Arg) -> RResult<Arg> {
        let value = match &a.value {
            ArgValue::Term(t) => ArgValue::Term(self.resolve_term(t)?),
            ArgValue::NamePrune => {
                // `x is .` rewrites to `x is x`; resolve the variable now
                let label = a.label.as_ref().expect("prune without label");
                let t = TermExpr::new(
                    TermNode::Var {
                        name: label.clone(),
                        sort: None,
                    },
                    a.span,
                );
                ArgValue::Term(self.resolve_term(&t)?)
            }
            ArgValue::CellNamePrune => {
                let label = a.label.as_ref().expect("prune without label");
                ArgValue::Term(TermExpr::new(TermNode::Cell(label.clone()), a.span))
            }
        };
        Ok(Arg {
            label: a.label.clone(),
            value,
            span: a.span,
        })
    }

    fn resolve_rule(&mut self, r: &RuleExpr) -> RResult<RuleExpr> {
        let premise = r
            .premise
            .iter()
            .map(|t| self.resolve_term(t))
            .collect::<RResult<Vec<_>>>()?;
        // rule lets scope over actions and conclusion
        let mut lets = Vec::new();
        let mut let_frame = Frame::default();
        for l in &r.lets {
            match l {
                RuleLet::Binding { name, value } => {
                    let value = {
                        self.frames.push(std::mem::take(&mut let_frame));
                        let v = self.resolve_term(value);
                        let_frame = self.frames.pop().unwrap();
                        v?
                    };
                    let_frame.params.insert(name.clone());
                    lets.push(RuleLet::Binding {
                        name: name.clone(),
                        value,
                    });
                }
                RuleLet::Macro { sig, value } => {
                    let value = {
                        self.frames.push(std::mem::take(&mut let_frame));
                        let v = self.resolve_macro_body_term(sig, value);
                        let_frame = self.frames.pop().unwrap();
                        v?
                    };
                    let_frame.local_macros.insert(sig.name.clone());
                    lets.push(RuleLet::Macro {
                        sig: sig.clone(),
                        value,
                    });
                }
            }
        }
        self.frames.push(let_frame);
        let actions = r
            .actions
            .iter()
            .map(|t| self.resolve_term(t))
            .collect::<RResult<Vec<_>>>();
        let conclusion = r
            .conclusion
            .iter()
            .map(|t| self.resolve_term(t))
            .collect::<RResult<Vec<_>>>();
        self.frames.pop();
        Ok(RuleExpr {
            premise,
            actions: actions?,
            conclusion: conclusion?,
            lets,
            annotation: r.annotation.clone(),
            span: r.span,
        })
    }

    fn resolve_cond(&mut self, c: &Cond) -> RResult<Cond> {
        Ok(Cond {
            cell: c.cell.clone(),
            pattern: self.resolve_term(&c.pattern)?,
            negated: c.negated,
            span: c.span,
        })
    }

    fn resolve_process(&mut self, p: &ProcessExpr) -> RResult<ProcessExpr> {
        let node = match &p.node {
            ProcessNode::Null => ProcessNode::Null,
            ProcessNode::Step { rule, rest } => ProcessNode::Step {
                rule: self.resolve_rule(rule)?,
                rest: Box::new(self.resolve_process(rest)?),
            },
            ProcessNode::Choice { branches, rest } => ProcessNode::Choice {
                branches: branches
                    .iter()
                    .map(|b| self.resolve_process(b))
                    .collect::<RResult<Vec<_>>>()?,
                rest: Box::new(self.resolve_process(rest)?),
            },
            ProcessNode::Scoped { body, rest } => {
                self.frames.push(Frame::default());
                let body = self.resolve_process(body);
                self.frames.pop();
                ProcessNode::Scoped {
                    body: Box::new(body?),
                    rest: Box::new(self.resolve_process(rest)?),
                }
            }
            ProcessNode::While {
                cond,
                body,
                rest,
                label,
            } => ProcessNode::While {
                cond: self.resolve_cond(cond)?,
                body: Box::new(self.resolve_process(body)?),
                rest: Box::new(self.resolve_process(rest)?),
                label: label.clone(),
            },
            ProcessNode::Loop { body, rest, label } => ProcessNode::Loop {
                body: Box::new(self.resolve_process(body)?),
                rest: Box::new(self.resolve_process(rest)?),
                label: label.clone(),
            },
            ProcessNode::IfThenElse {
                cond,
                then_branch,
                else_branch,
                rest,
            } => ProcessNode::IfThenElse {
                cond: self.resolve_cond(cond)?,
                then_branch: Box::new(self.resolve_process(then_branch)?),
                else_branch: Box::new(self.resolve_process(else_branch)?),
                rest: Box::new(self.resolve_process(rest)?),
            },
            ProcessNode::Break(l) => ProcessNode::Break(l.clone()),
            ProcessNode::Continue(l) => ProcessNode::Continue(l.clone()),
            ProcessNode::MacroCall { path, args, rest } => {
                let id = match self.lookup_value(path)? {
                    Some(id) => id,
                    None => return Err(self.unknown_symbol(path)),
                };
                let args = args
                    .iter()
                    .map(|a| self.resolve_arg(a))
                    .collect::<RResult<Vec<_>>>()?;
                ProcessNode::MacroCall {
                    path: self.qualify(id, path.span),
                    args,
                    rest: Box::new(self.resolve_process(rest)?),
                }
            }
            ProcessNode::LetIn { name, value, rest } => {
                let value = self.resolve_term(value)?;
                self.frames.push(Frame {
                    params: [name.clone()].into_iter().collect(),
                    ..Frame::default()
                });
                let rest = self.resolve_process(rest);
                self.frames.pop();
                ProcessNode::LetIn {
                    name: name.clone(),
                    value,
                    rest: Box::new(rest?),
                }
            }
            ProcessNode::MacroLetIn { sig, value, rest } => {
                let value = self.resolve_macro_body_term(sig, value)?;
                self.frames.push(Frame {
                    local_macros: [sig.name.clone()].into_iter().collect(),
                    ..Frame::default()
                });
                let rest = self.resolve_process(rest);
                self.frames.pop();
                ProcessNode::MacroLetIn {
                    sig: sig.clone(),
                    value,
                    rest: Box::new(rest?),
                }
            }
        };
        Ok(ProcessExpr { node, span: p.span })
    }
}
