//! Recursive-descent parser. Works over a normalized token stream in
//! which compound arrow tokens (`]->[` etc.) have been split back into
//! brackets and arrows. On error the parser records a diagnostic and
//! resynchronizes at the next `;` or `}` so several errors can be
//! reported in one pass.

use crate::diag::{Diagnostic, Span};
use crate::syntax::ast::*;
use crate::syntax::token::{Kw, Token, TokenKind};

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

/// Split compound arrow tokens so the grammar only ever sees `[`, `]`,
/// `->`, `-->` and `--`.
fn normalize(toks: Vec<Token>) -> Vec<Token> {
    let mut out = Vec::with_capacity(toks.len());
    for t in toks {
        if t.kind == TokenKind::Punct {
            let parts: &[&str] = match t.text.as_str() {
                "]->[" => &["]", "->", "["],
                "]-->[" => &["]", "-->", "["],
                "]->" => &["]", "->"],
                "]-->" => &["]", "-->"],
                _ => {
                    out.push(t);
                    continue;
                }
            };
            let mut offset = t.span.start;
            for p in parts {
                out.push(Token {
                    kind: TokenKind::Punct,
                    text: (*p).to_string(),
                    span: Span::new(offset, offset + p.len(), t.span.line, t.span.col),
                });
                offset += p.len();
            }
        } else {
            out.push(t);
        }
    }
    out
}

const DECL_KWS: &[Kw] = &[
    Kw::Let,
    Kw::Fun,
    Kw::Pred,
    Kw::Apred,
    Kw::Process,
    Kw::Module,
    Kw::Import,
    Kw::Open,
    Kw::Include,
    Kw::Restriction,
    Kw::Lemma,
];

impl Parser {
    pub fn new(toks: Vec<Token>) -> Parser {
        Parser {
            toks: normalize(toks),
            pos: 0,
            diags: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&Token> {
        self.toks.get(self.pos + off)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here_span(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => self
                .toks
                .last()
                .map(|t| t.span)
                .unwrap_or_else(Span::synthetic),
        }
    }

    fn at_punct(&self, s: &str) -> bool {
        self.peek().map(|t| t.is_punct(s)).unwrap_or(false)
    }

    fn at_kw(&self, kw: Kw) -> bool {
        self.peek().map(|t| t.is_kw(kw)).unwrap_or(false)
    }

    fn eat_punct(&mut self, s: &str) -> bool {
        if self.at_punct(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, s: &str) -> PResult<Span> {
        match self.peek() {
            Some(t) if t.is_punct(s) => {
                let sp = t.span;
                self.pos += 1;
                Ok(sp)
            }
            Some(t) => Err(Diagnostic::error(
                t.span,
                format!("expected `{}`, found `{}`", s, t.text),
            )),
            None => Err(Diagnostic::error(
                self.here_span(),
                format!("expected `{}`, found end of input", s),
            )),
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> PResult<Span> {
        match self.peek() {
            Some(t) if t.is_kw(kw) => {
                let sp = t.span;
                self.pos += 1;
                Ok(sp)
            }
            Some(t) => Err(Diagnostic::error(
                t.span,
                format!("expected `{}`, found `{}`", kw.as_str(), t.text),
            )),
            None => Err(Diagnostic::error(
                self.here_span(),
                format!("expected `{}`, found end of input", kw.as_str()),
            )),
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let out = (t.text.clone(), t.span);
                self.pos += 1;
                Ok(out)
            }
            Some(t) => Err(Diagnostic::error(
                t.span,
                format!("expected identifier, found `{}`", t.text),
            )),
            None => Err(Diagnostic::error(
                self.here_span(),
                "expected identifier, found end of input",
            )),
        }
    }

    fn cell_name(tok: &Token) -> String {
        tok.text[1..].to_string()
    }

    // ---- paths -----------------------------------------------------

    fn parse_path(&mut self) -> PResult<Path> {
        let (first, sp) = self.expect_ident()?;
        let mut segments = vec![first];
        let mut span = sp;
        while self.at_punct(".")
            && matches!(self.peek_at(1), Some(t) if t.kind == TokenKind::Ident)
        {
            self.bump();
            let (seg, sp2) = self.expect_ident()?;
            segments.push(seg);
            span = span.to(sp2);
        }
        Ok(Path { segments, span })
    }

    // ---- terms -----------------------------------------------------

    fn parse_macro_sig(&mut self, name: String, name_span: Span) -> PResult<MacroSig> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.at_punct(")") {
            loop {
                let mut named = false;
                let mut rw = false;
                loop {
                    if self.eat_kw(Kw::Named) {
                        named = true;
                    } else if self.eat_kw(Kw::Rw) {
                        rw = true;
                    } else {
                        break;
                    }
                }
                let (pname, cell, psp) = match self.peek() {
                    Some(t) if t.kind == TokenKind::CellIdent => {
                        let out = (Self::cell_name(t), true, t.span);
                        self.pos += 1;
                        out
                    }
                    _ => {
                        let (n, sp) = self.expect_ident()?;
                        (n, false, sp)
                    }
                };
                if rw && !cell {
                    return Err(Diagnostic::error(
                        psp,
                        "`rw` is only allowed on cell parameters",
                    ));
                }
                params.push(MacroParam {
                    name: pname,
                    named,
                    rw,
                    cell,
                    span: psp,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let close = self.expect_punct(")")?;
        let all_named = params.iter().all(|p| p.named);
        let none_named = params.iter().all(|p| !p.named);
        if !all_named && !none_named {
            return Err(Diagnostic::error(
                name_span,
                format!(
                    "macro `{}` mixes named and positional parameters; use one convention",
                    name
                ),
            ));
        }
        let mut ret = None;
        if self.at_punct(":") {
            self.bump();
            let (ty, tsp) = self.expect_ident()?;
            ret = Some(Sort::from_name(&ty).ok_or_else(|| {
                Diagnostic::error(tsp, format!("unknown type `{}` in macro signature", ty))
            })?);
        }
        Ok(MacroSig {
            name,
            params,
            ret,
            span: name_span.to(close),
        })
    }

    fn parse_args(&mut self) -> PResult<Vec<Arg>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            loop {
                args.push(self.parse_arg()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn parse_arg(&mut self) -> PResult<Arg> {
        // `label is value`; the label may be written with or without
        // the cell sigil (both refer to the same parameter).
        let labelled = match (self.peek(), self.peek_at(1)) {
            (Some(t), Some(n))
                if (t.kind == TokenKind::Ident || t.kind == TokenKind::CellIdent)
                    && n.is_kw(Kw::Is) =>
            {
                true
            }
            _ => false,
        };
        if labelled {
            let ltok = self.bump().unwrap();
            let label = if ltok.kind == TokenKind::CellIdent {
                Self::cell_name(&ltok)
            } else {
                ltok.text.clone()
            };
            self.expect_kw(Kw::Is)?;
            let (value, vspan) = match self.peek() {
                Some(t) if t.is_punct(".") => {
                    let sp = t.span;
                    self.pos += 1;
                    (ArgValue::NamePrune, sp)
                }
                Some(t) if t.kind == TokenKind::CellIdent && t.text == "'." => {
                    let sp = t.span;
                    self.pos += 1;
                    (ArgValue::CellNamePrune, sp)
                }
                _ => {
                    let term = self.parse_term()?;
                    let sp = term.span;
                    (ArgValue::Term(term), sp)
                }
            };
            Ok(Arg {
                label: Some(label),
                value,
                span: ltok.span.to(vspan),
            })
        } else {
            let term = self.parse_term()?;
            let span = term.span;
            Ok(Arg {
                label: None,
                value: ArgValue::Term(term),
                span,
            })
        }
    }

    /// Term with `as`-postfix; binds tighter than `,`.
    pub fn parse_term(&mut self) -> PResult<TermExpr> {
        let mut term = self.parse_primary()?;
        while self.at_kw(Kw::As) {
            self.bump();
            let (name, nsp) = self.expect_ident()?;
            let span = term.span.to(nsp);
            term = TermExpr::new(
                TermNode::NamedPattern {
                    term: Box::new(term),
                    name,
                },
                span,
            );
        }
        Ok(term)
    }

    fn parse_primary(&mut self) -> PResult<TermExpr> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => {
                return Err(Diagnostic::error(
                    self.here_span(),
                    "expected term, found end of input",
                ))
            }
        };
        match &tok.kind {
            TokenKind::StrLit => {
                self.bump();
                Ok(TermExpr::new(TermNode::StrLit(tok.string_value()), tok.span))
            }
            TokenKind::CellIdent => {
                self.bump();
                Ok(TermExpr::new(TermNode::Cell(Self::cell_name(&tok)), tok.span))
            }
            TokenKind::PubSym => {
                self.bump();
                Ok(TermExpr::new(
                    TermNode::Var {
                        name: tok.text[1..].to_string(),
                        sort: Some(Sort::Public),
                    },
                    tok.span,
                ))
            }
            TokenKind::FreshMarker => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                Ok(TermExpr::new(
                    TermNode::Var {
                        name,
                        sort: Some(Sort::Fresh),
                    },
                    tok.span.to(nsp),
                ))
            }
            TokenKind::TemporalMarker => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                Ok(TermExpr::new(
                    TermNode::Var {
                        name,
                        sort: Some(Sort::Temporal),
                    },
                    tok.span.to(nsp),
                ))
            }
            TokenKind::Keyword(Kw::Undef) => {
                self.bump();
                self.expect_punct("(")?;
                let cell = match self.peek() {
                    Some(t) if t.kind == TokenKind::CellIdent => {
                        let c = Self::cell_name(t);
                        self.pos += 1;
                        c
                    }
                    _ => {
                        return Err(Diagnostic::error(
                            self.here_span(),
                            "expected cell name in `undef(...)`",
                        ))
                    }
                };
                let close = self.expect_punct(")")?;
                Ok(TermExpr::new(
                    TermNode::Undef { cell },
                    tok.span.to(close),
                ))
            }
            TokenKind::Keyword(Kw::Let) => self.parse_let_term(),
            TokenKind::Keyword(Kw::All) => self.parse_quantified(Quantifier::All),
            TokenKind::Keyword(Kw::Ex) => self.parse_quantified(Quantifier::Ex),
            TokenKind::Keyword(Kw::Not) => {
                self.bump();
                let inner = self.parse_primary()?;
                let span = tok.span.to(inner.span);
                Ok(TermExpr::new(TermNode::Not(Box::new(inner)), span))
            }
            TokenKind::Punct if tok.text == "<" => {
                self.bump();
                let mut items = vec![self.parse_term()?];
                while self.eat_punct(",") {
                    items.push(self.parse_term()?);
                }
                let close = self.expect_punct(">")?;
                if items.len() < 2 {
                    return Err(Diagnostic::error(
                        tok.span.to(close),
                        "tuples need at least two components",
                    ));
                }
                Ok(TermExpr::new(TermNode::Tuple(items), tok.span.to(close)))
            }
            TokenKind::Punct if tok.text == "(" => {
                self.bump();
                let inner = self.parse_formula()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            TokenKind::Punct if tok.text == "!" => {
                self.bump();
                let path = self.parse_path()?;
                let args = self.parse_args()?;
                let span = tok.span.to(self.toks[self.pos - 1].span);
                Ok(TermExpr::new(
                    TermNode::App {
                        path,
                        args,
                        persistent: true,
                    },
                    span,
                ))
            }
            TokenKind::Ident => {
                let path = self.parse_path()?;
                if self.at_punct("(") {
                    let args = self.parse_args()?;
                    let span = path.span.to(self.toks[self.pos - 1].span);
                    Ok(TermExpr::new(
                        TermNode::App {
                            path,
                            args,
                            persistent: false,
                        },
                        span,
                    ))
                } else if path.is_single() && self.at_punct(":") {
                    self.bump();
                    let (ty, tsp) = self.expect_ident()?;
                    let sort = Sort::from_name(&ty).ok_or_else(|| {
                        Diagnostic::error(tsp, format!("unknown sort `{}`", ty))
                    })?;
                    Ok(TermExpr::new(
                        TermNode::Var {
                            name: path.segments[0].clone(),
                            sort: Some(sort),
                        },
                        path.span.to(tsp),
                    ))
                } else if path.is_single() {
                    Ok(TermExpr::new(
                        TermNode::Var {
                            name: path.segments[0].clone(),
                            sort: None,
                        },
                        path.span,
                    ))
                } else {
                    let span = path.span;
                    Ok(TermExpr::new(TermNode::PathRef(path), span))
                }
            }
            _ => Err(Diagnostic::error(
                tok.span,
                format!("expected term, found `{}`", tok.text),
            )),
        }
    }

    fn parse_let_term(&mut self) -> PResult<TermExpr> {
        let start = self.expect_kw(Kw::Let)?;
        let (name, nsp) = self.expect_ident()?;
        if self.at_punct("(") {
            let sig = self.parse_macro_sig(name, nsp)?;
            self.expect_punct("=")?;
            let value = self.parse_term()?;
            self.expect_kw(Kw::In)?;
            let body = self.parse_term()?;
            let span = start.to(body.span);
            Ok(TermExpr::new(
                TermNode::MacroLetIn {
                    sig,
                    value: Box::new(value),
                    body: Box::new(body),
                },
                span,
            ))
        } else {
            self.expect_punct("=")?;
            let value = self.parse_term()?;
            self.expect_kw(Kw::In)?;
            let body = self.parse_term()?;
            let span = start.to(body.span);
            Ok(TermExpr::new(
                TermNode::LetIn {
                    name,
                    value: Box::new(value),
                    body: Box::new(body),
                },
                span,
            ))
        }
    }

    fn parse_quantified(&mut self, quant: Quantifier) -> PResult<TermExpr> {
        let start = self.bump().unwrap().span;
        let mut vars = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Ident => {
                    vars.push((t.text.clone(), Sort::Bits));
                    self.pos += 1;
                }
                Some(t) if t.kind == TokenKind::TemporalMarker => {
                    self.pos += 1;
                    let (name, _) = self.expect_ident()?;
                    vars.push((name, Sort::Temporal));
                }
                _ => break,
            }
        }
        if vars.is_empty() {
            return Err(Diagnostic::error(
                self.here_span(),
                "quantifier binds no variables",
            ));
        }
        self.expect_punct(".")?;
        let body = self.parse_formula()?;
        let span = start.to(body.span);
        Ok(TermExpr::new(
            TermNode::Quantified {
                quant,
                vars,
                body: Box::new(body),
            },
            span,
        ))
    }

    /// Formula grammar used by restriction/lemma bodies and quantifier
    /// bodies: `==>` is right-associative and binds loosest, then `|`,
    /// then `&`; atoms support `@`, `=` and `not`.
    pub fn parse_formula(&mut self) -> PResult<TermExpr> {
        let lhs = self.parse_formula_or()?;
        if self.eat_punct("==>") {
            let rhs = self.parse_formula()?;
            let span = lhs.span.to(rhs.span);
            return Ok(TermExpr::new(
                TermNode::Binary {
                    op: BinOp::Imp,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            ));
        }
        Ok(lhs)
    }

    fn parse_formula_or(&mut self) -> PResult<TermExpr> {
        let mut lhs = self.parse_formula_and()?;
        while self.eat_punct("|") {
            let rhs = self.parse_formula_and()?;
            let span = lhs.span.to(rhs.span);
            lhs = TermExpr::new(
                TermNode::Binary {
                    op: BinOp::Or,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn parse_formula_and(&mut self) -> PResult<TermExpr> {
        let mut lhs = self.parse_formula_atom()?;
        while self.eat_punct("&") {
            let rhs = self.parse_formula_atom()?;
            let span = lhs.span.to(rhs.span);
            lhs = TermExpr::new(
                TermNode::Binary {
                    op: BinOp::And,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn parse_formula_atom(&mut self) -> PResult<TermExpr> {
        let mut lhs = self.parse_term()?;
        loop {
            if self.eat_punct("@") {
                let time = self.parse_term()?;
                let span = lhs.span.to(time.span);
                lhs = TermExpr::new(
                    TermNode::At {
                        fact: Box::new(lhs),
                        time: Box::new(time),
                    },
                    span,
                );
            } else if self.eat_punct("=") {
                let rhs = self.parse_term()?;
                let span = lhs.span.to(rhs.span);
                lhs = TermExpr::new(
                    TermNode::Binary {
                        op: BinOp::Eq,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                    span,
                );
            } else {
                return Ok(lhs);
            }
        }
    }

    // ---- rules -----------------------------------------------------

    /// A single premise/conclusion item: assignment, cell pattern,
    /// undef, or a plain term. `cas` and `:=` bind tighter than `,`.
    fn parse_rule_item(&mut self) -> PResult<TermExpr> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::CellIdent {
                let cell_tok = t.clone();
                if let Some(next) = self.peek_at(1) {
                    if next.is_punct(":=") {
                        self.bump();
                        self.bump();
                        let cell = Self::cell_name(&cell_tok);
                        if self.at_punct(".") {
                            let dot = self.bump().unwrap();
                            return Ok(TermExpr::new(
                                TermNode::AssignPrune { cell },
                                cell_tok.span.to(dot.span),
                            ));
                        }
                        let value = self.parse_term()?;
                        let span = cell_tok.span.to(value.span);
                        return Ok(TermExpr::new(
                            TermNode::Assign {
                                cell,
                                value: Box::new(value),
                            },
                            span,
                        ));
                    }
                    if next.is_kw(Kw::Cas) {
                        self.bump();
                        self.bump();
                        let term = self.parse_term()?;
                        let span = cell_tok.span.to(term.span);
                        return Ok(TermExpr::new(
                            TermNode::CellPattern {
                                cell: Self::cell_name(&cell_tok),
                                term: Box::new(term),
                            },
                            span,
                        ));
                    }
                }
            }
        }
        self.parse_term()
    }

    fn parse_rule_items(&mut self) -> PResult<Vec<TermExpr>> {
        self.expect_punct("[")?;
        let mut items = Vec::new();
        if !self.at_punct("]") {
            loop {
                items.push(self.parse_rule_item()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("]")?;
        Ok(items)
    }

    fn parse_rule_lets(&mut self, lets: &mut Vec<RuleLet>) -> PResult<()> {
        while self.at_kw(Kw::Let) {
            self.bump();
            let (name, nsp) = self.expect_ident()?;
            if self.at_punct("(") {
                let sig = self.parse_macro_sig(name, nsp)?;
                self.expect_punct("=")?;
                let value = self.parse_term()?;
                self.expect_kw(Kw::In)?;
                lets.push(RuleLet::Macro { sig, value });
            } else {
                self.expect_punct("=")?;
                let value = self.parse_term()?;
                self.expect_kw(Kw::In)?;
                lets.push(RuleLet::Binding { name, value });
            }
        }
        Ok(())
    }

    fn parse_rule(&mut self, annotation: Option<String>) -> PResult<RuleExpr> {
        let start = self.here_span();
        let premise = self.parse_rule_items()?;
        let mut lets = Vec::new();
        let mut actions = Vec::new();
        if self.eat_punct("->") || self.eat_punct("-->") {
            // unlabeled rule
        } else if self.eat_punct("--") {
            self.parse_rule_lets(&mut lets)?;
            self.expect_punct("[")?;
            if !self.at_punct("]") {
                loop {
                    actions.push(self.parse_rule_item()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct("]")?;
            self.expect_punct("->")?;
        } else {
            return Err(Diagnostic::error(
                self.here_span(),
                "expected `->`, `-->` or `--[` after rule premise",
            ));
        }
        self.parse_rule_lets(&mut lets)?;
        let conclusion = self.parse_rule_items()?;
        let end = self.toks[self.pos - 1].span;
        Ok(RuleExpr {
            premise,
            actions,
            conclusion,
            lets,
            annotation,
            span: start.to(end),
        })
    }

    // ---- processes -------------------------------------------------

    fn parse_cond(&mut self) -> PResult<Cond> {
        let start = self.here_span();
        if self.eat_kw(Kw::Not) {
            self.expect_punct("(")?;
            let mut cond = self.parse_cond()?;
            let close = self.expect_punct(")")?;
            cond.negated = !cond.negated;
            cond.span = start.to(close);
            return Ok(cond);
        }
        if self.eat_punct("(") {
            let mut cond = self.parse_cond()?;
            let close = self.expect_punct(")")?;
            cond.span = start.to(close);
            return Ok(cond);
        }
        let cell_tok = match self.peek() {
            Some(t) if t.kind == TokenKind::CellIdent => t.clone(),
            _ => {
                return Err(Diagnostic::error(
                    self.here_span(),
                    "expected `'cell cas pattern` condition",
                ))
            }
        };
        self.bump();
        self.expect_kw(Kw::Cas)?;
        let pattern = self.parse_term()?;
        let span = cell_tok.span.to(pattern.span);
        Ok(Cond {
            cell: Parser::cell_name(&cell_tok),
            pattern,
            negated: false,
            span,
        })
    }

    fn at_process_end(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) if t.is_punct("}") => true,
            Some(t) => match t.kind {
                TokenKind::Keyword(kw) => {
                    // `let` continues a process; the other decl keywords end it
                    DECL_KWS.contains(&kw) && kw != Kw::Let
                }
                _ => false,
            },
        }
    }

    /// One process item plus its continuation.
    fn parse_process(&mut self) -> PResult<ProcessExpr> {
        let start = self.here_span();
        if self.at_process_end() {
            return Ok(ProcessExpr::null(start));
        }
        let tok = self.peek().cloned().unwrap();
        match &tok.kind {
            TokenKind::Ident if tok.text == "0" => {
                self.bump();
                Ok(ProcessExpr {
                    node: ProcessNode::Null,
                    span: tok.span,
                })
            }
            TokenKind::AnnotationString => {
                let anno = tok.string_value();
                self.bump();
                self.expect_punct(":")?;
                match self.peek() {
                    Some(t) if t.is_kw(Kw::While) => {
                        self.parse_while(Some(anno), start)
                    }
                    Some(t) if t.is_kw(Kw::Loop) => self.parse_loop(Some(anno), start),
                    _ => {
                        let rule = self.parse_rule(Some(anno))?;
                        let rest = self.parse_rest()?;
                        let span = start.to(rest.span);
                        Ok(ProcessExpr {
                            node: ProcessNode::Step {
                                rule,
                                rest: Box::new(rest),
                            },
                            span,
                        })
                    }
                }
            }
            TokenKind::Punct if tok.text == "[" => {
                let rule = self.parse_rule(None)?;
                let rest = self.parse_rest()?;
                let span = start.to(rest.span);
                Ok(ProcessExpr {
                    node: ProcessNode::Step {
                        rule,
                        rest: Box::new(rest),
                    },
                    span,
                })
            }
            TokenKind::Punct if tok.text == "{" => {
                self.bump();
                let body = self.parse_process()?;
                self.expect_punct("}")?;
                let rest = self.parse_rest()?;
                let span = start.to(rest.span);
                Ok(ProcessExpr {
                    node: ProcessNode::Scoped {
                        body: Box::new(body),
                        rest: Box::new(rest),
                    },
                    span,
                })
            }
            TokenKind::Keyword(Kw::Choice) => {
                self.bump();
                self.expect_punct("{")?;
                let mut branches = Vec::new();
                while !self.at_punct("}") {
                    let bstart = self.expect_punct("{")?;
                    let body = self.parse_process()?;
                    let bend = self.expect_punct("}")?;
                    branches.push(ProcessExpr {
                        node: ProcessNode::Scoped {
                            body: Box::new(body),
                            rest: Box::new(ProcessExpr::null(bend)),
                        },
                        span: bstart.to(bend),
                    });
                    // branch separators: `;` or `,`, both optional before `}`
                    while self.eat_punct(";") || self.eat_punct(",") {}
                }
                self.expect_punct("}")?;
                let rest = self.parse_rest()?;
                let span = start.to(rest.span);
                Ok(ProcessExpr {
                    node: ProcessNode::Choice {
                        branches,
                        rest: Box::new(rest),
                    },
                    span,
                })
            }
            TokenKind::Keyword(Kw::While) => self.parse_while(None, start),
            TokenKind::Keyword(Kw::Loop) => self.parse_loop(None, start),
            TokenKind::Keyword(Kw::If) => {
                self.bump();
                let cond = self.parse_cond()?;
                self.expect_kw(Kw::Then)?;
                self.expect_punct("{")?;
                let then_branch = self.parse_process()?;
                self.expect_punct("}")?;
                self.expect_kw(Kw::Else)?;
                self.expect_punct("{")?;
                let else_branch = self.parse_process()?;
                self.expect_punct("}")?;
                let rest = self.parse_rest()?;
                let span = start.to(rest.span);
                Ok(ProcessExpr {
                    node: ProcessNode::IfThenElse {
                        cond,
                        then_branch: Box::new(then_branch),
                        else_branch: Box::new(else_branch),
                        rest: Box::new(rest),
                    },
                    span,
                })
            }
            TokenKind::Keyword(Kw::Break) => {
                self.bump();
                let label = self.eat_opt_string();
                self.eat_punct(";");
                self.ensure_terminal("break")?;
                Ok(ProcessExpr {
                    node: ProcessNode::Break(label),
                    span: tok.span,
                })
            }
            TokenKind::Keyword(Kw::Continue) => {
                self.bump();
                let label = self.eat_opt_string();
                self.eat_punct(";");
                self.ensure_terminal("continue")?;
                Ok(ProcessExpr {
                    node: ProcessNode::Continue(label),
                    span: tok.span,
                })
            }
            TokenKind::Keyword(Kw::Let) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                if self.at_punct("(") {
                    let sig = self.parse_macro_sig(name, nsp)?;
                    self.expect_punct("=")?;
                    let value = self.parse_term()?;
                    self.expect_kw(Kw::In)?;
                    let rest = self.parse_process()?;
                    let span = start.to(rest.span);
                    Ok(ProcessExpr {
                        node: ProcessNode::MacroLetIn {
                            sig,
                            value,
                            rest: Box::new(rest),
                        },
                        span,
                    })
                } else {
                    self.expect_punct("=")?;
                    let value = self.parse_term()?;
                    self.expect_kw(Kw::In)?;
                    let rest = self.parse_process()?;
                    let span = start.to(rest.span);
                    Ok(ProcessExpr {
                        node: ProcessNode::LetIn {
                            name,
                            value,
                            rest: Box::new(rest),
                        },
                        span,
                    })
                }
            }
            TokenKind::Ident => {
                let path = self.parse_path()?;
                let args = self.parse_args()?;
                let rest = self.parse_rest()?;
                let span = start.to(rest.span);
                Ok(ProcessExpr {
                    node: ProcessNode::MacroCall {
                        path,
                        args,
                        rest: Box::new(rest),
                    },
                    span,
                })
            }
            _ => Err(Diagnostic::error(
                tok.span,
                format!("expected process, found `{}`", tok.text),
            )),
        }
    }

    fn parse_while(&mut self, label: Option<String>, start: Span) -> PResult<ProcessExpr> {
        self.expect_kw(Kw::While)?;
        let cond = self.parse_cond()?;
        self.expect_punct("{")?;
        let body = self.parse_process()?;
        self.expect_punct("}")?;
        let rest = self.parse_rest()?;
        let span = start.to(rest.span);
        Ok(ProcessExpr {
            node: ProcessNode::While {
                cond,
                body: Box::new(body),
                rest: Box::new(rest),
                label,
            },
            span,
        })
    }

    fn parse_loop(&mut self, label: Option<String>, start: Span) -> PResult<ProcessExpr> {
        self.expect_kw(Kw::Loop)?;
        self.expect_punct("{")?;
        let body = self.parse_process()?;
        self.expect_punct("}")?;
        let rest = self.parse_rest()?;
        let span = start.to(rest.span);
        Ok(ProcessExpr {
            node: ProcessNode::Loop {
                body: Box::new(body),
                rest: Box::new(rest),
                label,
            },
            span,
        })
    }

    fn eat_opt_string(&mut self) -> Option<String> {
        match self.peek() {
            Some(t) if matches!(t.kind, TokenKind::StrLit) => {
                let s = t.string_value();
                self.pos += 1;
                Some(s)
            }
            _ => None,
        }
    }

    fn ensure_terminal(&self, what: &str) -> PResult<()> {
        if self.at_process_end() {
            Ok(())
        } else {
            Err(Diagnostic::error(
                self.here_span(),
                format!("unreachable code after `{}`", what),
            ))
        }
    }

    /// Continuation after a process item: `;` resumes, anything else
    /// ends the sequence.
    fn parse_rest(&mut self) -> PResult<ProcessExpr> {
        if self.eat_punct(";") {
            self.parse_process()
        } else {
            Ok(ProcessExpr::null(self.here_span()))
        }
    }

    // ---- declarations ----------------------------------------------

    fn parse_symbol_params(&mut self) -> PResult<(usize, Option<Vec<String>>)> {
        // `Name/2` or `Name(named a, named b)`
        if self.eat_punct("/") {
            let (num, nsp) = self.expect_ident()?;
            let arity: usize = num.parse().map_err(|_| {
                Diagnostic::error(nsp, format!("expected arity number, found `{}`", num))
            })?;
            Ok((arity, None))
        } else if self.at_punct("(") {
            self.bump();
            let mut labels = Vec::new();
            let mut any_named = false;
            if !self.at_punct(")") {
                loop {
                    let named = self.eat_kw(Kw::Named);
                    any_named |= named;
                    let (name, _) = self.expect_ident()?;
                    labels.push(name);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let arity = labels.len();
            Ok((arity, if any_named { Some(labels) } else { None }))
        } else {
            Err(Diagnostic::error(
                self.here_span(),
                "expected `/arity` or parameter list",
            ))
        }
    }

    /// Capture a restriction/lemma body: either a structured formula,
    /// or a raw token run ending at the next top-level declaration.
    fn parse_verbatim_body(&mut self, src: &str) -> (String, Option<TermExpr>) {
        let start_pos = self.pos;
        let saved = self.pos;
        let parsed = self.parse_formula().ok();
        let formula_end = self.pos;
        // accept the structured parse only if it consumed up to a decl boundary
        let clean = parsed.is_some() && self.at_decl_boundary();
        if !clean {
            self.pos = saved;
            let mut depth = 0i32;
            while let Some(t) = self.peek() {
                if depth == 0 && self.at_decl_boundary() {
                    break;
                }
                match t.text.as_str() {
                    "{" | "(" | "[" => depth += 1,
                    "}" | ")" | "]" => {
                        if depth == 0 {
                            break;
                        }
                        depth -= 1;
                    }
                    _ => {}
                }
                self.pos += 1;
            }
        } else {
            self.pos = formula_end;
        }
        let end_pos = self.pos;
        let text = if end_pos > start_pos {
            let a = self.toks[start_pos].span.start;
            let b = self.toks[end_pos - 1].span.end;
            src[a..b].to_string()
        } else {
            String::new()
        };
        (text, if clean { parsed } else { None })
    }

    fn at_decl_boundary(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) if t.is_punct("}") => true,
            Some(t) => matches!(t.kind, TokenKind::Keyword(kw) if DECL_KWS.contains(&kw)),
        }
    }

    fn parse_decl(&mut self, src: &str) -> PResult<Decl> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => {
                return Err(Diagnostic::error(
                    self.here_span(),
                    "expected declaration, found end of input",
                ))
            }
        };
        let start = tok.span;
        match tok.kind {
            TokenKind::Keyword(Kw::Let) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                if self.at_punct("(") {
                    let sig = self.parse_macro_sig(name, nsp)?;
                    self.expect_punct("=")?;
                    let body = self.parse_term()?;
                    let span = start.to(body.span);
                    Ok(Decl::TermMacro { sig, body, span })
                } else {
                    self.expect_punct("=")?;
                    let value = self.parse_term()?;
                    let span = start.to(value.span);
                    Ok(Decl::LetBinding { name, value, span })
                }
            }
            TokenKind::Keyword(Kw::Fun) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                if self.at_punct("(") {
                    let sig = self.parse_macro_sig(name, nsp)?;
                    self.expect_punct("=")?;
                    let body = self.parse_term()?;
                    let span = start.to(body.span);
                    Ok(Decl::FunMacro { sig, body, span })
                } else {
                    let (arity, labels) = self.parse_symbol_params()?;
                    if labels.is_some() {
                        return Err(Diagnostic::error(
                            nsp,
                            "`named` parameters on `fun` require a macro body",
                        ));
                    }
                    let span = start.to(self.toks[self.pos - 1].span);
                    Ok(Decl::FunSymbol { name, arity, span })
                }
            }
            TokenKind::Keyword(kw @ (Kw::Pred | Kw::Apred)) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                // a body makes it a macro, otherwise it declares a symbol
                let mut probe = self.pos;
                let mut has_body = false;
                if self.at_punct("(") {
                    let mut depth = 0i32;
                    while let Some(t) = self.toks.get(probe) {
                        match t.text.as_str() {
                            "(" => depth += 1,
                            ")" => {
                                depth -= 1;
                                if depth == 0 {
                                    probe += 1;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        probe += 1;
                    }
                    has_body = matches!(self.toks.get(probe), Some(t) if t.is_punct("="));
                }
                if has_body {
                    let sig = self.parse_macro_sig(name, nsp)?;
                    self.expect_punct("=")?;
                    let body = self.parse_term()?;
                    let span = start.to(body.span);
                    Ok(match kw {
                        Kw::Pred => Decl::PredMacro { sig, body, span },
                        _ => Decl::ApredMacro { sig, body, span },
                    })
                } else {
                    let (arity, labels) = self.parse_symbol_params()?;
                    let span = start.to(self.toks[self.pos - 1].span);
                    Ok(match kw {
                        Kw::Pred => Decl::PredSymbol {
                            name,
                            arity,
                            labels,
                            span,
                        },
                        _ => Decl::ApredSymbol {
                            name,
                            arity,
                            labels,
                            span,
                        },
                    })
                }
            }
            TokenKind::Keyword(Kw::Process) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                if self.at_punct("(") {
                    let sig = self.parse_macro_sig(name, nsp)?;
                    self.expect_punct("=")?;
                    let body = self.parse_process()?;
                    let span = start.to(body.span);
                    Ok(Decl::ProcessMacro { sig, body, span })
                } else {
                    self.expect_punct("=")?;
                    let body = self.parse_process()?;
                    let span = start.to(body.span);
                    Ok(Decl::ProcessDecl { name, body, span })
                }
            }
            TokenKind::Keyword(Kw::Module) => {
                self.bump();
                let (name, _) = self.expect_ident()?;
                if self.eat_punct("=") {
                    if self.at_punct("{") {
                        self.bump();
                        let decls = self.parse_decls(src, true)?;
                        let end = self.expect_punct("}")?;
                        Ok(Decl::Module {
                            name,
                            decls,
                            span: start.to(end),
                        })
                    } else {
                        let target = self.parse_path()?;
                        let span = start.to(target.span);
                        Ok(Decl::ModuleAlias { name, target, span })
                    }
                } else {
                    self.expect_punct("{")?;
                    let decls = self.parse_decls(src, true)?;
                    let end = self.expect_punct("}")?;
                    Ok(Decl::Module {
                        name,
                        decls,
                        span: start.to(end),
                    })
                }
            }
            TokenKind::Keyword(Kw::Import) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                Ok(Decl::Import {
                    name,
                    span: start.to(nsp),
                })
            }
            TokenKind::Keyword(Kw::Open) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                Ok(Decl::Open {
                    name,
                    span: start.to(nsp),
                })
            }
            TokenKind::Keyword(Kw::Include) => {
                self.bump();
                let (name, nsp) = self.expect_ident()?;
                Ok(Decl::Include {
                    name,
                    span: start.to(nsp),
                })
            }
            TokenKind::Keyword(kw @ (Kw::Restriction | Kw::Lemma)) => {
                self.bump();
                let (name, _) = self.expect_ident()?;
                self.expect_punct("=")?;
                let (text, formula) = self.parse_verbatim_body(src);
                let span = start.to(self.toks[self.pos - 1].span);
                Ok(Decl::Verbatim {
                    kind: if kw == Kw::Restriction {
                        VerbatimKind::Restriction
                    } else {
                        VerbatimKind::Lemma
                    },
                    name,
                    text,
                    formula,
                    span,
                })
            }
            _ => Err(Diagnostic::error(
                start,
                format!("expected declaration, found `{}`", tok.text),
            )),
        }
    }

    fn recover(&mut self) {
        // skip to just past the next `;`, or stop before `}`/decl keyword
        while let Some(t) = self.peek() {
            if t.is_punct(";") {
                self.pos += 1;
                return;
            }
            if t.is_punct("}") || matches!(t.kind, TokenKind::Keyword(kw) if DECL_KWS.contains(&kw))
            {
                return;
            }
            self.pos += 1;
        }
    }

    fn parse_decls(&mut self, src: &str, in_module: bool) -> PResult<Vec<Decl>> {
        let mut decls = Vec::new();
        loop {
            while self.eat_punct(";") {}
            match self.peek() {
                None => break,
                Some(t) if in_module && t.is_punct("}") => break,
                _ => {}
            }
            let before = self.pos;
            match self.parse_decl(src) {
                Ok(d) => decls.push(d),
                Err(e) => {
                    self.diags.push(e);
                    if self.pos == before {
                        self.pos += 1;
                    }
                    self.recover();
                }
            }
        }
        Ok(decls)
    }
}

/// Parse a token stream into a module. Returns all collected
/// diagnostics when anything failed.
pub fn parse_module(
    toks: Vec<Token>,
    name: &str,
    src: &str,
) -> Result<SourceModule, Vec<Diagnostic>> {
    let mut p = Parser::new(toks);
    let decls = match p.parse_decls(src, false) {
        Ok(d) => d,
        Err(e) => {
            p.diags.push(e);
            Vec::new()
        }
    };
    if p.diags.is_empty() {
        Ok(SourceModule {
            name: name.to_string(),
            decls,
        })
    } else {
        Err(p.diags)
    }
}

/// Convenience wrapper: lex and parse in one go.
pub fn parse_source(src: &str, name: &str) -> Result<SourceModule, Vec<Diagnostic>> {
    let toks = crate::syntax::lexer::tokenize(src).map_err(|d| vec![d])?;
    parse_module(toks, name, src)
}
