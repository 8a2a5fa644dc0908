//! Hand-rolled lexer. Comments are `//` to end of line and nestable
//! `/* */` blocks; both are skipped. The concatenation of all token
//! texts together with the skipped stretches reconstructs the input.

use crate::diag::{Diagnostic, Span};
use crate::syntax::token::{Kw, Token, TokenKind};

/// Compound punctuation, longest first so maximal munch works by
/// trying entries in order. Rule arrows that appear without interior
/// whitespace form single tokens (`]->[` and friends); the parser
/// splits them back into brackets and arrows.
const PUNCTS: &[&str] = &[
    "]-->[", "]->[", "]-->", "]->", "-->", "->", "--", "==>", ":=", "(", ")", "[", "]", "{", "}",
    "<", ">", ",", ";", ":", ".", "=", "@", "&", "|", "!", "/",
];

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn here(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, start: (usize, u32, u32)) -> Span {
        Span::new(start.0, self.pos, start.1, start.2)
    }

    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek_at(1) == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek_at(1) == Some(b'*') => {
                    let start = self.here();
                    self.bump();
                    self.bump();
                    let mut depth = 1usize;
                    loop {
                        match (self.peek(), self.peek_at(1)) {
                            (Some(b'/'), Some(b'*')) => {
                                self.bump();
                                self.bump();
                                depth += 1;
                            }
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(Diagnostic::error(
                                    self.span_from(start),
                                    "unterminated block comment",
                                ));
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn lex_string(&mut self) -> Result<Token, Diagnostic> {
        let start = self.here();
        self.bump(); // opening quote
        loop {
            match self.peek() {
                Some(b'"') => {
                    self.bump();
                    break;
                }
                Some(b'\\') => {
                    self.bump();
                    if self.bump().is_none() {
                        return Err(Diagnostic::error(
                            self.span_from(start),
                            "unterminated string literal",
                        ));
                    }
                }
                Some(b'\n') | None => {
                    return Err(Diagnostic::error(
                        self.span_from(start),
                        "unterminated string literal",
                    ));
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
        let span = self.span_from(start);
        Ok(Token {
            kind: TokenKind::StrLit,
            text: self.src[span.start..span.end].to_string(),
            span,
        })
    }

    fn lex_word(&mut self) -> Token {
        let start = self.here();
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        let span = self.span_from(start);
        let text = &self.src[span.start..span.end];
        let kind = match Kw::from_str(text) {
            Some(kw) => TokenKind::Keyword(kw),
            None => TokenKind::Ident,
        };
        Token {
            kind,
            text: text.to_string(),
            span,
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, Diagnostic> {
        self.skip_trivia()?;
        let start = self.here();
        let b = match self.peek() {
            Some(b) => b,
            None => return Ok(None),
        };
        let tok = match b {
            b'"' => self.lex_string()?,
            b'\'' => {
                self.bump();
                // the `'.` cell name-pruning shorthand is a single token
                if self.peek() == Some(b'.') {
                    self.bump();
                } else {
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                let span = self.span_from(start);
                if span.end - span.start == 1 {
                    return Err(Diagnostic::error(span, "expected cell name after `'`"));
                }
                Token {
                    kind: TokenKind::CellIdent,
                    text: self.src[span.start..span.end].to_string(),
                    span,
                }
            }
            b'$' => {
                self.bump();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let span = self.span_from(start);
                if span.end - span.start == 1 {
                    return Err(Diagnostic::error(span, "expected name after `$`"));
                }
                Token {
                    kind: TokenKind::PubSym,
                    text: self.src[span.start..span.end].to_string(),
                    span,
                }
            }
            b'~' => {
                self.bump();
                Token {
                    kind: TokenKind::FreshMarker,
                    text: "~".to_string(),
                    span: self.span_from(start),
                }
            }
            b'#' => {
                self.bump();
                Token {
                    kind: TokenKind::TemporalMarker,
                    text: "#".to_string(),
                    span: self.span_from(start),
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => self.lex_word(),
            c if c.is_ascii_digit() => {
                // bare numerals only occur in arity declarations `f/2`
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let span = self.span_from(start);
                Token {
                    kind: TokenKind::Ident,
                    text: self.src[span.start..span.end].to_string(),
                    span,
                }
            }
            _ => {
                let rest = &self.src[self.pos..];
                let hit = PUNCTS.iter().find(|p| rest.starts_with(**p));
                match hit {
                    Some(p) => {
                        for _ in 0..p.len() {
                            self.bump();
                        }
                        Token {
                            kind: TokenKind::Punct,
                            text: (*p).to_string(),
                            span: self.span_from(start),
                        }
                    }
                    None => {
                        self.bump();
                        return Err(Diagnostic::error(
                            self.span_from(start),
                            format!("stray character `{}`", b as char),
                        ));
                    }
                }
            }
        };
        Ok(Some(tok))
    }
}

/// Tokenize a source buffer. String literals directly followed by `:`
/// are reclassified as annotation strings.
pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut lx = Lexer::new(src);
    let mut toks = Vec::new();
    while let Some(tok) = lx.next_token()? {
        toks.push(tok);
    }
    for i in 0..toks.len() {
        if toks[i].kind == TokenKind::StrLit {
            if let Some(next) = toks.get(i + 1) {
                if next.is_punct(":") {
                    toks[i].kind = TokenKind::AnnotationString;
                }
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_assignment_tokens() {
        let toks = tokenize("'a := x").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| (&t.kind, t.text.as_str())).collect();
        assert_eq!(kinds.len(), 3);
        assert_eq!(toks[0].kind, TokenKind::CellIdent);
        assert_eq!(toks[0].text, "'a");
        assert!(toks[1].is_punct(":="));
        assert_eq!(toks[2].kind, TokenKind::Ident);
        assert_eq!(toks[2].text, "x");
    }

    #[test]
    fn rule_line_is_eleven_tokens() {
        // hand-lexed count for the one-step rule, `]->[` munching as one token
        let toks = tokenize("[ In(x) ]->[ 'a := x ];").unwrap();
        assert_eq!(toks.len(), 11);
        assert!(toks.last().unwrap().is_punct(";"));
        assert!(toks[5].is_punct("]->["));
    }

    #[test]
    fn annotation_string_classification() {
        let toks = tokenize("\"Terminal_Sends_GPO\":").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].kind, TokenKind::AnnotationString);
        assert!(toks[1].is_punct(":"));
        assert_eq!(toks[0].string_value(), "Terminal_Sends_GPO");
    }

    #[test]
    fn comments_are_skipped_and_nest() {
        let toks = tokenize("x /* a /* b */ c */ y // trailing\nz").unwrap();
        let names: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(names, vec!["x", "y", "z"]);
    }

    #[test]
    fn unterminated_string_reports_span() {
        let err = tokenize("process P = \"oops").unwrap_err();
        assert!(err.message.contains("unterminated string"));
        assert_eq!(err.span.line, 1);
    }

    #[test]
    fn stray_character_is_an_error() {
        let err = tokenize("let x = `").unwrap_err();
        assert!(err.message.contains("stray character"));
    }

    #[test]
    fn token_texts_cover_source() {
        let src = "process A =\n  [ In(x) ]->[ 'a := x ]; // step\n  []->[ Out(\"End\") ]\n";
        let toks = tokenize(src).unwrap();
        // spans are monotone and within the buffer
        let mut prev_end = 0;
        for t in &toks {
            assert!(t.span.start >= prev_end);
            assert!(t.span.end <= src.len());
            assert!(t.span.start < t.span.end);
            assert_eq!(&src[t.span.start..t.span.end], t.text);
            prev_end = t.span.end;
        }
    }
}
