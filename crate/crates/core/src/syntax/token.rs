use crate::diag::Span;

/// Syntactic keywords. `In`, `Out` and `Fr` are deliberately *not*
/// keywords: they lex as identifiers and are bound as built-in fact
/// symbols during name resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Let,
    Fun,
    Pred,
    Apred,
    Process,
    Module,
    Import,
    Open,
    Include,
    Choice,
    While,
    Loop,
    If,
    Then,
    Else,
    Break,
    Continue,
    Cas,
    As,
    Is,
    Named,
    Rw,
    Undef,
    All,
    Ex,
    In,
    Not,
    Restriction,
    Lemma,
}

impl Kw {
    pub fn from_str(s: &str) -> Option<Kw> {
        Some(match s {
            "let" => Kw::Let,
            "fun" => Kw::Fun,
            "pred" => Kw::Pred,
            "apred" => Kw::Apred,
            "process" => Kw::Process,
            "module" => Kw::Module,
            "import" => Kw::Import,
            "open" => Kw::Open,
            "include" => Kw::Include,
            "choice" => Kw::Choice,
            "while" => Kw::While,
            "loop" => Kw::Loop,
            "if" => Kw::If,
            "then" => Kw::Then,
            "else" => Kw::Else,
            "break" => Kw::Break,
            "continue" => Kw::Continue,
            "cas" => Kw::Cas,
            "as" => Kw::As,
            "is" => Kw::Is,
            "named" => Kw::Named,
            "rw" => Kw::Rw,
            "undef" => Kw::Undef,
            "All" => Kw::All,
            "Ex" => Kw::Ex,
            "in" => Kw::In,
            "not" => Kw::Not,
            "restriction" => Kw::Restriction,
            "lemma" => Kw::Lemma,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Kw::Let => "let",
            Kw::Fun => "fun",
            Kw::Pred => "pred",
            Kw::Apred => "apred",
            Kw::Process => "process",
            Kw::Module => "module",
            Kw::Import => "import",
            Kw::Open => "open",
            Kw::Include => "include",
            Kw::Choice => "choice",
            Kw::While => "while",
            Kw::Loop => "loop",
            Kw::If => "if",
            Kw::Then => "then",
            Kw::Else => "else",
            Kw::Break => "break",
            Kw::Continue => "continue",
            Kw::Cas => "cas",
            Kw::As => "as",
            Kw::Is => "is",
            Kw::Named => "named",
            Kw::Rw => "rw",
            Kw::Undef => "undef",
            Kw::All => "All",
            Kw::Ex => "Ex",
            Kw::In => "in",
            Kw::Not => "not",
            Kw::Restriction => "restriction",
            Kw::Lemma => "lemma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Plain identifier, including built-in fact names such as `In`.
    Ident,
    /// Cell identifier including the leading apostrophe, e.g. `'state`.
    CellIdent,
    /// Public symbol including the leading `$`, e.g. `$Terminal`.
    PubSym,
    /// The `~` fresh-variable marker.
    FreshMarker,
    /// The `#` temporal-variable marker.
    TemporalMarker,
    /// Double-quoted string literal (unescaped content stored separately).
    StrLit,
    /// A string literal immediately followed by `:` (rule or loop label).
    AnnotationString,
    Keyword(Kw),
    /// Punctuation, stored by its source text (compound arrows such as
    /// `]->[` form a single token).
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, s: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == s
    }

    pub fn is_kw(&self, kw: Kw) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    /// Content of a string-literal token with quotes and escapes removed.
    pub fn string_value(&self) -> String {
        debug_assert!(matches!(
            self.kind,
            TokenKind::StrLit | TokenKind::AnnotationString
        ));
        let inner = &self.text[1..self.text.len() - 1];
        let mut out = String::with_capacity(inner.len());
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else {
                out.push(c);
            }
        }
        out
    }
}
