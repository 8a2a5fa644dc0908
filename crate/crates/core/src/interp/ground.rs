//! Ground terms, facts, and fact multisets shared by both reference
//! interpreters. Fresh names are numeric indices; canonicalization
//! renumbers them in order of first appearance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::ast::Sort;
use crate::translate::{TgFact, TgTerm};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GTerm {
    Str(String),
    Fresh(u32),
    Pub(String),
    App(String, Vec<GTerm>),
    Tuple(Vec<GTerm>),
}

impl fmt::Display for GTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GTerm::Str(s) => write!(f, "\"{}\"", s),
            GTerm::Fresh(n) => write!(f, "~n{}", n),
            GTerm::Pub(p) => write!(f, "${}", p),
            GTerm::App(name, args) => {
                write!(f, "{}(", name)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", a)?;
                }
                write!(f, ")")
            }
            GTerm::Tuple(items) => {
                write!(f, "<")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", a)?;
                }
                write!(f, ">")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GFact {
    pub name: String,
    pub args: Vec<GTerm>,
    pub persistent: bool,
}

impl fmt::Display for GFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

impl GFact {
    pub fn new(name: &str, args: Vec<GTerm>) -> GFact {
        GFact {
            name: name.to_string(),
            args,
            persistent: false,
        }
    }

    pub fn render(&self) -> String {
        let args = self
            .args
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "{}{}({})",
            if self.persistent { "!" } else { "" },
            self.name,
            args
        )
    }
}

/// Fact multiset with linear multiplicities and a persistent set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct FactSet {
    pub linear: BTreeMap<GFact, u32>,
    pub persistent: BTreeSet<GFact>,
}

impl FactSet {
    pub fn add(&mut self, f: GFact) {
        if f.persistent {
            self.persistent.insert(f);
        } else {
            *self.linear.entry(f).or_insert(0) += 1;
        }
    }

    /// Remove one linear occurrence; persistent facts are never
    /// consumed. Returns false when a linear fact is missing.
    pub fn consume(&mut self, f: &GFact) -> bool {
        if f.persistent {
            self.persistent.contains(f)
        } else {
            match self.linear.get_mut(f) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    if *n == 0 {
                        self.linear.remove(f);
                    }
                    true
                }
                _ => false,
            }
        }
    }

    pub fn count(&self, f: &GFact) -> u32 {
        if f.persistent {
            u32::from(self.persistent.contains(f))
        } else {
            self.linear.get(f).copied().unwrap_or(0)
        }
    }

    pub fn contains(&self, f: &GFact) -> bool {
        self.count(f) > 0
    }

    /// `self <=+ other`: linear facts multiset-included, persistent
    /// facts set-included.
    pub fn included_in(&self, other: &FactSet) -> bool {
        self.linear
            .iter()
            .all(|(f, n)| other.linear.get(f).copied().unwrap_or(0) >= *n)
            && self.persistent.is_subset(&other.persistent)
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &GFact> {
        self.linear.keys().chain(self.persistent.iter())
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        for (f, n) in &self.linear {
            for _ in 0..*n {
                parts.push(f.render());
            }
        }
        for f in &self.persistent {
            parts.push(f.render());
        }
        format!("{{ {} }}", parts.join(", "))
    }
}

/// Substitution from schema variables to ground terms.
pub type Subst = BTreeMap<String, GTerm>;

/// Match a target-schema term against a ground term, extending the
/// substitution. Sorted variables respect their sorts: `~x` matches
/// fresh names only, `$x` public constants (string literals included).
pub fn match_term(pattern: &TgTerm, value: &GTerm, subst: &mut Subst) -> bool {
    match pattern {
        TgTerm::Var { name, sort } => {
            let sort_ok = match sort {
                Some(Sort::Fresh) => matches!(value, GTerm::Fresh(_)),
                Some(Sort::Public) => matches!(value, GTerm::Pub(_) | GTerm::Str(_)),
                Some(Sort::Temporal) => false,
                _ => true,
            };
            if !sort_ok {
                return false;
            }
            match subst.get(name) {
                Some(bound) => bound == value,
                None => {
                    subst.insert(name.clone(), value.clone());
                    true
                }
            }
        }
        TgTerm::Str(s) => matches!(value, GTerm::Str(v) if v == s),
        TgTerm::App(name, args) => match value {
            GTerm::App(vname, vargs) if vname == name && vargs.len() == args.len() => args
                .iter()
                .zip(vargs)
                .all(|(p, v)| match_term(p, v, subst)),
            _ => false,
        },
        TgTerm::Tuple(items) => match value {
            GTerm::Tuple(vitems) if vitems.len() == items.len() => items
                .iter()
                .zip(vitems)
                .all(|(p, v)| match_term(p, v, subst)),
            _ => false,
        },
    }
}

/// Instantiate a schema term under a complete substitution.
pub fn apply_subst(t: &TgTerm, subst: &Subst) -> Option<GTerm> {
    Some(match t {
        TgTerm::Var { name, .. } => subst.get(name)?.clone(),
        TgTerm::Str(s) => GTerm::Str(s.clone()),
        TgTerm::App(name, args) => GTerm::App(
            name.clone(),
            args.iter()
                .map(|a| apply_subst(a, subst))
                .collect::<Option<_>>()?,
        ),
        TgTerm::Tuple(items) => GTerm::Tuple(
            items
                .iter()
                .map(|a| apply_subst(a, subst))
                .collect::<Option<_>>()?,
        ),
    })
}

pub fn apply_subst_fact(f: &TgFact, subst: &Subst) -> Option<GFact> {
    Some(GFact {
        name: f.name.clone(),
        args: f
            .args
            .iter()
            .map(|a| apply_subst(a, subst))
            .collect::<Option<_>>()?,
        persistent: f.persistent,
    })
}

/// Renumber fresh names by first appearance over an iteration order.
#[derive(Debug, Default)]
pub struct Canonicalizer {
    map: BTreeMap<u32, u32>,
}

impl Canonicalizer {
    pub fn term(&mut self, t: &GTerm) -> GTerm {
        match t {
            GTerm::Fresh(n) => {
                let next = self.map.len() as u32;
                GTerm::Fresh(*self.map.entry(*n).or_insert(next))
            }
            GTerm::Str(_) | GTerm::Pub(_) => t.clone(),
            GTerm::App(name, args) => {
                GTerm::App(name.clone(), args.iter().map(|a| self.term(a)).collect())
            }
            GTerm::Tuple(items) => {
                GTerm::Tuple(items.iter().map(|a| self.term(a)).collect())
            }
        }
    }

    pub fn fact(&mut self, f: &GFact) -> GFact {
        GFact {
            name: f.name.clone(),
            args: f.args.iter().map(|a| self.term(a)).collect(),
            persistent: f.persistent,
        }
    }
}
