//! First-order terms over named symbols and variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::TrsError;

/// A first-order term. Constants are applications with no arguments.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(f.to_string(), args)
    }

    /// `f(t)` for a unary symbol.
    pub fn unary(f: &str, t: Term) -> Term {
        Term::App(f.to_string(), vec![t])
    }

    pub fn constant(c: &str) -> Term {
        Term::App(c.to_string(), Vec::new())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    /// Occurrence count of every variable.
    pub fn var_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        self.count_vars(&mut out);
        out
    }

    fn count_vars(&self, out: &mut BTreeMap<String, usize>) {
        match self {
            Term::Var(x) => *out.entry(x.clone()).or_insert(0) += 1,
            Term::App(_, args) => args.iter().for_each(|a| a.count_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.var_counts().into_keys().collect()
    }

    pub fn contains_var(&self, x: &str) -> bool {
        match self {
            Term::Var(y) => x == y,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(x)),
        }
    }

    /// Every function symbol with its arity, in first-occurrence order.
    pub fn symbols(&self, out: &mut Vec<(String, usize)>) {
        if let Term::App(f, args) = self {
            out.push((f.clone(), args.len()));
            args.iter().for_each(|a| a.symbols(out));
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Parses `f(g(x),c)`; names in `vars` are variables, all others symbols.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Term, TrsError> {
        let mut p = TermParser { src: src.as_bytes(), pos: 0, vars };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(TrsError::Parse(format!("trailing input in `{src}` at {}", p.pos)));
        }
        Ok(t)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::App(g, args) if args.is_empty() => write!(f, "{g}"),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct TermParser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl TermParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<String, TrsError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(TrsError::Parse(format!("identifier expected at {start}")));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Term, TrsError> {
        let name = self.ident()?;
        if !self.eat(b'(') {
            return Ok(if self.vars.contains(&name.as_str()) { Term::Var(name) } else { Term::App(name, Vec::new()) });
        }
        if self.vars.contains(&name.as_str()) {
            return Err(TrsError::Parse(format!("variable `{name}` applied to arguments")));
        }
        let mut args = vec![self.term()?];
        while self.eat(b',') {
            args.push(self.term()?);
        }
        if !self.eat(b')') {
            return Err(TrsError::Parse(format!("`)` expected at {}", self.pos)));
        }
        Ok(Term::App(name, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let t = Term::parse("W(s(k), x)", &["x", "k"]).unwrap();
        assert_eq!(t.to_string(), "W(s(k),x)");
        assert_eq!(t.var_counts(), BTreeMap::from([("k".into(), 1), ("x".into(), 1)]));
        assert_eq!(Term::parse("c", &["x"]).unwrap(), Term::constant("c"));
        assert!(Term::parse("x(c)", &["x"]).is_err());
        assert!(Term::parse("f(x", &["x"]).is_err());
    }
}
