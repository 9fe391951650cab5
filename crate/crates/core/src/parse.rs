//! Parser for the concrete syntax.
//!
//! ```text
//! expr    ::= \x y. expr | let x = expr, ... in expr
//!           | case expr of { C x1 .. xn -> expr; ... }
//!           | app <+> app | app
//! app     ::= head atom*
//! head    ::= atom | Ctor atom^arity | seq atom atom
//! atom    ::= var | nullary Ctor | shorthand | ( expr )
//! ```
//!
//! `<+>` is non-associative: a chain without parentheses is rejected. The
//! shorthands `id`, `K`, `K2`, `Bot` and `Omega` expand to closed terms;
//! `id` only when it is not bound in scope. Line comments start with `--`.

use crate::combinators;
use crate::ctors::CtorTable;
use crate::error::ParseError;
use crate::syntax::{Alt, Expr, Var};

/// Parser configuration.
#[derive(Clone, Debug)]
pub struct ParseOptions {
    /// Accept constructors, `case` and `seq`.
    pub extended: bool,
    pub ctors: CtorTable,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { extended: true, ctors: CtorTable::standard() }
    }
}

impl ParseOptions {
    /// Core syntax only.
    pub fn core() -> Self {
        ParseOptions { extended: false, ctors: CtorTable::empty() }
    }
}

/// Parses with the standard constructor table and extended syntax enabled.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, &ParseOptions::default())
}

/// Parses with explicit options.
pub fn parse_with(text: &str, options: &ParseOptions) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, options, scope: Vec::new() };
    let e = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        other => Err(p.error(format!("unexpected {}", other.describe()))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Lower(String, u32),
    Upper(String),
    Let,
    In,
    Case,
    Of,
    Seq,
    Backslash,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Equals,
    Arrow,
    Choice,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Lower(s, 0) => format!("`{s}`"),
            Tok::Lower(s, i) => format!("`{s}#{i}`"),
            Tok::Upper(s) => format!("`{s}`"),
            Tok::Let => "`let`".into(),
            Tok::In => "`in`".into(),
            Tok::Case => "`case`".into(),
            Tok::Of => "`of`".into(),
            Tok::Seq => "`seq`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Choice => "`<+>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Spanned { tok: Tok::Arrow, line: l0, column: c0 });
                advance(2, &mut i, &mut col);
            }
            '<' => {
                if chars.get(i + 1) == Some(&'+') && chars.get(i + 2) == Some(&'>') {
                    out.push(Spanned { tok: Tok::Choice, line: l0, column: c0 });
                    advance(3, &mut i, &mut col);
                } else {
                    return Err(err(l0, c0, "expected `<+>`".into()));
                }
            }
            '\\' | 'λ' => {
                out.push(Spanned { tok: Tok::Backslash, line: l0, column: c0 });
                advance(1, &mut i, &mut col);
            }
            '.' | '(' | ')' | '{' | '}' | ';' | ',' | '=' => {
                let tok = match c {
                    '.' => Tok::Dot,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    _ => Tok::Equals,
                };
                out.push(Spanned { tok, line: l0, column: c0 });
                advance(1, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                let mut index = 0u32;
                if chars.get(i) == Some(&'#') {
                    let s = i + 1;
                    let mut e = s;
                    while e < chars.len() && chars[e].is_ascii_digit() {
                        e += 1;
                    }
                    if e == s {
                        return Err(err(line, col, "expected digits after `#`".into()));
                    }
                    let digits: String = chars[s..e].iter().collect();
                    index = digits.parse().map_err(|_| err(line, col, "variable index too large".into()))?;
                    col += e - i;
                    i = e;
                }
                let tok = match word.as_str() {
                    "let" => Tok::Let,
                    "in" => Tok::In,
                    "case" => Tok::Case,
                    "of" => Tok::Of,
                    "seq" => Tok::Seq,
                    _ if word.starts_with(|c: char| c.is_ascii_uppercase()) => {
                        if index != 0 {
                            return Err(err(l0, c0, format!("`{word}` cannot carry an index")));
                        }
                        Tok::Upper(word)
                    }
                    _ if word.starts_with('_') => {
                        return Err(err(l0, c0, "identifiers start with a letter".into()));
                    }
                    _ => Tok::Lower(word, index),
                };
                if index != 0 && !matches!(tok, Tok::Lower(..)) {
                    return Err(err(l0, c0, "keywords cannot carry an index".into()));
                }
                out.push(Spanned { tok, line: l0, column: c0 });
            }
            other => return Err(err(l0, c0, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    options: &'a ParseOptions,
    scope: Vec<Var>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError { line: t.line, column: t.column, message }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn binder(&mut self) -> Result<Var, ParseError> {
        match self.bump() {
            Tok::Lower(name, index) => Ok(Var::indexed(&name, index)),
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected a variable, found {}", other.describe())))
            }
        }
    }

    fn require_extended(&self, what: &str) -> Result<(), ParseError> {
        if self.options.extended {
            Ok(())
        } else {
            Err(self.error(format!("{what} requires extended mode")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Backslash => self.lambda(),
            Tok::Let => self.let_expr(),
            Tok::Case => self.case_expr(),
            _ => {
                let left = self.app()?;
                if *self.peek() == Tok::Choice {
                    self.bump();
                    let right = self.app()?;
                    if *self.peek() == Tok::Choice {
                        return Err(self.error("`<+>` is not associative; add parentheses".into()));
                    }
                    Ok(Expr::choice(left, right))
                } else {
                    Ok(left)
                }
            }
        }
    }

    fn lambda(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::Backslash)?;
        let mut binders = vec![self.binder()?];
        while let Tok::Lower(..) = self.peek() {
            binders.push(self.binder()?);
        }
        self.expect(Tok::Dot)?;
        let n = self.scope.len();
        self.scope.extend(binders.iter().cloned());
        let body = self.expr();
        self.scope.truncate(n);
        let body = body?;
        Ok(binders.into_iter().rev().fold(body, |acc, b| Expr::lam(b, acc)))
    }

    fn let_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::Let)?;
        // Binder names are collected first so that every right-hand side sees them.
        let start = self.pos;
        let names = self.scan_let_binders()?;
        self.pos = start;
        let n = self.scope.len();
        self.scope.extend(names.iter().cloned());
        let result = self.let_bindings_and_body();
        self.scope.truncate(n);
        result
    }

    fn scan_let_binders(&mut self) -> Result<Vec<Var>, ParseError> {
        // Binders appear at depth 0 directly after `let` or a top-level comma.
        let mut names = Vec::new();
        let mut depth = 0i32;
        let mut expect_binder = true;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Lower(name, index) if expect_binder && depth == 0 => {
                    names.push(Var::indexed(&name, index));
                    expect_binder = false;
                }
                Tok::LParen | Tok::LBrace | Tok::Let | Tok::Case => depth += 1,
                Tok::RParen | Tok::RBrace => depth -= 1,
                Tok::In => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                Tok::Of => depth -= 1,
                Tok::Comma if depth == 0 => expect_binder = true,
                _ => {}
            }
            if depth < 0 {
                break;
            }
            self.bump();
        }
        Ok(names)
    }

    fn let_bindings_and_body(&mut self) -> Result<Expr, ParseError> {
        let mut env: Vec<(Var, Expr)> = Vec::new();
        loop {
            let x = self.binder()?;
            if env.iter().any(|(y, _)| *y == x) {
                self.pos -= 1;
                return Err(self.error(format!("variable `{x}` bound twice in the same environment")));
            }
            self.expect(Tok::Equals)?;
            let rhs = self.expr()?;
            env.push((x, rhs));
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::In => {
                    self.bump();
                    break;
                }
                other => return Err(self.error(format!("expected `,` or `in`, found {}", other.describe()))),
            }
        }
        let body = self.expr()?;
        Ok(Expr::Let(env, Box::new(body)))
    }

    fn case_expr(&mut self) -> Result<Expr, ParseError> {
        self.require_extended("`case`")?;
        self.expect(Tok::Case)?;
        let scrutinee = self.expr()?;
        self.expect(Tok::Of)?;
        self.expect(Tok::LBrace)?;
        let mut alts: Vec<Alt> = Vec::new();
        let mut type_name = None;
        loop {
            let ctor = match self.bump() {
                Tok::Upper(c) => c,
                other => {
                    self.pos -= 1;
                    return Err(self.error(format!("expected a constructor pattern, found {}", other.describe())));
                }
            };
            let info = self
                .options
                .ctors
                .lookup(&ctor)
                .ok_or_else(|| self.error(format!("unknown constructor `{ctor}`")))?;
            match &type_name {
                None => type_name = Some(info.type_name.clone()),
                Some(t) if *t != info.type_name => {
                    return Err(self.error(format!("constructor `{ctor}` does not belong to type `{t}`")));
                }
                _ => {}
            }
            if alts.iter().any(|a| *a.ctor == *ctor) {
                return Err(self.error(format!("duplicate alternative for `{ctor}`")));
            }
            let mut binders = Vec::new();
            while let Tok::Lower(..) = self.peek() {
                let b = self.binder()?;
                if binders.contains(&b) {
                    self.pos -= 1;
                    return Err(self.error(format!("pattern variable `{b}` repeated")));
                }
                binders.push(b);
            }
            if binders.len() != info.arity {
                return Err(self.error(format!(
                    "pattern for `{ctor}` needs {} variables, found {}",
                    info.arity,
                    binders.len()
                )));
            }
            self.expect(Tok::Arrow)?;
            let n = self.scope.len();
            self.scope.extend(binders.iter().cloned());
            let body = self.expr();
            self.scope.truncate(n);
            alts.push(Alt { ctor: ctor.as_str().into(), binders, body: body? });
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                    if *self.peek() == Tok::RBrace {
                        self.bump();
                        break;
                    }
                }
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                other => return Err(self.error(format!("expected `;` or `}}`, found {}", other.describe()))),
            }
        }
        let type_name = type_name.expect("at least one alternative");
        let ctors = self.options.ctors.constructors_of(&type_name).expect("type from table");
        if alts.len() != ctors.len() {
            return Err(self.error(format!("case over `{type_name}` needs one alternative per constructor")));
        }
        // Store alternatives in declaration order.
        let ordered = ctors
            .iter()
            .map(|(c, _)| alts.iter().find(|a| a.ctor == *c).expect("all present").clone())
            .collect();
        Ok(Expr::Case(type_name, Box::new(scrutinee), ordered))
    }

    fn app(&mut self) -> Result<Expr, ParseError> {
        let mut head = match self.peek().clone() {
            Tok::Upper(name) if combinators::shorthand(&name).is_none() => {
                self.require_extended("constructor application")?;
                let Some(arity) = self.options.ctors.arity(&name) else {
                    return Err(self.error(format!("unknown constructor `{name}`")));
                };
                self.bump();
                let mut args = Vec::with_capacity(arity);
                for _ in 0..arity {
                    match self.atom()? {
                        Some(a) => args.push(a),
                        None => {
                            return Err(self.error(format!(
                                "constructor `{name}` needs {arity} arguments, found {}",
                                args.len()
                            )))
                        }
                    }
                }
                Expr::Ctor(name.as_str().into(), args)
            }
            Tok::Seq => {
                self.require_extended("`seq`")?;
                self.bump();
                let first = self.atom()?.ok_or_else(|| self.error("`seq` needs two arguments".into()))?;
                let second = self.atom()?.ok_or_else(|| self.error("`seq` needs two arguments".into()))?;
                Expr::seq(first, second)
            }
            _ => match self.atom()? {
                Some(a) => a,
                None => return Err(self.error(format!("expected an expression, found {}", self.peek().describe()))),
            },
        };
        while let Some(arg) = self.atom()? {
            head = Expr::app(head, arg);
        }
        Ok(head)
    }

    /// Parses an atom if one starts here.
    fn atom(&mut self) -> Result<Option<Expr>, ParseError> {
        match self.peek().clone() {
            Tok::Lower(name, index) => {
                self.bump();
                let v = Var::indexed(&name, index);
                if index == 0 && name == "id" && !self.scope.contains(&v) {
                    return Ok(Some(combinators::id()));
                }
                Ok(Some(Expr::Var(v)))
            }
            Tok::Upper(name) => {
                if let Some(e) = combinators::shorthand(&name) {
                    self.bump();
                    return Ok(Some(e));
                }
                self.require_extended("constructor")?;
                match self.options.ctors.arity(&name) {
                    Some(0) => {
                        self.bump();
                        Ok(Some(Expr::Ctor(name.as_str().into(), Vec::new())))
                    }
                    Some(n) => Err(self.error(format!(
                        "constructor `{name}` needs {n} arguments here; parenthesize the application"
                    ))),
                    None => Err(self.error(format!("unknown constructor `{name}`"))),
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Some(e))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::alpha_equiv;

    #[test]
    fn parses_lambda() {
        assert_eq!(parse(r"\x.x").unwrap(), Expr::lam(Var::new("x"), Expr::var("x")));
        assert_eq!(parse(r"\x y. x").unwrap(), parse(r"\x.\y.x").unwrap());
    }

    #[test]
    fn choice_is_not_associative() {
        let err = parse("a <+> b <+> c").unwrap_err();
        assert!(err.message.contains("not associative"));
        assert!(parse("(a <+> b) <+> c").is_ok());
    }

    #[test]
    fn let_with_two_bindings() {
        let Expr::Let(env, _) = parse("let x=K, y=K2 in x y").unwrap() else { panic!() };
        assert_eq!(env.len(), 2);
    }

    #[test]
    fn shorthands_expand() {
        assert!(alpha_equiv(&parse("K").unwrap(), &parse(r"\a.\b.a").unwrap()));
        assert!(alpha_equiv(&parse("Bot").unwrap(), &parse("let x = x in x").unwrap()));
        assert_eq!(parse(r"\id.id").unwrap(), Expr::lam(Var::new("id"), Expr::var("id")));
        assert!(alpha_equiv(&parse("id").unwrap(), &parse(r"\z.z").unwrap()));
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = parse("let x = K\n in (x").unwrap_err();
        assert_eq!((err.line, err.column), (2, 7));
        let err = parse("\\x. ?").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
    }

    #[test]
    fn constructors_are_saturated() {
        assert!(parse("Cons a").is_err());
        assert_eq!(parse("Cons a b c").unwrap(), Expr::app(parse("Cons a b").unwrap(), Expr::var("c")));
        assert!(parse("f Cons").is_err());
        assert!(parse_with("True", &ParseOptions::core()).is_err());
    }

    #[test]
    fn case_alternatives_in_declaration_order() {
        let e = parse("case x of { True -> a; False -> b }").unwrap();
        let Expr::Case(ty, _, alts) = e else { panic!() };
        assert_eq!(&*ty, "Bool");
        assert_eq!(&*alts[0].ctor, "False");
        assert!(parse("case x of { True -> a }").is_err());
        assert!(parse("case x of { Cons y y -> a; Nil -> b }").is_err());
    }

    #[test]
    fn indexed_variables_and_comments() {
        let e = parse("x#3 -- trailing comment").unwrap();
        assert_eq!(e, Expr::Var(Var::indexed("x", 3)));
    }
}
