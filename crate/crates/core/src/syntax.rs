//! Abstract syntax, binding discipline, alpha-equivalence, positions and
//! context classification.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::SyntaxError;

/// A variable: a base identifier plus a freshness index.
///
/// Printed as `base` when the index is zero and `base#index` otherwise.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub base: Arc<str>,
    pub index: u32,
}

impl Var {
    pub fn new(base: &str) -> Self {
        Var { base: Arc::from(base), index: 0 }
    }

    pub fn indexed(base: &str, index: u32) -> Self {
        Var { base: Arc::from(base), index }
    }

    /// Same base name, different index.
    pub fn with_index(&self, index: u32) -> Self {
        Var { base: self.base.clone(), index }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}#{}", self.base, self.index)
        }
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One `case` alternative `C x1 ... xn -> body`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Alt {
    pub ctor: Arc<str>,
    pub binders: Vec<Var>,
    pub body: Expr,
}

/// Expressions of the core and extended calculus.
///
/// Derived equality is syntactic; use [`alpha_equiv`] for the intended
/// equality (which also treats let environments as multisets).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Expr {
    Var(Var),
    Lam(Var, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Choice(Box<Expr>, Box<Expr>),
    Let(Vec<(Var, Expr)>, Box<Expr>),
    Ctor(Arc<str>, Vec<Expr>),
    Case(Arc<str>, Box<Expr>, Vec<Alt>),
    Seq(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Var::new(name))
    }

    pub fn lam(binder: Var, body: Expr) -> Expr {
        Expr::Lam(binder, Box::new(body))
    }

    pub fn app(fun: Expr, arg: Expr) -> Expr {
        Expr::App(Box::new(fun), Box::new(arg))
    }

    /// Left-nested application `f a1 ... an`.
    pub fn apps(fun: Expr, args: impl IntoIterator<Item = Expr>) -> Expr {
        args.into_iter().fold(fun, Expr::app)
    }

    pub fn choice(left: Expr, right: Expr) -> Expr {
        Expr::Choice(Box::new(left), Box::new(right))
    }

    /// Builds a let; an empty environment yields the bare body.
    pub fn let_in(env: Vec<(Var, Expr)>, body: Expr) -> Expr {
        if env.is_empty() {
            body
        } else {
            Expr::Let(env, Box::new(body))
        }
    }

    pub fn seq(first: Expr, second: Expr) -> Expr {
        Expr::Seq(Box::new(first), Box::new(second))
    }

    pub fn ctor(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Ctor(Arc::from(name), args)
    }

    pub fn is_lam(&self) -> bool {
        matches!(self, Expr::Lam(..))
    }

    pub fn is_ctor(&self) -> bool {
        matches!(self, Expr::Ctor(..))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    /// True if the term uses constructors, `case` or `seq`.
    pub fn uses_extended(&self) -> bool {
        match self {
            Expr::Var(_) => false,
            Expr::Lam(_, b) => b.uses_extended(),
            Expr::App(f, a) | Expr::Choice(f, a) => f.uses_extended() || a.uses_extended(),
            Expr::Let(env, b) => env.iter().any(|(_, r)| r.uses_extended()) || b.uses_extended(),
            Expr::Ctor(..) | Expr::Case(..) | Expr::Seq(..) => true,
        }
    }

    /// Number of AST nodes (variables, binders of alternatives excluded).
    pub fn size(&self) -> usize {
        match self {
            Expr::Var(_) => 1,
            Expr::Lam(_, b) => 1 + b.size(),
            Expr::App(f, a) | Expr::Choice(f, a) | Expr::Seq(f, a) => 1 + f.size() + a.size(),
            Expr::Let(env, b) => 1 + env.iter().map(|(_, r)| r.size()).sum::<usize>() + b.size(),
            Expr::Ctor(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
            Expr::Case(_, s, alts) => {
                1 + s.size() + alts.iter().map(|a| a.body.size()).sum::<usize>()
            }
        }
    }

    /// Number of `let` nodes.
    pub fn let_count(&self) -> usize {
        let own = usize::from(matches!(self, Expr::Let(..)));
        own + self.children().iter().map(|c| c.let_count()).sum::<usize>()
    }

    /// Direct subexpressions in position order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) => vec![],
            Expr::Lam(_, b) => vec![b],
            Expr::App(f, a) | Expr::Choice(f, a) | Expr::Seq(f, a) => vec![f, a],
            Expr::Let(env, b) => env.iter().map(|(_, r)| r).chain(std::iter::once(&**b)).collect(),
            Expr::Ctor(_, args) => args.iter().collect(),
            Expr::Case(_, s, alts) => {
                std::iter::once(&**s).chain(alts.iter().map(|a| &a.body)).collect()
            }
        }
    }
}

/// One child selector of a [`Position`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Step {
    /// Body of a lambda or of a let.
    Body,
    /// Right-hand side of the named let binding.
    Bind(Var),
    Fun,
    Arg,
    Left,
    Right,
    CtorArg(usize),
    Scrut,
    Alt(usize),
    SeqFirst,
    SeqSecond,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Body => write!(f, "body"),
            Step::Bind(v) => write!(f, "bind({v})"),
            Step::Fun => write!(f, "fun"),
            Step::Arg => write!(f, "arg"),
            Step::Left => write!(f, "left"),
            Step::Right => write!(f, "right"),
            Step::CtorArg(i) => write!(f, "ctor-arg({i})"),
            Step::Scrut => write!(f, "scrut"),
            Step::Alt(i) => write!(f, "alt({i})"),
            Step::SeqFirst => write!(f, "seq-first"),
            Step::SeqSecond => write!(f, "seq-second"),
        }
    }
}

/// A path from the root to a subexpression.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Position(pub Vec<Step>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, step: Step) -> Self {
        let mut steps = self.0.clone();
        steps.push(step);
        Position(steps)
    }

    pub fn join(&self, other: &Position) -> Self {
        let mut steps = self.0.clone();
        steps.extend(other.0.iter().cloned());
        Position(steps)
    }

    pub fn parent(&self) -> Option<Position> {
        if self.0.is_empty() {
            None
        } else {
            Some(Position(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Context classes, ordered by inclusion `A ⊆ R ⊆ S ⊆ C`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum ContextClass {
    A,
    R,
    S,
    C,
}

impl fmt::Display for ContextClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ContextClass::A => "A",
            ContextClass::R => "R",
            ContextClass::S => "S",
            ContextClass::C => "C",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ContextClass {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(ContextClass::A),
            "R" | "r" => Ok(ContextClass::R),
            "S" | "s" => Ok(ContextClass::S),
            "C" | "c" => Ok(ContextClass::C),
            other => Err(SyntaxError::UnknownClass(other.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Variables

/// Free variables; in a let every binder scopes over all right-hand sides and
/// the body.
pub fn free_vars(e: &Expr) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    let mut bound = Vec::new();
    collect_free(e, &mut bound, &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
    match e {
        Expr::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        Expr::Lam(x, b) => {
            bound.push(x.clone());
            collect_free(b, bound, out);
            bound.pop();
        }
        Expr::App(f, a) | Expr::Choice(f, a) | Expr::Seq(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        Expr::Let(env, b) => {
            let n = bound.len();
            bound.extend(env.iter().map(|(x, _)| x.clone()));
            for (_, r) in env {
                collect_free(r, bound, out);
            }
            collect_free(b, bound, out);
            bound.truncate(n);
        }
        Expr::Ctor(_, args) => {
            for a in args {
                collect_free(a, bound, out);
            }
        }
        Expr::Case(_, s, alts) => {
            collect_free(s, bound, out);
            for alt in alts {
                let n = bound.len();
                bound.extend(alt.binders.iter().cloned());
                collect_free(&alt.body, bound, out);
                bound.truncate(n);
            }
        }
    }
}

/// Every variable name occurring in the term, bound or free.
pub fn all_vars(e: &Expr) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    collect_all(e, &mut out);
    out
}

fn collect_all(e: &Expr, out: &mut BTreeSet<Var>) {
    match e {
        Expr::Var(v) => {
            out.insert(v.clone());
        }
        Expr::Lam(x, b) => {
            out.insert(x.clone());
            collect_all(b, out);
        }
        Expr::Let(env, b) => {
            for (x, r) in env {
                out.insert(x.clone());
                collect_all(r, out);
            }
            collect_all(b, out);
        }
        Expr::Case(_, s, alts) => {
            collect_all(s, out);
            for alt in alts {
                out.extend(alt.binders.iter().cloned());
                collect_all(&alt.body, out);
            }
        }
        _ => {
            for c in e.children() {
                collect_all(c, out);
            }
        }
    }
}

/// All binders in binding order (lambda, let and alternative binders).
pub fn binders(e: &Expr) -> Vec<Var> {
    let mut out = Vec::new();
    collect_binders(e, &mut out);
    out
}

fn collect_binders(e: &Expr, out: &mut Vec<Var>) {
    match e {
        Expr::Lam(x, b) => {
            out.push(x.clone());
            collect_binders(b, out);
        }
        Expr::Let(env, b) => {
            out.extend(env.iter().map(|(x, _)| x.clone()));
            for (_, r) in env {
                collect_binders(r, out);
            }
            collect_binders(b, out);
        }
        Expr::Case(_, s, alts) => {
            collect_binders(s, out);
            for alt in alts {
                out.extend(alt.binders.iter().cloned());
                collect_binders(&alt.body, out);
            }
        }
        _ => {
            for c in e.children() {
                collect_binders(c, out);
            }
        }
    }
}

/// Distinct variable convention: binders pairwise distinct and disjoint from
/// the free variables.
pub fn obeys_convention(e: &Expr) -> bool {
    let bs = binders(e);
    let set: BTreeSet<&Var> = bs.iter().collect();
    if set.len() != bs.len() {
        return false;
    }
    let fv = free_vars(e);
    bs.iter().all(|b| !fv.contains(b))
}

/// Number of free occurrences of `x`.
pub fn count_free_occurrences(e: &Expr, x: &Var) -> usize {
    free_occurrences(e, x).len()
}

/// Positions of the free occurrences of `x`, in position order.
pub fn free_occurrences(e: &Expr, x: &Var) -> Vec<Position> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    find_free(e, x, &mut path, &mut out);
    out
}

fn find_free(e: &Expr, x: &Var, path: &mut Vec<Step>, out: &mut Vec<Position>) {
    match e {
        Expr::Var(v) => {
            if v == x {
                out.push(Position(path.clone()));
            }
        }
        Expr::Lam(b, body) => {
            if b != x {
                path.push(Step::Body);
                find_free(body, x, path, out);
                path.pop();
            }
        }
        Expr::Let(env, body) => {
            if env.iter().any(|(b, _)| b == x) {
                return;
            }
            for (b, r) in env {
                path.push(Step::Bind(b.clone()));
                find_free(r, x, path, out);
                path.pop();
            }
            path.push(Step::Body);
            find_free(body, x, path, out);
            path.pop();
        }
        Expr::Case(_, s, alts) => {
            path.push(Step::Scrut);
            find_free(s, x, path, out);
            path.pop();
            for (i, alt) in alts.iter().enumerate() {
                if !alt.binders.contains(x) {
                    path.push(Step::Alt(i));
                    find_free(&alt.body, x, path, out);
                    path.pop();
                }
            }
        }
        _ => {
            for (step, c) in child_steps(e) {
                path.push(step);
                find_free(c, x, path, out);
                path.pop();
            }
        }
    }
}

/// Children paired with the step selecting them.
pub fn child_steps(e: &Expr) -> Vec<(Step, &Expr)> {
    match e {
        Expr::Var(_) => vec![],
        Expr::Lam(_, b) => vec![(Step::Body, &**b)],
        Expr::App(f, a) => vec![(Step::Fun, &**f), (Step::Arg, &**a)],
        Expr::Choice(l, r) => vec![(Step::Left, &**l), (Step::Right, &**r)],
        Expr::Seq(l, r) => vec![(Step::SeqFirst, &**l), (Step::SeqSecond, &**r)],
        Expr::Let(env, b) => env
            .iter()
            .map(|(x, r)| (Step::Bind(x.clone()), r))
            .chain(std::iter::once((Step::Body, &**b)))
            .collect(),
        Expr::Ctor(_, args) => args.iter().enumerate().map(|(i, a)| (Step::CtorArg(i), a)).collect(),
        Expr::Case(_, s, alts) => std::iter::once((Step::Scrut, &**s))
            .chain(alts.iter().enumerate().map(|(i, a)| (Step::Alt(i), &a.body)))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Positions

/// All positions of the term in preorder.
pub fn positions(e: &Expr) -> Vec<Position> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    collect_positions(e, &mut path, &mut out);
    out
}

fn collect_positions(e: &Expr, path: &mut Vec<Step>, out: &mut Vec<Position>) {
    out.push(Position(path.clone()));
    for (step, c) in child_steps(e) {
        path.push(step);
        collect_positions(c, path, out);
        path.pop();
    }
}

fn select<'a>(e: &'a Expr, step: &Step) -> Option<&'a Expr> {
    match (e, step) {
        (Expr::Lam(_, b), Step::Body) | (Expr::Let(_, b), Step::Body) => Some(b),
        (Expr::App(f, _), Step::Fun) => Some(f),
        (Expr::App(_, a), Step::Arg) => Some(a),
        (Expr::Choice(l, _), Step::Left) => Some(l),
        (Expr::Choice(_, r), Step::Right) => Some(r),
        (Expr::Seq(l, _), Step::SeqFirst) => Some(l),
        (Expr::Seq(_, r), Step::SeqSecond) => Some(r),
        (Expr::Let(env, _), Step::Bind(x)) => env.iter().find(|(y, _)| y == x).map(|(_, r)| r),
        (Expr::Ctor(_, args), Step::CtorArg(i)) => args.get(*i),
        (Expr::Case(_, s, _), Step::Scrut) => Some(s),
        (Expr::Case(_, _, alts), Step::Alt(i)) => alts.get(*i).map(|a| &a.body),
        _ => None,
    }
}

fn select_mut<'a>(e: &'a mut Expr, step: &Step) -> Option<&'a mut Expr> {
    match (e, step) {
        (Expr::Lam(_, b), Step::Body) | (Expr::Let(_, b), Step::Body) => Some(b),
        (Expr::App(f, _), Step::Fun) => Some(f),
        (Expr::App(_, a), Step::Arg) => Some(a),
        (Expr::Choice(l, _), Step::Left) => Some(l),
        (Expr::Choice(_, r), Step::Right) => Some(r),
        (Expr::Seq(l, _), Step::SeqFirst) => Some(l),
        (Expr::Seq(_, r), Step::SeqSecond) => Some(r),
        (Expr::Let(env, _), Step::Bind(x)) => {
            env.iter_mut().find(|(y, _)| y == x).map(|(_, r)| r)
        }
        (Expr::Ctor(_, args), Step::CtorArg(i)) => args.get_mut(*i),
        (Expr::Case(_, s, _), Step::Scrut) => Some(s),
        (Expr::Case(_, _, alts), Step::Alt(i)) => alts.get_mut(*i).map(|a| &mut a.body),
        _ => None,
    }
}

/// The subexpression at `p`.
pub fn subterm<'a>(e: &'a Expr, p: &Position) -> Result<&'a Expr, SyntaxError> {
    let mut cur = e;
    for step in &p.0 {
        cur = select(cur, step).ok_or_else(|| SyntaxError::InvalidPosition(p.to_string()))?;
    }
    Ok(cur)
}

/// Mutable access to the subexpression at `p`.
pub fn subterm_mut<'a>(e: &'a mut Expr, p: &Position) -> Result<&'a mut Expr, SyntaxError> {
    let mut cur = e;
    for step in &p.0 {
        cur = select_mut(cur, step).ok_or_else(|| SyntaxError::InvalidPosition(p.to_string()))?;
    }
    Ok(cur)
}

/// Replaces the subexpression at `p` (no capture checks).
pub fn replace_at(e: &Expr, p: &Position, new: Expr) -> Result<Expr, SyntaxError> {
    let mut out = e.clone();
    *subterm_mut(&mut out, p)? = new;
    Ok(out)
}

/// Variables bound by binders strictly above `p`.
pub fn binders_above(e: &Expr, p: &Position) -> Result<BTreeSet<Var>, SyntaxError> {
    let mut out = BTreeSet::new();
    let mut cur = e;
    for step in &p.0 {
        match (cur, step) {
            (Expr::Lam(x, _), Step::Body) => {
                out.insert(x.clone());
            }
            (Expr::Let(env, _), _) => out.extend(env.iter().map(|(x, _)| x.clone())),
            (Expr::Case(_, _, alts), Step::Alt(i)) => {
                if let Some(a) = alts.get(*i) {
                    out.extend(a.binders.iter().cloned());
                }
            }
            _ => {}
        }
        cur = select(cur, step).ok_or_else(|| SyntaxError::InvalidPosition(p.to_string()))?;
    }
    Ok(out)
}

fn is_application_step(node: &Expr, step: &Step) -> bool {
    matches!(
        (node, step),
        (Expr::App(..), Step::Fun) | (Expr::Seq(..), Step::SeqFirst) | (Expr::Case(..), Step::Scrut)
    )
}

fn is_application_path(e: &Expr, steps: &[Step]) -> bool {
    let mut cur = e;
    for step in steps {
        if !is_application_step(cur, step) {
            return false;
        }
        match select(cur, step) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    true
}

/// Follows function, seq-first and scrutinee positions down to the first
/// node that is not an application, seq or case.
pub fn application_spine(e: &Expr) -> (Position, &Expr) {
    let mut steps = Vec::new();
    let mut cur = e;
    loop {
        match cur {
            Expr::App(f, _) => {
                steps.push(Step::Fun);
                cur = f;
            }
            Expr::Seq(f, _) => {
                steps.push(Step::SeqFirst);
                cur = f;
            }
            Expr::Case(_, s, _) => {
                steps.push(Step::Scrut);
                cur = s;
            }
            _ => return (Position(steps), cur),
        }
    }
}

/// The needed chain `x1, x2, ...` of a let: `x1` is the variable in focus of
/// the body, each next variable is in focus of the previous right-hand side.
pub fn needed_chain(env: &[(Var, Expr)], body: &Expr) -> Vec<Var> {
    let mut chain: Vec<Var> = Vec::new();
    let mut focus = application_spine(body).1;
    while let Expr::Var(x) = focus {
        if chain.contains(x) {
            break;
        }
        match env.iter().find(|(y, _)| y == x) {
            Some((_, rhs)) => {
                chain.push(x.clone());
                focus = application_spine(rhs).1;
            }
            None => break,
        }
    }
    chain
}

/// The classes of the context obtained by putting a hole at `p`.
pub fn classify_position(e: &Expr, p: &Position) -> Result<BTreeSet<ContextClass>, SyntaxError> {
    subterm(e, p)?;
    let mut out = BTreeSet::new();
    out.insert(ContextClass::C);

    let mut cur = e;
    let mut surface = true;
    for step in &p.0 {
        if matches!((cur, step), (Expr::Lam(..), Step::Body)) {
            surface = false;
        }
        cur = select(cur, step).expect("validated position");
    }
    if !surface {
        return Ok(out);
    }
    out.insert(ContextClass::S);

    let application = is_application_path(e, &p.0);
    let reduction = application
        || match (e, p.0.first()) {
            (Expr::Let(_, body), Some(Step::Body)) => is_application_path(body, &p.0[1..]),
            (Expr::Let(env, body), Some(Step::Bind(y))) => {
                let rhs = env.iter().find(|(x, _)| x == y).map(|(_, r)| r).expect("validated");
                needed_chain(env, body).contains(y) && is_application_path(rhs, &p.0[1..])
            }
            _ => false,
        };
    if reduction {
        out.insert(ContextClass::R);
    }
    if application {
        out.insert(ContextClass::A);
    }
    Ok(out)
}

/// Whether `p` belongs to class `cls`.
pub fn position_in_class(e: &Expr, p: &Position, cls: ContextClass) -> bool {
    classify_position(e, p).map(|s| s.contains(&cls)).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Alpha-equivalence

/// A name-erased structural hash: equal for alpha-equivalent terms.
pub fn shape_hash(e: &Expr) -> u64 {
    let mut h = DefaultHasher::new();
    hash_shape(e, &mut h);
    h.finish()
}

fn hash_shape(e: &Expr, h: &mut DefaultHasher) {
    match e {
        Expr::Var(_) => 0u8.hash(h),
        Expr::Lam(_, b) => {
            1u8.hash(h);
            hash_shape(b, h);
        }
        Expr::App(f, a) => {
            2u8.hash(h);
            hash_shape(f, h);
            hash_shape(a, h);
        }
        Expr::Choice(f, a) => {
            3u8.hash(h);
            hash_shape(f, h);
            hash_shape(a, h);
        }
        Expr::Let(env, b) => {
            4u8.hash(h);
            let mut hs: Vec<u64> = env.iter().map(|(_, r)| shape_hash(r)).collect();
            hs.sort_unstable();
            hs.hash(h);
            hash_shape(b, h);
        }
        Expr::Ctor(c, args) => {
            5u8.hash(h);
            c.hash(h);
            for a in args {
                hash_shape(a, h);
            }
        }
        Expr::Case(t, s, alts) => {
            6u8.hash(h);
            t.hash(h);
            hash_shape(s, h);
            for alt in alts {
                alt.ctor.hash(h);
                alt.binders.len().hash(h);
                hash_shape(&alt.body, h);
            }
        }
        Expr::Seq(f, a) => {
            7u8.hash(h);
            hash_shape(f, h);
            hash_shape(a, h);
        }
    }
}

/// An alpha-invariant hash that also sees how variables are wired: free
/// variables by name, lambda and case binders by depth, let binders by the
/// shape of their right-hand side.
pub fn fingerprint(e: &Expr) -> u64 {
    let mut h = DefaultHasher::new();
    fingerprint_rec(e, &mut Vec::new(), &mut h);
    h.finish()
}

enum Bound {
    Depth(usize),
    Let(u64),
}

fn fingerprint_rec(e: &Expr, scope: &mut Vec<(Var, Bound)>, h: &mut DefaultHasher) {
    match e {
        Expr::Var(x) => match scope.iter().rposition(|(y, _)| y == x) {
            None => {
                0u8.hash(h);
                x.hash(h);
            }
            Some(i) => match &scope[i].1 {
                Bound::Depth(d) => {
                    8u8.hash(h);
                    let depth = scope.iter().filter(|(_, b)| matches!(b, Bound::Depth(_))).count();
                    (depth - d).hash(h);
                }
                Bound::Let(s) => {
                    9u8.hash(h);
                    s.hash(h);
                }
            },
        },
        Expr::Lam(x, b) => {
            1u8.hash(h);
            let depth = scope.iter().filter(|(_, b)| matches!(b, Bound::Depth(_))).count();
            scope.push((x.clone(), Bound::Depth(depth)));
            fingerprint_rec(b, scope, h);
            scope.pop();
        }
        Expr::App(f, a) | Expr::Choice(f, a) | Expr::Seq(f, a) => {
            let tag: u8 = match e {
                Expr::App(..) => 2,
                Expr::Choice(..) => 3,
                _ => 7,
            };
            tag.hash(h);
            fingerprint_rec(f, scope, h);
            fingerprint_rec(a, scope, h);
        }
        Expr::Let(env, b) => {
            4u8.hash(h);
            let base = scope.len();
            for (x, r) in env {
                scope.push((x.clone(), Bound::Let(shape_hash(r))));
            }
            let mut hs: Vec<u64> = env
                .iter()
                .map(|(_, r)| {
                    let mut hr = DefaultHasher::new();
                    fingerprint_rec(r, scope, &mut hr);
                    hr.finish()
                })
                .collect();
            hs.sort_unstable();
            hs.hash(h);
            fingerprint_rec(b, scope, h);
            scope.truncate(base);
        }
        Expr::Ctor(c, args) => {
            5u8.hash(h);
            c.hash(h);
            args.len().hash(h);
            for a in args {
                fingerprint_rec(a, scope, h);
            }
        }
        Expr::Case(t, s, alts) => {
            6u8.hash(h);
            t.hash(h);
            fingerprint_rec(s, scope, h);
            for alt in alts {
                alt.ctor.hash(h);
                alt.binders.len().hash(h);
                let base = scope.len();
                for x in &alt.binders {
                    let depth = scope.iter().filter(|(_, b)| matches!(b, Bound::Depth(_))).count();
                    scope.push((x.clone(), Bound::Depth(depth)));
                }
                fingerprint_rec(&alt.body, scope, h);
                scope.truncate(base);
            }
        }
    }
}

/// Resolution of a variable occurrence during alpha comparison.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    Level(u32),
    /// A binder of a let environment whose partner is not chosen yet.
    Pending,
}

#[derive(Default)]
struct Scopes {
    map: HashMap<Var, Vec<Slot>>,
}

impl Scopes {
    fn push(&mut self, v: &Var, s: Slot) {
        self.map.entry(v.clone()).or_default().push(s);
    }

    fn pop(&mut self, v: &Var) {
        if let Some(st) = self.map.get_mut(v) {
            st.pop();
            if st.is_empty() {
                self.map.remove(v);
            }
        }
    }

    fn set_top(&mut self, v: &Var, s: Slot) {
        if let Some(top) = self.map.get_mut(v).and_then(|st| st.last_mut()) {
            *top = s;
        }
    }

    fn lookup(&self, v: &Var) -> Option<Slot> {
        self.map.get(v).and_then(|st| st.last().copied())
    }
}

struct AlphaCtx {
    left: Scopes,
    right: Scopes,
    next_level: u32,
    /// Pending bindings are compared optimistically; used only for pruning.
    optimistic: bool,
}

/// Alpha-equivalence with let environments compared as multisets.
pub fn alpha_equiv(e1: &Expr, e2: &Expr) -> bool {
    let mut ctx = AlphaCtx { left: Scopes::default(), right: Scopes::default(), next_level: 0, optimistic: false };
    alpha_rec(e1, e2, &mut ctx)
}

fn alpha_rec(a: &Expr, b: &Expr, ctx: &mut AlphaCtx) -> bool {
    match (a, b) {
        (Expr::Var(x), Expr::Var(y)) => match (ctx.left.lookup(x), ctx.right.lookup(y)) {
            (None, None) => x == y,
            (Some(Slot::Level(i)), Some(Slot::Level(j))) => i == j,
            (Some(_), Some(Slot::Pending)) | (Some(Slot::Pending), Some(_)) => ctx.optimistic,
            _ => false,
        },
        (Expr::Lam(x, s), Expr::Lam(y, t)) => {
            let lvl = Slot::Level(ctx.next_level);
            ctx.next_level += 1;
            ctx.left.push(x, lvl);
            ctx.right.push(y, lvl);
            let ok = alpha_rec(s, t, ctx);
            ctx.left.pop(x);
            ctx.right.pop(y);
            ok
        }
        (Expr::App(f1, a1), Expr::App(f2, a2))
        | (Expr::Choice(f1, a1), Expr::Choice(f2, a2))
        | (Expr::Seq(f1, a1), Expr::Seq(f2, a2)) => alpha_rec(f1, f2, ctx) && alpha_rec(a1, a2, ctx),
        (Expr::Ctor(c1, xs), Expr::Ctor(c2, ys)) => {
            c1 == c2 && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| alpha_rec(x, y, ctx))
        }
        (Expr::Case(t1, s1, alts1), Expr::Case(t2, s2, alts2)) => {
            if t1 != t2 || alts1.len() != alts2.len() || !alpha_rec(s1, s2, ctx) {
                return false;
            }
            for (p, q) in alts1.iter().zip(alts2) {
                if p.ctor != q.ctor || p.binders.len() != q.binders.len() {
                    return false;
                }
                for (x, y) in p.binders.iter().zip(&q.binders) {
                    let lvl = Slot::Level(ctx.next_level);
                    ctx.next_level += 1;
                    ctx.left.push(x, lvl);
                    ctx.right.push(y, lvl);
                }
                let ok = alpha_rec(&p.body, &q.body, ctx);
                for (x, y) in p.binders.iter().zip(&q.binders) {
                    ctx.left.pop(x);
                    ctx.right.pop(y);
                }
                if !ok {
                    return false;
                }
            }
            true
        }
        (Expr::Let(env1, b1), Expr::Let(env2, b2)) => alpha_let(env1, b1, env2, b2, ctx),
        _ => false,
    }
}

fn alpha_let(env1: &[(Var, Expr)], b1: &Expr, env2: &[(Var, Expr)], b2: &Expr, ctx: &mut AlphaCtx) -> bool {
    let n = env1.len();
    if n != env2.len() {
        return false;
    }
    let base = ctx.next_level;
    ctx.next_level += n as u32;
    for (i, (x, _)) in env1.iter().enumerate() {
        ctx.left.push(x, Slot::Level(base + i as u32));
    }
    for (y, _) in env2 {
        ctx.right.push(y, Slot::Pending);
    }
    let h1: Vec<u64> = env1.iter().map(|(_, r)| shape_hash(r)).collect();
    let h2: Vec<u64> = env2.iter().map(|(_, r)| shape_hash(r)).collect();
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    let ok = {
        let mut sorted1 = h1.clone();
        let mut sorted2 = h2.clone();
        sorted1.sort_unstable();
        sorted2.sort_unstable();
        sorted1 == sorted2 && match_bindings(0, env1, b1, env2, b2, &h1, &h2, base, &mut assign, &mut used, ctx)
    };
    for (x, _) in env1 {
        ctx.left.pop(x);
    }
    for (y, _) in env2 {
        ctx.right.pop(y);
    }
    ok
}

#[allow(clippy::too_many_arguments)]
fn match_bindings(
    i: usize,
    env1: &[(Var, Expr)],
    b1: &Expr,
    env2: &[(Var, Expr)],
    b2: &Expr,
    h1: &[u64],
    h2: &[u64],
    base: u32,
    assign: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    ctx: &mut AlphaCtx,
) -> bool {
    let n = env1.len();
    if i == n {
        // Every binder is assigned: compare everything under the full mapping.
        return (0..n).all(|k| {
            let j = assign[k].expect("complete assignment");
            alpha_rec(&env1[k].1, &env2[j].1, ctx)
        }) && alpha_rec(b1, b2, ctx);
    }
    for j in 0..n {
        if used[j] || h1[i] != h2[j] {
            continue;
        }
        used[j] = true;
        assign[i] = Some(j);
        ctx.right.set_top(&env2[j].0, Slot::Level(base + i as u32));
        let saved = ctx.optimistic;
        ctx.optimistic = true;
        let plausible = alpha_rec(&env1[i].1, &env2[j].1, ctx);
        ctx.optimistic = saved;
        if plausible && match_bindings(i + 1, env1, b1, env2, b2, h1, h2, base, assign, used, ctx) {
            return true;
        }
        ctx.right.set_top(&env2[j].0, Slot::Pending);
        assign[i] = None;
        used[j] = false;
    }
    false
}

// ---------------------------------------------------------------------------
// Freshening and substitution

/// Smallest-index variant of `base` not in `used`; records it as used.
pub fn fresh_var(base: &Var, used: &mut BTreeSet<Var>) -> Var {
    if !used.contains(base) {
        used.insert(base.clone());
        return base.clone();
    }
    let mut idx = 1;
    loop {
        let cand = base.with_index(idx);
        if !used.contains(&cand) {
            used.insert(cand.clone());
            return cand;
        }
        idx += 1;
    }
}

/// Renames binders so the result obeys the distinct variable convention and
/// avoids `avoid`; binders that are already unused keep their name.
pub fn freshen(e: &Expr, avoid: &BTreeSet<Var>) -> Expr {
    let mut used: BTreeSet<Var> = avoid.clone();
    used.extend(free_vars(e));
    freshen_with(e, &mut used)
}

/// Like [`freshen`] but against a caller-owned, growing set of used names.
pub fn freshen_with(e: &Expr, used: &mut BTreeSet<Var>) -> Expr {
    let mut renames: HashMap<Var, Vec<Var>> = HashMap::new();
    fresh_rec(e, used, &mut renames)
}

fn push_rename(renames: &mut HashMap<Var, Vec<Var>>, from: &Var, to: Var) {
    renames.entry(from.clone()).or_default().push(to);
}

fn pop_rename(renames: &mut HashMap<Var, Vec<Var>>, from: &Var) {
    if let Some(st) = renames.get_mut(from) {
        st.pop();
        if st.is_empty() {
            renames.remove(from);
        }
    }
}

fn fresh_rec(e: &Expr, used: &mut BTreeSet<Var>, renames: &mut HashMap<Var, Vec<Var>>) -> Expr {
    match e {
        Expr::Var(v) => Expr::Var(renames.get(v).and_then(|s| s.last()).cloned().unwrap_or_else(|| v.clone())),
        Expr::Lam(x, b) => {
            let nx = fresh_var(x, used);
            push_rename(renames, x, nx.clone());
            let nb = fresh_rec(b, used, renames);
            pop_rename(renames, x);
            Expr::Lam(nx, Box::new(nb))
        }
        Expr::App(f, a) => Expr::app(fresh_rec(f, used, renames), fresh_rec(a, used, renames)),
        Expr::Choice(f, a) => Expr::choice(fresh_rec(f, used, renames), fresh_rec(a, used, renames)),
        Expr::Seq(f, a) => Expr::seq(fresh_rec(f, used, renames), fresh_rec(a, used, renames)),
        Expr::Let(env, b) => {
            let names: Vec<Var> = env.iter().map(|(x, _)| fresh_var(x, used)).collect();
            for ((x, _), nx) in env.iter().zip(&names) {
                push_rename(renames, x, nx.clone());
            }
            let nenv: Vec<(Var, Expr)> =
                env.iter().zip(&names).map(|((_, r), nx)| (nx.clone(), fresh_rec(r, used, renames))).collect();
            let nb = fresh_rec(b, used, renames);
            for (x, _) in env {
                pop_rename(renames, x);
            }
            Expr::Let(nenv, Box::new(nb))
        }
        Expr::Ctor(c, args) => Expr::Ctor(c.clone(), args.iter().map(|a| fresh_rec(a, used, renames)).collect()),
        Expr::Case(t, s, alts) => {
            let ns = fresh_rec(s, used, renames);
            let nalts = alts
                .iter()
                .map(|alt| {
                    let nbs: Vec<Var> = alt.binders.iter().map(|x| fresh_var(x, used)).collect();
                    for (x, nx) in alt.binders.iter().zip(&nbs) {
                        push_rename(renames, x, nx.clone());
                    }
                    let body = fresh_rec(&alt.body, used, renames);
                    for x in &alt.binders {
                        pop_rename(renames, x);
                    }
                    Alt { ctor: alt.ctor.clone(), binders: nbs, body }
                })
                .collect();
            Expr::Case(t.clone(), Box::new(ns), nalts)
        }
    }
}

/// Fresh-name supply: hands out `base#n` with `n` above every index seen for
/// that base. Cheaper than [`fresh_var`] when a term grows over many steps.
#[derive(Clone, Debug, Default)]
pub struct NameSupply {
    max_index: HashMap<Arc<str>, u32>,
}

impl NameSupply {
    /// Records every variable of `e` as used.
    pub fn from_expr(e: &Expr) -> Self {
        let mut s = NameSupply::default();
        for v in all_vars(e) {
            s.note(&v);
        }
        s
    }

    pub fn note(&mut self, v: &Var) {
        let slot = self.max_index.entry(v.base.clone()).or_insert(v.index);
        if v.index > *slot {
            *slot = v.index;
        }
    }

    /// A variable with the same base that was never handed out or noted.
    pub fn fresh(&mut self, v: &Var) -> Var {
        match self.max_index.get_mut(&v.base) {
            Some(max) => {
                *max += 1;
                v.with_index(*max)
            }
            None => {
                self.max_index.insert(v.base.clone(), v.index);
                v.clone()
            }
        }
    }

    /// Copies `e` renaming every binder to a fresh name.
    pub fn rename_binders(&mut self, e: &Expr) -> Expr {
        let mut renames: HashMap<Var, Vec<Var>> = HashMap::new();
        supply_rec(e, self, &mut renames)
    }
}

fn supply_rec(e: &Expr, supply: &mut NameSupply, renames: &mut HashMap<Var, Vec<Var>>) -> Expr {
    match e {
        Expr::Var(v) => Expr::Var(renames.get(v).and_then(|s| s.last()).cloned().unwrap_or_else(|| v.clone())),
        Expr::Lam(x, b) => {
            let nx = supply.fresh(x);
            push_rename(renames, x, nx.clone());
            let nb = supply_rec(b, supply, renames);
            pop_rename(renames, x);
            Expr::Lam(nx, Box::new(nb))
        }
        Expr::App(f, a) => Expr::app(supply_rec(f, supply, renames), supply_rec(a, supply, renames)),
        Expr::Choice(f, a) => Expr::choice(supply_rec(f, supply, renames), supply_rec(a, supply, renames)),
        Expr::Seq(f, a) => Expr::seq(supply_rec(f, supply, renames), supply_rec(a, supply, renames)),
        Expr::Let(env, b) => {
            let names: Vec<Var> = env.iter().map(|(x, _)| supply.fresh(x)).collect();
            for ((x, _), nx) in env.iter().zip(&names) {
                push_rename(renames, x, nx.clone());
            }
            let nenv: Vec<(Var, Expr)> =
                env.iter().zip(&names).map(|((_, r), nx)| (nx.clone(), supply_rec(r, supply, renames))).collect();
            let nb = supply_rec(b, supply, renames);
            for (x, _) in env {
                pop_rename(renames, x);
            }
            Expr::Let(nenv, Box::new(nb))
        }
        Expr::Ctor(c, args) => Expr::Ctor(c.clone(), args.iter().map(|a| supply_rec(a, supply, renames)).collect()),
        Expr::Case(t, s, alts) => {
            let ns = supply_rec(s, supply, renames);
            let nalts = alts
                .iter()
                .map(|alt| {
                    let nbs: Vec<Var> = alt.binders.iter().map(|x| supply.fresh(x)).collect();
                    for (x, nx) in alt.binders.iter().zip(&nbs) {
                        push_rename(renames, x, nx.clone());
                    }
                    let body = supply_rec(&alt.body, supply, renames);
                    for x in &alt.binders {
                        pop_rename(renames, x);
                    }
                    Alt { ctor: alt.ctor.clone(), binders: nbs, body }
                })
                .collect();
            Expr::Case(t.clone(), Box::new(ns), nalts)
        }
    }
}

/// Capture-free substitution `e[t/x]`; every inserted copy of `t` is freshened.
pub fn substitute(e: &Expr, x: &Var, t: &Expr) -> Expr {
    let fv_t = free_vars(t);
    let mut used = all_vars(e);
    used.extend(all_vars(t));
    used.insert(x.clone());
    let mut renames: HashMap<Var, Vec<Var>> = HashMap::new();
    subst_rec(e, x, t, &fv_t, true, &mut used, &mut renames)
}

fn subst_binder(
    b: &Var,
    fv_t: &BTreeSet<Var>,
    active: bool,
    used: &mut BTreeSet<Var>,
    renames: &mut HashMap<Var, Vec<Var>>,
) -> Var {
    let nb = if active && fv_t.contains(b) { fresh_var(b, used) } else { b.clone() };
    push_rename(renames, b, nb.clone());
    nb
}

fn subst_rec(
    e: &Expr,
    x: &Var,
    t: &Expr,
    fv_t: &BTreeSet<Var>,
    active: bool,
    used: &mut BTreeSet<Var>,
    renames: &mut HashMap<Var, Vec<Var>>,
) -> Expr {
    match e {
        Expr::Var(v) => {
            if let Some(r) = renames.get(v).and_then(|s| s.last()) {
                Expr::Var(r.clone())
            } else if active && v == x {
                freshen_with(t, used)
            } else {
                Expr::Var(v.clone())
            }
        }
        Expr::Lam(b, body) => {
            let inner = active && b != x;
            let nb = subst_binder(b, fv_t, inner, used, renames);
            let nbody = subst_rec(body, x, t, fv_t, inner, used, renames);
            pop_rename(renames, b);
            Expr::Lam(nb, Box::new(nbody))
        }
        Expr::App(f, a) => Expr::app(
            subst_rec(f, x, t, fv_t, active, used, renames),
            subst_rec(a, x, t, fv_t, active, used, renames),
        ),
        Expr::Choice(f, a) => Expr::choice(
            subst_rec(f, x, t, fv_t, active, used, renames),
            subst_rec(a, x, t, fv_t, active, used, renames),
        ),
        Expr::Seq(f, a) => Expr::seq(
            subst_rec(f, x, t, fv_t, active, used, renames),
            subst_rec(a, x, t, fv_t, active, used, renames),
        ),
        Expr::Let(env, body) => {
            let inner = active && env.iter().all(|(b, _)| b != x);
            let names: Vec<Var> = env.iter().map(|(b, _)| subst_binder(b, fv_t, inner, used, renames)).collect();
            let nenv = env
                .iter()
                .zip(names)
                .map(|((_, r), nb)| (nb, subst_rec(r, x, t, fv_t, inner, used, renames)))
                .collect();
            let nbody = subst_rec(body, x, t, fv_t, inner, used, renames);
            for (b, _) in env {
                pop_rename(renames, b);
            }
            Expr::Let(nenv, Box::new(nbody))
        }
        Expr::Ctor(c, args) => {
            Expr::Ctor(c.clone(), args.iter().map(|a| subst_rec(a, x, t, fv_t, active, used, renames)).collect())
        }
        Expr::Case(ty, s, alts) => {
            let ns = subst_rec(s, x, t, fv_t, active, used, renames);
            let nalts = alts
                .iter()
                .map(|alt| {
                    let inner = active && !alt.binders.contains(x);
                    let nbs: Vec<Var> =
                        alt.binders.iter().map(|b| subst_binder(b, fv_t, inner, used, renames)).collect();
                    let body = subst_rec(&alt.body, x, t, fv_t, inner, used, renames);
                    for b in &alt.binders {
                        pop_rename(renames, b);
                    }
                    Alt { ctor: alt.ctor.clone(), binders: nbs, body }
                })
                .collect();
            Expr::Case(ty.clone(), Box::new(ns), nalts)
        }
    }
}

/// Replaces free variables by variables (a renaming), capture-free.
pub fn rename_free(e: &Expr, map: &BTreeMap<Var, Var>) -> Expr {
    let mut out = e.clone();
    for (from, to) in map {
        if from != to {
            out = substitute(&out, from, &Expr::Var(to.clone()));
        }
    }
    out
}
