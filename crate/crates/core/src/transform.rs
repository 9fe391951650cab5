//! The catalog of program transformations: matching inside a context class,
//! application, correctness metadata and the termination measure for `lll`.
//!
//! Union labels are resolved to their member rules when matching, so every
//! [`RedexMatch`] names a member rule. Rules that move a subterm under other
//! binders skip instances where a free variable would be captured.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::TransformError;
use crate::syntax::{
    alpha_equiv, binders_above, free_occurrences, free_vars, positions, position_in_class, rename_free, replace_at,
    subterm, Alt, ContextClass, Expr, NameSupply, Position, Step, Var,
};

/// Transformation labels: member rules and unions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum TransformationId {
    Lbeta,
    Lapp,
    CpIn,
    CpE,
    LletIn,
    LletE,
    CpxIn,
    CpxE,
    Ucp1,
    Ucp2,
    Ucp3,
    Xch,
    Gc1,
    Gc2,
    Probid,
    Probcomm,
    Probassoc,
    Probdistr,
    Probreorder,
    SeqC,
    SeqIn,
    SeqE,
    CaseC,
    CaseIn,
    CaseE,
    Lcase,
    Lseq,
    CpcxIn,
    CpcxE,
    Abs,
    // Unions.
    Cpx,
    Llet,
    Lll,
    Gc,
    Ucp,
    Cp,
    Cpd,
    CpS,
    Cpcx,
    Case,
    Seq,
    Lacs,
}

use TransformationId as T;

impl TransformationId {
    pub const ALL: [TransformationId; 42] = [
        T::Lbeta,
        T::Lapp,
        T::CpIn,
        T::CpE,
        T::LletIn,
        T::LletE,
        T::CpxIn,
        T::CpxE,
        T::Ucp1,
        T::Ucp2,
        T::Ucp3,
        T::Xch,
        T::Gc1,
        T::Gc2,
        T::Probid,
        T::Probcomm,
        T::Probassoc,
        T::Probdistr,
        T::Probreorder,
        T::SeqC,
        T::SeqIn,
        T::SeqE,
        T::CaseC,
        T::CaseIn,
        T::CaseE,
        T::Lcase,
        T::Lseq,
        T::CpcxIn,
        T::CpcxE,
        T::Abs,
        T::Cpx,
        T::Llet,
        T::Lll,
        T::Gc,
        T::Ucp,
        T::Cp,
        T::Cpd,
        T::CpS,
        T::Cpcx,
        T::Case,
        T::Seq,
        T::Lacs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            T::Lbeta => "lbeta",
            T::Lapp => "lapp",
            T::CpIn => "cp-in",
            T::CpE => "cp-e",
            T::LletIn => "llet-in",
            T::LletE => "llet-e",
            T::CpxIn => "cpx-in",
            T::CpxE => "cpx-e",
            T::Ucp1 => "ucp-1",
            T::Ucp2 => "ucp-2",
            T::Ucp3 => "ucp-3",
            T::Xch => "xch",
            T::Gc1 => "gc-1",
            T::Gc2 => "gc-2",
            T::Probid => "probid",
            T::Probcomm => "probcomm",
            T::Probassoc => "probassoc",
            T::Probdistr => "probdistr",
            T::Probreorder => "probreorder",
            T::SeqC => "seq-c",
            T::SeqIn => "seq-in",
            T::SeqE => "seq-e",
            T::CaseC => "case-c",
            T::CaseIn => "case-in",
            T::CaseE => "case-e",
            T::Lcase => "lcase",
            T::Lseq => "lseq",
            T::CpcxIn => "cpcx-in",
            T::CpcxE => "cpcx-e",
            T::Abs => "abs",
            T::Cpx => "cpx",
            T::Llet => "llet",
            T::Lll => "lll",
            T::Gc => "gc",
            T::Ucp => "ucp",
            T::Cp => "cp",
            T::Cpd => "cpd",
            T::CpS => "cpS",
            T::Cpcx => "cpcx",
            T::Case => "case",
            T::Seq => "seq",
            T::Lacs => "lacs",
        }
    }

    /// Member rules; a member rule is its own single member.
    pub fn members(self) -> &'static [TransformationId] {
        match self {
            T::Cpx => &[T::CpxIn, T::CpxE],
            T::Llet => &[T::LletIn, T::LletE],
            T::Lll => &[T::LletIn, T::LletE, T::Lapp, T::Lcase, T::Lseq],
            T::Lacs => &[T::Lapp, T::Lcase, T::Lseq],
            T::Gc => &[T::Gc1, T::Gc2],
            T::Ucp => &[T::Ucp1, T::Ucp2, T::Ucp3],
            T::Cp | T::Cpd | T::CpS => &[T::CpIn, T::CpE],
            T::Cpcx => &[T::CpcxIn, T::CpcxE],
            T::Case => &[T::CaseC, T::CaseIn, T::CaseE],
            T::Seq => &[T::SeqC, T::SeqIn, T::SeqE],
            T::Lbeta => &[T::Lbeta],
            T::Lapp => &[T::Lapp],
            T::CpIn => &[T::CpIn],
            T::CpE => &[T::CpE],
            T::LletIn => &[T::LletIn],
            T::LletE => &[T::LletE],
            T::CpxIn => &[T::CpxIn],
            T::CpxE => &[T::CpxE],
            T::Ucp1 => &[T::Ucp1],
            T::Ucp2 => &[T::Ucp2],
            T::Ucp3 => &[T::Ucp3],
            T::Xch => &[T::Xch],
            T::Gc1 => &[T::Gc1],
            T::Gc2 => &[T::Gc2],
            T::Probid => &[T::Probid],
            T::Probcomm => &[T::Probcomm],
            T::Probassoc => &[T::Probassoc],
            T::Probdistr => &[T::Probdistr],
            T::Probreorder => &[T::Probreorder],
            T::SeqC => &[T::SeqC],
            T::SeqIn => &[T::SeqIn],
            T::SeqE => &[T::SeqE],
            T::CaseC => &[T::CaseC],
            T::CaseIn => &[T::CaseIn],
            T::CaseE => &[T::CaseE],
            T::Lcase => &[T::Lcase],
            T::Lseq => &[T::Lseq],
            T::CpcxIn => &[T::CpcxIn],
            T::CpcxE => &[T::CpcxE],
            T::Abs => &[T::Abs],
        }
    }

    pub fn is_union(self) -> bool {
        self.members() != [self]
    }

    /// Rules that only match terms with constructors, `case` or `seq`.
    pub fn is_extended(self) -> bool {
        self.members().iter().all(|m| {
            matches!(
                m,
                T::SeqC | T::SeqIn | T::SeqE | T::CaseC | T::CaseIn | T::CaseE | T::Lcase | T::Lseq | T::CpcxIn | T::CpcxE | T::Abs
            )
        })
    }

    /// The algebraic laws of the choice operator.
    pub fn is_prob_law(self) -> bool {
        matches!(self, T::Probid | T::Probcomm | T::Probassoc | T::Probdistr | T::Probreorder)
    }
}

impl fmt::Display for TransformationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformationId {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cps" {
            return Ok(T::CpS);
        }
        T::ALL.iter().copied().find(|t| t.name() == s).ok_or_else(|| TransformError::UnknownRule(s.to_string()))
    }
}

/// Rule-specific data of a match.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Witness {
    /// The rule is determined by the redex alone.
    Redex,
    /// A let binding `binder` and a position below the redex: in the let body
    /// when `holder` is `None`, otherwise in the right-hand side of `holder`.
    /// The position addresses the replaced occurrence (or the `case`/`seq`
    /// node that inspects it).
    Occurrence { binder: Var, holder: Option<Var>, path: Position },
    /// The let binding the rule acts on (`llet-e`, `abs`).
    Binding(Var),
    /// `xch`: the variable-to-variable binding and its target.
    Exchange { from: Var, to: Var },
    /// `gc-1`: the removed bindings.
    Dropped(Vec<Var>),
}

/// A transformation instance inside a term.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RedexMatch {
    /// Always a member rule.
    pub rule: TransformationId,
    pub site: Position,
    pub witness: Witness,
}

impl fmt::Display for RedexMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.rule, self.site)?;
        match &self.witness {
            Witness::Redex => Ok(()),
            Witness::Occurrence { binder, holder: None, path } => write!(f, " ({binder} -> body.{path})"),
            Witness::Occurrence { binder, holder: Some(h), path } => write!(f, " ({binder} -> bind({h}).{path})"),
            Witness::Binding(x) => write!(f, " ({x})"),
            Witness::Exchange { from, to } => write!(f, " ({from} <-> {to})"),
            Witness::Dropped(xs) => {
                let names: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, " (drop {})", names.join(", "))
            }
        }
    }
}

/// All instances of `t` whose redex sits at a position of class `cls`, in
/// position order.
pub fn match_sites(e: &Expr, t: TransformationId, cls: ContextClass) -> Vec<RedexMatch> {
    let mut out = Vec::new();
    for site in positions(e) {
        if !position_in_class(e, &site, cls) {
            continue;
        }
        let node = subterm(e, &site).expect("listed position");
        for &rule in t.members() {
            for witness in match_node(node, rule) {
                if !union_filter(t, node, &witness) {
                    continue;
                }
                out.push(RedexMatch { rule, site: site.clone(), witness });
            }
        }
    }
    out
}

/// `cpd` and `cpS` split `cp` by whether the path to the copy target crosses
/// a lambda.
fn union_filter(t: TransformationId, node: &Expr, w: &Witness) -> bool {
    let Witness::Occurrence { holder, path, .. } = w else { return true };
    let surface = || {
        let Expr::Let(env, body) = node else { return false };
        match holder {
            None => surface_in(body, path),
            Some(h) => env_lookup(env, h).is_some_and(|r| surface_in(r, path)),
        }
    };
    match t {
        T::Cpd => !surface(),
        T::CpS => surface(),
        _ => true,
    }
}

/// Rewrites `e` with a match produced by [`match_sites`] on the same term.
pub fn apply(e: &Expr, m: &RedexMatch) -> Result<Expr, TransformError> {
    let node = subterm(e, &m.site)?;
    if !match_node(node, m.rule).contains(&m.witness) {
        return Err(TransformError::StaleMatch(m.to_string()));
    }
    let mut supply = NameSupply::from_expr(e);
    let new = rewrite(node, m.rule, &m.witness, &mut supply);
    Ok(replace_at(e, &m.site, new)?)
}

// ---------------------------------------------------------------------------
// Matching

fn env_lookup<'a>(env: &'a [(Var, Expr)], x: &Var) -> Option<&'a Expr> {
    env.iter().find(|(y, _)| y == x).map(|(_, r)| r)
}

fn env_fv(env: &[(Var, Expr)]) -> BTreeSet<Var> {
    env.iter().flat_map(|(_, r)| free_vars(r)).collect()
}

fn env_fv_except(env: &[(Var, Expr)], skip: &[&Var]) -> BTreeSet<Var> {
    env.iter().filter(|(y, _)| !skip.contains(&y)).flat_map(|(_, r)| free_vars(r)).collect()
}

/// The occurrence's own free variables would not be captured by binders
/// between `root` and `path`.
fn no_capture(root: &Expr, path: &Position, inserted_fv: &BTreeSet<Var>) -> bool {
    match binders_above(root, path) {
        Ok(bs) => bs.is_disjoint(inserted_fv),
        Err(_) => false,
    }
}

/// Positions in `root` without a lambda-body step on the way.
fn surface_in(root: &Expr, path: &Position) -> bool {
    let mut cur = root;
    for step in &path.0 {
        if matches!((cur, step), (Expr::Lam(..), Step::Body)) {
            return false;
        }
        cur = match crate::syntax::child_steps(cur).into_iter().find(|(s, _)| s == step) {
            Some((_, c)) => c,
            None => return false,
        };
    }
    true
}

/// Free occurrences of `x` in `root` whose parent node satisfies `parent`.
fn occurrences_with_parent(root: &Expr, x: &Var, want: impl Fn(&Expr, &Step) -> bool) -> Vec<Position> {
    free_occurrences(root, x)
        .into_iter()
        .filter_map(|p| {
            let parent = p.parent()?;
            let node = subterm(root, &parent).ok()?;
            want(node, p.0.last()?).then_some(parent)
        })
        .collect()
}

fn match_node(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let redex = |ok: bool| if ok { vec![Witness::Redex] } else { vec![] };
    match rule {
        T::Lbeta => redex(matches!(node, Expr::App(f, _) if f.is_lam())),
        T::Lapp => redex(matches!(node, Expr::App(f, _) if matches!(**f, Expr::Let(..)))),
        T::Lcase => redex(matches!(node, Expr::Case(_, s, _) if matches!(**s, Expr::Let(..)))),
        T::Lseq => redex(matches!(node, Expr::Seq(s, _) if matches!(**s, Expr::Let(..)))),
        T::LletIn => redex(matches!(node, Expr::Let(_, b) if matches!(**b, Expr::Let(..)))),
        T::LletE => match node {
            Expr::Let(env, _) => env
                .iter()
                .filter(|(_, r)| matches!(r, Expr::Let(..)))
                .map(|(x, _)| Witness::Binding(x.clone()))
                .collect(),
            _ => vec![],
        },
        T::Probid => redex(matches!(node, Expr::Choice(l, r) if alpha_equiv(l, r))),
        T::Probcomm => redex(matches!(node, Expr::Choice(..))),
        T::Probassoc | T::Probdistr => redex(matches!(node, Expr::Choice(_, r) if matches!(**r, Expr::Choice(..)))),
        T::Probreorder => redex(matches!(
            node,
            Expr::Choice(l, r) if matches!(**l, Expr::Choice(..)) && matches!(**r, Expr::Choice(..))
        )),
        T::SeqC => redex(matches!(node, Expr::Seq(v, _) if v.is_lam() || v.is_ctor())),
        T::CaseC => redex(matches!(
            node,
            Expr::Case(_, s, alts) if matches!(&**s, Expr::Ctor(c, _) if alts.iter().any(|a| a.ctor == *c))
        )),
        T::CpIn | T::CpxIn | T::CpcxIn => match_copy_in(node, rule),
        T::CpE | T::CpxE | T::CpcxE => match_copy_e(node, rule),
        T::Ucp1 | T::Ucp3 => match_ucp_body(node, rule),
        T::Ucp2 => match_ucp2(node),
        T::Xch => match node {
            Expr::Let(env, _) => env
                .iter()
                .filter_map(|(x, r)| {
                    let y = r.as_var()?;
                    (y != x && env_lookup(env, y).is_some())
                        .then(|| Witness::Exchange { from: x.clone(), to: y.clone() })
                })
                .collect(),
            _ => vec![],
        },
        T::Gc1 => match_gc1(node),
        T::Gc2 => match node {
            Expr::Let(env, body) => {
                let fv = free_vars(body);
                redex(env.iter().all(|(x, _)| !fv.contains(x)))
            }
            _ => vec![],
        },
        T::CaseIn | T::SeqIn => match_inspect_in(node, rule),
        T::CaseE | T::SeqE => match_inspect_e(node, rule),
        T::Abs => match node {
            Expr::Let(env, _) => env
                .iter()
                .filter(|(_, r)| matches!(r, Expr::Ctor(_, args) if !args.is_empty()))
                .map(|(x, _)| Witness::Binding(x.clone()))
                .collect(),
            _ => vec![],
        },
        _ => vec![],
    }
}

/// Whether a binding right-hand side is the kind copied by `rule`.
fn copy_source(rule: TransformationId, x: &Var, rhs: &Expr) -> Option<BTreeSet<Var>> {
    match (rule, rhs) {
        (T::CpIn | T::CpE, Expr::Lam(..)) => Some(free_vars(rhs)),
        (T::CpxIn | T::CpxE, Expr::Var(y)) if y != x => Some(std::iter::once(y.clone()).collect()),
        (T::CpcxIn | T::CpcxE, Expr::Ctor(..)) => Some(BTreeSet::new()),
        _ => None,
    }
}

fn match_copy_in(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let Expr::Let(env, body) = node else { return vec![] };
    let mut out = Vec::new();
    for (x, rhs) in env {
        let Some(fv) = copy_source(rule, x, rhs) else { continue };
        for path in free_occurrences(body, x) {
            if no_capture(body, &path, &fv) {
                out.push(Witness::Occurrence { binder: x.clone(), holder: None, path });
            }
        }
    }
    out
}

fn match_copy_e(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let Expr::Let(env, _) = node else { return vec![] };
    let mut out = Vec::new();
    for (y, rhs) in env {
        let Some(fv) = copy_source(rule, y, rhs) else { continue };
        for (x, target) in env {
            if x == y {
                continue;
            }
            for path in free_occurrences(target, y) {
                if no_capture(target, &path, &fv) {
                    out.push(Witness::Occurrence { binder: y.clone(), holder: Some(x.clone()), path });
                }
            }
        }
    }
    out
}

fn match_ucp_body(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let Expr::Let(env, body) = node else { return vec![] };
    if (rule == T::Ucp3) != (env.len() == 1) {
        return vec![];
    }
    let mut out = Vec::new();
    for (x, t) in env {
        let fv_t = free_vars(t);
        if fv_t.contains(x) || env_fv_except(env, &[x]).contains(x) {
            continue;
        }
        let occ = free_occurrences(body, x);
        if occ.len() != 1 || !surface_in(body, &occ[0]) || !no_capture(body, &occ[0], &fv_t) {
            continue;
        }
        out.push(Witness::Occurrence { binder: x.clone(), holder: None, path: occ[0].clone() });
    }
    out
}

fn match_ucp2(node: &Expr) -> Vec<Witness> {
    let Expr::Let(env, body) = node else { return vec![] };
    let mut out = Vec::new();
    for (x, t) in env {
        let fv_t = free_vars(t);
        if fv_t.contains(x) || free_vars(body).contains(x) {
            continue;
        }
        for (y, target) in env {
            if y == x || env_fv_except(env, &[x, y]).contains(x) {
                continue;
            }
            let occ = free_occurrences(target, x);
            if occ.len() != 1 || !surface_in(target, &occ[0]) || !no_capture(target, &occ[0], &fv_t) {
                continue;
            }
            out.push(Witness::Occurrence { binder: x.clone(), holder: Some(y.clone()), path: occ[0].clone() });
        }
    }
    out
}

/// `gc-1` instances: the set of all bindings unreachable from the body, and
/// every single binding referenced by nothing else, as long as some binding
/// remains.
/// Above this many unreachable bindings gc-1 offers only the maximal part
/// and single bindings.
const GC_SUBSET_LIMIT: usize = 6;

fn match_gc1(node: &Expr) -> Vec<Witness> {
    let Expr::Let(env, body) = node else { return vec![] };
    let mut reachable: BTreeSet<Var> = BTreeSet::new();
    let mut todo: Vec<Var> = free_vars(body).into_iter().collect();
    while let Some(v) = todo.pop() {
        if let Some(r) = env_lookup(env, &v) {
            if reachable.insert(v) {
                todo.extend(free_vars(r));
            }
        }
    }
    let unreachable: Vec<Var> = env.iter().map(|(x, _)| x.clone()).filter(|x| !reachable.contains(x)).collect();
    let mut candidates: Vec<Vec<Var>> = Vec::new();
    let mut consider = |dropped: Vec<Var>| {
        let kept: Vec<Var> = env.iter().map(|(x, _)| x.clone()).filter(|x| !dropped.contains(x)).collect();
        if dropped.is_empty() || kept.is_empty() || candidates.contains(&dropped) {
            return;
        }
        let dropped_refs: Vec<&Var> = dropped.iter().collect();
        if env_fv_except(env, &dropped_refs).iter().any(|v| dropped.contains(v)) {
            return;
        }
        candidates.push(dropped);
    };
    if unreachable.len() <= GC_SUBSET_LIMIT {
        // Every removable part, largest first.
        let mut masks: Vec<u32> = (1..1u32 << unreachable.len()).collect();
        masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), *m));
        for m in masks {
            consider(unreachable.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, x)| x.clone()).collect());
        }
    } else {
        consider(unreachable.clone());
        for x in &unreachable {
            consider(vec![x.clone()]);
        }
    }
    candidates.into_iter().map(Witness::Dropped).collect()
}

/// Positions of `case x` / `seq x` nodes whose inspected variable is `x`.
fn inspections(root: &Expr, x: &Var, rule: TransformationId) -> Vec<Position> {
    occurrences_with_parent(root, x, |parent, step| {
        matches!(
            (rule, parent, step),
            (T::CaseIn | T::CaseE, Expr::Case(..), Step::Scrut) | (T::SeqIn | T::SeqE, Expr::Seq(..), Step::SeqFirst)
        )
    })
}

fn case_matches_ctor(root: &Expr, path: &Position, ctor: &str) -> bool {
    match subterm(root, path) {
        Ok(Expr::Case(_, _, alts)) => alts.iter().any(|a| &*a.ctor == ctor),
        Ok(Expr::Seq(..)) => true,
        _ => false,
    }
}

fn match_inspect_in(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let Expr::Let(env, body) = node else { return vec![] };
    let mut out = Vec::new();
    for (x, rhs) in env {
        let Expr::Ctor(c, _) = rhs else { continue };
        for path in inspections(body, x, rule) {
            if case_matches_ctor(body, &path, c) {
                out.push(Witness::Occurrence { binder: x.clone(), holder: None, path });
            }
        }
    }
    out
}

fn match_inspect_e(node: &Expr, rule: TransformationId) -> Vec<Witness> {
    let Expr::Let(env, _) = node else { return vec![] };
    let mut out = Vec::new();
    for (z, rhs) in env {
        let Expr::Ctor(c, _) = rhs else { continue };
        for (x, target) in env {
            if x == z {
                continue;
            }
            for path in inspections(target, z, rule) {
                if case_matches_ctor(target, &path, c) {
                    out.push(Witness::Occurrence { binder: z.clone(), holder: Some(x.clone()), path });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Rewriting

/// Renames those `binders` that occur in `avoid` throughout `scoped`.
fn rename_clashing(
    binders: &[Var],
    scoped: Vec<Expr>,
    avoid: &BTreeSet<Var>,
    supply: &mut NameSupply,
) -> (Vec<Var>, Vec<Expr>) {
    let mut map = std::collections::BTreeMap::new();
    let renamed: Vec<Var> = binders
        .iter()
        .map(|b| {
            if avoid.contains(b) {
                let nb = supply.fresh(b);
                map.insert(b.clone(), nb.clone());
                nb
            } else {
                b.clone()
            }
        })
        .collect();
    if map.is_empty() {
        return (renamed, scoped);
    }
    (renamed, scoped.iter().map(|e| rename_free(e, &map)).collect())
}

fn split_env(env: &[(Var, Expr)]) -> (Vec<Var>, Vec<Expr>) {
    env.iter().cloned().unzip()
}

/// Floats `let env in s` out of a surrounding node; `rebuild` puts the body
/// back into that node. `outside_fv` are the free variables of the rest of
/// the node, which must not be captured.
fn float_let(
    env: &[(Var, Expr)],
    s: &Expr,
    outside_fv: BTreeSet<Var>,
    supply: &mut NameSupply,
    rebuild: impl FnOnce(Expr) -> Expr,
) -> Expr {
    let (names, mut scoped) = split_env(env);
    scoped.push(s.clone());
    let (names, mut scoped) = rename_clashing(&names, scoped, &outside_fv, supply);
    let body = scoped.pop().expect("body pushed");
    Expr::Let(names.into_iter().zip(scoped).collect(), Box::new(rebuild(body)))
}

fn fresh_shares(base: &str, n: usize, supply: &mut NameSupply) -> Vec<Var> {
    (0..n).map(|_| supply.fresh(&Var::new(base))).collect()
}

/// `x = c y1..yn, y1 = s1, ..., yn = sn` for a constructor binding.
fn abstract_ctor(c: &std::sync::Arc<str>, args: &[Expr], base: &str, supply: &mut NameSupply) -> (Expr, Vec<(Var, Expr)>) {
    let ys = fresh_shares(base, args.len(), supply);
    let skeleton = Expr::Ctor(c.clone(), ys.iter().map(|y| Expr::Var(y.clone())).collect());
    (skeleton, ys.into_iter().zip(args.iter().cloned()).collect())
}

fn set_binding(env: &mut [(Var, Expr)], x: &Var, new: Expr) {
    if let Some(slot) = env.iter_mut().find(|(y, _)| y == x) {
        slot.1 = new;
    }
}

fn edit_at(root: &Expr, path: &Position, f: impl FnOnce(&Expr) -> Expr) -> Expr {
    let old = subterm(root, path).expect("matched position");
    replace_at(root, path, f(old)).expect("matched position")
}

/// Body of the alternative for constructor `c` with its binders bound to
/// `shares` in a let.
fn select_alternative(alts: &[Alt], c: &str, shares: &[Var]) -> Expr {
    let alt = alts.iter().find(|a| &*a.ctor == c).expect("matched alternative");
    Expr::let_in(
        alt.binders.iter().cloned().zip(shares.iter().map(|z| Expr::Var(z.clone()))).collect(),
        alt.body.clone(),
    )
}

fn rewrite(node: &Expr, rule: TransformationId, w: &Witness, supply: &mut NameSupply) -> Expr {
    match (rule, node) {
        (T::Lbeta, Expr::App(f, t)) => {
            let Expr::Lam(x, s) = &**f else { unreachable!("matched lbeta") };
            let (xs, mut body) = rename_clashing(std::slice::from_ref(x), vec![(**s).clone()], &free_vars(t), supply);
            Expr::Let(vec![(xs[0].clone(), (**t).clone())], Box::new(body.pop().expect("one body")))
        }
        (T::Lapp, Expr::App(f, t)) => {
            let Expr::Let(env, s) = &**f else { unreachable!("matched lapp") };
            float_let(env, s, free_vars(t), supply, |s| Expr::app(s, (**t).clone()))
        }
        (T::Lcase, Expr::Case(ty, scrut, alts)) => {
            let Expr::Let(env, s) = &**scrut else { unreachable!("matched lcase") };
            let rest = Expr::Case(ty.clone(), Box::new(Expr::Ctor("".into(), vec![])), alts.clone());
            float_let(env, s, free_vars(&rest), supply, |s| Expr::Case(ty.clone(), Box::new(s), alts.clone()))
        }
        (T::Lseq, Expr::Seq(first, t)) => {
            let Expr::Let(env, s) = &**first else { unreachable!("matched lseq") };
            float_let(env, s, free_vars(t), supply, |s| Expr::seq(s, (**t).clone()))
        }
        (T::LletIn, Expr::Let(env1, inner)) => {
            let Expr::Let(env2, s) = &**inner else { unreachable!("matched llet-in") };
            let mut avoid = env_fv(env1);
            avoid.extend(env1.iter().map(|(x, _)| x.clone()));
            let (names, mut scoped) = split_env(env2);
            scoped.push((**s).clone());
            let (names, mut scoped) = rename_clashing(&names, scoped, &avoid, supply);
            let body = scoped.pop().expect("body pushed");
            let mut env = env1.clone();
            env.extend(names.into_iter().zip(scoped));
            Expr::Let(env, Box::new(body))
        }
        (T::LletE, Expr::Let(env2, t)) => {
            let Witness::Binding(x) = w else { unreachable!("llet-e witness") };
            let Some(Expr::Let(env1, s)) = env_lookup(env2, x) else { unreachable!("matched llet-e") };
            let mut avoid: BTreeSet<Var> = env2.iter().filter(|(y, _)| y != x).flat_map(|(_, r)| free_vars(r)).collect();
            avoid.extend(free_vars(t));
            avoid.extend(env2.iter().map(|(y, _)| y.clone()));
            let (names, mut scoped) = split_env(env1);
            scoped.push((**s).clone());
            let (names, mut scoped) = rename_clashing(&names, scoped, &avoid, supply);
            let s = scoped.pop().expect("body pushed");
            let mut env = Vec::with_capacity(env1.len() + env2.len());
            for (y, r) in env2 {
                if y == x {
                    env.push((x.clone(), s.clone()));
                    env.extend(names.iter().cloned().zip(scoped.iter().cloned()));
                } else {
                    env.push((y.clone(), r.clone()));
                }
            }
            Expr::Let(env, t.clone())
        }
        (T::CpIn | T::CpxIn | T::CpcxIn | T::CpE | T::CpxE | T::CpcxE, Expr::Let(env, body)) => {
            let Witness::Occurrence { binder, holder, path } = w else { unreachable!("copy witness") };
            let source = env_lookup(env, binder).expect("matched binding").clone();
            let mut env = env.clone();
            let (copy, extra) = match (&source, rule) {
                (Expr::Ctor(c, args), T::CpcxIn | T::CpcxE) => {
                    let (skeleton, shares) = abstract_ctor(c, args, "y", supply);
                    set_binding(&mut env, binder, skeleton.clone());
                    (skeleton, shares)
                }
                (Expr::Lam(..), _) => (supply.rename_binders(&source), vec![]),
                _ => (source.clone(), vec![]),
            };
            let new_body = match holder {
                None => edit_at(body, path, |_| copy),
                Some(h) => {
                    let target = env_lookup(&env, h).expect("matched holder").clone();
                    set_binding(&mut env, h, edit_at(&target, path, |_| copy));
                    (**body).clone()
                }
            };
            insert_after(&mut env, binder, extra);
            Expr::Let(env, Box::new(new_body))
        }
        (T::Ucp1 | T::Ucp3 | T::Ucp2, Expr::Let(env, body)) => {
            let Witness::Occurrence { binder, holder, path } = w else { unreachable!("ucp witness") };
            let t = env_lookup(env, binder).expect("matched binding").clone();
            let mut rest: Vec<(Var, Expr)> = env.iter().filter(|(y, _)| y != binder).cloned().collect();
            match holder {
                None => Expr::let_in(rest, edit_at(body, path, |_| t)),
                Some(h) => {
                    let target = env_lookup(&rest, h).expect("matched holder").clone();
                    set_binding(&mut rest, h, edit_at(&target, path, |_| t));
                    Expr::Let(rest, body.clone())
                }
            }
        }
        (T::Xch, Expr::Let(env, body)) => {
            let Witness::Exchange { from, to } = w else { unreachable!("xch witness") };
            let s = env_lookup(env, to).expect("matched binding").clone();
            let mut env = env.clone();
            set_binding(&mut env, from, s);
            set_binding(&mut env, to, Expr::Var(from.clone()));
            Expr::Let(env, body.clone())
        }
        (T::Gc1, Expr::Let(env, body)) => {
            let Witness::Dropped(xs) = w else { unreachable!("gc-1 witness") };
            Expr::Let(env.iter().filter(|(x, _)| !xs.contains(x)).cloned().collect(), body.clone())
        }
        (T::Gc2, Expr::Let(_, body)) => (**body).clone(),
        (T::Probid, Expr::Choice(l, _)) => (**l).clone(),
        (T::Probcomm, Expr::Choice(l, r)) => Expr::choice((**r).clone(), (**l).clone()),
        (T::Probassoc, Expr::Choice(r, st)) => {
            let Expr::Choice(s, t) = &**st else { unreachable!("matched probassoc") };
            Expr::choice(Expr::choice((**r).clone(), (**s).clone()), (**t).clone())
        }
        (T::Probdistr, Expr::Choice(r, st)) => {
            let Expr::Choice(s, t) = &**st else { unreachable!("matched probdistr") };
            let r2 = supply.rename_binders(r);
            Expr::choice(Expr::choice((**r).clone(), (**s).clone()), Expr::choice(r2, (**t).clone()))
        }
        (T::Probreorder, Expr::Choice(l, r)) => {
            let (Expr::Choice(s1, s2), Expr::Choice(t1, t2)) = (&**l, &**r) else { unreachable!("matched probreorder") };
            Expr::choice(
                Expr::choice((**s1).clone(), (**t1).clone()),
                Expr::choice((**s2).clone(), (**t2).clone()),
            )
        }
        (T::SeqC, Expr::Seq(_, t)) => (**t).clone(),
        (T::CaseC, Expr::Case(_, scrut, alts)) => {
            let Expr::Ctor(c, args) = &**scrut else { unreachable!("matched case-c") };
            let alt = alts.iter().find(|a| a.ctor == *c).expect("matched alternative");
            let avoid: BTreeSet<Var> = args.iter().flat_map(free_vars).collect();
            let (names, mut scoped) = rename_clashing(&alt.binders, vec![alt.body.clone()], &avoid, supply);
            let body = scoped.pop().expect("one body");
            Expr::let_in(names.into_iter().zip(args.iter().cloned()).collect(), body)
        }
        (T::CaseIn | T::SeqIn | T::CaseE | T::SeqE, Expr::Let(env, body)) => {
            let Witness::Occurrence { binder, holder, path } = w else { unreachable!("inspection witness") };
            let Some(Expr::Ctor(c, args)) = env_lookup(env, binder).cloned() else { unreachable!("matched ctor") };
            let mut env = env.clone();
            let is_case = matches!(rule, T::CaseIn | T::CaseE);
            let mut extra = vec![];
            let replace = |node: &Expr, shares: &[Var]| match node {
                Expr::Case(_, _, alts) => select_alternative(alts, &c, shares),
                Expr::Seq(_, t) => (**t).clone(),
                _ => unreachable!("inspection node"),
            };
            let shares = if is_case {
                let base = if rule == T::CaseIn { "z" } else { "w" };
                let (skeleton, binds) = abstract_ctor(&c, &args, base, supply);
                set_binding(&mut env, binder, skeleton);
                let shares: Vec<Var> = binds.iter().map(|(v, _)| v.clone()).collect();
                extra = binds;
                shares
            } else {
                vec![]
            };
            let new_body = match holder {
                None => edit_at(body, path, |n| replace(n, &shares)),
                Some(h) => {
                    let target = env_lookup(&env, h).expect("matched holder").clone();
                    set_binding(&mut env, h, edit_at(&target, path, |n| replace(n, &shares)));
                    (**body).clone()
                }
            };
            insert_after(&mut env, binder, extra);
            Expr::Let(env, Box::new(new_body))
        }
        (T::Abs, Expr::Let(env, body)) => {
            let Witness::Binding(x) = w else { unreachable!("abs witness") };
            let Some(Expr::Ctor(c, args)) = env_lookup(env, x).cloned() else { unreachable!("matched abs") };
            let (skeleton, shares) = abstract_ctor(&c, &args, "y", supply);
            let mut env = env.clone();
            set_binding(&mut env, x, skeleton);
            insert_after(&mut env, x, shares);
            Expr::Let(env, body.clone())
        }
        _ => unreachable!("rewrite called on a non-matching node"),
    }
}

fn insert_after(env: &mut Vec<(Var, Expr)>, x: &Var, extra: Vec<(Var, Expr)>) {
    if extra.is_empty() {
        return;
    }
    let at = env.iter().position(|(y, _)| y == x).map(|i| i + 1).unwrap_or(env.len());
    env.splice(at..at, extra);
}

// ---------------------------------------------------------------------------
// Metadata and measures

/// Correctness status of a transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correctness {
    Yes,
    No,
    NotClaimed,
}

impl fmt::Display for Correctness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correctness::Yes => "yes",
            Correctness::No => "no",
            Correctness::NotClaimed => "not-claimed",
        })
    }
}

/// Static facts about a transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformationMetadata {
    pub correct: Correctness,
    /// The evaluations before and after the step have the same
    /// prob-sequences.
    pub preserves_prob_sequences: bool,
    /// The catalog contains a rule that syntactically undoes the step.
    pub direction_invertible: bool,
}

pub fn transformation_metadata(t: TransformationId) -> TransformationMetadata {
    let correct = if t == T::Probassoc { Correctness::No } else { Correctness::Yes };
    let preserves_prob_sequences = !t.members().iter().any(|m| m.is_prob_law());
    let direction_invertible = matches!(t, T::Probcomm | T::Probreorder | T::Xch | T::Abs);
    TransformationMetadata { correct, preserves_prob_sequences, direction_invertible }
}

/// The polynomial measure used for termination of `lll`: variables count 1,
/// abstraction adds 1, the function part and let environments count double.
pub fn lm_measure(e: &Expr) -> u64 {
    match e {
        Expr::Var(_) => 1,
        Expr::Lam(_, s) => 1 + lm_measure(s),
        Expr::App(s, t) => 2 * lm_measure(s) + lm_measure(t),
        Expr::Choice(s, t) => 1 + lm_measure(s) + lm_measure(t),
        Expr::Let(env, s) => 2 * env.iter().map(|(_, r)| lm_measure(r)).sum::<u64>() + lm_measure(s),
        Expr::Ctor(_, args) => 1 + args.iter().map(lm_measure).sum::<u64>(),
        Expr::Case(_, s, alts) => 2 * lm_measure(s) + alts.iter().map(|a| lm_measure(&a.body)).sum::<u64>(),
        Expr::Seq(s, t) => 2 * lm_measure(s) + lm_measure(t),
    }
}

/// `(number of lets, LM)`, compared lexicographically.
pub fn lmp_measure(e: &Expr) -> (u64, u64) {
    (e.let_count() as u64, lm_measure(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::print::print;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn only(e: &Expr, t: TransformationId, cls: ContextClass) -> RedexMatch {
        let ms = match_sites(e, t, cls);
        assert_eq!(ms.len(), 1, "{t}: {ms:?}");
        ms.into_iter().next().unwrap()
    }

    fn rewrite_once(src: &str, t: TransformationId) -> Expr {
        let e = p(src);
        let m = only(&e, t, ContextClass::C);
        apply(&e, &m).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for t in TransformationId::ALL {
            assert_eq!(t.name().parse::<TransformationId>().unwrap(), t);
        }
        assert!("nope".parse::<TransformationId>().is_err());
    }

    #[test]
    fn probid_needs_alpha_equal_arguments() {
        let e = p(r"(\x.x) <+> (\y.y)");
        let m = only(&e, T::Probid, ContextClass::C);
        assert!(m.site.is_root());
        assert!(alpha_equiv(&apply(&e, &m).unwrap(), &p(r"\z.z")));
        assert!(match_sites(&p("K <+> K2"), T::Probid, ContextClass::C).is_empty());
    }

    #[test]
    fn gc_drops_unused_binding() {
        let e = p(r"let x = K in \y.y");
        let ms = match_sites(&e, T::Gc, ContextClass::C);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].rule, T::Gc2);
        let e = p(r"let x = K, u = \y.y in u");
        let m = only(&e, T::Gc1, ContextClass::C);
        assert_eq!(m.witness, Witness::Dropped(vec![Var::new("x")]));
        assert!(alpha_equiv(&apply(&e, &m).unwrap(), &p(r"let u = \y.y in u")));
    }

    #[test]
    fn gc_1_keeps_referenced_bindings() {
        let e = p("let x = K, u = x in u");
        assert!(match_sites(&e, T::Gc1, ContextClass::C).is_empty());
    }

    #[test]
    fn ucp_3_single_surface_occurrence() {
        let e = p("let x = K in x");
        let m = only(&e, T::Ucp3, ContextClass::C);
        assert!(alpha_equiv(&apply(&e, &m).unwrap(), &p("K")));
        assert!(match_sites(&p(r"let x = K in \y.x"), T::Ucp, ContextClass::C).is_empty());
        assert!(match_sites(&p("let x = K in x x"), T::Ucp, ContextClass::C).is_empty());
    }

    #[test]
    fn prob_laws_rewrite_as_written() {
        assert_eq!(print(&rewrite_once("a <+> b", T::Probcomm)), "b <+> a");
        assert_eq!(print(&rewrite_once("r <+> (s <+> t)", T::Probdistr)), "(r <+> s) <+> (r <+> t)");
        assert_eq!(print(&rewrite_once("r <+> (s <+> t)", T::Probassoc)), "(r <+> s) <+> t");
        assert_eq!(
            print(&rewrite_once("(s1 <+> s2) <+> (t1 <+> t2)", T::Probreorder)),
            "(s1 <+> t1) <+> (s2 <+> t2)"
        );
    }

    #[test]
    fn xch_swaps_indirection() {
        let out = rewrite_once("let x = y, y = K in x", T::Xch);
        assert!(alpha_equiv(&out, &p("let x = K, y = x in x")));
    }

    #[test]
    fn lbeta_and_lapp() {
        assert!(alpha_equiv(&rewrite_once(r"(\x.x) K", T::Lbeta), &p("let x = K in x")));
        let out = rewrite_once(r"(let y = K in y) y", T::Lapp);
        assert!(alpha_equiv(&out, &p("let y1 = K in y1 y")), "{}", print(&out));
        assert_eq!(free_vars(&out), free_vars(&p("y")));
    }

    #[test]
    fn llet_flattens() {
        let out = rewrite_once("let x = K in let y = K2 in x y", T::LletIn);
        assert!(alpha_equiv(&out, &p("let x = K, y = K2 in x y")));
        let out = rewrite_once("let x = (let y = K in y) in x", T::LletE);
        assert!(alpha_equiv(&out, &p("let x = y, y = K in x")));
    }

    #[test]
    fn cp_copies_fresh_abstraction() {
        let e = p(r"let x = \y.y in x x");
        let ms = match_sites(&e, T::Cp, ContextClass::C);
        assert_eq!(ms.len(), 2);
        let out = apply(&e, &ms[0]).unwrap();
        assert!(alpha_equiv(&out, &p(r"let x = \y.y in (\z.z) x")));
        assert!(crate::syntax::obeys_convention(&out));
        let e = p(r"let x = \y.y, u = \v.x in K");
        assert_eq!(match_sites(&e, T::Cpd, ContextClass::C).len(), 1);
        assert!(match_sites(&e, T::CpS, ContextClass::C).is_empty());
        let e = p(r"let x = \y.y, u = x K in u");
        let m = only(&e, T::CpS, ContextClass::C);
        assert_eq!(m.rule, T::CpE);
    }

    #[test]
    fn cpx_replaces_with_target() {
        let out = rewrite_once("let x = y, y = K in x", T::CpxIn);
        assert!(alpha_equiv(&out, &p("let x = y, y = K in y")));
    }

    #[test]
    fn class_restriction_is_monotone() {
        let e = p(r"(\z.(let x = K in x) <+> K) ((\y.y) K)");
        for t in [T::Lbeta, T::Lll, T::Ucp, T::Probcomm] {
            let c = match_sites(&e, t, ContextClass::C).len();
            let s = match_sites(&e, t, ContextClass::S).len();
            let r = match_sites(&e, t, ContextClass::R).len();
            assert!(c >= s && s >= r, "{t}");
        }
        assert_eq!(match_sites(&e, T::Lbeta, ContextClass::R).len(), 1);
        assert_eq!(match_sites(&e, T::Lbeta, ContextClass::S).len(), 2);
    }

    #[test]
    fn stale_match_is_rejected() {
        let e = p("a <+> b");
        let m = only(&e, T::Probcomm, ContextClass::C);
        assert!(matches!(apply(&p("a"), &m), Err(TransformError::StaleMatch(_))));
    }

    #[test]
    fn extended_rules() {
        assert!(alpha_equiv(&rewrite_once(r"seq (\x.x) K", T::SeqC), &p("K")));
        assert!(alpha_equiv(&rewrite_once("case True of { False -> b; True -> a }", T::CaseC), &p("a")));
        assert!(alpha_equiv(
            &rewrite_once("case Cons a b of { Nil -> b; Cons h t -> h }", T::CaseC),
            &p("let h = a, t = b in h")
        ));
        assert!(alpha_equiv(
            &rewrite_once("case (let x = True in x) of { False -> b; True -> a }", T::Lcase),
            &p("let x = True in case x of { False -> b; True -> a }")
        ));
        let out = rewrite_once("let x = Cons a b in case x of { Nil -> b; Cons h t -> h }", T::CaseIn);
        assert!(alpha_equiv(&out, &p("let x = Cons z z1, z = a, z1 = b in let h = z, t = z1 in h")));
        let out = rewrite_once("let x = Cons a b in seq x K", T::SeqIn);
        assert!(alpha_equiv(&out, &p("let x = Cons a b in K")));
        let out = rewrite_once("let u = case x of { Nil -> b; Cons h t -> h }, x = Cons a b in u", T::CaseE);
        assert!(alpha_equiv(&out, &p("let u = (let h = w, t = w1 in h), x = Cons w w1, w = a, w1 = b in u")));
    }

    #[test]
    fn cpcx_and_abs() {
        let e = p("let x = Cons a b in seq x x");
        let ms = match_sites(&e, T::CpcxIn, ContextClass::C);
        assert_eq!(ms.len(), 2);
        let out = apply(&e, &ms[0]).unwrap();
        assert!(alpha_equiv(&out, &p("let x = Cons y1 y2, y1 = a, y2 = b in seq (Cons y1 y2) x")));
        let e = p("let x = Cons a b in x");
        let m = only(&e, T::Abs, ContextClass::C);
        let out = apply(&e, &m).unwrap();
        assert!(alpha_equiv(&out, &p("let x = Cons y1 y2, y1 = a, y2 = b in x")));
        let mut cur = out;
        for _ in 0..2 {
            let ms = match_sites(&cur, T::Ucp2, ContextClass::C);
            cur = apply(&cur, &ms[0]).unwrap();
        }
        assert!(alpha_equiv(&cur, &e));
    }

    #[test]
    fn metadata_table() {
        assert_eq!(transformation_metadata(T::Probassoc).correct, Correctness::No);
        assert_eq!(transformation_metadata(T::Probreorder).correct, Correctness::Yes);
        let lbeta = transformation_metadata(T::Lbeta);
        assert_eq!((lbeta.correct, lbeta.preserves_prob_sequences), (Correctness::Yes, true));
        assert!(!transformation_metadata(T::Probcomm).preserves_prob_sequences);
    }

    #[test]
    fn lm_base_cases() {
        assert_eq!(lm_measure(&p("x")), 1);
        assert_eq!(lm_measure(&p(r"\x.x")), 2);
        assert_eq!(lm_measure(&p("x y")), 3);
        assert_eq!(lmp_measure(&p("K")), (0, 3));
        assert_eq!(lmp_measure(&p("let x = K in x")).0, 1);
    }

    #[test]
    fn lapp_decreases_lm() {
        let e = p("(let x = K in x) y");
        let out = rewrite_once("(let x = K in x) y", T::Lapp);
        let (a, b) = (lmp_measure(&e), lmp_measure(&out));
        assert_eq!(a.0, b.0);
        assert!(b.1 < a.1);
    }
}
