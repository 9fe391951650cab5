//! Standard (call-by-need) reduction: one-step verdicts, deterministic runs
//! between choice points, and replay along a prob-sequence.
//!
//! The redex is found by descending the application spine (function,
//! `seq`-first and scrutinee positions) of the top-level term. Under a
//! top-level `let` the spine of the body is searched first, and a variable in
//! focus is resolved by following the needed chain of bindings with a visited
//! set, so cyclic chains are reported as blackholes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::syntax::{
    application_spine, freshen, subterm, subterm_mut, Expr, NameSupply, Position, Step, Var,
};

/// Labels of standard-reduction steps.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Rule {
    Lbeta,
    CpIn,
    CpE,
    LletIn,
    LletE,
    Lapp,
    Probl,
    Probr,
    CaseC,
    CaseIn,
    CaseE,
    Lcase,
    SeqC,
    SeqIn,
    SeqE,
    Lseq,
}

impl Rule {
    pub const ALL: [Rule; 16] = [
        Rule::Lbeta,
        Rule::CpIn,
        Rule::CpE,
        Rule::LletIn,
        Rule::LletE,
        Rule::Lapp,
        Rule::Probl,
        Rule::Probr,
        Rule::CaseC,
        Rule::CaseIn,
        Rule::CaseE,
        Rule::Lcase,
        Rule::SeqC,
        Rule::SeqIn,
        Rule::SeqE,
        Rule::Lseq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Lbeta => "lbeta",
            Rule::CpIn => "cp-in",
            Rule::CpE => "cp-e",
            Rule::LletIn => "llet-in",
            Rule::LletE => "llet-e",
            Rule::Lapp => "lapp",
            Rule::Probl => "probl",
            Rule::Probr => "probr",
            Rule::CaseC => "case-c",
            Rule::CaseIn => "case-in",
            Rule::CaseE => "case-e",
            Rule::Lcase => "lcase",
            Rule::SeqC => "seq-c",
            Rule::SeqIn => "seq-in",
            Rule::SeqE => "seq-e",
            Rule::Lseq => "lseq",
        }
    }

    pub fn is_prob(self) -> bool {
        matches!(self, Rule::Probl | Rule::Probr)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| format!("unknown reduction rule `{s}`"))
    }
}

/// Why no standard reduction applies to a non-WHNF.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StuckReason {
    /// The needed position holds a free variable.
    OpenVariable(Var),
    /// The needed chain of bindings is cyclic.
    Blackhole,
    /// `case`, `seq` or application meets a value of the wrong shape.
    IllTyped,
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::OpenVariable(v) => write!(f, "open variable {v}"),
            StuckReason::Blackhole => f.write_str("blackhole"),
            StuckReason::IllTyped => f.write_str("ill-typed"),
        }
    }
}

/// Result of one standard-reduction attempt.
#[derive(Clone, Debug)]
pub enum StepVerdict {
    Whnf,
    Stuck(StuckReason),
    Unique(Rule, Expr),
    /// Both successors of the choice at `redex`.
    ProbBranch { redex: Position, left: Expr, right: Expr },
}

/// A direction taken at a choice.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Dir {
    L,
    R,
}

impl Dir {
    pub fn rule(self) -> Rule {
        match self {
            Dir::L => Rule::Probl,
            Dir::R => Rule::Probr,
        }
    }
}

/// A word over `{L, R}`, ordered lexicographically with `L < R`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct ProbSeq(pub Vec<Dir>);

impl ProbSeq {
    pub fn empty() -> Self {
        ProbSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&self, d: Dir) -> Self {
        let mut v = self.0.clone();
        v.push(d);
        ProbSeq(v)
    }

    pub fn is_prefix_of(&self, other: &ProbSeq) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl fmt::Display for ProbSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for d in &self.0 {
            f.write_str(match d {
                Dir::L => "L",
                Dir::R => "R",
            })?;
        }
        Ok(())
    }
}

impl FromStr for ProbSeq {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "ε" || s == "eps" || s.is_empty() {
            return Ok(ProbSeq::empty());
        }
        s.chars()
            .map(|c| match c {
                'L' | 'l' => Ok(Dir::L),
                'R' | 'r' => Ok(Dir::R),
                other => Err(format!("invalid direction `{other}` (expected L or R)")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ProbSeq)
    }
}

/// Outcome of running deterministic steps until a choice point.
#[derive(Clone, Debug)]
pub enum DetOutcome {
    ReachedWhnf { term: Expr, trace: Vec<Rule> },
    ReachedStuck { term: Expr, reason: StuckReason, trace: Vec<Rule> },
    FuelExhausted { term: Expr, trace: Vec<Rule> },
    AtProb { term: Expr, redex: Position, left: Expr, right: Expr, trace: Vec<Rule> },
}

impl DetOutcome {
    pub fn trace(&self) -> &[Rule] {
        match self {
            DetOutcome::ReachedWhnf { trace, .. }
            | DetOutcome::ReachedStuck { trace, .. }
            | DetOutcome::FuelExhausted { trace, .. }
            | DetOutcome::AtProb { trace, .. } => trace,
        }
    }

    pub fn term(&self) -> &Expr {
        match self {
            DetOutcome::ReachedWhnf { term, .. }
            | DetOutcome::ReachedStuck { term, .. }
            | DetOutcome::FuelExhausted { term, .. }
            | DetOutcome::AtProb { term, .. } => term,
        }
    }
}

/// How a replay along a prob-sequence ended.
#[derive(Clone, Debug)]
pub enum ReplayEnd {
    Whnf,
    Stuck(StuckReason),
    FuelExhausted,
    /// A choice was reached after all directions were consumed.
    ChoicesExhausted,
}

/// Result of [`reduce_trace`].
#[derive(Clone, Debug)]
pub struct Replay {
    pub end: ReplayEnd,
    pub term: Expr,
    /// Directions consumed.
    pub consumed: usize,
    /// All applied rules, including `probl`/`probr`.
    pub trace: Vec<Rule>,
}

// ---------------------------------------------------------------------------
// Redex analysis

/// What the next standard-reduction step does.
#[derive(Clone, Debug, PartialEq)]
enum Action {
    Whnf,
    Stuck(StuckReason),
    LletIn,
    /// `App(Lam, t)` at the position.
    Lbeta(Position),
    /// `Seq(value, t)` at the position.
    SeqC(Position),
    /// `Case(Ctor, alts)` at the position.
    CaseC(Position),
    /// `App`/`Case`/`Seq` at the position whose first operand is a let.
    Float(Rule, Position),
    /// The binding's right-hand side is a let.
    LletE(Var),
    /// Copy the abstraction bound to `source` over the variable at `target`.
    Copy { rule: Rule, target: Position, source: Var },
    /// Case at `case_pos` over a variable whose chain ends in the constructor
    /// bound to `source`.
    CaseShare { rule: Rule, case_pos: Position, source: Var },
    /// Seq at `seq_pos` over a variable bound to a constructor.
    SeqShare { rule: Rule, seq_pos: Position },
    Prob(Position),
}

/// Where the spine stop node hangs, seen from its parent.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Parent {
    None,
    App,
    Seq,
    Case,
}

fn parent_of(spine: &Position) -> Parent {
    match spine.0.last() {
        None => Parent::None,
        Some(Step::Fun) => Parent::App,
        Some(Step::SeqFirst) => Parent::Seq,
        Some(Step::Scrut) => Parent::Case,
        Some(_) => unreachable!("spines only use fun, seq-first and scrut steps"),
    }
}

fn case_has_alt(case: &Expr, ctor: &str) -> bool {
    match case {
        Expr::Case(_, _, alts) => alts.iter().any(|a| &*a.ctor == ctor),
        _ => false,
    }
}

/// Rules for a non-variable stop node at `abs` (absolute position).
fn stop_action(e: &Expr, node: &Expr, abs: &Position, parent: Parent) -> Action {
    let parent_pos = || abs.parent().expect("non-root parent");
    match (node, parent) {
        (Expr::Lam(..), Parent::None) | (Expr::Ctor(..), Parent::None) => Action::Whnf,
        (Expr::Lam(..), Parent::App) => Action::Lbeta(parent_pos()),
        (Expr::Lam(..), Parent::Seq) | (Expr::Ctor(..), Parent::Seq) => Action::SeqC(parent_pos()),
        (Expr::Lam(..), Parent::Case) | (Expr::Ctor(..), Parent::App) => Action::Stuck(StuckReason::IllTyped),
        (Expr::Ctor(c, _), Parent::Case) => {
            let pp = parent_pos();
            if case_has_alt(subterm(e, &pp).expect("valid"), c) {
                Action::CaseC(pp)
            } else {
                Action::Stuck(StuckReason::IllTyped)
            }
        }
        (Expr::Choice(..), _) => Action::Prob(abs.clone()),
        (Expr::Let(..), Parent::App) => Action::Float(Rule::Lapp, parent_pos()),
        (Expr::Let(..), Parent::Case) => Action::Float(Rule::Lcase, parent_pos()),
        (Expr::Let(..), Parent::Seq) => Action::Float(Rule::Lseq, parent_pos()),
        (Expr::Let(..), Parent::None) => unreachable!("handled by llet rules"),
        (Expr::Var(_), _) | (Expr::App(..), _) | (Expr::Seq(..), _) | (Expr::Case(..), _) => {
            unreachable!("not a spine stop node")
        }
    }
}

fn analyze(e: &Expr) -> Action {
    let Expr::Let(env, body) = e else {
        let (spine, node) = application_spine(e);
        return match node {
            Expr::Var(v) => Action::Stuck(StuckReason::OpenVariable(v.clone())),
            _ => stop_action(e, node, &spine, parent_of(&spine)),
        };
    };
    if matches!(**body, Expr::Let(..)) {
        return Action::LletIn;
    }
    let (spine, node) = application_spine(body);
    let body_abs = Position(vec![Step::Body]).join(&spine);
    let Expr::Var(first) = node else {
        return stop_action(e, node, &body_abs, parent_of(&spine));
    };

    // The current site: the occurrence of the chain variable whose
    // surrounding application context is non-trivial.
    let mut site_abs = body_abs;
    let mut site_parent = parent_of(&spine);
    let mut site_in_body = true;
    let mut x = first.clone();
    let mut visited: BTreeSet<Var> = BTreeSet::new();
    loop {
        let Some((_, rhs)) = env.iter().find(|(y, _)| *y == x) else {
            return Action::Stuck(StuckReason::OpenVariable(x));
        };
        if !visited.insert(x.clone()) {
            return Action::Stuck(StuckReason::Blackhole);
        }
        let (rspine, rnode) = application_spine(rhs);
        let rabs = Position(vec![Step::Bind(x.clone())]).join(&rspine);
        let trivial = rspine.is_root();
        match rnode {
            Expr::Var(y) => {
                if !trivial {
                    site_abs = rabs;
                    site_parent = parent_of(&rspine);
                    site_in_body = false;
                }
                x = y.clone();
            }
            Expr::Lam(..) if trivial => {
                return match site_parent {
                    Parent::None if !site_in_body => unreachable!("binding sites have a parent"),
                    _ => Action::Copy {
                        rule: if site_in_body { Rule::CpIn } else { Rule::CpE },
                        target: site_abs,
                        source: x,
                    },
                };
            }
            Expr::Ctor(c, _) if trivial => {
                let parent_pos = || site_abs.parent().expect("site with parent");
                return match site_parent {
                    Parent::None => Action::Whnf,
                    Parent::App => Action::Stuck(StuckReason::IllTyped),
                    Parent::Seq => Action::SeqShare {
                        rule: if site_in_body { Rule::SeqIn } else { Rule::SeqE },
                        seq_pos: parent_pos(),
                    },
                    Parent::Case => {
                        let pp = parent_pos();
                        if case_has_alt(subterm(e, &pp).expect("valid"), c) {
                            Action::CaseShare {
                                rule: if site_in_body { Rule::CaseIn } else { Rule::CaseE },
                                case_pos: pp,
                                source: x,
                            }
                        } else {
                            Action::Stuck(StuckReason::IllTyped)
                        }
                    }
                };
            }
            Expr::Let(..) if trivial => return Action::LletE(x),
            _ => return stop_action(e, rnode, &rabs, parent_of(&rspine)),
        }
    }
}

// ---------------------------------------------------------------------------
// Applying actions in place

fn placeholder() -> Expr {
    Expr::Var(Var::new("_"))
}

fn take_at(e: &mut Expr, p: &Position) -> Expr {
    std::mem::replace(subterm_mut(e, p).expect("valid position"), placeholder())
}

fn put_at(e: &mut Expr, p: &Position, new: Expr) {
    *subterm_mut(e, p).expect("valid position") = new;
}

fn root_env(e: &mut Expr) -> &mut Vec<(Var, Expr)> {
    match e {
        Expr::Let(env, _) => env,
        _ => unreachable!("action requires a top-level let"),
    }
}

fn binding_rhs<'a>(e: &'a Expr, x: &Var) -> &'a Expr {
    match e {
        Expr::Let(env, _) => &env.iter().find(|(y, _)| y == x).expect("bound").1,
        _ => unreachable!("action requires a top-level let"),
    }
}

/// Applies a deterministic action; returns the rule label.
fn apply_action(e: &mut Expr, action: Action, supply: &mut NameSupply) -> Rule {
    match action {
        Action::LletIn => {
            let Expr::Let(env, body) = e else { unreachable!() };
            let Expr::Let(env2, inner) = std::mem::replace(&mut **body, placeholder()) else { unreachable!() };
            env.extend(env2);
            **body = *inner;
            Rule::LletIn
        }
        Action::Lbeta(p) => {
            let Expr::App(f, arg) = take_at(e, &p) else { unreachable!() };
            let Expr::Lam(x, s) = *f else { unreachable!() };
            put_at(e, &p, Expr::Let(vec![(x, *arg)], s));
            Rule::Lbeta
        }
        Action::SeqC(p) => {
            let Expr::Seq(_, t) = take_at(e, &p) else { unreachable!() };
            put_at(e, &p, *t);
            Rule::SeqC
        }
        Action::CaseC(p) => {
            let Expr::Case(_, scrut, alts) = take_at(e, &p) else { unreachable!() };
            let Expr::Ctor(c, args) = *scrut else { unreachable!() };
            let alt = alts.into_iter().find(|a| a.ctor == c).expect("checked");
            let env: Vec<(Var, Expr)> = alt.binders.into_iter().zip(args).collect();
            put_at(e, &p, Expr::let_in(env, alt.body));
            Rule::CaseC
        }
        Action::Float(rule, p) => {
            let node = take_at(e, &p);
            let rebuilt = match node {
                Expr::App(f, t) => {
                    let Expr::Let(env, s) = *f else { unreachable!() };
                    Expr::Let(env, Box::new(Expr::App(s, t)))
                }
                Expr::Seq(f, t) => {
                    let Expr::Let(env, s) = *f else { unreachable!() };
                    Expr::Let(env, Box::new(Expr::Seq(s, t)))
                }
                Expr::Case(ty, f, alts) => {
                    let Expr::Let(env, s) = *f else { unreachable!() };
                    Expr::Let(env, Box::new(Expr::Case(ty, s, alts)))
                }
                _ => unreachable!(),
            };
            put_at(e, &p, rebuilt);
            rule
        }
        Action::LletE(x) => {
            let env = root_env(e);
            let idx = env.iter().position(|(y, _)| *y == x).expect("bound");
            let Expr::Let(inner, s) = std::mem::replace(&mut env[idx].1, placeholder()) else { unreachable!() };
            env[idx].1 = *s;
            env.extend(inner);
            Rule::LletE
        }
        Action::Copy { rule, target, source } => {
            let copy = supply.rename_binders(binding_rhs(e, &source));
            put_at(e, &target, copy);
            rule
        }
        Action::CaseShare { rule, case_pos, source } => {
            let base = if rule == Rule::CaseIn { Var::new("z") } else { Var::new("w") };
            let env = root_env(e);
            let idx = env.iter().position(|(y, _)| *y == source).expect("bound");
            let Expr::Ctor(c, args) = std::mem::replace(&mut env[idx].1, placeholder()) else { unreachable!() };
            let shares: Vec<Var> = args.iter().map(|_| supply.fresh(&base)).collect();
            env[idx].1 = Expr::Ctor(c.clone(), shares.iter().cloned().map(Expr::Var).collect());
            env.extend(shares.iter().cloned().zip(args));
            let Expr::Case(_, _, alts) = take_at(e, &case_pos) else { unreachable!() };
            let alt = alts.into_iter().find(|a| a.ctor == c).expect("checked");
            let inner: Vec<(Var, Expr)> = alt.binders.into_iter().zip(shares.into_iter().map(Expr::Var)).collect();
            put_at(e, &case_pos, Expr::let_in(inner, alt.body));
            rule
        }
        Action::SeqShare { rule, seq_pos } => {
            let Expr::Seq(_, t) = take_at(e, &seq_pos) else { unreachable!() };
            put_at(e, &seq_pos, *t);
            rule
        }
        Action::Whnf | Action::Stuck(_) | Action::Prob(_) => unreachable!("not a deterministic action"),
    }
}

/// Replaces the choice at `p` by one of its operands, in place.
fn resolve_choice(e: &mut Expr, p: &Position, dir: Dir) {
    let Expr::Choice(l, r) = take_at(e, p) else { unreachable!("prob redex is a choice") };
    put_at(e, p, match dir {
        Dir::L => *l,
        Dir::R => *r,
    });
}

// ---------------------------------------------------------------------------
// Public interface

/// One step of standard reduction.
///
/// The input is expected to obey the distinct variable convention; copied
/// abstractions are renamed apart from every variable of the term.
pub fn sr_step(e: &Expr) -> StepVerdict {
    match analyze(e) {
        Action::Whnf => StepVerdict::Whnf,
        Action::Stuck(r) => StepVerdict::Stuck(r),
        Action::Prob(p) => {
            let mut left = e.clone();
            let mut right = e.clone();
            resolve_choice(&mut left, &p, Dir::L);
            resolve_choice(&mut right, &p, Dir::R);
            StepVerdict::ProbBranch { redex: p, left, right }
        }
        action => {
            let mut supply = NameSupply::from_expr(e);
            let mut out = e.clone();
            let rule = apply_action(&mut out, action, &mut supply);
            StepVerdict::Unique(rule, out)
        }
    }
}

/// All labeled sr-successors: one for a deterministic step, two at a choice.
pub fn sr_successors(e: &Expr) -> Vec<(Rule, Expr)> {
    match sr_step(e) {
        StepVerdict::Unique(r, t) => vec![(r, t)],
        StepVerdict::ProbBranch { left, right, .. } => vec![(Rule::Probl, left), (Rule::Probr, right)],
        _ => vec![],
    }
}

/// WHNF test, independent of [`sr_step`].
pub fn is_whnf(e: &Expr) -> bool {
    match e {
        Expr::Lam(..) | Expr::Ctor(..) => true,
        Expr::Let(env, body) => match &**body {
            Expr::Lam(..) | Expr::Ctor(..) => true,
            Expr::Var(x1) => {
                let mut seen = BTreeSet::new();
                let mut x = x1;
                loop {
                    if !seen.insert(x.clone()) {
                        return false;
                    }
                    match env.iter().find(|(y, _)| y == x).map(|(_, r)| r) {
                        Some(Expr::Var(next)) => x = next,
                        Some(Expr::Ctor(..)) => return true,
                        _ => return false,
                    }
                }
            }
            _ => false,
        },
        _ => false,
    }
}

/// A term under reduction together with its fresh-name supply.
#[derive(Clone, Debug)]
pub struct Machine {
    term: Expr,
    supply: NameSupply,
}

/// Result of one in-place machine step.
#[derive(Clone, Debug, PartialEq)]
pub enum MachineStep {
    Whnf,
    Stuck(StuckReason),
    Det(Rule),
    Prob(Position),
}

impl Machine {
    /// Starts a machine on a freshened copy of `e`.
    pub fn new(e: &Expr) -> Self {
        let term = freshen(e, &BTreeSet::new());
        let supply = NameSupply::from_expr(&term);
        Machine { term, supply }
    }

    pub fn term(&self) -> &Expr {
        &self.term
    }

    pub fn into_term(self) -> Expr {
        self.term
    }

    /// Performs a deterministic step in place, or reports why it cannot.
    pub fn step(&mut self) -> MachineStep {
        match analyze(&self.term) {
            Action::Whnf => MachineStep::Whnf,
            Action::Stuck(r) => MachineStep::Stuck(r),
            Action::Prob(p) => MachineStep::Prob(p),
            action => MachineStep::Det(apply_action(&mut self.term, action, &mut self.supply)),
        }
    }

    /// Resolves the choice at `p` in place.
    pub fn choose(&mut self, p: &Position, dir: Dir) {
        resolve_choice(&mut self.term, p, dir);
    }

    /// Runs deterministic steps until a WHNF, a stuck term, a choice or
    /// until `fuel` steps are spent, appending applied rules to `trace`.
    pub fn run(&mut self, fuel: u64, trace: &mut Vec<Rule>) -> RunStop {
        let mut spent = 0u64;
        loop {
            match analyze(&self.term) {
                Action::Whnf => return RunStop::Whnf,
                Action::Stuck(r) => return RunStop::Stuck(r),
                Action::Prob(p) => return RunStop::Prob(p),
                action => {
                    if spent >= fuel {
                        return RunStop::OutOfFuel;
                    }
                    spent += 1;
                    trace.push(apply_action(&mut self.term, action, &mut self.supply));
                }
            }
        }
    }
}

/// Why [`Machine::run`] stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStop {
    Whnf,
    Stuck(StuckReason),
    Prob(Position),
    OutOfFuel,
}

/// Applies deterministic steps until a WHNF, a stuck term, a choice point or
/// until `fuel` steps are consumed. The input is freshened first.
pub fn run_until_prob(e: &Expr, fuel: u64) -> DetOutcome {
    let mut m = Machine::new(e);
    let mut trace = Vec::new();
    let stop = m.run(fuel, &mut trace);
    det_outcome(m, stop, trace)
}

fn det_outcome(m: Machine, stop: RunStop, trace: Vec<Rule>) -> DetOutcome {
    match stop {
        RunStop::OutOfFuel => DetOutcome::FuelExhausted { term: m.into_term(), trace },
        RunStop::Whnf => DetOutcome::ReachedWhnf { term: m.into_term(), trace },
        RunStop::Stuck(reason) => DetOutcome::ReachedStuck { term: m.into_term(), reason, trace },
        RunStop::Prob(redex) => {
            let mut left = m.term.clone();
            let mut right = m.term.clone();
            resolve_choice(&mut left, &redex, Dir::L);
            resolve_choice(&mut right, &redex, Dir::R);
            DetOutcome::AtProb { term: m.into_term(), redex, left, right, trace }
        }
    }
}

/// Replays an evaluation, taking the given direction at each choice. `fuel`
/// bounds the deterministic steps of the whole run.
pub fn reduce_trace(e: &Expr, choices: &ProbSeq, fuel: u64) -> Replay {
    let mut m = Machine::new(e);
    let mut trace = Vec::new();
    let mut consumed = 0;
    let mut remaining = fuel;
    loop {
        let before = trace.len();
        let stop = m.run(remaining, &mut trace);
        remaining -= (trace.len() - before) as u64;
        let end = match stop {
            RunStop::OutOfFuel => ReplayEnd::FuelExhausted,
            RunStop::Whnf => ReplayEnd::Whnf,
            RunStop::Stuck(r) => ReplayEnd::Stuck(r),
            RunStop::Prob(p) => match choices.0.get(consumed) {
                Some(&d) => {
                    m.choose(&p, d);
                    trace.push(d.rule());
                    consumed += 1;
                    continue;
                }
                None => ReplayEnd::ChoicesExhausted,
            },
        };
        return Replay { end, term: m.into_term(), consumed, trace };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::print::print;
    use crate::syntax::alpha_equiv;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn unique(s: &str) -> (Rule, Expr) {
        match sr_step(&freshen(&p(s), &BTreeSet::new())) {
            StepVerdict::Unique(r, t) => (r, t),
            other => panic!("expected a deterministic step, got {other:?}"),
        }
    }

    #[test]
    fn whnf_examples() {
        assert!(is_whnf(&p(r"\x.x")));
        assert!(is_whnf(&p(r"let x=K in \y.y")));
        assert!(!is_whnf(&p("let x = x in x")));
        assert!(is_whnf(&p("let a = b, b = Cons c c, c = K in a")));
        assert!(!is_whnf(&p(r"let a = \x.x in a")));
    }

    #[test]
    fn lbeta_shares_the_argument() {
        let (r, t) = unique(r"(\x.x) K");
        assert_eq!(r, Rule::Lbeta);
        assert!(alpha_equiv(&t, &p("let x = K in x")));
    }

    #[test]
    fn choice_branches_at_root() {
        match sr_step(&p("K <+> K2")) {
            StepVerdict::ProbBranch { redex, left, right } => {
                assert!(redex.is_root());
                assert!(alpha_equiv(&left, &p("K")));
                assert!(alpha_equiv(&right, &p("K2")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cyclic_chains_are_blackholes() {
        assert!(matches!(sr_step(&p("let x = x in x")), StepVerdict::Stuck(StuckReason::Blackhole)));
        assert!(matches!(sr_step(&p("let x = y, y = x in x a")), StepVerdict::Stuck(StuckReason::Blackhole)));
        assert!(matches!(sr_step(&p("f a")), StepVerdict::Stuck(StuckReason::OpenVariable(_))));
    }

    #[test]
    fn run_until_whnf_copies_fresh_abstraction() {
        match run_until_prob(&p(r"(\x.x)(\y.y)"), 10) {
            DetOutcome::ReachedWhnf { term, trace } => {
                assert_eq!(trace, vec![Rule::Lbeta, Rule::CpIn]);
                assert_eq!(print(&term), r"let x = \y.y in \y#1.y#1");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn omega_runs_out_of_fuel() {
        assert!(matches!(run_until_prob(&p("Omega"), 50), DetOutcome::FuelExhausted { .. }));
    }

    #[test]
    fn needed_choice_in_binding() {
        match run_until_prob(&p("let z = K <+> K2 in z"), 10) {
            DetOutcome::AtProb { left, right, trace, .. } => {
                assert!(trace.is_empty());
                assert!(alpha_equiv(&left, &p("let z = K in z")));
                assert!(alpha_equiv(&right, &p("let z = K2 in z")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn let_rules() {
        assert_eq!(unique("let x = K in let y = K2 in y x").0, Rule::LletIn);
        let (r, t) = unique("let x = (let y = K in y) in x");
        assert_eq!(r, Rule::LletE);
        assert!(alpha_equiv(&t, &p("let x = y, y = K in x")));
        let (r, t) = unique("(let y = K in y) a");
        assert_eq!(r, Rule::Lapp);
        assert!(alpha_equiv(&t, &p("let y = K in y a")));
    }

    #[test]
    fn cp_e_targets_the_binding_occurrence() {
        let (r, t) = unique(r"let x = y a, y = \u.u in x");
        assert_eq!(r, Rule::CpE);
        assert!(alpha_equiv(&t, &p(r"let x = (\v.v) a, y = \u.u in x")));
    }

    #[test]
    fn extended_rules() {
        let (r, t) = unique(r"seq (\x.x) K");
        assert_eq!(r, Rule::SeqC);
        assert!(alpha_equiv(&t, &p("K")));
        let (r, t) = unique("case True of { True -> a; False -> b }");
        assert_eq!(r, Rule::CaseC);
        assert_eq!(t, p("a"));
        let (r, t) = unique("case (let x = True in x) of { True -> a; False -> b }");
        assert_eq!(r, Rule::Lcase);
        assert!(alpha_equiv(&t, &p("let x = True in case x of { True -> a; False -> b }")));
        let (r, t) = unique("let x = Cons K K2 in case x of { Nil -> a; Cons h t -> h }");
        assert_eq!(r, Rule::CaseIn);
        assert!(alpha_equiv(&t, &p("let x = Cons z z#1, z = K, z#1 = K2 in let h = z, t = z#1 in h")));
        let (r, _) = unique("let x = Cons K K2, y = case x of { Nil -> a; Cons h t -> h } in y");
        assert_eq!(r, Rule::CaseE);
        let (r, t) = unique("let x = True in seq x K");
        assert_eq!(r, Rule::SeqIn);
        assert!(alpha_equiv(&t, &p("let x = True in K")));
        assert!(matches!(sr_step(&p("case K of { True -> a; False -> b }")), StepVerdict::Stuck(StuckReason::IllTyped)));
        assert!(matches!(sr_step(&p("Nil a")), StepVerdict::Stuck(StuckReason::IllTyped)));
    }

    #[test]
    fn replay_consumes_choices() {
        let e = p("let z = K <+> K2 in z (z a b) (z c d)");
        let r = reduce_trace(&e, &"L".parse().unwrap(), 100);
        assert!(matches!(r.end, ReplayEnd::Stuck(StuckReason::OpenVariable(ref v)) if &*v.base == "a"));
        let r = reduce_trace(&p("K"), &ProbSeq::empty(), 10);
        assert!(matches!(r.end, ReplayEnd::Whnf));
        assert_eq!(r.consumed, 0);
    }

    #[test]
    fn prob_seq_text_form() {
        let s: ProbSeq = "LRL".parse().unwrap();
        assert_eq!(s.to_string(), "LRL");
        assert_eq!(ProbSeq::empty().to_string(), "ε");
        assert!("LX".parse::<ProbSeq>().is_err());
    }
}
