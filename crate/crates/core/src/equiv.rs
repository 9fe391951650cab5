//! Sufficient criteria for contextual (in)equivalence: same prob-sequences,
//! frontier criteria, the reduction-context offset check, context
//! enumeration and certified counterexample search.
//!
//! Every verdict is conservative. Undecided mass (fuel or budget) never
//! counts as converging or diverging; it makes a verdict inconclusive.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;

use crate::combinators;
use crate::convergence::{bounds_of, excv_bounds, explore, weight_string, EvalTree, ExcvBounds, FrontierResult, LeafKind, Weight};
use crate::error::EquivError;
use crate::print::print;
use crate::reduce::{ProbSeq, StuckReason};
use crate::syntax::{alpha_equiv, position_in_class, replace_at, ContextClass, Expr, Position, Var};

/// Why a check could not decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InconclusiveReason {
    Fuel,
    Budget,
    EnumerationLimit,
}

impl fmt::Display for InconclusiveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InconclusiveReason::Fuel => "fuel",
            InconclusiveReason::Budget => "budget",
            InconclusiveReason::EnumerationLimit => "enumeration-limit",
        })
    }
}

/// A replayable reason for a failed check.
#[derive(Clone, Debug)]
pub enum Evidence {
    /// A successful evaluation of the left term whose prob-sequence has no
    /// successful counterpart on the right.
    ProbSeq(ProbSeq),
    /// A context separating the two terms, with their certified intervals.
    Context { context: ContextSpec, left: ExcvBounds, right: ExcvBounds },
    /// A frontier entry whose weight is not covered.
    Entry { term: Expr, left: Weight, right: Weight },
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::ProbSeq(l) => write!(f, "prob-sequence {l}"),
            Evidence::Context { context, left, right } => write!(
                f,
                "context {} separates [{}, {}] from [{}, {}]",
                context.label,
                weight_string(&left.lo),
                weight_string(&left.hi),
                weight_string(&right.lo),
                weight_string(&right.hi)
            ),
            Evidence::Entry { term, left, right } => {
                write!(f, "entry {} has weight {} > {}", print(term), weight_string(left), weight_string(right))
            }
        }
    }
}

/// Outcome of a bounded check.
#[derive(Clone, Debug)]
pub enum Verdict {
    Holds,
    FailsWith(Evidence),
    Inconclusive(InconclusiveReason),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, Verdict::FailsWith(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Holds => write!(f, "holds"),
            Verdict::FailsWith(e) => write!(f, "fails: {e}"),
            Verdict::Inconclusive(r) => write!(f, "inconclusive ({r})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Same prob-sequences

/// Every successful evaluation of `s` with at most `k` choices has a
/// successful evaluation of `t` with the same prob-sequence.
pub fn same_prob_sequences_check(s: &Expr, t: &Expr, k: usize, fuel: u64) -> Verdict {
    same_prob_sequences_trees(&explore(s, k, fuel), &explore(t, k, fuel))
}

/// [`same_prob_sequences_check`] on already explored trees.
pub fn same_prob_sequences_trees(s: &EvalTree, t: &EvalTree) -> Verdict {
    let mut undecided: Option<InconclusiveReason> = None;
    for leaf in s.leaves() {
        match &leaf.kind {
            LeafKind::Success(_) => {}
            LeafKind::FuelExhausted(_) => {
                undecided.get_or_insert(InconclusiveReason::Fuel);
                continue;
            }
            _ => continue,
        }
        let (node, consumed) = t.follow(&leaf.probseq);
        let fully = consumed == leaf.probseq.len();
        match node {
            EvalTree::Leaf(l) if fully => match &l.kind {
                LeafKind::Success(_) => {}
                LeafKind::FuelExhausted(_) => {
                    undecided.get_or_insert(InconclusiveReason::Fuel);
                }
                // Stuck: no evaluation; budget: a further choice is needed.
                _ => return Verdict::FailsWith(Evidence::ProbSeq(leaf.probseq.clone())),
            },
            EvalTree::Leaf(l) if matches!(l.kind, LeafKind::FuelExhausted(_)) => {
                undecided.get_or_insert(InconclusiveReason::Fuel);
            }
            // The right term stops before the sequence ends, or needs more
            // choices after it.
            _ => return Verdict::FailsWith(Evidence::ProbSeq(leaf.probseq.clone())),
        }
    }
    match undecided {
        Some(r) => Verdict::Inconclusive(r),
        None => Verdict::Holds,
    }
}

// ---------------------------------------------------------------------------
// Frontier criteria

/// The three comparison criteria on frontier evaluation results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    EqCr1,
    EqCr2,
    EqCr3,
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eqcr1" => Ok(Criterion::EqCr1),
            "eqcr2" => Ok(Criterion::EqCr2),
            "eqcr3" => Ok(Criterion::EqCr3),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

/// Budget used by EqCr3 to recognise certainly divergent entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivergenceProbe {
    pub k: usize,
    pub fuel: u64,
}

impl Default for DivergenceProbe {
    fn default() -> Self {
        DivergenceProbe { k: 4, fuel: 1000 }
    }
}

/// An entry counts as divergent when its interval is exactly `[0, 0]` and
/// no branch is stuck on a free variable (a context could bind it).
pub fn certainly_divergent(e: &Expr, probe: DivergenceProbe) -> bool {
    let tree = explore(e, probe.k, probe.fuel);
    let b = bounds_of(&tree);
    b.exact
        && b.hi.is_zero()
        && tree.leaves().iter().all(|l| !matches!(l.kind, LeafKind::Stuck(_, StuckReason::OpenVariable(_))))
}

/// Weight sum of entries alpha-equivalent to `s`.
fn weight_of(set: &FrontierResult, s: &Expr) -> Weight {
    set.0.iter().filter(|(_, t)| alpha_equiv(s, t)).map(|(q, _)| q.clone()).sum()
}

/// Compares frontier results `a` and `b`; terms are identified up to alpha.
pub fn frontier_criteria_check(a: &FrontierResult, b: &FrontierResult, criterion: Criterion, probe: DivergenceProbe) -> Verdict {
    for (q, s) in &a.0 {
        let fail = |left: Weight, right: Weight| Verdict::FailsWith(Evidence::Entry { term: s.clone(), left, right });
        match criterion {
            Criterion::EqCr1 => {
                let best = b.0.iter().filter(|(_, t)| alpha_equiv(s, t)).map(|(q2, _)| q2.clone()).max();
                match best {
                    Some(q2) if *q <= q2 => {}
                    other => return fail(q.clone(), other.unwrap_or_else(Weight::zero)),
                }
            }
            Criterion::EqCr2 | Criterion::EqCr3 => {
                if criterion == Criterion::EqCr3 && certainly_divergent(s, probe) {
                    continue;
                }
                let (qa, qb) = (weight_of(a, s), weight_of(b, s));
                if qa > qb {
                    return fail(qa, qb);
                }
            }
        }
    }
    Verdict::Holds
}

// ---------------------------------------------------------------------------
// Contexts

/// A term with exactly one hole, its class, and a readable label that uses
/// combinator names.
#[derive(Clone, Debug)]
pub struct ContextSpec {
    pub term: Expr,
    pub hole: Position,
    pub class: ContextClass,
    pub label: String,
}

/// The hole marker, printed as `[·]`.
pub fn hole_var() -> Var {
    Var::new("[·]")
}

impl ContextSpec {
    /// The empty context.
    pub fn hole() -> Self {
        ContextSpec { term: Expr::Var(hole_var()), hole: Position::root(), class: ContextClass::A, label: "[·]".into() }
    }

    /// Builds a context from a term containing the hole marker exactly once.
    pub fn from_term(term: Expr) -> Option<Self> {
        let holes = crate::syntax::free_occurrences(&term, &hole_var());
        if holes.len() != 1 {
            return None;
        }
        let hole = holes[0].clone();
        let class = [ContextClass::A, ContextClass::R, ContextClass::S, ContextClass::C]
            .into_iter()
            .find(|c| position_in_class(&term, &hole, *c))
            .expect("every position is in C");
        let label = print(&term);
        Some(ContextSpec { term, hole, class, label })
    }

    /// Whether the context belongs to `cls` (classes are nested).
    pub fn is_in(&self, cls: ContextClass) -> bool {
        self.class <= cls
    }

    /// Plugs `s` into the hole; free variables of `s` may be captured.
    pub fn fill(&self, s: &Expr) -> Expr {
        replace_at(&self.term, &self.hole, s.clone()).expect("hole position")
    }
}

impl fmt::Display for ContextSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// `ExCv(R[s], k) <= ExCv(R[t], k + d)` for every given reduction context.
///
/// Holds when for each context the certified upper bound of the left side
/// at budget `k` is at most the certified lower bound of the right side at
/// budget `k + d`; fails when the opposite strict inequality is certain.
pub fn excv_offset_check(
    s: &Expr,
    t: &Expr,
    contexts: &[ContextSpec],
    k: usize,
    d: usize,
    fuel: u64,
) -> Result<Verdict, EquivError> {
    if let Some(bad) = contexts.iter().find(|c| !c.is_in(ContextClass::R)) {
        return Err(EquivError::NotReductionContext(bad.label.clone()));
    }
    // Expected convergence is monotone in the budget.
    if alpha_equiv(s, t) {
        return Ok(Verdict::Holds);
    }
    let mut verdict = Verdict::Holds;
    for ctx in contexts {
        let left = excv_bounds(&ctx.fill(s), k, fuel);
        let right = excv_bounds(&ctx.fill(t), k + d, fuel);
        let left_max = &left.lo + &left.fuel_mass;
        let right_max = &right.lo + &right.fuel_mass;
        if left_max <= right.lo {
            continue;
        }
        if left.lo > right_max {
            return Ok(Verdict::FailsWith(Evidence::Context { context: ctx.clone(), left, right }));
        }
        verdict = Verdict::Inconclusive(InconclusiveReason::Fuel);
    }
    Ok(verdict)
}

/// A leaf of the context grammar with its display name.
#[derive(Clone, Debug)]
pub struct PoolLeaf {
    pub name: String,
    pub term: Expr,
}

impl PoolLeaf {
    pub fn new(name: &str, term: Expr) -> Self {
        PoolLeaf { name: name.to_string(), term }
    }
}

/// The closed combinators every enumeration draws from.
pub fn standard_leaves() -> Vec<PoolLeaf> {
    vec![
        PoolLeaf::new("id", combinators::id()),
        PoolLeaf::new("K", combinators::k()),
        PoolLeaf::new("K2", combinators::k2()),
        PoolLeaf::new("Bot", combinators::bot()),
    ]
}

/// A hole-free filler or a one-hole context under construction.
#[derive(Clone)]
struct Piece {
    term: Expr,
    label: String,
    /// Label as an application argument or choice operand.
    atom: bool,
}

impl Piece {
    fn wrapped(&self) -> String {
        if self.atom {
            self.label.clone()
        } else {
            format!("({})", self.label)
        }
    }

    fn head(&self) -> String {
        // Left operand of an application: applications need no parentheses.
        if self.atom || matches!(self.term, Expr::App(..)) {
            self.label.clone()
        } else {
            format!("({})", self.label)
        }
    }
}

fn app_piece(f: &Piece, a: &Piece) -> Piece {
    Piece { term: Expr::app(f.term.clone(), a.term.clone()), label: format!("{} {}", f.head(), a.wrapped()), atom: false }
}

fn choice_piece(l: &Piece, r: &Piece) -> Piece {
    Piece {
        term: Expr::choice(l.term.clone(), r.term.clone()),
        label: format!("{} <+> {}", l.wrapped(), r.wrapped()),
        atom: false,
    }
}

/// Fillers (closed, hole-free) by exact size.
fn fillers(leaves: &[Piece], max: usize) -> Vec<Vec<Piece>> {
    let mut by_size: Vec<Vec<Piece>> = vec![Vec::new(); max + 1];
    if max >= 1 {
        by_size[1] = leaves.to_vec();
    }
    for n in 2..=max {
        let mut out = Vec::new();
        for ls in 1..n - 1 {
            let rs = n - 1 - ls;
            for l in &by_size[ls] {
                for r in &by_size[rs] {
                    out.push(app_piece(l, r));
                }
            }
            for l in &by_size[ls] {
                for r in &by_size[rs] {
                    out.push(choice_piece(l, r));
                }
            }
        }
        by_size[n] = out;
    }
    by_size
}

/// All one-hole contexts up to `budget` nodes (combinator leaves count as one
/// node) whose class is contained in `cls`, ordered by size, deduplicated up
/// to alpha-equivalence.
///
/// Productions: the hole, application with the context on either side,
/// choice with the context on either side, and an abstraction over a
/// context (whose bound variable is also available as a leaf inside it).
pub fn enumerate_contexts(budget: usize, cls: ContextClass, pool: &[PoolLeaf]) -> Vec<ContextSpec> {
    let mut leaves: Vec<Piece> =
        pool.iter().map(|l| Piece { term: l.term.clone(), label: l.name.clone(), atom: true }).collect();
    for l in standard_leaves() {
        if !leaves.iter().any(|p| p.label == l.name) {
            leaves.push(Piece { term: l.term, label: l.name, atom: true });
        }
    }
    let fill = fillers(&leaves, budget.saturating_sub(2));
    let mut ctx: Vec<Vec<Piece>> = vec![Vec::new(); budget + 1];
    if budget >= 1 {
        ctx[1] = vec![Piece { term: Expr::Var(hole_var()), label: "[·]".into(), atom: true }];
    }
    let mut lam_counter = 0u32;
    for n in 2..=budget {
        let mut out = Vec::new();
        for cs in (1..n - 1).rev() {
            let fs = n - 1 - cs;
            for c in &ctx[cs] {
                for f in &fill[fs] {
                    out.push(app_piece(c, f));
                }
            }
            for c in &ctx[cs] {
                for f in &fill[fs] {
                    out.push(app_piece(f, c));
                }
            }
            for c in &ctx[cs] {
                for f in &fill[fs] {
                    out.push(choice_piece(c, f));
                    out.push(choice_piece(f, c));
                }
            }
        }
        for c in &ctx[n - 1] {
            lam_counter += 1;
            let v = Var::indexed("v", lam_counter);
            out.push(Piece {
                term: Expr::lam(v.clone(), c.term.clone()),
                label: format!("\\{v}.{}", c.label),
                atom: false,
            });
        }
        ctx[n] = out;
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut result = Vec::new();
    for size in ctx {
        for piece in size {
            let Some(mut spec) = ContextSpec::from_term(piece.term) else { continue };
            if !spec.is_in(cls) {
                continue;
            }
            spec.label = piece.label;
            let key = print(&crate::syntax::freshen(&spec.term, &BTreeSet::new()));
            if seen.insert(key) {
                result.push(spec);
            }
        }
    }
    result
}

/// Searches the enumerated contexts for one where the certified intervals of
/// `C[s]` and `C[t]` are disjoint.
pub fn counterexample_search(s: &Expr, t: &Expr, ctx_budget: usize, k: usize, fuel: u64) -> Verdict {
    counterexample_search_in(s, t, &enumerate_contexts(ctx_budget, ContextClass::C, &[]), k, fuel)
}

/// [`counterexample_search`] over a given list of contexts.
pub fn counterexample_search_in(s: &Expr, t: &Expr, contexts: &[ContextSpec], k: usize, fuel: u64) -> Verdict {
    for ctx in contexts {
        let left = excv_bounds(&ctx.fill(s), k, fuel);
        let right = excv_bounds(&ctx.fill(t), k, fuel);
        if left.disjoint(&right) {
            return Verdict::FailsWith(Evidence::Context { context: ctx.clone(), left, right });
        }
    }
    Verdict::Inconclusive(InconclusiveReason::EnumerationLimit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::{frontier_evaluate, Frontier, FrontierMode};
    use crate::parse::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn w(n: i64, d: i64) -> Weight {
        Weight::new(n.into(), d.into())
    }

    fn set(entries: &[(i64, i64, &str)]) -> FrontierResult {
        FrontierResult(entries.iter().map(|(n, d, s)| (w(*n, *d), p(s))).collect())
    }

    #[test]
    fn same_prob_sequences_examples() {
        let s = p(r"(\x.x) K");
        let t = p("let x = K in x");
        assert!(same_prob_sequences_check(&s, &t, 3, 50).holds());
        assert!(same_prob_sequences_check(&t, &s, 3, 50).holds());
        assert!(same_prob_sequences_check(&p("K <+> K2"), &p("K2 <+> K"), 3, 50).holds());
        let v = same_prob_sequences_check(&p("K <+> Bot"), &p("K"), 3, 50);
        assert!(matches!(v, Verdict::FailsWith(Evidence::ProbSeq(ref l)) if l.to_string() == "L"), "{v}");
        assert!(matches!(same_prob_sequences_check(&p("Omega"), &p("K"), 1, 30), Verdict::Inconclusive(_)));
    }

    #[test]
    fn frontier_criteria_examples() {
        let a = frontier_evaluate(&p("(s1 <+> s2) <+> (s1 <+> s3)"), &Frontier::full(2), FrontierMode::Strict).unwrap();
        let b = frontier_evaluate(&p("s1 <+> (s2 <+> s3)"), &Frontier::parse("L,RL,RR").unwrap(), FrontierMode::Strict)
            .unwrap();
        let probe = DivergenceProbe::default();
        assert!(frontier_criteria_check(&a, &b, Criterion::EqCr2, probe).holds());
        assert!(frontier_criteria_check(&b, &a, Criterion::EqCr2, probe).holds());
        assert!(frontier_criteria_check(&a, &a, Criterion::EqCr2, probe).holds());

        let m1 = set(&[(1, 2, "a"), (1, 2, "Bot")]);
        let m2 = set(&[(7, 10, "a"), (3, 10, "Bot")]);
        assert!(frontier_criteria_check(&m1, &m2, Criterion::EqCr3, probe).holds());
        assert!(frontier_criteria_check(&m1, &m2, Criterion::EqCr2, probe).fails());

        let m1 = set(&[(1, 10, "Bot"), (6, 10, "a"), (3, 10, "b")]);
        let m2 = set(&[(2, 10, "Bot"), (5, 10, "a"), (3, 10, "b")]);
        for c in [Criterion::EqCr1, Criterion::EqCr2, Criterion::EqCr3] {
            assert!(frontier_criteria_check(&m1, &m2, c, probe).fails(), "{c:?}");
        }
    }

    #[test]
    fn open_variables_are_not_divergent() {
        let probe = DivergenceProbe::default();
        assert!(certainly_divergent(&p("Bot"), probe));
        assert!(!certainly_divergent(&p("a"), probe));
        assert!(!certainly_divergent(&p("Omega"), probe));
    }

    #[test]
    fn offset_check_examples() {
        let hole = [ContextSpec::hole()];
        let v = excv_offset_check(&p("K <+> K2"), &p("K <+> K2"), &hole, 2, 0, 50).unwrap();
        assert!(v.holds());
        assert!(excv_offset_check(&p("Bot <+> K"), &p("K"), &hole, 1, 0, 50).unwrap().holds());
        assert!(excv_offset_check(&p("K"), &p("K <+> K"), &hole, 0, 1, 50).unwrap().holds());
        assert!(excv_offset_check(&p("K"), &p("K <+> K"), &hole, 0, 0, 50).unwrap().fails());
        let lam = ContextSpec::from_term(Expr::lam(Var::new("v"), Expr::Var(hole_var()))).unwrap();
        assert!(excv_offset_check(&p("K"), &p("K"), &[lam], 0, 0, 10).is_err());
    }

    #[test]
    fn enumeration_contains_expected_contexts() {
        let c1 = enumerate_contexts(1, ContextClass::C, &[]);
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].label, "[·]");
        let labels: Vec<String> = enumerate_contexts(3, ContextClass::C, &[]).into_iter().map(|c| c.label).collect();
        assert!(labels.contains(&"[·] id".to_string()));
        assert!(labels.contains(&"id [·]".to_string()));
        let labels: Vec<String> = enumerate_contexts(5, ContextClass::R, &[]).into_iter().map(|c| c.label).collect();
        assert!(labels.contains(&"[·] id Bot".to_string()));
    }

    #[test]
    fn probassoc_counterexample_is_the_empty_context() {
        let v = counterexample_search(&p("id <+> (Bot <+> Bot)"), &p("(id <+> Bot) <+> Bot"), 3, 2, 50);
        let Verdict::FailsWith(Evidence::Context { context, left, right }) = v else { panic!("{v}") };
        assert_eq!(context.label, "[·]");
        assert_eq!((left.lo.clone(), left.hi.clone()), (w(1, 2), w(1, 2)));
        assert_eq!((right.lo.clone(), right.hi.clone()), (w(1, 4), w(1, 4)));
    }

    #[test]
    fn k_and_choice_are_separated() {
        let v = counterexample_search(&p("K <+> K2"), &p("K"), 7, 2, 50);
        let Verdict::FailsWith(Evidence::Context { context, .. }) = v else { panic!("{v}") };
        assert_eq!(context.label, "[·] id Bot");
        assert!(matches!(counterexample_search(&p("K"), &p("K"), 3, 2, 50), Verdict::Inconclusive(_)));
    }
}
