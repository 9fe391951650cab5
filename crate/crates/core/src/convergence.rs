//! Weighted evaluation trees, expected-convergence intervals and frontier
//! evaluation.
//!
//! Every choice halves the weight of both branches. Exploration stops a
//! branch at a WHNF, a stuck term, when its deterministic fuel runs out, or
//! when another choice would exceed the prob budget `k`. Weights are exact
//! rationals.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::FrontierError;
use crate::reduce::{run_until_prob, DetOutcome, Dir, Machine, ProbSeq, Rule, RunStop, StepVerdict, StuckReason};
use crate::reduce::sr_step;
use crate::syntax::{Expr, Position};

/// Exact probability weight.
pub type Weight = BigRational;

/// `2^-n`.
pub fn half_pow(n: usize) -> Weight {
    Weight::new(BigInt::one(), BigInt::one() << n)
}

/// Lowest-terms `num/den` rendering, e.g. `1/2`, `0/1`, `1/1`.
pub fn weight_string(w: &Weight) -> String {
    format!("{}/{}", w.numer(), w.denom())
}

/// Parses `num/den` or an integer.
pub fn parse_weight(s: &str) -> Option<Weight> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Weight::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Weight::from_integer),
    }
}

/// Kind of an evaluation-tree leaf.
#[derive(Clone, Debug)]
pub enum LeafKind {
    Success(Expr),
    Stuck(Expr, StuckReason),
    FuelExhausted(Expr),
    /// A further choice was reached at prob-depth `k`.
    BudgetExhausted(Expr),
}

impl LeafKind {
    pub fn term(&self) -> &Expr {
        match self {
            LeafKind::Success(t) | LeafKind::Stuck(t, _) | LeafKind::FuelExhausted(t) | LeafKind::BudgetExhausted(t) => t,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LeafKind::Success(_) => "success",
            LeafKind::Stuck(..) => "stuck",
            LeafKind::FuelExhausted(_) => "fuel-exhausted",
            LeafKind::BudgetExhausted(_) => "budget-exhausted",
        }
    }

    /// True for fuel or budget exhaustion.
    pub fn is_undecided(&self) -> bool {
        matches!(self, LeafKind::FuelExhausted(_) | LeafKind::BudgetExhausted(_))
    }
}

/// A leaf with its weight and prob-sequence.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub kind: LeafKind,
    pub weight: Weight,
    pub probseq: ProbSeq,
    /// Deterministic rules applied since the last choice.
    pub trace: Vec<Rule>,
}

/// The exploration tree of a term.
#[derive(Clone, Debug)]
pub enum EvalTree {
    Prob {
        /// Deterministic rules applied before reaching this choice.
        trace: Vec<Rule>,
        redex: Position,
        probseq: ProbSeq,
        left: Box<EvalTree>,
        right: Box<EvalTree>,
    },
    Leaf(Leaf),
}

impl EvalTree {
    /// Leaves in prob-sequence order (`L` before `R`).
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        collect_leaves(self, &mut out);
        out
    }

    /// The subtree reached by following `path` as far as it goes, together
    /// with the number of directions consumed.
    pub fn follow(&self, path: &ProbSeq) -> (&EvalTree, usize) {
        let mut cur = self;
        for (i, d) in path.0.iter().enumerate() {
            match cur {
                EvalTree::Prob { left, right, .. } => {
                    cur = match d {
                        Dir::L => left,
                        Dir::R => right,
                    }
                }
                EvalTree::Leaf(_) => return (cur, i),
            }
        }
        (cur, path.len())
    }
}

fn collect_leaves<'a>(t: &'a EvalTree, out: &mut Vec<&'a Leaf>) {
    match t {
        EvalTree::Leaf(l) => out.push(l),
        EvalTree::Prob { left, right, .. } => {
            collect_leaves(left, out);
            collect_leaves(right, out);
        }
    }
}

/// Explores all evaluations with at most `k` choices; `fuel` bounds the
/// deterministic steps along each path. The input is freshened first.
pub fn explore(e: &Expr, k: usize, fuel: u64) -> EvalTree {
    explore_from(Machine::new(e), ProbSeq::empty(), k, fuel)
}

fn explore_from(mut m: Machine, probseq: ProbSeq, k: usize, fuel: u64) -> EvalTree {
    let mut trace = Vec::new();
    let stop = m.run(fuel, &mut trace);
    let spent = trace.len() as u64;
    let weight = half_pow(probseq.len());
    let leaf = |kind, probseq, trace| EvalTree::Leaf(Leaf { kind, weight: weight.clone(), probseq, trace });
    match stop {
        RunStop::Whnf => leaf(LeafKind::Success(m.into_term()), probseq, trace),
        RunStop::Stuck(r) => leaf(LeafKind::Stuck(m.into_term(), r), probseq, trace),
        RunStop::OutOfFuel => leaf(LeafKind::FuelExhausted(m.into_term()), probseq, trace),
        RunStop::Prob(redex) => {
            if probseq.len() >= k {
                return leaf(LeafKind::BudgetExhausted(m.into_term()), probseq, trace);
            }
            let mut right = m.clone();
            let mut left = m;
            left.choose(&redex, Dir::L);
            right.choose(&redex, Dir::R);
            let rest = fuel - spent;
            let l = explore_from(left, probseq.push(Dir::L), k, rest);
            let r = explore_from(right, probseq.push(Dir::R), k, rest);
            EvalTree::Prob { trace, redex, probseq, left: Box::new(l), right: Box::new(r) }
        }
    }
}

/// Number of leaves of each kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeafCounts {
    pub success: usize,
    pub stuck: usize,
    pub fuel_exhausted: usize,
    pub budget_exhausted: usize,
}

/// Certified interval for the expected convergence at a prob budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcvBounds {
    pub lo: Weight,
    pub hi: Weight,
    /// No undecided leaves: `lo == hi` is the exact value.
    pub exact: bool,
    /// Weight of fuel-exhausted leaves alone. Budget-exhausted leaves need
    /// more than `k` choices, so `lo` is exactly the bounded expected
    /// convergence whenever this is zero.
    pub fuel_mass: Weight,
    pub counts: LeafCounts,
}

impl ExcvBounds {
    /// The intervals are disjoint.
    pub fn disjoint(&self, other: &ExcvBounds) -> bool {
        self.lo > other.hi || other.lo > self.hi
    }

    pub fn scale(&self, p: &Weight) -> ExcvBounds {
        ExcvBounds {
            lo: &self.lo * p,
            hi: &self.hi * p,
            exact: self.exact,
            fuel_mass: &self.fuel_mass * p,
            counts: self.counts.clone(),
        }
    }
}

impl fmt::Display for ExcvBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lo={} hi={} exact={}", weight_string(&self.lo), weight_string(&self.hi), self.exact)
    }
}

/// Interval bounds computed from a tree.
pub fn bounds_of(tree: &EvalTree) -> ExcvBounds {
    let mut lo = Weight::zero();
    let mut undecided = Weight::zero();
    let mut fuel_mass = Weight::zero();
    let mut counts = LeafCounts::default();
    for leaf in tree.leaves() {
        match &leaf.kind {
            LeafKind::Success(_) => {
                lo += &leaf.weight;
                counts.success += 1;
            }
            LeafKind::Stuck(..) => counts.stuck += 1,
            LeafKind::FuelExhausted(_) => {
                undecided += &leaf.weight;
                fuel_mass += &leaf.weight;
                counts.fuel_exhausted += 1;
            }
            LeafKind::BudgetExhausted(_) => {
                undecided += &leaf.weight;
                counts.budget_exhausted += 1;
            }
        }
    }
    let exact = counts.fuel_exhausted == 0 && counts.budget_exhausted == 0;
    let hi = &lo + undecided;
    ExcvBounds { lo, hi, exact, fuel_mass, counts }
}

/// `[lo, hi]` for the expected convergence with at most `k` choices.
pub fn excv_bounds(e: &Expr, k: usize, fuel: u64) -> ExcvBounds {
    bounds_of(&explore(e, k, fuel))
}

/// Bounds of the weighted expression `(p, e)`.
pub fn excv_scaled(p: &Weight, e: &Expr, k: usize, fuel: u64) -> ExcvBounds {
    excv_bounds(e, k, fuel).scale(p)
}

/// Successful evaluations in prob-sequence order.
pub fn evaluations(e: &Expr, k: usize, fuel: u64) -> Vec<(ProbSeq, Weight, Expr)> {
    explore(e, k, fuel)
        .leaves()
        .into_iter()
        .filter_map(|l| match &l.kind {
            LeafKind::Success(t) => Some((l.probseq.clone(), l.weight.clone(), t.clone())),
            _ => None,
        })
        .collect()
}

/// Coarse classification of convergence at a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceClass {
    MayConvergentWitnessed,
    AllBranchesDivergentAtBound,
    Undetermined,
}

pub fn convergence_class(e: &Expr, k: usize, fuel: u64) -> ConvergenceClass {
    let b = excv_bounds(e, k, fuel);
    if b.lo > Weight::zero() {
        ConvergenceClass::MayConvergentWitnessed
    } else if b.counts.success == 0 && b.counts.fuel_exhausted == 0 && b.counts.budget_exhausted == 0 {
        ConvergenceClass::AllBranchesDivergentAtBound
    } else {
        ConvergenceClass::Undetermined
    }
}

// ---------------------------------------------------------------------------
// Frontiers

/// A complete prefix-free set of prob-sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frontier(Vec<ProbSeq>);

impl Frontier {
    /// Validates completeness and prefix-freeness.
    pub fn new(words: Vec<ProbSeq>) -> Result<Self, FrontierError> {
        if words.is_empty() {
            return Err(FrontierError::InvalidFrontier("no words".into()));
        }
        let set: BTreeSet<&ProbSeq> = words.iter().collect();
        if set.len() != words.len() {
            return Err(FrontierError::InvalidFrontier("duplicate word".into()));
        }
        for a in &words {
            for b in &words {
                if a != b && a.is_prefix_of(b) {
                    return Err(FrontierError::InvalidFrontier(format!("{a} is a prefix of {b}")));
                }
            }
        }
        let kraft: Weight = words.iter().map(|w| half_pow(w.len())).sum();
        if kraft != Weight::one() {
            return Err(FrontierError::InvalidFrontier("words do not cover every branch".into()));
        }
        Ok(Frontier(words))
    }

    /// All words of length `depth`.
    pub fn full(depth: usize) -> Self {
        let mut words = vec![ProbSeq::empty()];
        for _ in 0..depth {
            words = words.into_iter().flat_map(|w| [w.push(Dir::L), w.push(Dir::R)]).collect();
        }
        Frontier(words)
    }

    /// Parses a comma-separated list such as `L,RL,RR`.
    pub fn parse(text: &str) -> Result<Self, FrontierError> {
        let words = text
            .split(',')
            .map(|w| w.parse::<ProbSeq>().map_err(FrontierError::InvalidFrontier))
            .collect::<Result<Vec<_>, _>>()?;
        Frontier::new(words)
    }

    pub fn words(&self) -> &[ProbSeq] {
        &self.0
    }
}

/// How frontier evaluation reaches the next choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontierMode {
    /// Only prob-reductions: every word must meet a choice redex directly.
    Strict,
    /// Deterministic steps (up to the given fuel) may precede each choice.
    /// This is a nonstandard extension.
    Relaxed { fuel: u64 },
}

/// Multiset of weighted terms produced by a frontier evaluation.
#[derive(Clone, Debug)]
pub struct FrontierResult(pub Vec<(Weight, Expr)>);

impl FrontierResult {
    pub fn total_weight(&self) -> Weight {
        self.0.iter().map(|(w, _)| w.clone()).sum()
    }
}

/// Unfolds prob steps along every word of the frontier.
pub fn frontier_evaluate(e: &Expr, f: &Frontier, mode: FrontierMode) -> Result<FrontierResult, FrontierError> {
    let mut out = Vec::new();
    for word in f.words() {
        let mut cur = e.clone();
        for (i, d) in word.0.iter().enumerate() {
            let prefix = ProbSeq(word.0[..i].to_vec());
            let (left, right) = match mode {
                FrontierMode::Strict => match sr_step(&cur) {
                    StepVerdict::ProbBranch { left, right, .. } => (left, right),
                    StepVerdict::Unique(..) => {
                        return Err(FrontierError::StrictnessViolation(display_word(&prefix)));
                    }
                    _ => return Err(FrontierError::NoChoice(display_word(&prefix))),
                },
                FrontierMode::Relaxed { fuel } => match run_until_prob(&cur, fuel) {
                    DetOutcome::AtProb { left, right, .. } => (left, right),
                    _ => return Err(FrontierError::NoChoice(display_word(&prefix))),
                },
            };
            cur = match d {
                Dir::L => left,
                Dir::R => right,
            };
        }
        out.push((half_pow(word.len()), cur));
    }
    Ok(FrontierResult(out))
}

fn display_word(w: &ProbSeq) -> String {
    w.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::syntax::alpha_equiv;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn w(n: i64, d: i64) -> Weight {
        Weight::new(n.into(), d.into())
    }

    #[test]
    fn weights_render_as_fractions() {
        assert_eq!(weight_string(&w(2, 4)), "1/2");
        assert_eq!(weight_string(&Weight::zero()), "0/1");
        assert_eq!(weight_string(&Weight::one()), "1/1");
        assert_eq!(parse_weight("3/6"), Some(w(1, 2)));
    }

    #[test]
    fn value_is_a_single_success_leaf() {
        let t = explore(&p("K"), 3, 10);
        let leaves = t.leaves();
        assert_eq!(leaves.len(), 1);
        assert!(matches!(leaves[0].kind, LeafKind::Success(_)));
        assert_eq!(leaves[0].weight, Weight::one());
        assert!(leaves[0].probseq.is_empty());
    }

    #[test]
    fn bot_converges_with_zero() {
        let b = excv_bounds(&p("Bot"), 3, 10);
        assert_eq!((b.lo.clone(), b.hi.clone(), b.exact), (Weight::zero(), Weight::zero(), true));
        assert_eq!(convergence_class(&p("Bot"), 3, 10), ConvergenceClass::AllBranchesDivergentAtBound);
        assert_eq!(convergence_class(&p("K <+> Bot"), 3, 10), ConvergenceClass::MayConvergentWitnessed);
        assert_eq!(convergence_class(&p("Omega"), 3, 50), ConvergenceClass::Undetermined);
    }

    #[test]
    fn evaluations_are_ordered() {
        let ev = evaluations(&p("K <+> K2"), 1, 10);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].0.to_string(), "L");
        assert!(alpha_equiv(&ev[0].2, &p("K")));
        assert!(alpha_equiv(&ev[1].2, &p("K2")));
        assert_eq!(evaluations(&p("K"), 0, 10)[0].1, Weight::one());
    }

    #[test]
    fn scaled_bounds() {
        let b = excv_scaled(&w(1, 2), &p("K"), 0, 10);
        assert_eq!((b.lo, b.hi), (w(1, 2), w(1, 2)));
    }

    #[test]
    fn budget_leaves_sit_at_depth_k() {
        let t = explore(&p("(K <+> K2) <+> (K <+> Bot)"), 1, 10);
        for leaf in t.leaves() {
            assert!(matches!(leaf.kind, LeafKind::BudgetExhausted(_)));
            assert_eq!(leaf.probseq.len(), 1);
        }
        let b = bounds_of(&t);
        assert_eq!((b.lo, b.hi, b.exact), (Weight::zero(), Weight::one(), false));
    }

    #[test]
    fn frontier_validation() {
        assert!(Frontier::parse("L,RL,RR").is_ok());
        assert!(Frontier::parse("L,RL").is_err());
        assert!(Frontier::parse("L,LR,R").is_err());
        assert_eq!(Frontier::full(2).words().len(), 4);
    }

    #[test]
    fn strict_frontier_rejects_deterministic_prefix() {
        let f = Frontier::parse("L,R").unwrap();
        let err = frontier_evaluate(&p(r"(\x.x) (K <+> K2)"), &f, FrontierMode::Strict).unwrap_err();
        assert!(matches!(err, FrontierError::StrictnessViolation(_)));
        let ok = frontier_evaluate(&p(r"(\x.x <+> K) K2"), &f, FrontierMode::Relaxed { fuel: 10 }).unwrap();
        assert_eq!(ok.total_weight(), Weight::one());
    }

    const EXAMPLE_SHARED: &str = r"let z = K <+> K2 in z (z a b) (z c d)";

    fn with_projections(body: &str) -> Expr {
        p(&format!(
            r"let a = \p1.\p2.\p3.\p4.p1, b = \q1.\q2.\q3.\q4.q2, c = \r1.\r2.\r3.\r4.r3, d = \u1.\u2.\u3.\u4.u4 in {body}"
        ))
    }

    fn success_results(e: &Expr, k: usize) -> Vec<(Weight, Expr)> {
        evaluations(e, k, 500).into_iter().map(|(_, w, t)| (w, t)).collect()
    }

    fn ends_with_projection(t: &Expr, i: usize) -> bool {
        let mut body = t;
        while let Expr::Let(_, b) = body {
            body = b;
        }
        let mut n = 0;
        let mut cur = body;
        let mut names = Vec::new();
        while let Expr::Lam(x, b) = cur {
            names.push(x.clone());
            n += 1;
            cur = b;
        }
        n == 4 && matches!(cur, Expr::Var(v) if *v == names[i])
    }

    #[test]
    fn shared_choice_yields_two_results() {
        let e = with_projections(EXAMPLE_SHARED);
        let ev = success_results(&e, 2);
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|(w, _)| *w == Weight::new(1.into(), 2.into())));
        assert!(ends_with_projection(&ev[0].1, 0));
        assert!(ends_with_projection(&ev[1].1, 3));
    }

    #[test]
    fn lifted_choice_yields_four_results() {
        let e = with_projections(r"let z = \x.\y.(x <+> y) in z (z a b) (z c d)");
        let ev = success_results(&e, 2);
        assert_eq!(ev.len(), 4);
        for (i, (w, t)) in ev.iter().enumerate() {
            assert_eq!(*w, Weight::new(1.into(), 4.into()));
            assert!(ends_with_projection(t, i), "result {i}");
        }
    }

    #[test]
    fn half_converging_recursive_choice() {
        let e = p(r"let x = (\y.y) <+> (Bot <+> x) in x");
        let b = excv_bounds(&e, 2, 100);
        assert_eq!((b.lo.clone(), b.hi.clone(), b.exact), (w(1, 2), w(1, 2), true));
        let s = excv_scaled(&w(1, 4), &e, 2, 100);
        assert_eq!((s.lo, s.hi), (w(1, 8), w(1, 8)));
    }

    #[test]
    fn geometric_series_lower_bound() {
        let e = p(r"let x = (\y.((x id) <+> K)) in (x id)");
        let b = excv_bounds(&e, 3, 500);
        assert_eq!((b.lo, b.hi, b.exact), (w(7, 8), w(1, 1), false));
    }

    #[test]
    fn frontier_examples() {
        let r = frontier_evaluate(&p("(s1 <+> s2) <+> (s1 <+> s3)"), &Frontier::full(2), FrontierMode::Strict).unwrap();
        let got: Vec<String> = r.0.iter().map(|(w, t)| format!("{} {}", weight_string(w), crate::print::print(t))).collect();
        assert_eq!(got, ["1/4 s1", "1/4 s2", "1/4 s1", "1/4 s3"]);
        let r = frontier_evaluate(&p("s1 <+> (s2 <+> s3)"), &Frontier::parse("L,RL,RR").unwrap(), FrontierMode::Strict).unwrap();
        let got: Vec<String> = r.0.iter().map(|(w, t)| format!("{} {}", weight_string(w), crate::print::print(t))).collect();
        assert_eq!(got, ["1/2 s1", "1/4 s2", "1/4 s3"]);
        let r = frontier_evaluate(&p("Omega"), &Frontier::new(vec![ProbSeq::empty()]).unwrap(), FrontierMode::Strict).unwrap();
        assert_eq!(r.0.len(), 1);
        assert_eq!(r.total_weight(), Weight::one());
    }
}
