//! Invariants over generated terms.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::One;
use proptest::prelude::*;

use lazyprob::convergence::{bounds_of, excv_bounds, excv_scaled, explore, frontier_evaluate, Frontier, FrontierMode, LeafKind, Weight};
use lazyprob::equiv::{
    counterexample_search, excv_offset_check, frontier_criteria_check, ContextSpec, Criterion, DivergenceProbe, Evidence,
    Verdict,
};
use lazyprob::gen::{GenConfig, Generator};
use lazyprob::reduce::{is_whnf, reduce_trace, sr_step, ReplayEnd, Rule, StepVerdict};
use lazyprob::syntax::{classify_position, fingerprint, obeys_convention, positions, subterm};
use lazyprob::transform::{apply, lmp_measure, match_sites, TransformationId as T};
use lazyprob::{alpha_equiv, free_vars, freshen, parse, parse_with, print, substitute, ContextClass, CtorTable, Expr, ParseOptions};

fn core_term(seed: u64, size: usize) -> Expr {
    Generator::new(seed, GenConfig::core(size)).term()
}

fn ext_term(seed: u64, size: usize) -> Expr {
    Generator::new(seed, GenConfig::ctor_rich(size)).term()
}

fn fresh(e: &Expr) -> Expr {
    freshen(e, &BTreeSet::new())
}

/// A term whose evaluation soon meets a `case` or `seq` on a constructor:
/// directly, through a let binding, or through a variable chain.
fn inspect_term(seed: u64) -> Expr {
    let mut g = Generator::new(seed, GenConfig::extended(8));
    let mut sub = || format!("({})", print(&g.term()));
    let (a, b, c, d) = (sub(), sub(), sub(), sub());
    let (ctor, alts) = match seed % 3 {
        0 => (format!("Cons {a} {b}"), format!("Nil -> {c}; Cons h t -> {d}")),
        1 => (format!("Pair {a} {b}"), format!("Pair l r -> {c}")),
        _ => ("True".to_string(), format!("False -> {c}; True -> {d}")),
    };
    let inspect = |scrutinee: &str| {
        if (seed / 3).is_multiple_of(2) {
            format!("case {scrutinee} of {{{alts}}}")
        } else {
            format!("seq {scrutinee} {c}")
        }
    };
    let src = match (seed / 6) % 3 {
        0 => inspect(&format!("({ctor})")),
        1 => format!("let x = {ctor} in {}", inspect("x")),
        _ => format!("let y = x, x = {ctor} in ({}) {a}", inspect("y")),
    };
    parse(&src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

/// A WHNF check written from the definition: an abstraction, a constructor
/// application, or a let whose body is one of those or a variable whose
/// variable-to-variable chain ends at a constructor binding.
fn whnf_oracle(e: &Expr) -> bool {
    match e {
        Expr::Lam(..) | Expr::Ctor(..) => true,
        Expr::Let(env, body) => match &**body {
            Expr::Lam(..) | Expr::Ctor(..) => true,
            Expr::Var(x) => {
                let mut cur = x.clone();
                for _ in 0..=env.len() {
                    match env.iter().find(|(y, _)| *y == cur).map(|(_, r)| r) {
                        Some(Expr::Var(z)) => cur = z.clone(),
                        Some(Expr::Ctor(..)) => return true,
                        _ => return false,
                    }
                }
                false
            }
            _ => false,
        },
        _ => false,
    }
}

/// Every constructor node has exactly its declared arity.
fn saturated(e: &Expr, table: &CtorTable) -> bool {
    positions(e).iter().all(|p| match subterm(e, p).unwrap() {
        Expr::Ctor(c, args) => table.arity(c) == Some(args.len()),
        _ => true,
    })
}

/// Constructor nodes with at least one non-variable argument, by print.
fn compound_ctors(e: &Expr) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in positions(e) {
        if let Expr::Ctor(_, args) = subterm(e, &p).unwrap() {
            if args.iter().any(|a| a.as_var().is_none()) {
                *out.entry(print(&fresh(subterm(e, &p).unwrap()))).or_insert(0) += 1;
            }
        }
    }
    out
}

/// A sequence of sr steps from `e`, taking left branches at choices.
fn reducts(e: &Expr, steps: usize) -> Vec<Expr> {
    let mut out = vec![fresh(e)];
    for _ in 0..steps {
        let next = match sr_step(out.last().unwrap()) {
            StepVerdict::Unique(_, t) => t,
            StepVerdict::ProbBranch { left, .. } => left,
            _ => break,
        };
        out.push(fresh(&next));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // Syntax

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), size in 1usize..30) {
        let e = core_term(seed, size);
        let back = parse_with(&print(&e), &ParseOptions::core()).unwrap();
        prop_assert!(alpha_equiv(&back, &e), "{}", print(&e));
        let e = ext_term(seed, size);
        let back = parse(&print(&e)).unwrap();
        prop_assert!(alpha_equiv(&back, &e), "{}", print(&e));
    }

    #[test]
    fn freshening_preserves_alpha_class(seed in any::<u64>()) {
        let e = ext_term(seed, 25);
        let f = fresh(&e);
        prop_assert!(alpha_equiv(&e, &f));
        prop_assert!(obeys_convention(&f));
        prop_assert_eq!(fingerprint(&e), fingerprint(&f));
    }

    #[test]
    fn substitution_free_variables(seed in any::<u64>(), other in any::<u64>()) {
        let e = core_term(seed, 20);
        let t = Expr::app(core_term(other, 6), Expr::var("zz"));
        for p in positions(&e) {
            let Expr::Lam(x, body) = subterm(&e, &p).unwrap() else { continue };
            if !free_vars(body).contains(x) {
                continue;
            }
            let mut want = free_vars(body);
            want.remove(x);
            want.extend(free_vars(&t));
            prop_assert_eq!(free_vars(&substitute(body, x, &t)), want);
        }
    }

    #[test]
    fn context_classes_are_nested(seed in any::<u64>()) {
        let e = ext_term(seed, 25);
        for p in positions(&e) {
            let cls = classify_position(&e, &p).unwrap();
            prop_assert!(cls.contains(&ContextClass::C));
            if cls.contains(&ContextClass::S) { prop_assert!(cls.contains(&ContextClass::C)); }
            if cls.contains(&ContextClass::R) { prop_assert!(cls.contains(&ContextClass::S)); }
            if cls.contains(&ContextClass::A) { prop_assert!(cls.contains(&ContextClass::R)); }
        }
    }

    #[test]
    fn environments_are_unordered(seed in any::<u64>()) {
        let e = core_term(seed, 25);
        for p in positions(&e) {
            let Expr::Let(env, body) = subterm(&e, &p).unwrap() else { continue };
            let mut rev = env.clone();
            rev.reverse();
            let l = Expr::Let(env.clone(), body.clone());
            let r = Expr::Let(rev, body.clone());
            prop_assert!(alpha_equiv(&l, &r));
            prop_assert_eq!(fingerprint(&l), fingerprint(&r));
        }
    }

    // Reduction

    #[test]
    fn reduction_is_deterministic_and_whnf_is_normal(seed in any::<u64>()) {
        let mut terms = reducts(&ext_term(seed, 20), 30);
        terms.extend(reducts(&inspect_term(seed), 30));
        for e in terms {
            let (a, b) = (sr_step(&e), sr_step(&e));
            match (&a, &b) {
                (StepVerdict::Unique(r1, t1), StepVerdict::Unique(r2, t2)) => {
                    prop_assert_eq!(r1, r2);
                    prop_assert!(alpha_equiv(t1, t2));
                }
                (StepVerdict::ProbBranch { left: l1, right: r1, .. }, StepVerdict::ProbBranch { left: l2, right: r2, .. }) => {
                    prop_assert!(alpha_equiv(l1, l2) && alpha_equiv(r1, r2));
                }
                (StepVerdict::Whnf, StepVerdict::Whnf) | (StepVerdict::Stuck(_), StepVerdict::Stuck(_)) => {}
                _ => prop_assert!(false, "different verdicts on {}", print(&e)),
            }
            prop_assert_eq!(is_whnf(&e), matches!(a, StepVerdict::Whnf), "{}", print(&e));
            prop_assert_eq!(is_whnf(&e), whnf_oracle(&e), "{}", print(&e));
        }
    }

    #[test]
    fn prob_branches_resolve_the_redex(seed in any::<u64>()) {
        for e in reducts(&core_term(seed, 20), 30) {
            let StepVerdict::ProbBranch { redex, left, right } = sr_step(&e) else { continue };
            let Expr::Choice(l, r) = subterm(&e, &redex).unwrap() else {
                prop_assert!(false, "redex is not a choice");
                unreachable!()
            };
            prop_assert!(alpha_equiv(&left, &lazyprob::syntax::replace_at(&e, &redex, (**l).clone()).unwrap()));
            prop_assert!(alpha_equiv(&right, &lazyprob::syntax::replace_at(&e, &redex, (**r).clone()).unwrap()));
        }
    }

    #[test]
    fn successors_keep_the_convention(seed in any::<u64>()) {
        let mut e = fresh(&ext_term(seed, 20));
        for _ in 0..30 {
            prop_assert!(obeys_convention(&e), "{}", print(&e));
            e = match sr_step(&e) {
                StepVerdict::Unique(_, t) => t,
                StepVerdict::ProbBranch { right, .. } => right,
                _ => break,
            };
        }
    }

    // Convergence

    #[test]
    fn leaf_weights_sum_to_one(seed in any::<u64>(), k in 0usize..5) {
        let tree = explore(&core_term(seed, 25), k, 300);
        let total: Weight = tree.leaves().iter().map(|l| l.weight.clone()).sum();
        prop_assert_eq!(total, Weight::one());
    }

    #[test]
    fn bounds_are_monotone(seed in any::<u64>()) {
        let e = core_term(seed, 25);
        let mut prev = excv_bounds(&e, 0, 50);
        for k in 1..4 {
            let b = excv_bounds(&e, k, 50);
            prop_assert!(b.lo >= prev.lo);
            prev = b;
        }
        for k in 0..4 {
            let mut prev = excv_bounds(&e, k, 10);
            for fuel in [40, 160, 640] {
                let b = excv_bounds(&e, k, fuel);
                prop_assert!(b.lo >= prev.lo && b.hi <= prev.hi, "k={} fuel={}", k, fuel);
                prev = b;
            }
        }
    }

    #[test]
    fn scaling_is_exact(seed in any::<u64>(), n in 0i64..9, d in 1i64..9) {
        let e = core_term(seed, 20);
        let p = Weight::new(n.into(), d.into());
        let b = excv_bounds(&e, 3, 200);
        let s = excv_scaled(&p, &e, 3, 200);
        prop_assert_eq!(s.lo, &b.lo * &p);
        prop_assert_eq!(s.hi, &b.hi * &p);
    }

    #[test]
    fn successes_replay_from_their_prob_sequence(seed in any::<u64>()) {
        let e = core_term(seed, 25);
        let tree = explore(&e, 4, 500);
        let mut seen = BTreeSet::new();
        for leaf in tree.leaves() {
            let LeafKind::Success(t) = &leaf.kind else { continue };
            prop_assert!(seen.insert(leaf.probseq.clone()));
            let replay = reduce_trace(&e, &leaf.probseq, 500 * (leaf.probseq.len() as u64 + 1));
            prop_assert!(matches!(replay.end, ReplayEnd::Whnf));
            prop_assert!(alpha_equiv(&replay.term, t));
            let again = reduce_trace(&e, &leaf.probseq, 500 * (leaf.probseq.len() as u64 + 1));
            prop_assert!(alpha_equiv(&replay.term, &again.term));
        }
    }

    #[test]
    fn frontier_weights_sum_to_one(seed in any::<u64>(), depth in 0usize..4) {
        let e = core_term(seed, 20);
        if let Ok(r) = frontier_evaluate(&e, &Frontier::full(depth), FrontierMode::Relaxed { fuel: 200 }) {
            prop_assert_eq!(r.total_weight(), Weight::one());
            prop_assert!(frontier_criteria_check(&r, &r, Criterion::EqCr2, DivergenceProbe::default()).holds());
        }
    }

    // Transformations

    #[test]
    fn matches_grow_with_the_class(seed in any::<u64>()) {
        let e = core_term(seed, 25);
        for t in [T::Lbeta, T::Lll, T::Cp, T::Cpx, T::Gc, T::Ucp, T::Xch, T::Probcomm, T::Probdistr] {
            let r = match_sites(&e, t, ContextClass::R);
            let s = match_sites(&e, t, ContextClass::S);
            let c = match_sites(&e, t, ContextClass::C);
            prop_assert!(r.iter().all(|m| s.contains(m)));
            prop_assert!(s.iter().all(|m| c.contains(m)));
        }
    }

    #[test]
    fn rewriting_never_adds_free_variables(seed in any::<u64>()) {
        // An open term: the generated term applied to a free variable.
        let e = fresh(&Expr::app(ext_term(seed, 22), Expr::var("free")));
        let table = CtorTable::standard();
        for t in T::ALL.into_iter().filter(|t| !t.is_union()) {
            for m in match_sites(&e, t, ContextClass::C) {
                let out = apply(&e, &m).unwrap();
                prop_assert!(free_vars(&out).is_subset(&free_vars(&e)), "{} on {}", m, print(&e));
                prop_assert!(saturated(&out, &table), "{} on {}", m, print(&e));
            }
        }
    }

    #[test]
    fn lll_chains_terminate(seed in any::<u64>()) {
        let mut config = GenConfig::core(25);
        config.let_ = 6;
        let mut e = Generator::new(seed, config).term();
        for _ in 0..200 {
            let sites = match_sites(&e, T::Lll, ContextClass::C);
            let Some(m) = sites.last() else { return Ok(()) };
            let next = apply(&e, m).unwrap();
            prop_assert!(lmp_measure(&next) < lmp_measure(&e));
            e = next;
        }
        prop_assert!(false, "lll chain longer than 200 steps");
    }

    #[test]
    fn probcomm_is_an_involution(seed in any::<u64>()) {
        let e = core_term(seed, 25);
        for m in match_sites(&e, T::Probcomm, ContextClass::C) {
            let once = apply(&e, &m).unwrap();
            let back = match_sites(&once, T::Probcomm, ContextClass::C).into_iter().find(|n| n.site == m.site).unwrap();
            prop_assert!(alpha_equiv(&apply(&once, &back).unwrap(), &e));
        }
    }

    #[test]
    fn probid_needs_equal_arguments(seed in any::<u64>()) {
        let base = core_term(seed, 12);
        let e = Expr::choice(base.clone(), fresh(&base));
        let ms = match_sites(&e, T::Probid, ContextClass::C);
        let root = ms.iter().find(|m| m.site.is_root()).unwrap();
        prop_assert!(alpha_equiv(&apply(&e, root).unwrap(), &base));
        for m in ms {
            let Expr::Choice(l, r) = subterm(&e, &m.site).unwrap() else { unreachable!() };
            prop_assert!(alpha_equiv(l, r));
        }
    }

    // Extended calculus

    #[test]
    fn case_c_and_seq_c_agree_with_reduction(seed in any::<u64>()) {
        let mut terms = reducts(&ext_term(seed, 22), 30);
        terms.extend(reducts(&inspect_term(seed), 30));
        for e in terms {
            let StepVerdict::Unique(rule, t) = sr_step(&e) else { continue };
            let id = match rule {
                Rule::CaseC => T::CaseC,
                Rule::SeqC => T::SeqC,
                _ => continue,
            };
            let found = match_sites(&e, id, ContextClass::R).iter().any(|m| alpha_equiv(&apply(&e, m).unwrap(), &t));
            prop_assert!(found, "{} on {}", rule, print(&e));
        }
    }

    #[test]
    fn case_in_shares_constructor_arguments(seed in any::<u64>()) {
        let mut terms = reducts(&ext_term(seed, 22), 30);
        terms.extend(reducts(&inspect_term(seed), 30));
        for e in terms {
            let StepVerdict::Unique(Rule::CaseIn, t) = sr_step(&e) else { continue };
            let (before, after) = (compound_ctors(&e), compound_ctors(&t));
            for (k, n) in &after {
                prop_assert!(before.get(k).copied().unwrap_or(0) >= *n, "{} duplicated by case-in in {}", k, print(&e));
            }
        }
    }

    // Equivalence

    #[test]
    fn offset_check_is_reflexive(seed in any::<u64>(), k in 0usize..4, d in 0usize..3) {
        let e = core_term(seed, 20);
        let v = excv_offset_check(&e, &fresh(&e), &[ContextSpec::hole()], k, d, 100).unwrap();
        prop_assert!(v.holds());
    }

    #[test]
    fn refutations_use_certified_intervals(seed in any::<u64>(), other in any::<u64>()) {
        let (s, t) = (core_term(seed, 8), core_term(other, 8));
        if let Verdict::FailsWith(Evidence::Context { context, left, right }) = counterexample_search(&s, &t, 4, 2, 100) {
            prop_assert!(left.lo > right.hi || right.lo > left.hi);
            let l = bounds_of(&explore(&context.fill(&s), 2, 100));
            let r = bounds_of(&explore(&context.fill(&t), 2, 100));
            prop_assert_eq!((l.lo, l.hi), (left.lo, left.hi));
            prop_assert_eq!((r.lo, r.hi), (right.lo, right.hi));
        }
    }
}

#[test]
fn inspection_terms_reach_every_inspection_rule() {
    let mut seen = BTreeSet::new();
    for seed in 0..36 {
        for e in reducts(&inspect_term(seed), 30) {
            if let StepVerdict::Unique(r, _) = sr_step(&e) {
                seen.insert(r.name());
            }
        }
    }
    for r in ["case-c", "case-in", "seq-c", "seq-in"] {
        assert!(seen.contains(r), "{r} never used: {seen:?}");
    }
}

#[test]
fn fingerprint_separates_wiring() {
    let a = parse(r"\x.\y.x").unwrap();
    let b = parse(r"\x.\y.y").unwrap();
    assert_ne!(fingerprint(&a), fingerprint(&b));
    let c = parse(r"let x = y, y = K in x").unwrap();
    let d = parse(r"let y = K, x = y in x").unwrap();
    assert_eq!(fingerprint(&c), fingerprint(&d));
}
