//! Order examples and algebraic properties of KBO and LPO.

use lazyprob_trs::{kbo_greater, lpo_greater, verify_termination_claim, KboWeights, Precedence, SystemId, Term, TrsError};
use proptest::prelude::*;

fn t(s: &str) -> Term {
    Term::parse(s, &["x"]).unwrap()
}

fn lll_weights() -> (KboWeights, Precedence) {
    (
        KboWeights::new(&[("Slll", 0), ("SR", 1), ("SRlll", 1)], 1),
        Precedence::new(&[("Slll", "SR"), ("Slll", "SRlll")]).unwrap(),
    )
}

#[test]
fn kbo_examples() {
    let (w, p) = lll_weights();
    assert!(kbo_greater(&t("Slll(SR(x))"), &t("SR(Slll(x))"), &w, &p).unwrap());
    assert!(kbo_greater(&t("f(x)"), &t("x"), &KboWeights::new(&[("f", 1)], 1), &Precedence::default()).unwrap());
    // By hand: both sides weigh w(SR) + w0 = 2 and 0 + 1 + 1 = 2; variable
    // counts are equal; the heads compare SR below Slll.
    assert!(!kbo_greater(&t("SR(x)"), &t("Slll(SR(x))"), &w, &p).unwrap());
}

#[test]
fn kbo_rejects_inadmissible_weights() {
    let w = KboWeights::new(&[("Slll", 0), ("SR", 1), ("SRlll", 1)], 1);
    let p = Precedence::new(&[("Slll", "SR")]).unwrap();
    assert!(matches!(kbo_greater(&t("Slll(SR(x))"), &t("SR(x)"), &w, &p), Err(TrsError::InadmissibleWeights(_))));
}

#[test]
fn lpo_examples() {
    let p = Precedence::new(&[("Sllet", "SR")]).unwrap();
    assert!(lpo_greater(&t("Sllet(SR(x))"), &t("SR(Sllet(x))"), &p));
    assert!(!lpo_greater(&t("x"), &t("x"), &p));
    let p = Precedence::new(&[("Slapp", "SRlll")]).unwrap();
    assert!(lpo_greater(&t("Slapp(SRlll(x))"), &t("SRlll(SRlll(x))"), &p));
}

#[test]
fn termination_claims() {
    for id in [SystemId::LllFork, SystemId::LllCommute, SystemId::CpFork, SystemId::Cpx] {
        assert!(verify_termination_claim(id).unwrap().holds(), "{id}");
    }
}

/// Ground terms over constants a, b, unary f, g and binary h.
fn ground() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![Just(Term::constant("a")), Just(Term::constant("b"))];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|x| Term::unary("f", x)),
            inner.clone().prop_map(|x| Term::unary("g", x)),
            (inner.clone(), inner).prop_map(|(x, y)| Term::app("h", vec![x, y])),
        ]
    })
}

fn orders() -> (KboWeights, Precedence) {
    (
        KboWeights::new(&[("a", 1), ("b", 2), ("f", 0), ("g", 1), ("h", 1)], 1),
        Precedence::chain(&["f", "h", "g", "b", "a"]).unwrap(),
    )
}

proptest! {
    #[test]
    fn kbo_is_irreflexive(s in ground()) {
        let (w, p) = orders();
        prop_assert!(!kbo_greater(&s, &s, &w, &p).unwrap());
    }

    #[test]
    fn lpo_is_irreflexive(s in ground()) {
        let (_, p) = orders();
        prop_assert!(!lpo_greater(&s, &s, &p));
    }

    #[test]
    fn kbo_is_transitive(a in ground(), b in ground(), c in ground()) {
        let (w, p) = orders();
        if kbo_greater(&a, &b, &w, &p).unwrap() && kbo_greater(&b, &c, &w, &p).unwrap() {
            prop_assert!(kbo_greater(&a, &c, &w, &p).unwrap());
        }
    }

    #[test]
    fn lpo_is_transitive(a in ground(), b in ground(), c in ground()) {
        let (_, p) = orders();
        if lpo_greater(&a, &b, &p) && lpo_greater(&b, &c, &p) {
            prop_assert!(lpo_greater(&a, &c, &p));
        }
    }

    #[test]
    fn orders_are_asymmetric(a in ground(), b in ground()) {
        let (w, p) = orders();
        prop_assert!(!(kbo_greater(&a, &b, &w, &p).unwrap() && kbo_greater(&b, &a, &w, &p).unwrap()));
        prop_assert!(!(lpo_greater(&a, &b, &p) && lpo_greater(&b, &a, &p)));
    }

    #[test]
    fn terms_contain_their_strict_subterms(s in ground()) {
        let (w, p) = orders();
        let wrapped = Term::app("h", vec![s.clone(), Term::constant("a")]);
        prop_assert!(kbo_greater(&wrapped, &s, &w, &p).unwrap());
        prop_assert!(lpo_greater(&wrapped, &s, &p));
    }
}
