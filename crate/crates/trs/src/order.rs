//! Knuth-Bendix order and lexicographic path order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::TrsError;
use crate::term::Term;

/// A strict precedence on function symbols, closed under transitivity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Precedence {
    greater: BTreeSet<(String, String)>,
}

impl Precedence {
    /// The transitive closure of the pairs `(f, g)` meaning `f > g`.
    pub fn new(pairs: &[(&str, &str)]) -> Result<Precedence, TrsError> {
        let mut greater: BTreeSet<(String, String)> =
            pairs.iter().map(|(f, g)| (f.to_string(), g.to_string())).collect();
        loop {
            let mut added = Vec::new();
            for (a, b) in &greater {
                for (c, d) in &greater {
                    if b == c && !greater.contains(&(a.clone(), d.clone())) {
                        added.push((a.clone(), d.clone()));
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            greater.extend(added);
        }
        if let Some((f, _)) = greater.iter().find(|(f, g)| f == g) {
            return Err(TrsError::CyclicPrecedence(f.clone()));
        }
        Ok(Precedence { greater })
    }

    /// The total order `symbols[0] > symbols[1] > ...`.
    pub fn chain(symbols: &[&str]) -> Result<Precedence, TrsError> {
        let pairs: Vec<(&str, &str)> = symbols.windows(2).map(|w| (w[0], w[1])).collect();
        Precedence::new(&pairs)
    }

    pub fn greater(&self, f: &str, g: &str) -> bool {
        self.greater.contains(&(f.to_string(), g.to_string()))
    }
}

impl fmt::Display for Precedence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.greater.iter().map(|(a, b)| format!("{a} > {b}")).collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// Symbol weights and the common variable weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KboWeights {
    pub symbols: BTreeMap<String, u64>,
    pub var_weight: u64,
}

impl KboWeights {
    pub fn new(weights: &[(&str, u64)], var_weight: u64) -> KboWeights {
        KboWeights { symbols: weights.iter().map(|(f, w)| (f.to_string(), *w)).collect(), var_weight }
    }

    fn of(&self, f: &str) -> u64 {
        self.symbols.get(f).copied().unwrap_or(0)
    }

    pub fn weight(&self, t: &Term) -> u64 {
        match t {
            Term::Var(_) => self.var_weight,
            Term::App(f, args) => self.of(f) + args.iter().map(|a| self.weight(a)).sum::<u64>(),
        }
    }

    /// Admissibility over `signature` (symbol, arity): a positive variable
    /// weight, constants at least that heavy, and every weight-0 unary
    /// symbol above all other symbols.
    pub fn check_admissible(&self, signature: &[(String, usize)], prec: &Precedence) -> Result<(), TrsError> {
        if self.var_weight == 0 {
            return Err(TrsError::InadmissibleWeights("variable weight must be positive".into()));
        }
        for (f, arity) in signature {
            if !self.symbols.contains_key(f) {
                return Err(TrsError::InadmissibleWeights(format!("no weight for `{f}`")));
            }
            let w = self.of(f);
            if *arity == 0 && w < self.var_weight {
                return Err(TrsError::InadmissibleWeights(format!("constant `{f}` is lighter than a variable")));
            }
            if *arity == 1 && w == 0 {
                if let Some((g, _)) = signature.iter().find(|(g, _)| g != f && !prec.greater(f, g)) {
                    return Err(TrsError::InadmissibleWeights(format!(
                        "`{f}` has weight 0 but is not above `{g}` in the precedence"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for KboWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|(s, w)| format!("w({s})={w}")).collect();
        write!(f, "{}, w0={}", parts.join(", "), self.var_weight)
    }
}

fn signature_of(terms: &[&Term], weights: &KboWeights) -> Vec<(String, usize)> {
    let mut syms = Vec::new();
    for t in terms {
        t.symbols(&mut syms);
    }
    let mut seen: BTreeMap<String, usize> = syms.into_iter().collect();
    for f in weights.symbols.keys() {
        // Symbols only named in the weight table still count for maximality;
        // their arity is unknown.
        seen.entry(f.clone()).or_insert(usize::MAX);
    }
    seen.into_iter().collect()
}

/// `l >kbo r`, after checking admissibility over the symbols of both terms
/// and the weight table.
pub fn kbo_greater(l: &Term, r: &Term, weights: &KboWeights, prec: &Precedence) -> Result<bool, TrsError> {
    weights.check_admissible(&signature_of(&[l, r], weights), prec)?;
    Ok(kbo(l, r, weights, prec))
}

fn kbo(l: &Term, r: &Term, w: &KboWeights, prec: &Precedence) -> bool {
    if let Term::Var(x) = r {
        return l != r && l.contains_var(x);
    }
    let lc = l.var_counts();
    if r.var_counts().iter().any(|(x, n)| lc.get(x).copied().unwrap_or(0) < *n) {
        return false;
    }
    let (wl, wr) = (w.weight(l), w.weight(r));
    if wl != wr {
        return wl > wr;
    }
    match (l, r) {
        (Term::App(f, ls), Term::App(g, rs)) => {
            if f != g {
                return prec.greater(f, g);
            }
            match ls.iter().zip(rs).find(|(a, b)| a != b) {
                Some((a, b)) => kbo(a, b, w, prec),
                None => false,
            }
        }
        _ => false,
    }
}

/// `l >lpo r` under the strict precedence `prec`.
pub fn lpo_greater(l: &Term, r: &Term, prec: &Precedence) -> bool {
    match (l, r) {
        (_, Term::Var(x)) => l != r && l.contains_var(x),
        (Term::Var(_), _) => false,
        (Term::App(f, ls), Term::App(g, rs)) => {
            if ls.iter().any(|a| a == r || lpo_greater(a, r, prec)) {
                return true;
            }
            let dominates = || rs.iter().all(|b| lpo_greater(l, b, prec));
            if prec.greater(f, g) {
                return dominates();
            }
            if f == g && ls.len() == rs.len() {
                if let Some((a, b)) = ls.iter().zip(rs).find(|(a, b)| a != b) {
                    return lpo_greater(a, b, prec) && dominates();
                }
            }
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Term {
        Term::parse(s, &["x", "y"]).unwrap()
    }

    fn lll_order() -> (KboWeights, Precedence) {
        (
            KboWeights::new(&[("Slll", 0), ("SR", 1), ("SRlll", 1)], 1),
            Precedence::new(&[("Slll", "SR"), ("Slll", "SRlll")]).unwrap(),
        )
    }

    #[test]
    fn weight_zero_unary_above_the_rest() {
        let (w, p) = lll_order();
        assert!(kbo_greater(&t("Slll(SR(x))"), &t("SR(Slll(x))"), &w, &p).unwrap());
        // Weights 2 and 2; the heads compare SR < Slll, so no.
        assert!(!kbo_greater(&t("SR(x)"), &t("Slll(SR(x))"), &w, &p).unwrap());
    }

    #[test]
    fn strict_subterm_with_positive_weight() {
        let w = KboWeights::new(&[("f", 1)], 1);
        assert!(kbo_greater(&t("f(x)"), &t("x"), &w, &Precedence::default()).unwrap());
        assert!(!kbo_greater(&t("x"), &t("x"), &w, &Precedence::default()).unwrap());
    }

    #[test]
    fn weight_zero_symbol_must_be_maximal() {
        let w = KboWeights::new(&[("Slll", 0), ("SR", 1)], 1);
        let err = kbo_greater(&t("Slll(SR(x))"), &t("SR(Slll(x))"), &w, &Precedence::default()).unwrap_err();
        assert!(matches!(err, TrsError::InadmissibleWeights(_)));
    }

    #[test]
    fn variable_condition_blocks_duplication() {
        let w = KboWeights::new(&[("f", 5), ("g", 1)], 1);
        assert!(!kbo_greater(&t("f(x,y)"), &t("g(x,x)"), &w, &Precedence::default()).unwrap());
        assert!(!kbo_greater(&t("f(x)"), &t("g(y)"), &w, &Precedence::default()).unwrap());
    }

    #[test]
    fn lpo_examples() {
        let p = Precedence::chain(&["Sllet", "Slapp", "SR"]).unwrap();
        assert!(lpo_greater(&t("Sllet(SR(x))"), &t("SR(Sllet(x))"), &p));
        assert!(!lpo_greater(&t("x"), &t("x"), &p));
        let p = Precedence::new(&[("Slapp", "SRlll")]).unwrap();
        assert!(lpo_greater(&t("Slapp(SRlll(x))"), &t("SRlll(SRlll(x))"), &p));
        assert!(!lpo_greater(&t("SRlll(SRlll(x))"), &t("Slapp(SRlll(x))"), &p));
    }

    #[test]
    fn precedence_closure_and_cycles() {
        let p = Precedence::chain(&["a", "b", "c"]).unwrap();
        assert!(p.greater("a", "c"));
        assert!(!p.greater("c", "a"));
        assert!(matches!(Precedence::new(&[("a", "b"), ("b", "a")]), Err(TrsError::CyclicPrecedence(_))));
    }
}
