//! Termination certificates: every rule of a system oriented by one order.

use std::fmt;

use crate::error::TrsError;
use crate::order::{kbo_greater, lpo_greater, KboWeights, Precedence};
use crate::systems::{system, Rule, SymbolicTrs, SystemId};

/// A reduction order with its parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Kbo { weights: KboWeights, precedence: Precedence },
    Lpo { precedence: Precedence },
}

impl Certificate {
    /// Whether `l > r` in this order.
    pub fn orients(&self, rule: &Rule) -> Result<bool, TrsError> {
        match self {
            Certificate::Kbo { weights, precedence } => kbo_greater(&rule.lhs, &rule.rhs, weights, precedence),
            Certificate::Lpo { precedence } => Ok(lpo_greater(&rule.lhs, &rule.rhs, precedence)),
        }
    }

    /// The rules of `trs` this order does not orient.
    pub fn unoriented(&self, trs: &SymbolicTrs) -> Result<Vec<Rule>, TrsError> {
        let mut out = Vec::new();
        for r in &trs.rules {
            if !self.orients(r)? {
                out.push(r.clone());
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Kbo { weights, precedence } => write!(f, "KBO({weights}; {precedence})"),
            Certificate::Lpo { precedence } => write!(f, "LPO({precedence})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationVerdict {
    /// Every rule decreases in the certificate's order.
    Holds(Certificate),
    /// No order tried orients every rule; `unoriented` belongs to the
    /// closest attempt.
    Fails { closest: Option<Certificate>, unoriented: Vec<Rule>, detail: String },
}

impl TerminationVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, TerminationVerdict::Holds(_))
    }
}

impl fmt::Display for TerminationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationVerdict::Holds(c) => write!(f, "holds: {c}"),
            TerminationVerdict::Fails { closest, unoriented, detail } => {
                write!(f, "fails: {detail}")?;
                if let Some(c) = closest {
                    let rules: Vec<String> = unoriented.iter().map(|r| r.to_string()).collect();
                    write!(f, "; closest {c} leaves {}", rules.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

fn kbo(weights: &[(&str, u64)], precedence: &[(&str, &str)]) -> Certificate {
    Certificate::Kbo {
        weights: KboWeights::new(weights, 1),
        precedence: Precedence::new(precedence).expect("acyclic precedence"),
    }
}

/// The fixed order certifying `id`, when there is one.
pub fn reference_order(id: SystemId) -> Option<Certificate> {
    match id {
        SystemId::LllFork => Some(kbo(&[("Slll", 0), ("SR", 1), ("SRlll", 1)], &[("Slll", "SR"), ("Slll", "SRlll")])),
        SystemId::LllCommute => Some(Certificate::Lpo {
            precedence: Precedence::new(&[("Sllet", "Slapp"), ("Slapp", "SR"), ("Slapp", "SRlll")])
                .expect("acyclic precedence"),
        }),
        SystemId::CpFork => Some(kbo(&[("Scp", 0), ("SR", 1)], &[("Scp", "SR")])),
        SystemId::Cpx => Some(kbo(&[("Scpx", 0), ("SR", 1)], &[("Scpx", "SR")])),
        _ => None,
    }
}

/// Largest symbol weight tried by [`search_order`].
pub const SEARCH_MAX_WEIGHT: u64 = 3;

/// Looks for an LPO over some total precedence, then a KBO with weights up
/// to [`SEARCH_MAX_WEIGHT`] and some total precedence, orienting every rule.
/// Returns the best order found and the rules it leaves unoriented.
pub fn search_order(trs: &SymbolicTrs) -> (Certificate, Vec<Rule>) {
    let symbols: Vec<String> = trs.signature().into_iter().map(|(f, _)| f).collect();
    let mut best: Option<(Certificate, Vec<Rule>)> = None;
    let mut consider = |c: Certificate| -> bool {
        let Ok(left) = c.unoriented(trs) else { return false };
        let done = left.is_empty();
        if best.as_ref().is_none_or(|(_, b)| left.len() < b.len()) {
            best = Some((c, left));
        }
        done
    };
    let orders = permutations(&symbols);
    for order in &orders {
        let names: Vec<&str> = order.iter().map(String::as_str).collect();
        if consider(Certificate::Lpo { precedence: Precedence::chain(&names).expect("total order") }) {
            return best.expect("just recorded");
        }
    }
    let mut weights = vec![0u64; symbols.len()];
    loop {
        for order in &orders {
            let names: Vec<&str> = order.iter().map(String::as_str).collect();
            let table: Vec<(&str, u64)> = symbols.iter().map(String::as_str).zip(weights.iter().copied()).collect();
            let c = Certificate::Kbo {
                weights: KboWeights::new(&table, 1),
                precedence: Precedence::chain(&names).expect("total order"),
            };
            if consider(c) {
                return best.expect("just recorded");
            }
        }
        // Next weight vector in base SEARCH_MAX_WEIGHT + 1.
        let mut i = 0;
        loop {
            if i == weights.len() {
                return best.expect("at least one order tried");
            }
            weights[i] += 1;
            if weights[i] <= SEARCH_MAX_WEIGHT {
                break;
            }
            weights[i] = 0;
            i += 1;
        }
    }
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Checks that every rule of `id` decreases in its reference order, or in
/// some searched order when no reference order is fixed.
pub fn verify_termination_claim(id: SystemId) -> Result<TerminationVerdict, TrsError> {
    let trs = system(id);
    if trs.has_rhs_only_vars() {
        return Err(TrsError::EmitOnly(id.name().to_string()));
    }
    match reference_order(id) {
        Some(c) => {
            let left = c.unoriented(&trs)?;
            Ok(if left.is_empty() {
                TerminationVerdict::Holds(c)
            } else {
                TerminationVerdict::Fails {
                    detail: format!("{} of {} rules not oriented by the reference order", left.len(), trs.rules.len()),
                    closest: Some(c),
                    unoriented: left,
                }
            })
        }
        None => {
            let (c, left) = search_order(&trs);
            Ok(if left.is_empty() {
                TerminationVerdict::Holds(c)
            } else {
                TerminationVerdict::Fails {
                    detail: format!(
                        "no LPO and no KBO with weights up to {SEARCH_MAX_WEIGHT} over a total precedence orients all {} rules",
                        trs.rules.len()
                    ),
                    closest: Some(c),
                    unoriented: left,
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_orders_hold() {
        for id in [SystemId::LllFork, SystemId::LllCommute, SystemId::CpFork, SystemId::Cpx] {
            let v = verify_termination_claim(id).unwrap();
            assert!(v.holds(), "{id}: {v}");
        }
    }

    #[test]
    fn gc_ucp_systems_are_emit_only() {
        for id in [SystemId::GcUcpFork, SystemId::GcUcpCommute] {
            assert!(matches!(verify_termination_claim(id), Err(TrsError::EmitOnly(_))));
        }
    }

    #[test]
    fn search_finds_an_order_for_a_simple_system() {
        let trs = SymbolicTrs::parse("t", &["x"], &["f(g(x)) -> g(f(x))", "f(g(x)) -> x"]).unwrap();
        let (c, left) = search_order(&trs);
        assert!(left.is_empty(), "{c}");
    }

    #[test]
    fn permutations_are_complete() {
        let items: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = permutations(&items);
        assert_eq!(p.len(), 6);
        let mut sorted = p.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 6);
    }
}
