//! Seeded generator of random closed, well-scoped terms.
//!
//! Every binder gets a fresh name, so generated terms obey the distinct
//! variable convention. The node mix is configurable; a high `bot` weight
//! makes certainly divergent leaves common.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combinators;
use crate::ctors::CtorTable;
use crate::syntax::{freshen, Alt, Expr, Var};

/// Relative weights of the node kinds.
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Upper bound on [`Expr::size`] of generated terms, raised to
    /// [`MIN_CLOSED_SIZE`] if smaller.
    pub max_size: usize,
    pub var: u32,
    pub combinator: u32,
    pub bot: u32,
    pub lam: u32,
    pub app: u32,
    pub choice: u32,
    pub let_: u32,
    /// Constructor, `case` and `seq` nodes; zero in core mode.
    pub extended: u32,
    /// Chance that a `let` binding is a constructor over variables in scope.
    pub ctor_bindings: f64,
    pub ctors: CtorTable,
}

impl GenConfig {
    /// Core-calculus mix.
    pub fn core(max_size: usize) -> Self {
        GenConfig {
            max_size,
            var: 6,
            combinator: 3,
            bot: 1,
            lam: 3,
            app: 4,
            choice: 3,
            let_: 4,
            extended: 0,
            ctor_bindings: 0.0,
            ctors: CtorTable::standard(),
        }
    }

    /// Core mix with many `Bot` leaves.
    pub fn bot_rich(max_size: usize) -> Self {
        GenConfig { bot: 6, combinator: 4, ..GenConfig::core(max_size) }
    }

    /// Mix including constructors, `case` and `seq`.
    pub fn extended(max_size: usize) -> Self {
        GenConfig { extended: 5, ..GenConfig::core(max_size) }
    }

    /// Extended mix where `let` often binds constructor applications.
    pub fn ctor_rich(max_size: usize) -> Self {
        GenConfig { let_: 8, ctor_bindings: 0.4, ..GenConfig::extended(max_size) }
    }
}

/// Deterministic term generator.
pub struct Generator {
    rng: ChaCha8Rng,
    config: GenConfig,
    counter: u32,
}

/// Size of the largest closed leaf (`K`, `K2`, `Bot`): the smallest bound
/// every generated leaf fits under.
pub const MIN_CLOSED_SIZE: usize = 3;

/// Seed for trial `index` of a run seeded with `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Generator {
    pub fn new(seed: u64, config: GenConfig) -> Self {
        Generator { rng: ChaCha8Rng::seed_from_u64(seed), config, counter: 0 }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A random closed term of size at most `max_size`, or at most
    /// [`MIN_CLOSED_SIZE`] when `max_size` is smaller.
    pub fn term(&mut self) -> Expr {
        let bound = self.config.max_size.max(MIN_CLOSED_SIZE);
        loop {
            let budget = self.rng.gen_range(1..=bound);
            let e = self.gen(budget, &mut Vec::new());
            if e.size() <= bound {
                // Combinator leaves reuse their binder names.
                return freshen(&e, &BTreeSet::new());
            }
        }
    }

    fn fresh(&mut self, base: &str) -> Var {
        self.counter += 1;
        Var::indexed(base, self.counter)
    }

    fn leaf(&mut self, scope: &[Var]) -> Expr {
        let c = &self.config;
        let var_w = if scope.is_empty() { 0 } else { c.var };
        let total = var_w + c.combinator + c.bot;
        let pick = self.rng.gen_range(0..total.max(1));
        if pick < var_w {
            Expr::Var(scope[self.rng.gen_range(0..scope.len())].clone())
        } else if pick < var_w + c.combinator {
            match self.rng.gen_range(0..3) {
                0 => combinators::id(),
                1 => combinators::k(),
                _ => combinators::k2(),
            }
        } else {
            combinators::bot()
        }
    }

    fn gen(&mut self, budget: usize, scope: &mut Vec<Var>) -> Expr {
        if budget <= 1 {
            return self.leaf(scope);
        }
        let c = self.config.clone();
        let weights = [c.var + c.combinator + c.bot, c.lam, c.app, c.choice, c.let_, c.extended];
        let total: u32 = weights.iter().sum();
        let mut pick = self.rng.gen_range(0..total);
        let mut kind = 0;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                kind = i;
                break;
            }
            pick -= w;
        }
        match kind {
            0 => self.leaf(scope),
            1 => {
                let x = self.fresh("x");
                scope.push(x.clone());
                let body = self.gen(budget - 1, scope);
                scope.pop();
                Expr::lam(x, body)
            }
            2 | 3 => {
                let left = self.rng.gen_range(1..budget);
                let l = self.gen(left, scope);
                let r = self.gen((budget - 1).saturating_sub(left).max(1), scope);
                if kind == 2 {
                    Expr::app(l, r)
                } else {
                    Expr::choice(l, r)
                }
            }
            4 => self.gen_let(budget, scope),
            _ => self.gen_extended(budget, scope),
        }
    }

    fn gen_let(&mut self, budget: usize, scope: &mut Vec<Var>) -> Expr {
        let n = self.rng.gen_range(1..=3usize).min(budget.saturating_sub(1).max(1));
        let names: Vec<Var> = (0..n).map(|_| self.fresh("y")).collect();
        let base = scope.len();
        scope.extend(names.iter().cloned());
        let share = (budget - 1) / (n + 1);
        let mut env = Vec::with_capacity(n);
        for x in &names {
            let rhs = if self.config.ctor_bindings > 0.0 && self.rng.gen_bool(self.config.ctor_bindings) {
                self.ctor_over(scope)
            } else if self.rng.gen_bool(0.3) {
                // Variable-to-variable bindings feed cpx, xch and chains.
                Expr::Var(scope[self.rng.gen_range(0..scope.len())].clone())
            } else {
                self.gen(share.max(1), scope)
            };
            env.push((x.clone(), rhs));
        }
        let body = self.gen(share.max(1), scope);
        scope.truncate(base);
        Expr::Let(env, Box::new(body))
    }

    /// A constructor application whose arguments are variables in scope.
    fn ctor_over(&mut self, scope: &[Var]) -> Expr {
        let ctors: Vec<(std::sync::Arc<str>, usize)> =
            self.config.ctors.types().flat_map(|(_, cs)| cs.iter().cloned()).filter(|(_, a)| *a > 0).collect();
        if ctors.is_empty() {
            return self.leaf(scope);
        }
        let (c, arity) = ctors[self.rng.gen_range(0..ctors.len())].clone();
        let args = (0..arity).map(|_| Expr::Var(scope[self.rng.gen_range(0..scope.len())].clone())).collect();
        Expr::Ctor(c, args)
    }

    fn gen_extended(&mut self, budget: usize, scope: &mut Vec<Var>) -> Expr {
        let types: Vec<(std::sync::Arc<str>, crate::ctors::CtorList)> =
            self.config.ctors.types().map(|(t, cs)| (t.clone(), cs.to_vec())).collect();
        if types.is_empty() {
            return self.leaf(scope);
        }
        let (ty, ctors) = types[self.rng.gen_range(0..types.len())].clone();
        match self.rng.gen_range(0..3) {
            0 => {
                let (c, arity) = ctors[self.rng.gen_range(0..ctors.len())].clone();
                let share = ((budget - 1) / arity.max(1)).max(1);
                let args = (0..arity).map(|_| self.gen(share, scope)).collect();
                Expr::Ctor(c, args)
            }
            1 => {
                let share = ((budget - 1) / (ctors.len() + 1)).max(1);
                let scrut = self.gen(share, scope);
                let alts = ctors
                    .iter()
                    .map(|(c, arity)| {
                        let binders: Vec<Var> = (0..*arity).map(|_| self.fresh("p")).collect();
                        let base = scope.len();
                        scope.extend(binders.iter().cloned());
                        let body = self.gen(share, scope);
                        scope.truncate(base);
                        Alt { ctor: c.clone(), binders, body }
                    })
                    .collect();
                Expr::Case(ty, Box::new(scrut), alts)
            }
            _ => {
                let left = self.rng.gen_range(1..budget);
                let l = self.gen(left, scope);
                let r = self.gen((budget - 1).saturating_sub(left).max(1), scope);
                Expr::seq(l, r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{free_vars, obeys_convention};

    #[test]
    fn terms_are_closed_and_bounded() {
        let mut g = Generator::new(7, GenConfig::extended(25));
        for _ in 0..300 {
            let e = g.term();
            assert!(e.size() <= 25);
            assert!(free_vars(&e).is_empty(), "{e:?}");
            assert!(obeys_convention(&e));
        }
    }

    #[test]
    fn tiny_bounds_still_produce_terms() {
        for max_size in 0..MIN_CLOSED_SIZE {
            let e = Generator::new(3, GenConfig::core(max_size)).term();
            assert!(e.size() <= MIN_CLOSED_SIZE);
            assert!(free_vars(&e).is_empty());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a: Vec<Expr> = {
            let mut g = Generator::new(42, GenConfig::core(20));
            (0..20).map(|_| g.term()).collect()
        };
        let b: Vec<Expr> = {
            let mut g = Generator::new(42, GenConfig::core(20));
            (0..20).map(|_| g.term()).collect()
        };
        assert_eq!(a, b);
    }
}
