//! Named closed combinators used throughout examples and tests.

use crate::syntax::{Expr, Var};

/// `\x.x`
pub fn id() -> Expr {
    Expr::lam(Var::new("x"), Expr::var("x"))
}

/// `\x.\y.x`
pub fn k() -> Expr {
    Expr::lam(Var::new("x"), Expr::lam(Var::new("y"), Expr::var("x")))
}

/// `\x.\y.y`
pub fn k2() -> Expr {
    Expr::lam(Var::new("x"), Expr::lam(Var::new("y"), Expr::var("y")))
}

/// `let x = x in x`, a decidably divergent term.
pub fn bot() -> Expr {
    Expr::let_in(vec![(Var::new("x"), Expr::var("x"))], Expr::var("x"))
}

/// `\x.x x`
pub fn omega_half() -> Expr {
    Expr::lam(Var::new("x"), Expr::app(Expr::var("x"), Expr::var("x")))
}

/// `(\x.x x) (\x.x x)`
pub fn omega() -> Expr {
    Expr::app(omega_half(), omega_half())
}

/// The projection `\x1.\x2. ... \xn. xi` (1-based `i`).
pub fn projection(i: usize, n: usize) -> Expr {
    assert!(1 <= i && i <= n, "projection index out of range");
    let body = Expr::var(&format!("x{i}"));
    (1..=n).rev().fold(body, |acc, j| Expr::lam(Var::new(&format!("x{j}")), acc))
}

/// Expansion of a shorthand name, if it is one.
pub fn shorthand(name: &str) -> Option<Expr> {
    match name {
        "id" => Some(id()),
        "K" => Some(k()),
        "K2" => Some(k2()),
        "Bot" => Some(bot()),
        "Omega" => Some(omega()),
        _ => None,
    }
}
