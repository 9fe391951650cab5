//! Pretty-printer producing concrete syntax with minimal parentheses.
//!
//! Nested lambdas print as `\x.\y.e`; shorthands are not folded back.

use std::fmt::Write;

use crate::syntax::Expr;

/// Renders a term in the syntax accepted by [`crate::parse::parse`].
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    top(e, &mut out);
    out
}

fn top(e: &Expr, out: &mut String) {
    match e {
        Expr::Lam(x, body) => {
            let _ = write!(out, "\\{x}.");
            top(body, out);
        }
        Expr::Let(env, body) => {
            out.push_str("let ");
            for (i, (x, rhs)) in env.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{x} = ");
                top(rhs, out);
            }
            out.push_str(" in ");
            top(body, out);
        }
        Expr::Case(_, scrutinee, alts) => {
            out.push_str("case ");
            top(scrutinee, out);
            out.push_str(" of { ");
            for (i, alt) in alts.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                out.push_str(&alt.ctor);
                for b in &alt.binders {
                    let _ = write!(out, " {b}");
                }
                out.push_str(" -> ");
                top(&alt.body, out);
            }
            out.push_str(" }");
        }
        Expr::Choice(l, r) => {
            app(l, out);
            out.push_str(" <+> ");
            app(r, out);
        }
        _ => app(e, out),
    }
}

fn app(e: &Expr, out: &mut String) {
    match e {
        Expr::App(f, a) => {
            app(f, out);
            out.push(' ');
            atom(a, out);
        }
        Expr::Ctor(c, args) if !args.is_empty() => {
            out.push_str(c);
            for a in args {
                out.push(' ');
                atom(a, out);
            }
        }
        Expr::Seq(a, b) => {
            out.push_str("seq ");
            atom(a, out);
            out.push(' ');
            atom(b, out);
        }
        _ => atom(e, out),
    }
}

fn atom(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Ctor(c, args) if args.is_empty() => out.push_str(c),
        _ => {
            out.push('(');
            top(e, out);
            out.push(')');
        }
    }
}
