//! A workbench for a call-by-need lambda calculus with binary probabilistic
//! choice: syntax, standard reduction, exact expected-convergence bounds,
//! program transformations, equivalence testing and diagram checking.

pub mod combinators;
pub mod convergence;
pub mod ctors;
pub mod diagram;
pub mod equiv;
pub mod error;
pub mod fuzz;
pub mod gen;
pub mod parse;
pub mod print;
pub mod reduce;
pub mod syntax;
pub mod transform;

pub use ctors::CtorTable;
pub use error::{ParseError, SyntaxError};
pub use parse::{parse, parse_with, ParseOptions};
pub use print::print;
pub use syntax::{alpha_equiv, free_vars, freshen, substitute, ContextClass, Expr, Position, Step, Var};
