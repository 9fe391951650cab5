//! Term rewrite systems over unary step symbols, the Knuth-Bendix and
//! lexicographic path orders, and termination certificates for the systems
//! that encode diagram application.

pub mod error;
pub mod order;
pub mod systems;
pub mod term;
pub mod verify;

pub use error::TrsError;
pub use order::{kbo_greater, lpo_greater, KboWeights, Precedence};
pub use systems::{emit_trs, system, Rule, SymbolicTrs, SystemId};
pub use term::Term;
pub use verify::{reference_order, search_order, verify_termination_claim, Certificate, TerminationVerdict};
