use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrsError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("inadmissible weights: {0}")]
    InadmissibleWeights(String),
    #[error("cyclic precedence through `{0}`")]
    CyclicPrecedence(String),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("system `{0}` has right-hand-side-only variables and is emit-only")]
    EmitOnly(String),
}
