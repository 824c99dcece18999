//! The concept language: feature vocabularies, rule ASTs, the s-expression
//! reader and printer, the evaluator and bounded equivalence checking.

mod concept;
mod equiv;
mod eval;
mod parse;
mod vocab;

use thiserror::Error;

pub use concept::{BinOp, Concept, ConceptDisplay, QuantKind, RelKind, Scope, Var};
pub use equiv::{counterexample, equivalent, smallest_counterexample, for_each_context, EquivOptions, DEFAULT_CONTEXT_CAP};
pub use eval::eval;
pub use parse::{parse, parse_lines, parse_pattern, Pattern};
pub use vocab::{Context, Dim, FeatureVocab, Obj, MAX_SET_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown feature value `{name}` at byte {pos}")]
    UnknownFeature { pos: usize, name: String },
    #[error("unbound variable {index} at byte {pos}")]
    UnboundVariable { pos: usize, index: usize },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid context: {0}")]
    Context(String),
    #[error("enumeration exceeded {limit} contexts; lower max_set_size")]
    Budget { limit: usize },
}
