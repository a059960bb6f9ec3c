//! The invariant rule language.
//!
//! ```text
//! rule     := name "::" body
//! body     := cond "->" cmd_expr [":" cmd_expr]
//!           | "rate" "(" "task" id "," id ")" "<" int ("per" "period" | "per" duration)
//!             "->" "check" ":" "ignore"
//! cond     := and_expr {"or" and_expr}
//! and_expr := atom {"and" atom}
//! atom     := "(" cond ")" | "not" atom | signal cmp number
//!           | signal ["not"] "in" "[" number "," number "]"
//! cmd_expr := [actuator "="] cmd_atom {"and" cmd_atom}
//! cmd_atom := id ["(" [int] ")"]
//! ```
//!
//! Statements end at a newline or `;`, `#` starts a line comment, and the
//! symbols `∧ ∨ ¬ ∈ ∉ ≤ ≥ →` are accepted for their ASCII spellings.

mod ast;
mod eval;
mod lexer;
mod parser;
mod pretty;
mod validate;

pub use ast::{CmpOp, Condition, RateRule, RateWindow, Rule, RuleSet, SignalRef, Span, StateRule};
pub use eval::{evaluate_condition, expected_command};
pub use parser::{parse_command_expr, parse_rules};
pub use pretty::{pretty_print, print_condition, print_rule};
pub use validate::{Conflict, RuleContext};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax { line: u32, col: u32, expected: String, found: String },
    #[error("{line}:{col}: unknown signal `{name}`")]
    UnknownSignal { line: u32, col: u32, name: String },
    #[error("{line}:{col}: {message}")]
    UnknownCommand { line: u32, col: u32, message: String },
    #[error("{line}:{col}: unknown actuator `{name}`")]
    UnknownActuator { line: u32, col: u32, name: String },
    #[error("{line}:{col}: unknown task `{name}`")]
    UnknownTask { line: u32, col: u32, name: String },
    #[error("{line}:{col}: second rate rule for task `{task}` on `{actuator}`")]
    DuplicateRateRule { line: u32, col: u32, task: String, actuator: String },
    #[error("signal `{0}` is not present in the system state")]
    MissingSignal(String),
}

impl DslError {
    /// Source position, when the error has one.
    pub fn position(&self) -> Option<(u32, u32)> {
        match self {
            DslError::Syntax { line, col, .. }
            | DslError::UnknownSignal { line, col, .. }
            | DslError::UnknownCommand { line, col, .. }
            | DslError::UnknownActuator { line, col, .. }
            | DslError::UnknownTask { line, col, .. }
            | DslError::DuplicateRateRule { line, col, .. } => Some((*line, *col)),
            DslError::MissingSignal(_) => None,
        }
    }
}
