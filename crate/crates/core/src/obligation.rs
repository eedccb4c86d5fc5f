//! Arithmetic proof obligations left for an external solver.

use std::fmt;

use serde::Serialize;

use crate::expr::{smt, BExpr, ExprError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationKind {
    /// `cond → goal` at a completed branch of the synchronized specification.
    Goal,
    /// The initial condition establishes the loop condition.
    RecCondEntry,
    /// The loop condition is re-established at the end of one iteration.
    RecCondInductive,
    /// An implicit boundary time is the least crossing.
    LeastCrossing,
    /// A branch kept without a refutation of its condition.
    Feasibility,
}

impl ObligationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObligationKind::Goal => "goal",
            ObligationKind::RecCondEntry => "rec_cond_entry",
            ObligationKind::RecCondInductive => "rec_cond_inductive",
            ObligationKind::LeastCrossing => "least_crossing",
            ObligationKind::Feasibility => "feasibility",
        }
    }
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Validity claim `hyp → goal`, universally closed over its free symbols.
/// A feasibility obligation instead asks whether `hyp` is satisfiable and
/// carries `goal = false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub label: String,
    pub hyp: BExpr,
    pub goal: BExpr,
}

impl Obligation {
    pub fn new(kind: ObligationKind, label: impl Into<String>, hyp: BExpr, goal: BExpr) -> Obligation {
        Obligation { kind, label: label.into(), hyp, goal }
    }

    /// SMT-LIB script whose `unsat` answer establishes the obligation (for
    /// feasibility, `unsat` refutes the branch).
    pub fn to_smtlib(&self) -> Result<String, ExprError> {
        let body = smt::to_smtlib(&self.goal, &self.hyp)?;
        Ok(format!("; {} {}\n{}", self.kind, self.label, body))
    }
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {} --> {}", self.kind, self.label, self.hyp, self.goal)
    }
}
