//! Feasibility decisions for branch conditions: the built-in linear check,
//! then an external solver, then keeping the branch undecided.

use std::sync::Arc;

use serde::Serialize;

use crate::expr::{smt, BExpr};
use crate::linear::{self, Feasibility};
use crate::solver::{Answer, Solver};

/// Which tier refuted a pruned condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Refuter {
    Syntactic,
    Linear,
    Smt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Infeasible(Refuter),
    Feasible,
    Undecided,
}

/// A condition found unsatisfiable, kept so the refutation can be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedBranch {
    pub cond: BExpr,
    pub by: Refuter,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PruneStats {
    pub checks: usize,
    pub syntactic: usize,
    pub linear: usize,
    pub smt: usize,
    pub feasible: usize,
    pub undecided: usize,
}

#[derive(Debug, Default)]
pub struct Pruner {
    solver: Option<Arc<Solver>>,
    pub stats: PruneStats,
    pub pruned: Vec<PrunedBranch>,
}

impl Pruner {
    pub fn new(solver: Option<Arc<Solver>>) -> Pruner {
        Pruner { solver, stats: PruneStats::default(), pruned: Vec::new() }
    }

    /// Decides satisfiability of `f`, recording refuted conditions.
    pub fn decide(&mut self, f: &BExpr) -> Decision {
        self.stats.checks += 1;
        let d = self.classify(f);
        match d {
            Decision::Infeasible(by) => {
                match by {
                    Refuter::Syntactic => self.stats.syntactic += 1,
                    Refuter::Linear => self.stats.linear += 1,
                    Refuter::Smt => self.stats.smt += 1,
                }
                self.pruned.push(PrunedBranch { cond: f.clone(), by });
            }
            Decision::Feasible => self.stats.feasible += 1,
            Decision::Undecided => self.stats.undecided += 1,
        }
        d
    }

    /// [`Pruner::decide`] without bookkeeping.
    pub fn satisfiable(&self, f: &BExpr) -> bool {
        !matches!(self.classify(f), Decision::Infeasible(_))
    }

    fn classify(&self, f: &BExpr) -> Decision {
        let f = f.simplify();
        match f {
            BExpr::False => return Decision::Infeasible(Refuter::Syntactic),
            BExpr::True => return Decision::Feasible,
            _ => {}
        }
        match linear::check(&f) {
            Feasibility::Unsat => return Decision::Infeasible(Refuter::Linear),
            Feasibility::Sat => return Decision::Feasible,
            Feasibility::Unknown => {}
        }
        let Some(solver) = &self.solver else { return Decision::Undecided };
        let Ok(script) = smt::satisfiability_script(&f) else { return Decision::Undecided };
        match solver.check(&script) {
            Answer::Unsat => Decision::Infeasible(Refuter::Smt),
            Answer::Sat => Decision::Feasible,
            _ => Decision::Undecided,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_bexpr;

    #[test]
    fn tiers_without_solver() {
        let mut p = Pruner::new(None);
        assert_eq!(p.decide(&BExpr::False), Decision::Infeasible(Refuter::Syntactic));
        assert_eq!(p.decide(&parse_bexpr("x < 0 && x > 1").unwrap()), Decision::Infeasible(Refuter::Linear));
        assert_eq!(p.decide(&parse_bexpr("x < 2").unwrap()), Decision::Feasible);
        assert_eq!(p.decide(&parse_bexpr("x*y > 1").unwrap()), Decision::Undecided);
        assert_eq!(p.pruned.len(), 2);
        assert_eq!(p.stats.checks, 4);
    }
}
